#include "dcm/broad_phase.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "dcm/errors.hpp"

namespace dcm {

PairList all_pairs(std::size_t n_particles) {
  PairList out;
  out.reserve(n_particles * (n_particles > 0 ? n_particles - 1 : 0) / 2);
  for (std::size_t i = 0; i < n_particles; ++i)
    for (std::size_t j = i + 1; j < n_particles; ++j) out.emplace_back(i, j);
  return out;
}

namespace {

PairList filter(const Configuration& q, const DomainSpec& dom, double cutoff, const PairList& pairs) {
  PairList out;
  for (const auto& [i, j] : pairs)
    if (pair_distance(q, i, j, dom) < cutoff) out.emplace_back(i, j);
  return out;
}

}  // namespace

PairList candidate_pairs(const Configuration& q, const DomainSpec& dom, double cutoff) {
  if (!std::isfinite(cutoff)) throw ValidationError("prune cutoff must be finite");
  const std::size_t n = q.size();
  if (n < 2) return {};
  // Centers closer than this may be within the cutoff.
  const double reach = 2.0 * q.max_radius() + std::max(cutoff, 0.0);
  if (!(reach > 0.0)) return {};

  using Cell = std::pair<long long, long long>;
  std::map<Cell, std::vector<std::size_t>> grid;
  long long cells_x = 0, cells_y = 0;
  double size_x = reach, size_y = reach;
  if (dom.is_torus()) {
    cells_x = static_cast<long long>(std::floor(dom.L / reach));
    cells_y = static_cast<long long>(std::floor(dom.H / reach));
    if (cells_x < 3 || cells_y < 3) return filter(q, dom, cutoff, all_pairs(n));
    size_x = dom.L / static_cast<double>(cells_x);
    size_y = dom.H / static_cast<double>(cells_y);
  }

  std::vector<Cell> cell_of(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vec2 p = q.position(i);
    if (dom.is_torus()) p = wrap(p, dom).point;
    Cell c{static_cast<long long>(std::floor(p.x() / size_x)), static_cast<long long>(std::floor(p.y() / size_y))};
    if (dom.is_torus()) {
      c.first = std::clamp(c.first, 0LL, cells_x - 1);
      c.second = std::clamp(c.second, 0LL, cells_y - 1);
    }
    cell_of[i] = c;
    grid[c].push_back(i);
  }

  PairList out;
  for (std::size_t i = 0; i < n; ++i) {
    for (long long dx = -1; dx <= 1; ++dx) {
      for (long long dy = -1; dy <= 1; ++dy) {
        Cell c{cell_of[i].first + dx, cell_of[i].second + dy};
        if (dom.is_torus()) {
          c.first = ((c.first % cells_x) + cells_x) % cells_x;
          c.second = ((c.second % cells_y) + cells_y) % cells_y;
        }
        auto it = grid.find(c);
        if (it == grid.end()) continue;
        for (std::size_t j : it->second)
          if (j > i && pair_distance(q, i, j, dom) < cutoff) out.emplace_back(i, j);
      }
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace dcm
