#include "dcm/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "dcm/errors.hpp"

namespace dcm {

namespace {

void check_pair(const Configuration& q, std::size_t i, std::size_t j) {
  if (i >= q.size() || j >= q.size())
    throw ValidationError("pair index out of range (" + std::to_string(i) + ", " + std::to_string(j) +
                          ") for " + std::to_string(q.size()) + " particles");
  if (i >= j) throw ValidationError("pair indices must satisfy i < j");
}

}  // namespace

Configuration::Configuration(Eigen::VectorXd coordinates, std::vector<double> radii) : q_(std::move(coordinates)) {
  if (radii.empty()) throw ValidationError("particles: at least one particle is required");
  if (static_cast<std::size_t>(q_.size()) != 2 * radii.size())
    throw ValidationError("particles: " + std::to_string(q_.size()) + " coordinates for " +
                          std::to_string(radii.size()) + " radii");
  for (std::size_t i = 0; i < radii.size(); ++i)
    if (!(radii[i] > 0.0) || !std::isfinite(radii[i]))
      throw ValidationError("particles.radii[" + std::to_string(i) + "]: radius must be positive and finite");
  for (Eigen::Index c = 0; c < q_.size(); ++c)
    if (!std::isfinite(q_[c]))
      throw ValidationError("particles.positions[" + std::to_string(c / 2) + "]: non-finite coordinate");
  radii_ = std::make_shared<const std::vector<double>>(std::move(radii));
}

Configuration Configuration::from_points(const std::vector<Vec2>& points, std::vector<double> radii) {
  Eigen::VectorXd q(2 * static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) q.segment<2>(2 * static_cast<Eigen::Index>(i)) = points[i];
  return Configuration(std::move(q), std::move(radii));
}

std::span<const double> Configuration::radii() const {
  if (!radii_) return {};
  return {radii_->data(), radii_->size()};
}

double Configuration::max_radius() const {
  if (!radii_ || radii_->empty()) return 0.0;
  return *std::max_element(radii_->begin(), radii_->end());
}

Configuration Configuration::with_coordinates(Eigen::VectorXd coordinates) const {
  if (coordinates.size() != q_.size()) throw ValidationError("coordinate vector has the wrong dimension");
  for (Eigen::Index c = 0; c < coordinates.size(); ++c)
    if (!std::isfinite(coordinates[c])) throw ValidationError("non-finite coordinate");
  Configuration out;
  out.q_ = std::move(coordinates);
  out.radii_ = radii_;
  return out;
}

bool operator==(const Configuration& a, const Configuration& b) {
  if (a.q_.size() != b.q_.size()) return false;
  if (a.q_ != b.q_) return false;
  auto ra = a.radii(), rb = b.radii();
  return std::equal(ra.begin(), ra.end(), rb.begin(), rb.end());
}

DomainSpec DomainSpec::make_torus(double L, double H) {
  DomainSpec d{DomainKind::torus, L, H};
  d.validate();
  return d;
}

void DomainSpec::validate() const {
  if (kind == DomainKind::torus) {
    if (!(L > 0.0) || !std::isfinite(L)) throw ValidationError("domain.L: torus period must be positive");
    if (!(H > 0.0) || !std::isfinite(H)) throw ValidationError("domain.H: torus period must be positive");
  }
}

Eigen::VectorXd PairGradient::embedded(std::size_t n_particles) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(2 * static_cast<Eigen::Index>(n_particles));
  g.segment<2>(2 * static_cast<Eigen::Index>(i)) = -direction;
  g.segment<2>(2 * static_cast<Eigen::Index>(j)) = direction;
  return g;
}

double signed_distance(const Configuration& q, std::size_t i, std::size_t j) {
  check_pair(q, i, j);
  return (q.position(j) - q.position(i)).norm() - (q.radius(i) + q.radius(j));
}

PairGradient distance_gradient(const Configuration& q, std::size_t i, std::size_t j) {
  check_pair(q, i, j);
  const Vec2 d = q.position(j) - q.position(i);
  const double n = d.norm();
  if (n == 0.0) throw SingularGradientError(i, j);
  return {i, j, d / n};
}

Wrapped wrap(const Vec2& x, const DomainSpec& torus) {
  if (!torus.is_torus()) throw ValidationError("wrap requires a torus domain");
  Wrapped w;
  const double fx = std::floor(x.x() / torus.L);
  const double fy = std::floor(x.y() / torus.H);
  w.point = Vec2(x.x() - fx * torus.L, x.y() - fy * torus.H);
  // Rounding can land exactly on the period; fold it back.
  if (w.point.x() >= torus.L) {
    w.point.x() -= torus.L;
    w.cell_x = static_cast<long long>(fx) + 1;
  } else {
    w.cell_x = static_cast<long long>(fx);
  }
  if (w.point.y() >= torus.H) {
    w.point.y() -= torus.H;
    w.cell_y = static_cast<long long>(fy) + 1;
  } else {
    w.cell_y = static_cast<long long>(fy);
  }
  if (w.point.x() < 0.0) w.point.x() = 0.0;
  if (w.point.y() < 0.0) w.point.y() = 0.0;
  return w;
}

PeriodicDistance periodic_signed_distance(const Configuration& q, std::size_t i, std::size_t j,
                                          const DomainSpec& torus) {
  check_pair(q, i, j);
  if (!torus.is_torus()) throw ValidationError("periodic distance requires a torus domain");
  const Vec2 x = q.position(j) - q.position(i);
  const double nx = std::floor(x.x() / torus.L);
  const double ny = std::floor(x.y() / torus.H);
  PeriodicDistance best;
  double best_norm = std::numeric_limits<double>::infinity();
  for (int h = 0; h <= 1; ++h) {
    for (int k = 0; k <= 1; ++k) {
      const Vec2 s(x.x() - (nx + h) * torus.L, x.y() - (ny + k) * torus.H);
      const double n = s.norm();
      if (n < best_norm) {
        best_norm = n;
        best.h = h;
        best.k = k;
        best.separation = s;
      }
    }
  }
  const double band = 1e-12 * std::max(torus.L, torus.H);
  int ties = 0;
  for (int h = 0; h <= 1; ++h)
    for (int k = 0; k <= 1; ++k) {
      const Vec2 s(x.x() - (nx + h) * torus.L, x.y() - (ny + k) * torus.H);
      if (s.norm() - best_norm <= band) ++ties;
    }
  best.degenerate = ties > 1;
  best.distance = best_norm - (q.radius(i) + q.radius(j));
  return best;
}

PairGradient periodic_gradient(const Configuration& q, std::size_t i, std::size_t j, const DomainSpec& torus) {
  const PeriodicDistance pd = periodic_signed_distance(q, i, j, torus);
  const double n = pd.separation.norm();
  if (n == 0.0) throw SingularGradientError(i, j);
  return {i, j, pd.separation / n};
}

double pair_distance(const Configuration& q, std::size_t i, std::size_t j, const DomainSpec& dom) {
  return dom.is_torus() ? periodic_signed_distance(q, i, j, dom).distance : signed_distance(q, i, j);
}

PairGradient pair_gradient(const Configuration& q, std::size_t i, std::size_t j, const DomainSpec& dom) {
  return dom.is_torus() ? periodic_gradient(q, i, j, dom) : distance_gradient(q, i, j);
}

bool is_feasible(const Configuration& q, const DomainSpec& dom, double tol) {
  if (tol < 0.0) throw ValidationError("feasibility tolerance must be nonnegative");
  for (std::size_t i = 0; i < q.size(); ++i)
    for (std::size_t j = i + 1; j < q.size(); ++j)
      if (pair_distance(q, i, j, dom) < -tol) return false;
  return true;
}

ClosestPair min_signed_distance(const Configuration& q, const DomainSpec& dom) {
  ClosestPair out{std::numeric_limits<double>::infinity(), 0, 0};
  for (std::size_t i = 0; i < q.size(); ++i)
    for (std::size_t j = i + 1; j < q.size(); ++j) {
      const double d = pair_distance(q, i, j, dom);
      if (d < out.distance) out = {d, i, j};
    }
  return out;
}

double sin_pi_fraction(double num, double den) {
  const double r = num / den;
  if (r == std::floor(r)) return 0.0;
  return std::sin(std::numbers::pi * r);
}

double prox_regularity_eta(std::size_t n_particles, std::size_t n_neighbors, std::span<const double> radii) {
  if (n_particles < 1) throw ValidationError("prox_regularity_eta: need at least one particle");
  if (n_neighbors < 1) throw ValidationError("prox_regularity_eta: neighbor count must be at least 1");
  if (radii.size() != n_particles) throw ValidationError("prox_regularity_eta: one radius per particle required");
  double min_sum = std::numeric_limits<double>::infinity();
  if (n_particles == 1) {
    min_sum = 2.0 * radii[0];
  } else {
    for (std::size_t i = 0; i < n_particles; ++i)
      for (std::size_t j = i + 1; j < n_particles; ++j) min_sum = std::min(min_sum, radii[i] + radii[j]);
  }
  const double nn = static_cast<double>(n_neighbors);
  const double np = static_cast<double>(n_particles);
  const double s = std::min(sin_pi_fraction(1.0, nn + 1.0), sin_pi_fraction(2.0, np));
  const double base = s / (2.0 * std::sqrt(nn));
  return std::pow(base, np) * min_sum / (np * nn);
}

}  // namespace dcm
