#include "dcm/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dcm/errors.hpp"

namespace dcm {

ConstraintEval::ConstraintEval(Eigen::VectorXd reference, DomainSpec domain, std::vector<PairConstraint> pairs,
                               std::size_t n_particles)
    : ref_(std::move(reference)), domain_(domain), pairs_(std::move(pairs)), n_(n_particles) {
  if (static_cast<std::size_t>(ref_.size()) != 2 * n_) throw ValidationError("reference has the wrong dimension");
  for (const auto& p : pairs_)
    if (p.i >= p.j || p.j >= n_) throw ValidationError("constraint pair indices invalid");
}

void ConstraintEval::check_dimension(const Eigen::VectorXd& q) const {
  if (static_cast<std::size_t>(q.size()) != 2 * n_)
    throw ValidationError("dimension mismatch: expected " + std::to_string(2 * n_) + " coordinates, got " +
                          std::to_string(q.size()));
}

double ConstraintEval::value(std::size_t k, const Eigen::VectorXd& q) const {
  const PairConstraint& p = pairs_[k];
  const auto i = static_cast<Eigen::Index>(2 * p.i), j = static_cast<Eigen::Index>(2 * p.j);
  const Vec2 dj = q.segment<2>(j) - ref_.segment<2>(j);
  const Vec2 di = q.segment<2>(i) - ref_.segment<2>(i);
  return -p.reference_distance - p.direction.dot(dj - di);
}

Eigen::VectorXd ConstraintEval::evaluate(const Eigen::VectorXd& q) const {
  check_dimension(q);
  Eigen::VectorXd phi(static_cast<Eigen::Index>(pairs_.size()));
  for (std::size_t k = 0; k < pairs_.size(); ++k) phi[static_cast<Eigen::Index>(k)] = value(k, q);
  return phi;
}

Eigen::VectorXd ConstraintEval::apply_transpose(const Eigen::VectorXd& weights) const {
  if (static_cast<std::size_t>(weights.size()) != pairs_.size())
    throw ValidationError("multiplier vector has the wrong length");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(2 * static_cast<Eigen::Index>(n_));
  for (std::size_t k = 0; k < pairs_.size(); ++k) {
    const double w = weights[static_cast<Eigen::Index>(k)];
    if (w == 0.0) continue;
    const PairConstraint& p = pairs_[k];
    // grad(phi) = -G: +e at slot i, -e at slot j.
    out.segment<2>(2 * static_cast<Eigen::Index>(p.i)) += w * p.direction;
    out.segment<2>(2 * static_cast<Eigen::Index>(p.j)) -= w * p.direction;
  }
  return out;
}

Eigen::VectorXd ConstraintEval::gradient(std::size_t k) const {
  return -pairs_.at(k).gradient().embedded(n_);
}

std::size_t ConstraintEval::find(std::size_t i, std::size_t j) const {
  auto it = std::lower_bound(pairs_.begin(), pairs_.end(), std::make_pair(i, j), [](const PairConstraint& p, auto key) {
    return std::make_pair(p.i, p.j) < key;
  });
  if (it != pairs_.end() && it->i == i && it->j == j) return static_cast<std::size_t>(it - pairs_.begin());
  return pairs_.size();
}

ConstraintEval linearize(const Configuration& reference, const DomainSpec& dom, const LinearizeOptions& opts) {
  dom.validate();
  if (opts.tolerance < 0.0) throw ValidationError("linearize: tolerance must be nonnegative");
  const PairList pairs =
      opts.prune_cutoff ? candidate_pairs(reference, dom, *opts.prune_cutoff) : all_pairs(reference.size());
  std::vector<PairConstraint> out;
  out.reserve(pairs.size());
  for (const auto& [i, j] : pairs) {
    double d = 0.0;
    Vec2 e;
    if (dom.is_torus()) {
      const PeriodicDistance pd = periodic_signed_distance(reference, i, j, dom);
      const double n = pd.separation.norm();
      if (n == 0.0) throw SingularGradientError(i, j);
      d = pd.distance;
      e = pd.separation / n;
    } else {
      d = signed_distance(reference, i, j);
      e = distance_gradient(reference, i, j).direction;
    }
    if (d < 0.0) {
      if (opts.mode == ReferenceMode::strict || d < -opts.tolerance)
        throw InfeasibleConfigurationError(i, j, d, "linearize: infeasible reference");
      d = 0.0;
    }
    out.push_back({i, j, d, e});
  }
  return ConstraintEval(reference.coordinates(), dom, std::move(out), reference.size());
}

Eigen::VectorXd evaluate(const ConstraintEval& ce, const Eigen::VectorXd& q) { return ce.evaluate(q); }

bool ActiveSet::contains(std::size_t i, std::size_t j) const {
  return std::binary_search(pairs.begin(), pairs.end(), std::make_pair(i, j));
}

ActiveSet active_set(const ConstraintEval& ce, const Eigen::VectorXd& q, double tol) {
  if (tol < 0.0) throw ValidationError("active_set: tolerance must be nonnegative");
  const Eigen::VectorXd phi = ce.evaluate(q);
  ActiveSet s;
  for (std::size_t k = 0; k < ce.size(); ++k)
    if (std::abs(phi[static_cast<Eigen::Index>(k)]) <= tol) s.pairs.emplace_back(ce.pairs()[k].i, ce.pairs()[k].j);
  return s;
}

PenaltyValue penalty_value(const ConstraintEval& ce, const Eigen::VectorXd& q) {
  const Eigen::VectorXd phi = ce.evaluate(q);
  const Eigen::VectorXd plus = phi.cwiseMax(0.0);
  return {0.5 * plus.squaredNorm(), ce.apply_transpose(plus)};
}

double multiplier_bound_base(std::size_t n_v, std::size_t N) {
  if (n_v < 1) throw ValidationError("multiplier_bound: n_v must be at least 1");
  if (N < 3) throw ValidationError("multiplier_bound: N must be at least 3");
  const double s = std::min(sin_pi_fraction(1.0, static_cast<double>(n_v) + 1.0),
                            sin_pi_fraction(1.0, static_cast<double>(N)));
  return 2.0 * std::sqrt(static_cast<double>(n_v)) / s;
}

double multiplier_bound(double U_norm, std::size_t n_v, std::size_t N, std::size_t n_particles) {
  if (U_norm < 0.0) throw ValidationError("multiplier_bound: force magnitude must be nonnegative");
  return U_norm * std::pow(multiplier_bound_base(n_v, N), static_cast<double>(n_particles));
}

}  // namespace dcm
