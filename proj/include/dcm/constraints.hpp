#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "dcm/broad_phase.hpp"
#include "dcm/geometry.hpp"

namespace dcm {

/// phi(q) = -D(ref) - G(ref) . (q - ref) for one pair.
struct PairConstraint {
  std::size_t i = 0;
  std::size_t j = 0;
  double reference_distance = 0.0;  // D_ij(ref), clamped at 0 in tolerant mode
  Vec2 direction = Vec2::Zero();    // unit e_ij at the reference

  PairGradient gradient() const { return {i, j, direction}; }
};

enum class ReferenceMode { strict, tolerant };

struct LinearizeOptions {
  ReferenceMode mode = ReferenceMode::tolerant;
  double tolerance = 1e-9;
  /// Keep only pairs with signed distance below this value (all pairs when unset).
  std::optional<double> prune_cutoff;
};

/// Affine constraints of the interior convex approximation K(ref).
class ConstraintEval {
 public:
  ConstraintEval() = default;
  ConstraintEval(Eigen::VectorXd reference, DomainSpec domain, std::vector<PairConstraint> pairs,
                 std::size_t n_particles);

  std::size_t size() const { return pairs_.size(); }
  std::size_t n_particles() const { return n_; }
  const std::vector<PairConstraint>& pairs() const { return pairs_; }
  const Eigen::VectorXd& reference() const { return ref_; }
  const DomainSpec& domain() const { return domain_; }

  double value(std::size_t k, const Eigen::VectorXd& q) const;
  Eigen::VectorXd evaluate(const Eigen::VectorXd& q) const;
  /// Sum_k w_k grad(phi_k), a vector in R^{2N}.
  Eigen::VectorXd apply_transpose(const Eigen::VectorXd& weights) const;
  /// Row k of the constraint Jacobian as a dense vector.
  Eigen::VectorXd gradient(std::size_t k) const;
  /// Index of pair (i, j), or size() when absent.
  std::size_t find(std::size_t i, std::size_t j) const;

 private:
  void check_dimension(const Eigen::VectorXd& q) const;
  Eigen::VectorXd ref_;
  DomainSpec domain_;
  std::vector<PairConstraint> pairs_;
  std::size_t n_ = 0;
};

ConstraintEval linearize(const Configuration& reference, const DomainSpec& dom, const LinearizeOptions& opts = {});

Eigen::VectorXd evaluate(const ConstraintEval& ce, const Eigen::VectorXd& q);

struct ActiveSet {
  PairList pairs;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
  bool contains(std::size_t i, std::size_t j) const;
};

ActiveSet active_set(const ConstraintEval& ce, const Eigen::VectorXd& q, double tol = 1e-9);

struct PenaltyValue {
  double value = 0.0;
  Eigen::VectorXd gradient;
};

/// 1/2 sum max(phi, 0)^2 and its gradient.
PenaltyValue penalty_value(const ConstraintEval& ce, const Eigen::VectorXd& q);

/// Geometric factor b of the multiplier bound.
double multiplier_bound_base(std::size_t n_v, std::size_t N);
/// |U| b^{N_p}.
double multiplier_bound(double U_norm, std::size_t n_v, std::size_t N, std::size_t n_particles);

}  // namespace dcm
