#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dcm/linkage.hpp"

namespace dcm {

/// Prescribed positions for t <= 0, with per-particle Lipschitz constants.
struct PastProvider {
  std::function<Eigen::VectorXd(double)> trajectory;
  std::vector<double> lipschitz;

  static PastProvider constant(const Eigen::VectorXd& q);
  /// q(t) = q0 + t v, with v given per coordinate.
  static PastProvider drift(const Eigen::VectorXd& q0, const Eigen::VectorXd& velocity);
};

/// Mean of the past trajectory over [t0, t1], 4-point Gauss-Legendre.
Eigen::VectorXd past_average(const PastProvider& past, double t0, double t1);

/// Ring buffer Z^{n-k}, k = 0..depth, seeded with past averages.
class History {
 public:
  History() = default;
  History(const PastProvider& past, double dt, std::size_t depth);

  std::size_t depth() const { return depth_; }
  double dt() const { return dt_; }
  long long latest_index() const { return n_; }
  std::size_t n_particles() const { return static_cast<std::size_t>(ring_.front().size() / 2); }
  /// Z^{n-k}; k must not exceed depth().
  const Eigen::VectorXd& back(std::size_t k) const;
  void push(Eigen::VectorXd z);
  /// Cached Z_p^m for m = -depth..0 (index 0 is m = -depth).
  const std::vector<Eigen::VectorXd>& past_averages() const { return past_; }
  const std::vector<double>& past_lipschitz() const { return lipschitz_; }

 private:
  std::vector<Eigen::VectorXd> ring_;
  std::vector<Eigen::VectorXd> past_;
  std::vector<double> lipschitz_;
  std::size_t head_ = 0;
  std::size_t depth_ = 0;
  double dt_ = 0.0;
  long long n_ = 0;
};

struct ExternalLoad {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
  bool strictly_convex = true;
  std::optional<double> modulus;
  /// Set when the Hessian is curvature * identity everywhere.
  std::optional<double> curvature;
  std::string name = "custom";
};

/// F(q) = nu/2 |q|^2.
ExternalLoad quadratic_load(double nu);
/// F(q) = nu/2 |q - c|^2.
ExternalLoad quadratic_load(double nu, Eigen::VectorXd centers);
ExternalLoad zero_load();
/// Wraps user callables and rejects them when the gradient disagrees with
/// central differences of the value at any probe point.
ExternalLoad custom_load(std::function<double(const Eigen::VectorXd&)> value,
                         std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient,
                         const std::vector<Eigen::VectorXd>& probes, double tol = 1e-6);
/// Relative central-difference error of the load gradient at q.
double load_gradient_error(const ExternalLoad& load, const Eigen::VectorXd& q);

/// Density grid, history and epsilon for the current step; holds the delay
/// targets T_i = delta_a sum_{l>=1} Z_i^{n-l} R_{l,i}.
class EnergyContext {
 public:
  EnergyContext(std::shared_ptr<const DensityGrid> grid, History history, double epsilon);

  const DensityGrid& grid() const { return *grid_; }
  std::shared_ptr<const DensityGrid> grid_ptr() const { return grid_; }
  const History& history() const { return history_; }
  double epsilon() const { return epsilon_; }
  double dt() const { return history_.dt(); }
  std::size_t n_particles() const { return grid_->size(); }
  /// Delay targets, one entry per coordinate.
  const Eigen::VectorXd& targets() const { return targets_; }
  /// theta_i repeated per coordinate.
  const Eigen::VectorXd& theta() const { return theta_; }

  void advance(Eigen::VectorXd z);

 private:
  void recompute_targets();
  std::shared_ptr<const DensityGrid> grid_;
  History history_;
  double epsilon_ = 0.0;
  Eigen::VectorXd targets_;
  Eigen::VectorXd theta_;
};

/// Delay part of the energy at q.
double delay_energy(const EnergyContext& ctx, const Eigen::VectorXd& q);
double energy_value(const EnergyContext& ctx, const ExternalLoad& load, const Eigen::VectorXd& q);
Eigen::VectorXd energy_gradient(const EnergyContext& ctx, const ExternalLoad& load, const Eigen::VectorXd& q);
/// (theta q - T) / eps.
Eigen::VectorXd delay_operator(const EnergyContext& ctx, const Eigen::VectorXd& q);
/// Dissipation of the step about to be taken, from the current history.
double dissipation(const EnergyContext& ctx);
/// Delay energy of the latest configuration against its own history.
double delay_quadratic(const EnergyContext& ctx);

}  // namespace dcm
