#pragma once

#include <Eigen/Core>
#include <vector>

#include "dcm/linkage.hpp"
#include "dcm/simulation.hpp"

namespace dcm {

/// E|z_t|^2 for dz = -z dt + noise with stationary value 1/2.
double ou_msd_exact(double t, double z0_sq);

/// E|z_t|^2 for mu1 dz = -nu z dt + sigma dW with W a standard 2-D Brownian
/// motion: relaxation rate k = nu/mu1, stationary value sigma^2/(nu mu1).
double ou_msd_scaled(double t, double z0_sq, double nu, double sigma, double friction);

/// z0 exp(-rate t).
Eigen::VectorXd no_contact_decay(double t, const Eigen::VectorXd& z0, double rate);

/// Friction coefficients mu_{1,i} of the limit model.
struct FrictionWeights {
  std::vector<double> mu1;

  /// First moments of the closed-form densities.
  static FrictionWeights from_rates(const RateModel& rates);
  /// Discrete first moments of a grid.
  static FrictionWeights from_grid(const DensityGrid& grid);
};

/// Implicit minimizing movement for mu1 dz/dt + grad F in -N(K, z):
/// Z^n = argmin over K(Z^{n-1}) of sum mu1_i/(2 dt) |q_i - Z_i^{n-1}|^2 + F(q).
/// Uses the particles, domain, load, contact and solver settings of cfg;
/// epsilon, delta_a, rates and noise are ignored. The diagnostics ledger holds
/// F(Z^n) + sum of movement terms against F(Z^0).
Trajectory friction_limit_run(const SimConfig& cfg, const FrictionWeights& weights, double dt);

/// sup over the frame times of a (inside the common range) of |a(t) - b(t)|,
/// both piecewise linear.
double sup_distance(const Trajectory& a, const Trajectory& b);

}  // namespace dcm
