#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "dcm/constraints.hpp"
#include "dcm/energy.hpp"

namespace dcm {

enum class LoadTreatment {
  linearized,  // F(p) + F'(p).(q - p), p = previous configuration
  exact,       // F itself
};

/// Per-step objective
///   Phi(q) = sum_c s_c/2 (q_c - m_c)^2 + Fhat(q) + f.q
/// with stiffness s, anchor m, a (possibly linearized) load Fhat and a
/// constant forcing f.
class StepProblem {
 public:
  StepProblem(Eigen::VectorXd stiffness, Eigen::VectorXd anchor, ExternalLoad load, LoadTreatment treatment,
              Eigen::VectorXd expansion_point, Eigen::VectorXd forcing = {});

  std::size_t dimension() const { return static_cast<std::size_t>(stiffness_.size()); }
  std::size_t n_particles() const { return dimension() / 2; }
  const Eigen::VectorXd& stiffness() const { return stiffness_; }
  const Eigen::VectorXd& anchor() const { return anchor_; }
  const Eigen::VectorXd& expansion_point() const { return point_; }
  const Eigen::VectorXd& forcing() const { return forcing_; }
  const ExternalLoad& load() const { return load_; }
  LoadTreatment treatment() const { return treatment_; }

  double objective(const Eigen::VectorXd& q) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& q) const;
  double model_load(const Eigen::VectorXd& q) const;
  Eigen::VectorXd model_load_gradient(const Eigen::VectorXd& q) const;
  /// Hessian of Phi (dense); finite differences for non-quadratic exact loads.
  Eigen::MatrixXd hessian(const Eigen::VectorXd& q) const;

  /// True when grad Phi(q) = h . q - c with constant diagonal h.
  bool has_closed_form() const { return closed_form_; }
  const Eigen::VectorXd& diagonal() const { return diag_; }
  const Eigen::VectorXd& linear_term() const { return linear_; }
  /// |F'(p)|, used to scale the stationarity tolerance.
  double load_gradient_scale() const { return grad_scale_; }

 private:
  Eigen::VectorXd stiffness_, anchor_, point_, forcing_;
  ExternalLoad load_;
  LoadTreatment treatment_;
  double load_at_point_ = 0.0;
  Eigen::VectorXd grad_at_point_;
  bool closed_form_ = false;
  Eigen::VectorXd diag_, linear_;
  double grad_scale_ = 0.0;
};

/// Step problem of the delayed scheme: stiffness theta/eps, anchor T/theta.
StepProblem make_step_problem(const EnergyContext& ctx, const ExternalLoad& load, LoadTreatment treatment,
                              const Eigen::VectorXd& forcing = {});

struct KktResiduals {
  double stationarity = 0.0;
  double feasibility = 0.0;
  double complementarity = 0.0;
};

struct KktTolerances {
  double stationarity = 1e-8;  // multiplied by 1 + |F'(p)|
  double feasibility = 1e-9;
  double complementarity = 1e-8;
};

bool kkt_satisfied(const KktResiduals& r, const KktTolerances& tol, double grad_scale);

enum class SolverStatus { converged, max_iterations, diverged, line_search_failure, schedule_exhausted };

std::string to_string(SolverStatus s);

struct SolverResult {
  Eigen::VectorXd primal;
  Eigen::VectorXd multipliers;
  std::size_t iterations = 0;
  KktResiduals kkt;
  bool converged = false;
  SolverStatus status = SolverStatus::max_iterations;
};

enum class StepPolicy { fixed, automatic };

struct UzawaSettings {
  double step = 0.0;  // used when policy is fixed
  StepPolicy policy = StepPolicy::automatic;
  double safety = 0.9;
  KktTolerances tol;
  std::size_t max_iter = 100000;
  /// Try an active-set finish every this many iterations (0 disables it).
  std::size_t polish_interval = 0;
  double divergence_factor = 1e6;
  /// Flag divergence when the fixed-point residual fails to shrink over this many iterations.
  std::size_t stall_window = 50;
};

struct PenaltyStage {
  double delta = 0.0;
  double objective = 0.0;  // unpenalized
  double violation = 0.0;  // 1/2 sum max(phi, 0)^2
  std::size_t newton_steps = 0;
};

struct PenaltySettings {
  std::vector<double> schedule = default_schedule();
  double inner_tol = 1e-11;  // gradient norm, multiplied by 1 + |F'(p)|
  std::size_t max_inner = 200;
  double armijo = 1e-4;
  std::size_t max_backtracks = 60;
  /// Shifted-penalty multiplier updates at the last delta.
  std::size_t multiplier_updates = 50;
  KktTolerances tol;

  static std::vector<double> default_schedule();
};

/// Closed-form minimizer of Phi(q) + lambda . phi(q).
Eigen::VectorXd uzawa_inner_minimize(const StepProblem& problem, const ConstraintEval& ce,
                                     const Eigen::VectorXd& lambda);
/// Same, for the delayed scheme with the load linearized at the previous step.
Eigen::VectorXd uzawa_inner_minimize(const EnergyContext& ctx, const Eigen::VectorXd& load_gradient_at_prev,
                                     const ConstraintEval& ce, const Eigen::VectorXd& lambda);

/// Truncated dual ascent lambda <- max(lambda + eta phi(q(lambda)), 0).
SolverResult uzawa_solve(const StepProblem& problem, const ConstraintEval& ce, const UzawaSettings& settings,
                         const Eigen::VectorXd* warm_start = nullptr);

/// Quadratic penalty with delta continuation, semismooth Newton inner solves.
SolverResult penalty_solve(const StepProblem& problem, const ConstraintEval& ce, const PenaltySettings& settings,
                           const Eigen::VectorXd* initial = nullptr, std::vector<PenaltyStage>* trace = nullptr);

KktResiduals kkt_residual(const StepProblem& problem, const ConstraintEval& ce, const Eigen::VectorXd& primal,
                          const Eigen::VectorXd& lambda);

/// Largest admissible dual step: 2 min(theta) / (eps 2 N_c).
double uzawa_step_bound(const DensityGrid& grid, double epsilon, std::size_t n_constraints);
/// Same bound from a step problem: 2 min(stiffness) / (2 N_c).
double uzawa_step_bound(const StepProblem& problem, std::size_t n_constraints);

/// |P_K(Z - dt grad Phi(Z)) - Z| for a solved step.
double projection_identity_check(const StepProblem& problem, const ConstraintEval& ce, const SolverResult& result,
                                 double dt);

/// Active-set solve of the equality-constrained subproblem seeded from lambda.
/// Returns nullopt when no KKT point is found within a few passes.
std::optional<SolverResult> active_set_finish(const StepProblem& problem, const ConstraintEval& ce,
                                              const Eigen::VectorXd& lambda, const KktTolerances& tol);

}  // namespace dcm
