#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "dcm/constraints.hpp"
#include "dcm/energy.hpp"
#include "dcm/geometry.hpp"
#include "dcm/linkage.hpp"
#include "dcm/random.hpp"
#include "dcm/solvers.hpp"

namespace dcm {

enum class SolverKind { uzawa, penalty };
enum class FailurePolicy { abort, record_and_continue };
enum class PastKind { constant, drift };

struct PastSpec {
  PastKind kind = PastKind::constant;
  /// Drift velocities: one shared entry or one per particle.
  std::vector<Vec2> velocities;

  Eigen::VectorXd per_coordinate(std::size_t n_particles) const;
};

struct LoadSpec {
  double nu = 1.0;
  /// Per-coordinate centers of the quadratic well (origin when unset).
  std::optional<Eigen::VectorXd> centers;
  /// Replaces the quadratic load when set.
  std::optional<ExternalLoad> custom;
};

struct NoiseSpec {
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

struct SolverSpec {
  SolverKind kind = SolverKind::uzawa;
  LoadTreatment treatment = LoadTreatment::linearized;
  UzawaSettings uzawa = default_uzawa();
  PenaltySettings penalty;
  FailurePolicy on_failure = FailurePolicy::abort;

  static UzawaSettings default_uzawa() {
    UzawaSettings s;
    s.polish_interval = 25;
    return s;
  }
};

struct SimConfig {
  Configuration initial;
  DomainSpec domain;
  double epsilon = 0.1;
  double delta_a = 0.1;
  double horizon = 1.0;
  LoadSpec load;
  RateModel rates;  // one entry per particle
  PastSpec past;
  NoiseSpec noise;
  SolverSpec solver;
  bool contacts = true;
  std::optional<double> prune_cutoff;
  double tail_tol = 1e-12;
  double activation_tol = 1e-12;
  double feasibility_tol = 1e-9;
  std::size_t stride = 1;
  /// MSD reference, per coordinate (origin when unset).
  std::optional<Eigen::VectorXd> msd_reference;
  /// Neighbor count used by the multiplier-bound diagnostic.
  std::size_t neighbor_bound = 6;

  double dt() const { return epsilon * delta_a; }
  std::size_t n_steps() const;
  void validate() const;
};

ExternalLoad build_load(const SimConfig& cfg);

struct DiagnosticsRecord {
  std::size_t step = 0;
  double t = 0.0;
  double delay_quadratic = 0.0;
  double cumulative_dissipation = 0.0;
  double load = 0.0;
  double ledger_slack = 0.0;
  double h1_sum = 0.0;  // sum |dZ|^2 / dt so far
  double msd = 0.0;
  double activation = 0.0;
  KktResiduals kkt;
  double min_distance = 0.0;
  std::size_t iterations = 0;
  bool converged = true;
};

struct Frame {
  std::size_t step = 0;
  double t = 0.0;
  Eigen::VectorXd q;
};

struct MultiplierEntry {
  std::size_t i = 0;
  std::size_t j = 0;
  double lambda = 0.0;
};

struct Trajectory {
  double dt = 0.0;
  std::size_t n_particles = 0;
  std::vector<double> radii;
  double ledger_rhs = 0.0;
  bool deterministic = true;
  std::vector<Frame> frames;                               // stored every `stride` steps, plus the last
  std::vector<DiagnosticsRecord> diagnostics;              // every step, index 0 is t = 0
  std::vector<std::vector<MultiplierEntry>> multipliers;   // nonzero multipliers per diagnostics record
  std::size_t failed_steps = 0;
  std::size_t multiplier_bound_warnings = 0;
};

class Simulation {
 public:
  explicit Simulation(SimConfig cfg);

  std::size_t total_steps() const { return total_steps_; }
  std::size_t steps_taken() const { return steps_; }
  bool finished() const { return steps_ >= total_steps_; }
  const DiagnosticsRecord& step();
  void run_to_end();

  const SimConfig& config() const { return cfg_; }
  const EnergyContext& context() const { return *ctx_; }
  const DensityGrid& grid() const { return *grid_; }
  const Eigen::VectorXd& current() const { return ctx_->history().back(0); }
  const Trajectory& trajectory() const { return traj_; }
  Trajectory take_trajectory() { return std::move(traj_); }
  const SolverResult& last_result() const { return last_; }
  const ConstraintEval& last_constraints() const { return last_ce_; }

 private:
  double msd_of(const Eigen::VectorXd& q) const;
  void record(DiagnosticsRecord rec, const ConstraintEval* ce, const Eigen::VectorXd* lambda);

  SimConfig cfg_;
  ExternalLoad load_;
  std::shared_ptr<const DensityGrid> grid_;
  std::unique_ptr<EnergyContext> ctx_;
  std::optional<NormalStream> noise_;
  Trajectory traj_;
  SolverResult last_;
  ConstraintEval last_ce_;
  std::vector<std::pair<std::pair<std::size_t, std::size_t>, double>> warm_;
  Eigen::VectorXd msd_ref_;
  std::size_t total_steps_ = 0;
  std::size_t steps_ = 0;
  double cum_dissipation_ = 0.0;
  double h1_ = 0.0;
};

Trajectory run(const SimConfig& cfg);

enum class InterpolationMode { constant, linear };

/// Piecewise constant or linear interpolant of the stored frames.
Eigen::VectorXd interpolate(const Trajectory& traj, double t, InterpolationMode mode);

/// MSD per stored frame.
std::vector<double> msd(const Trajectory& traj, const Eigen::VectorXd& reference);
double msd(const Eigen::VectorXd& q, const Eigen::VectorXd& reference);

/// Fraction of the N(N-1)/2 pairs with |lambda| > tol, per multiplier vector.
std::vector<double> activation(const std::vector<Eigen::VectorXd>& series, std::size_t n_particles,
                               double tol = 1e-12);
double activation(const std::vector<MultiplierEntry>& entries, std::size_t n_particles, double tol = 1e-12);

/// max_n (lhs - rhs) of the energy ledger.
double ledger_check(const Trajectory& traj);

/// sum over consecutive stored frames of |dZ|^2 / dt.
double compactness_proxy(const Trajectory& traj);

}  // namespace dcm
