#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "dcm/config.hpp"
#include "dcm/linkage.hpp"
#include "dcm/simulation.hpp"

namespace dcm {

/// Headline numbers of one run.
struct RunSummary {
  std::size_t steps = 0;
  double dt = 0.0;
  double final_msd = 0.0;
  double max_ledger_violation = 0.0;  // meaningful for deterministic runs only
  double ledger_rhs = 0.0;
  double compactness_proxy = 0.0;     // sum over all steps of |dZ|^2 / dt
  double min_distance = 0.0;          // over all steps
  double final_activation = 0.0;
  std::size_t failed_steps = 0;
  std::size_t multiplier_bound_warnings = 0;
  bool deterministic = true;
  double runtime_seconds = 0.0;
};

RunSummary summarize(const Trajectory& traj, double runtime_seconds);

/// Least-squares slope of log(error) against log(h).
double fitted_order(const std::vector<double>& h, const std::vector<double>& error);

struct DensityStudyRow {
  double delta_a = 0.0;
  std::size_t particle = 0;
  std::size_t L_max = 0;
  double l1_error = 0.0;
  double mu0 = 0.0;
  double mu1 = 0.0;
  double theta = 0.0;
};

struct DensityStudy {
  std::vector<DensityStudyRow> rows;
  std::vector<double> order;  // fitted per particle
  std::vector<DensityGrid> grids;
};

DensityStudy density_study(const RateModel& rates, const std::vector<double>& delta_a_list, double tail_tol = 1e-12);

struct LimitComparePoint {
  double epsilon = 0.0;
  double dt = 0.0;
  double sup_distance = 0.0;
  double terminal_gap = 0.0;  // |delayed(T) - limit(T)|
  Trajectory delayed;
  Trajectory limit;
};

/// Delayed run at the given epsilon against the friction-limit run on the same
/// time grid, with weights from the closed-form first moments.
LimitComparePoint limit_compare_point(const SimConfig& base, double epsilon);

struct MsdSample {
  double t = 0.0;
  double mean = 0.0;
  double std_error = 0.0;
  double exact = 0.0;
  double z_score = 0.0;
};

struct MsdEnsemble {
  std::size_t replicas = 0;
  std::vector<double> t;          // every step
  std::vector<double> mean;
  std::vector<double> std_error;
  std::vector<double> exact;
  std::vector<MsdSample> samples;  // at the requested times
};

/// Monte Carlo MSD over independent noisy replicas. Replica r uses noise seed
/// stream_seed(base.noise.seed, r); partial sums are combined in a fixed order
/// so the result does not depend on the thread count.
MsdEnsemble msd_ensemble(const SimConfig& base, std::size_t replicas, const std::vector<double>& sample_times,
                         std::size_t threads = 0);

/// Runs task(k) for k in [0, count) on a pool of workers. The first exception
/// thrown (lowest k) is rethrown after all workers stop.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& task);

struct ExperimentOutcome {
  std::filesystem::path dir;
  std::string summary_json;
};

/// Runs the configured mode and writes its files under output_dir.
ExperimentOutcome run_experiment(const ExperimentSpec& spec);

}  // namespace dcm
