#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dcm/simulation.hpp"

namespace dcm {

enum class ExperimentMode { simulate, density_study, limit_compare, msd_validate, sweep };

const char* to_string(ExperimentMode mode);
ExperimentMode parse_mode(const std::string& text);

using Point = std::array<double, 2>;

/// Plain-data view of a configuration file. Every field has an explicit
/// default; parse_config fills them in and serialize writes all of them back.
struct ExperimentSpec {
  ExperimentMode mode = ExperimentMode::simulate;

  // particles
  std::vector<Point> positions;
  std::vector<double> radii;  // one shared entry or one per particle

  // domain
  DomainKind domain_kind = DomainKind::plane;
  double domain_L = 0.0;
  double domain_H = 0.0;

  double epsilon = 0.0;
  double delta_a = 0.0;
  double T = 0.0;

  // load
  double nu = 1.0;
  std::vector<Point> load_centers;  // empty: origin

  // rates
  std::vector<double> beta{1.0};      // one shared entry or one per particle
  std::vector<double> zeta{1.0};      // constants (shared or per particle), or table values
  std::vector<double> zeta_ages;      // nonempty: shared tabulated off-rate

  // past
  PastKind past_kind = PastKind::constant;
  std::vector<Point> past_velocity;

  // noise
  double sigma = 0.0;
  std::uint64_t seed = 0;

  // solver
  SolverKind solver_kind = SolverKind::uzawa;
  StepPolicy eta_policy = StepPolicy::automatic;
  double eta = 0.0;
  LoadTreatment load_treatment = LoadTreatment::linearized;
  std::size_t max_iter = 100000;
  FailurePolicy on_failure = FailurePolicy::abort;

  bool contacts = true;
  std::optional<double> prune_cutoff;

  // output
  std::string output_dir = "out";
  std::size_t stride = 1;

  // study
  std::vector<double> delta_a_list;
  std::vector<double> epsilon_list;
  std::size_t replicas = 0;
  std::vector<double> sample_times;
  std::size_t threads = 0;  // 0: hardware concurrency

  friend bool operator==(const ExperimentSpec&, const ExperimentSpec&) = default;
};

/// Reads and validates a JSON configuration. Throws IoError when the file
/// cannot be read and ValidationError (naming the key or the line) otherwise.
ExperimentSpec parse_config(const std::filesystem::path& path);
ExperimentSpec parse_config_text(const std::string& text);

/// JSON text holding every field of the spec.
std::string serialize(const ExperimentSpec& spec);

/// Simulation settings for the spec, validated.
SimConfig to_sim_config(const ExperimentSpec& spec);

/// Checks the spec, including the study lists required by its mode.
void validate(const ExperimentSpec& spec);

}  // namespace dcm
