// Command-line driver: simulate, density-study, limit-compare, msd-validate,
// sweep and plot.

#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dcm/config.hpp"
#include "dcm/errors.hpp"
#include "dcm/experiment.hpp"
#include "dcm/plot.hpp"

namespace {

enum Exit { kOk = 0, kValidation = 1, kSolver = 2, kIo = 3 };

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || item.find_first_not_of(" \t", used) != std::string::npos)
      throw dcm::ValidationError("--eps-list: \"" + item + "\" is not a number");
    out.push_back(x);
  }
  if (out.empty()) throw dcm::ValidationError("--eps-list: must be nonempty");
  return out;
}

struct Options {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicas;
  std::optional<std::size_t> threads;
  std::string eps_list;
  std::string plot_kind;
  std::vector<std::string> plot_in;
  std::string plot_out;
};

int run_mode(dcm::ExperimentMode mode, const Options& o) {
  dcm::ExperimentSpec spec = dcm::parse_config(o.config);
  spec.mode = mode;
  if (o.out) spec.output_dir = *o.out;
  if (o.seed) spec.seed = *o.seed;
  if (o.replicas) spec.replicas = *o.replicas;
  if (o.threads) spec.threads = *o.threads;
  if (mode == dcm::ExperimentMode::limit_compare && !o.eps_list.empty()) spec.epsilon_list = parse_list(o.eps_list);
  const dcm::ExperimentOutcome res = dcm::run_experiment(spec);
  std::cout << res.summary_json;
  std::cerr << "wrote " << res.dir.string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Delayed contact mechanics: rigid disks with age-structured adhesion"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON configuration file")->required();
    sub->add_option("--out", o.out, "Output directory (overrides output.dir)");
    sub->add_option("--threads", o.threads, "Worker threads (0: hardware concurrency)");
  };

  auto* simulate = app.add_subcommand("simulate", "Run one simulation");
  add_common(simulate);
  simulate->add_option("--seed", o.seed, "Master seed (overrides seed)");

  auto* density = app.add_subcommand("density-study", "Refinement study of the bond density scheme");
  add_common(density);

  auto* limit = app.add_subcommand("limit-compare", "Compare delayed runs with the friction limit");
  add_common(limit);
  limit->add_option("--eps-list", o.eps_list, "Comma-separated epsilon values");

  auto* msd = app.add_subcommand("msd-validate", "Monte Carlo MSD against the Ornstein-Uhlenbeck formula");
  add_common(msd);
  msd->add_option("--replicas", o.replicas, "Number of replicas");
  msd->add_option("--seed", o.seed, "Master seed (overrides seed)");

  auto* sweep = app.add_subcommand("sweep", "Runs over the study epsilon and delta_a lists");
  add_common(sweep);
  sweep->add_option("--seed", o.seed, "Master seed (overrides seed)");

  auto* plot = app.add_subcommand("plot", "Render a CSV file as SVG");
  plot->add_option("--kind", o.plot_kind, "msd | activation | trajectory | density")->required();
  plot->add_option("--in", o.plot_in, "Input CSV (repeatable)")->required();
  plot->add_option("--out", o.plot_out, "Output SVG")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*simulate) return run_mode(dcm::ExperimentMode::simulate, o);
    if (*density) return run_mode(dcm::ExperimentMode::density_study, o);
    if (*limit) return run_mode(dcm::ExperimentMode::limit_compare, o);
    if (*msd) return run_mode(dcm::ExperimentMode::msd_validate, o);
    if (*sweep) return run_mode(dcm::ExperimentMode::sweep, o);
    if (*plot) {
      std::vector<std::filesystem::path> inputs(o.plot_in.begin(), o.plot_in.end());
      dcm::plot(dcm::parse_plot_kind(o.plot_kind), inputs, o.plot_out);
      std::cerr << "wrote " << o.plot_out << "\n";
      return kOk;
    }
  } catch (const dcm::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const dcm::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSolver;
  }
  return kOk;
}
