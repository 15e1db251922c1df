#include "dcm/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <json.hpp>
#include <limits>
#include <mutex>
#include <thread>

#include "dcm/errors.hpp"
#include "dcm/output.hpp"
#include "dcm/random.hpp"
#include "dcm/reference.hpp"

namespace dcm {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json summary_json(const RunSummary& s) {
  return {{"steps", s.steps},
          {"dt", s.dt},
          {"final_msd", number(s.final_msd)},
          {"max_ledger_violation", s.deterministic ? number(s.max_ledger_violation) : json(nullptr)},
          {"ledger_rhs", number(s.ledger_rhs)},
          {"compactness_proxy", number(s.compactness_proxy)},
          {"min_distance", number(s.min_distance)},
          {"final_activation", number(s.final_activation)},
          {"failed_steps", s.failed_steps},
          {"multiplier_bound_warnings", s.multiplier_bound_warnings},
          {"deterministic", s.deterministic},
          {"runtime_seconds", s.runtime_seconds}};
}

std::string label(const char* name, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%.6g", name, x);
  return buf;
}

/// Rethrows the active exception with a prefix, keeping its category.
[[noreturn]] void rethrow_with_context(const std::string& prefix) {
  try {
    throw;
  } catch (const ValidationError& e) {
    throw ValidationError(prefix + e.what());
  } catch (const IoError& e) {
    throw IoError(prefix + e.what());
  } catch (const InfeasibleConfigurationError& e) {
    throw InfeasibleConfigurationError(e.first(), e.second(), e.distance(), prefix + "simulation");
  } catch (const Error& e) {
    throw SolverError(prefix + e.what());
  }
}

std::size_t worker_count(std::size_t requested, std::size_t tasks) {
  std::size_t n = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(n, tasks));
}

RunSummary run_and_write(const SimConfig& cfg, const fs::path& dir) {
  const auto start = Clock::now();
  const Trajectory traj = run(cfg);
  const RunSummary s = summarize(traj, seconds_since(start));
  write_run(dir, traj);
  write_text(dir / "summary.json", summary_json(s).dump(2) + "\n");
  return s;
}

std::string simulate_mode(const ExperimentSpec& spec, const fs::path& dir) {
  const SimConfig cfg = to_sim_config(spec);
  const RunSummary s = run_and_write(cfg, dir);
  return summary_json(s).dump(2) + "\n";
}

std::string density_mode(const ExperimentSpec& spec, const fs::path& dir) {
  const auto start = Clock::now();
  const SimConfig cfg = to_sim_config(spec);
  const DensityStudy study = density_study(cfg.rates, spec.delta_a_list, cfg.tail_tol);

  CsvTable table{{"delta_a", "particle", "L_max", "l1_error", "mu0", "mu1", "theta"}, {}};
  for (const auto& r : study.rows)
    table.rows.push_back({r.delta_a, static_cast<double>(r.particle), static_cast<double>(r.L_max), r.l1_error, r.mu0,
                          r.mu1, r.theta});
  for (std::size_t k = 0; k < study.grids.size(); ++k) {
    const fs::path sub = dir / label("delta_a", spec.delta_a_list[k]);
    ensure_directory(sub);
    write_csv(sub / "density.csv", density_table(study.grids[k]));
  }
  write_csv(dir / "density_study.csv", table);

  json s = {{"delta_a_list", spec.delta_a_list}, {"fitted_order", json::array()}};
  for (double o : study.order) s["fitted_order"].push_back(number(o));
  s["runtime_seconds"] = seconds_since(start);
  const std::string text = s.dump(2) + "\n";
  write_text(dir / "summary.json", text);
  return text;
}

std::string limit_mode(const ExperimentSpec& spec, const fs::path& dir) {
  const auto start = Clock::now();
  const SimConfig base = to_sim_config(spec);
  const auto& eps = spec.epsilon_list;
  std::vector<LimitComparePoint> points(eps.size());
  parallel_for(eps.size(), spec.threads, [&](std::size_t k) {
    try {
      LimitComparePoint p = limit_compare_point(base, eps[k]);
      const fs::path sub = dir / label("epsilon", eps[k]);
      write_run(sub, p.delayed);
      ensure_directory(sub / "limit");
      write_run(sub / "limit", p.limit);
      p.delayed = {};
      p.limit = {};
      points[k] = std::move(p);
    } catch (...) {
      rethrow_with_context("limit-compare point epsilon=" + label("", eps[k]).substr(1) + ": ");
    }
  });

  CsvTable table{{"epsilon", "dt", "sup_distance", "terminal_gap"}, {}};
  for (const auto& p : points) table.rows.push_back({p.epsilon, p.dt, p.sup_distance, p.terminal_gap});
  write_csv(dir / "limit_compare.csv", table);

  // monotone when sorted by decreasing epsilon
  std::vector<std::size_t> order(points.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return points[a].epsilon > points[b].epsilon; });
  bool monotone = true;
  for (std::size_t k = 1; k < order.size(); ++k)
    monotone = monotone && points[order[k]].sup_distance < points[order[k - 1]].sup_distance;

  json s = {{"epsilon", json::array()}, {"sup_distance", json::array()}};
  for (const auto& p : points) {
    s["epsilon"].push_back(p.epsilon);
    s["sup_distance"].push_back(number(p.sup_distance));
  }
  s["monotone_decreasing"] = monotone;
  s["runtime_seconds"] = seconds_since(start);
  const std::string text = s.dump(2) + "\n";
  write_text(dir / "summary.json", text);
  return text;
}

std::string msd_mode(const ExperimentSpec& spec, const fs::path& dir) {
  const auto start = Clock::now();
  const SimConfig base = to_sim_config(spec);
  const MsdEnsemble ens = msd_ensemble(base, spec.replicas, spec.sample_times, spec.threads);

  CsvTable series{{"t", "msd", "std_error", "exact"}, {}};
  for (std::size_t k = 0; k < ens.t.size(); ++k)
    series.rows.push_back({ens.t[k], ens.mean[k], ens.std_error[k], ens.exact[k]});
  write_csv(dir / "msd_series.csv", series);

  CsvTable table{{"t", "msd", "std_error", "exact", "z_score"}, {}};
  bool within = true;
  for (const auto& s : ens.samples) {
    table.rows.push_back({s.t, s.mean, s.std_error, s.exact, s.z_score});
    within = within && std::abs(s.z_score) <= 3.0;
  }
  write_csv(dir / "msd_validate.csv", table);

  json s = {{"replicas", ens.replicas}, {"master_seed", spec.seed}, {"samples", json::array()}};
  for (const auto& x : ens.samples)
    s["samples"].push_back({{"t", x.t}, {"msd", x.mean}, {"std_error", x.std_error}, {"exact", x.exact},
                            {"z_score", number(x.z_score)}});
  s["within_three_standard_errors"] = within;
  s["runtime_seconds"] = seconds_since(start);
  const std::string text = s.dump(2) + "\n";
  write_text(dir / "summary.json", text);
  return text;
}

std::string sweep_mode(const ExperimentSpec& spec, const fs::path& dir) {
  const auto start = Clock::now();
  const std::vector<double> eps = spec.epsilon_list.empty() ? std::vector<double>{spec.epsilon} : spec.epsilon_list;
  const std::vector<double> das = spec.delta_a_list.empty() ? std::vector<double>{spec.delta_a} : spec.delta_a_list;
  const std::size_t count = eps.size() * das.size();
  std::vector<RunSummary> results(count);

  parallel_for(count, spec.threads, [&](std::size_t k) {
    const double e = eps[k / das.size()], d = das[k % das.size()];
    const std::string name = label("epsilon", e) + "_" + label("delta_a", d);
    try {
      ExperimentSpec point = spec;
      point.epsilon = e;
      point.delta_a = d;
      results[k] = run_and_write(to_sim_config(point), dir / name);
    } catch (...) {
      rethrow_with_context("sweep point " + name + ": ");
    }
  });

  CsvTable table{{"epsilon", "delta_a", "dt", "steps", "final_msd", "max_ledger_violation", "compactness_proxy",
                  "final_activation", "min_distance", "failed_steps"},
                 {}};
  for (std::size_t k = 0; k < count; ++k) {
    const auto& r = results[k];
    table.rows.push_back({eps[k / das.size()], das[k % das.size()], r.dt, static_cast<double>(r.steps), r.final_msd,
                          r.deterministic ? r.max_ledger_violation : std::numeric_limits<double>::quiet_NaN(),
                          r.compactness_proxy, r.final_activation, r.min_distance, static_cast<double>(r.failed_steps)});
  }
  write_csv(dir / "sweep.csv", table);
  json s = {{"points", count}, {"runtime_seconds", seconds_since(start)}};
  const std::string text = s.dump(2) + "\n";
  write_text(dir / "summary.json", text);
  return text;
}

}  // namespace

RunSummary summarize(const Trajectory& traj, double runtime_seconds) {
  RunSummary s;
  s.steps = traj.diagnostics.empty() ? 0 : traj.diagnostics.size() - 1;
  s.dt = traj.dt;
  s.deterministic = traj.deterministic;
  s.ledger_rhs = traj.ledger_rhs;
  s.failed_steps = traj.failed_steps;
  s.multiplier_bound_warnings = traj.multiplier_bound_warnings;
  s.runtime_seconds = runtime_seconds;
  s.min_distance = std::numeric_limits<double>::infinity();
  for (const auto& d : traj.diagnostics) s.min_distance = std::min(s.min_distance, d.min_distance);
  if (!traj.diagnostics.empty()) {
    s.final_msd = traj.diagnostics.back().msd;
    s.final_activation = traj.diagnostics.back().activation;
    s.compactness_proxy = traj.diagnostics.back().h1_sum;
    s.max_ledger_violation = ledger_check(traj) + 0.0;
  }
  return s;
}

double fitted_order(const std::vector<double>& h, const std::vector<double>& error) {
  if (h.size() != error.size() || h.size() < 2) throw ValidationError("fitted_order: need at least two matching points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(h.size());
  for (std::size_t k = 0; k < h.size(); ++k) {
    if (!(h[k] > 0.0) || !(error[k] > 0.0)) throw ValidationError("fitted_order: values must be positive");
    const double x = std::log(h[k]), y = std::log(error[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double den = n * sxx - sx * sx;
  if (!(std::abs(den) > 0.0)) throw ValidationError("fitted_order: step sizes must differ");
  return (n * sxy - sx * sy) / den;
}

DensityStudy density_study(const RateModel& rates, const std::vector<double>& delta_a_list, double tail_tol) {
  if (delta_a_list.empty()) throw ValidationError("study.delta_a_list: must be nonempty");
  DensityStudy out;
  std::vector<std::vector<double>> errors(rates.size());
  for (double da : delta_a_list) {
    DensityGrid g = build_density(rates, da, tail_tol);
    const std::vector<double> e = l1_consistency_error(g, rates);
    for (std::size_t i = 0; i < rates.size(); ++i) {
      const auto& p = g.particles[i];
      out.rows.push_back({da, i, g.L_max, e[i], p.mu0, p.mu1, p.theta});
      errors[i].push_back(e[i]);
    }
    out.grids.push_back(std::move(g));
  }
  for (std::size_t i = 0; i < rates.size(); ++i)
    out.order.push_back(delta_a_list.size() >= 2 ? fitted_order(delta_a_list, errors[i])
                                                 : std::numeric_limits<double>::quiet_NaN());
  return out;
}

LimitComparePoint limit_compare_point(const SimConfig& base, double epsilon) {
  SimConfig cfg = base;
  cfg.epsilon = epsilon;
  cfg.stride = 1;
  cfg.noise.sigma = 0.0;
  cfg.validate();
  LimitComparePoint p;
  p.epsilon = epsilon;
  p.dt = cfg.dt();
  p.delayed = run(cfg);
  p.limit = friction_limit_run(cfg, FrictionWeights::from_rates(cfg.rates), p.dt);
  p.sup_distance = sup_distance(p.delayed, p.limit);
  const double t_end = std::min(p.delayed.frames.back().t, p.limit.frames.back().t);
  p.terminal_gap = (interpolate(p.delayed, t_end, InterpolationMode::linear) -
                    interpolate(p.limit, t_end, InterpolationMode::linear))
                       .norm();
  return p;
}

void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& task) {
  if (count == 0) return;
  const std::size_t workers = worker_count(threads, count);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::mutex mu;
  std::size_t failed_index = count;
  std::exception_ptr failure;

  auto body = [&] {
    for (;;) {
      if (stop.load()) return;
      const std::size_t k = next.fetch_add(1);
      if (k >= count) return;
      try {
        task(k);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (k < failed_index) {
          failed_index = k;
          failure = std::current_exception();
        }
        stop = true;
      }
    }
  };
  if (workers == 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
}

MsdEnsemble msd_ensemble(const SimConfig& base, std::size_t replicas, const std::vector<double>& sample_times,
                         std::size_t threads) {
  if (replicas < 2) throw ValidationError("study.replicas: at least 2 replicas are required");
  base.validate();
  const std::size_t steps = base.n_steps();
  const double dt = base.dt();
  const std::size_t len = steps + 1;
  for (double t : sample_times)
    if (t < 0.0 || t > static_cast<double>(steps) * dt * (1.0 + 1e-12))
      throw ValidationError("study.sample_times: entries must lie in [0, T]");

  constexpr std::size_t kChunk = 64;
  const std::size_t chunks = (replicas + kChunk - 1) / kChunk;
  std::vector<std::vector<double>> sum(chunks), sumsq(chunks);

  parallel_for(chunks, threads, [&](std::size_t c) {
    std::vector<double> s(len, 0.0), s2(len, 0.0);
    for (std::size_t r = c * kChunk; r < std::min(replicas, (c + 1) * kChunk); ++r) {
      SimConfig cfg = base;
      cfg.stride = std::max<std::size_t>(1, steps);
      cfg.noise.seed = stream_seed(base.noise.seed, r);
      Simulation sim(std::move(cfg));
      const double m0 = sim.trajectory().diagnostics.front().msd;
      s[0] += m0;
      s2[0] += m0 * m0;
      for (std::size_t k = 1; k < len; ++k) {
        const double m = sim.step().msd;
        s[k] += m;
        s2[k] += m * m;
      }
    }
    sum[c] = std::move(s);
    sumsq[c] = std::move(s2);
  });

  MsdEnsemble out;
  out.replicas = replicas;
  const double R = static_cast<double>(replicas);
  const FrictionWeights w = FrictionWeights::from_rates(base.rates);
  const Eigen::VectorXd& z0 = base.initial.coordinates();
  const Eigen::VectorXd ref = base.msd_reference ? *base.msd_reference : Eigen::VectorXd::Zero(z0.size());
  const std::size_t np = base.initial.size();
  auto exact = [&](double t) {
    double e = 0.0;
    for (std::size_t i = 0; i < np; ++i) {
      const double z0sq = (z0.segment<2>(2 * static_cast<Eigen::Index>(i)) - ref.segment<2>(2 * static_cast<Eigen::Index>(i))).squaredNorm();
      e += ou_msd_scaled(t, z0sq, base.load.nu, base.noise.sigma, w.mu1[i]);
    }
    return e / static_cast<double>(np);
  };

  for (std::size_t k = 0; k < len; ++k) {
    double s = 0.0, s2 = 0.0;
    for (std::size_t c = 0; c < chunks; ++c) {
      s += sum[c][k];
      s2 += sumsq[c][k];
    }
    const double mean = s / R;
    const double var = std::max(0.0, (s2 - R * mean * mean) / (R - 1.0));
    const double t = static_cast<double>(k) * dt;
    out.t.push_back(t);
    out.mean.push_back(mean);
    out.std_error.push_back(std::sqrt(var / R));
    out.exact.push_back(exact(t));
  }
  for (double t : sample_times) {
    const std::size_t k = std::min(len - 1, static_cast<std::size_t>(std::llround(t / dt)));
    MsdSample smp{out.t[k], out.mean[k], out.std_error[k], out.exact[k], 0.0};
    smp.z_score = smp.std_error > 0.0 ? (smp.mean - smp.exact) / smp.std_error
                                      : (smp.mean == smp.exact ? 0.0 : std::numeric_limits<double>::infinity());
    out.samples.push_back(smp);
  }
  return out;
}

ExperimentOutcome run_experiment(const ExperimentSpec& spec) {
  validate(spec);
  ExperimentOutcome out;
  out.dir = spec.output_dir;
  ensure_directory(out.dir);
  write_text(out.dir / "config.json", serialize(spec));
  switch (spec.mode) {
    case ExperimentMode::simulate: out.summary_json = simulate_mode(spec, out.dir); break;
    case ExperimentMode::density_study: out.summary_json = density_mode(spec, out.dir); break;
    case ExperimentMode::limit_compare: out.summary_json = limit_mode(spec, out.dir); break;
    case ExperimentMode::msd_validate: out.summary_json = msd_mode(spec, out.dir); break;
    case ExperimentMode::sweep: out.summary_json = sweep_mode(spec, out.dir); break;
  }
  return out;
}

}  // namespace dcm
