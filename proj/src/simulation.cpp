#include "dcm/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dcm/errors.hpp"

namespace dcm {

Eigen::VectorXd PastSpec::per_coordinate(std::size_t n_particles) const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(2 * static_cast<Eigen::Index>(n_particles));
  if (velocities.size() != 1 && velocities.size() != n_particles)
    throw ValidationError("past.velocity: give one velocity or one per particle");
  for (std::size_t i = 0; i < n_particles; ++i)
    v.segment<2>(2 * static_cast<Eigen::Index>(i)) = velocities.size() == 1 ? velocities[0] : velocities[i];
  return v;
}

std::size_t SimConfig::n_steps() const {
  const double ratio = horizon / dt();
  // Guard against T/dt landing a hair below an integer.
  return static_cast<std::size_t>(std::floor(ratio * (1.0 + 1e-12)));
}

void SimConfig::validate() const {
  if (initial.empty()) throw ValidationError("particles: at least one particle is required");
  domain.validate();
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ValidationError("epsilon: must be positive");
  if (!(delta_a > 0.0) || !std::isfinite(delta_a)) throw ValidationError("delta_a: must be positive");
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw ValidationError("T: must be nonnegative");
  if (rates.size() != initial.size())
    throw ValidationError("rates: expected " + std::to_string(initial.size()) + " entries, got " +
                          std::to_string(rates.size()));
  rates.validate();
  if (!(noise.sigma >= 0.0) || !std::isfinite(noise.sigma)) throw ValidationError("noise.sigma: must be >= 0");
  if (past.kind == PastKind::drift) {
    if (past.velocities.size() != 1 && past.velocities.size() != initial.size())
      throw ValidationError("past.velocity: give one velocity or one per particle");
    for (const auto& v : past.velocities)
      if (!v.allFinite()) throw ValidationError("past.velocity: must be finite");
  }
  if (stride < 1) throw ValidationError("output.stride: must be at least 1");
  if (!load.custom && (!(load.nu > 0.0) || !std::isfinite(load.nu))) throw ValidationError("load.nu: must be positive");
  if (load.centers && load.centers->size() != initial.coordinates().size())
    throw ValidationError("load.centers: one center per particle required");
  if (msd_reference && msd_reference->size() != initial.coordinates().size())
    throw ValidationError("msd reference: one point per particle required");
  if (prune_cutoff && !std::isfinite(*prune_cutoff)) throw ValidationError("prune_cutoff: must be finite");
  if (solver.kind == SolverKind::uzawa && solver.treatment == LoadTreatment::exact && load.custom &&
      !load.custom->curvature)
    throw ValidationError("solver.kind: Uzawa with an exact non-quadratic load is unsupported; use penalty");
}

ExternalLoad build_load(const SimConfig& cfg) {
  if (cfg.load.custom) return *cfg.load.custom;
  if (cfg.load.centers) return quadratic_load(cfg.load.nu, *cfg.load.centers);
  return quadratic_load(cfg.load.nu);
}

Simulation::Simulation(SimConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  load_ = build_load(cfg_);
  grid_ = std::make_shared<const DensityGrid>(build_density(cfg_.rates, cfg_.delta_a, cfg_.tail_tol));
  const double dt = cfg_.dt();
  total_steps_ = cfg_.n_steps();
  const Eigen::VectorXd& q0 = cfg_.initial.coordinates();
  const PastProvider past = cfg_.past.kind == PastKind::drift
                                ? PastProvider::drift(q0, cfg_.past.per_coordinate(cfg_.initial.size()))
                                : PastProvider::constant(q0);
  ctx_ = std::make_unique<EnergyContext>(grid_, History(past, dt, grid_->L_max), cfg_.epsilon);
  const std::size_t n = cfg_.initial.size();
  msd_ref_ = cfg_.msd_reference ? *cfg_.msd_reference : Eigen::VectorXd::Zero(q0.size());
  if (cfg_.noise.sigma > 0.0) noise_.emplace(cfg_.noise.seed);

  const Eigen::VectorXd& z0 = current();
  const Configuration c0 = cfg_.initial.with_coordinates(z0);
  const ClosestPair cp = min_signed_distance(c0, cfg_.domain);
  if (cfg_.contacts && cp.distance < -cfg_.feasibility_tol)
    throw InfeasibleConfigurationError(cp.i, cp.j, cp.distance, "initial configuration");

  double k0 = 0.0;
  const auto& lip = ctx_->history().past_lipschitz();
  for (std::size_t i = 0; i < n; ++i) k0 += lip[i] * lip[i] * grid_->particles[i].mu2;
  k0 *= 0.5 * cfg_.epsilon;

  traj_.dt = dt;
  traj_.n_particles = n;
  traj_.radii.assign(cfg_.initial.radii().begin(), cfg_.initial.radii().end());
  traj_.deterministic = cfg_.noise.sigma == 0.0;
  const double f0 = load_.value(z0);
  traj_.ledger_rhs = k0 + f0;

  DiagnosticsRecord rec;
  rec.delay_quadratic = delay_quadratic(*ctx_);
  rec.load = f0;
  rec.ledger_slack = traj_.ledger_rhs - (rec.delay_quadratic + f0);
  rec.msd = msd_of(z0);
  rec.min_distance = cp.distance;
  traj_.frames.push_back({0, 0.0, z0});
  record(rec, nullptr, nullptr);
}

double Simulation::msd_of(const Eigen::VectorXd& q) const {
  return (q - msd_ref_).squaredNorm() / static_cast<double>(cfg_.initial.size());
}

void Simulation::record(DiagnosticsRecord rec, const ConstraintEval* ce, const Eigen::VectorXd* lambda) {
  std::vector<MultiplierEntry> entries;
  if (ce && lambda) {
    for (std::size_t k = 0; k < ce->size(); ++k) {
      const double l = (*lambda)[static_cast<Eigen::Index>(k)];
      if (l != 0.0) entries.push_back({ce->pairs()[k].i, ce->pairs()[k].j, l});
    }
  }
  rec.activation = activation(entries, cfg_.initial.size(), cfg_.activation_tol);
  traj_.diagnostics.push_back(rec);
  traj_.multipliers.push_back(std::move(entries));
}

const DiagnosticsRecord& Simulation::step() {
  if (finished()) throw ValidationError("simulation already reached the horizon");
  const std::size_t n = steps_ + 1;
  const double dt = cfg_.dt();
  const double t = static_cast<double>(n) * dt;
  const std::size_t np = cfg_.initial.size();
  const Eigen::VectorXd zprev = current();

  ConstraintEval ce;
  if (cfg_.contacts && np > 1) {
    LinearizeOptions lo;
    lo.tolerance = cfg_.feasibility_tol;
    lo.prune_cutoff = cfg_.prune_cutoff;
    ce = linearize(cfg_.initial.with_coordinates(zprev), cfg_.domain, lo);
  } else {
    ce = ConstraintEval(zprev, cfg_.domain, {}, np);
  }
  const double diss = dissipation(*ctx_);

  Eigen::VectorXd forcing;
  if (noise_) {
    forcing.resize(zprev.size());
    const double scale = -cfg_.noise.sigma / std::sqrt(dt);
    for (Eigen::Index c = 0; c < forcing.size(); ++c) forcing[c] = scale * noise_->next();
  }
  const StepProblem problem = make_step_problem(*ctx_, load_, cfg_.solver.treatment, forcing);

  Eigen::VectorXd warm = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ce.size()));
  for (const auto& [key, value] : warm_) {
    const std::size_t k = ce.find(key.first, key.second);
    if (k < ce.size()) warm[static_cast<Eigen::Index>(k)] = value;
  }
  SolverResult result = cfg_.solver.kind == SolverKind::uzawa
                            ? uzawa_solve(problem, ce, cfg_.solver.uzawa, &warm)
                            : penalty_solve(problem, ce, cfg_.solver.penalty, &zprev);
  if (!result.converged) {
    if (cfg_.solver.on_failure == FailurePolicy::abort)
      throw SolverError("step " + std::to_string(n) + " (t = " + std::to_string(t) + "): solver " +
                        to_string(result.status) + " after " + std::to_string(result.iterations) + " iterations");
    ++traj_.failed_steps;
  }

  const Eigen::VectorXd& znew = result.primal;
  ClosestPair cp;
  if (np > 1) {
    cp = min_signed_distance(cfg_.initial.with_coordinates(znew), cfg_.domain);
    if (cfg_.contacts && result.converged && cp.distance < -cfg_.feasibility_tol)
      throw InfeasibleConfigurationError(cp.i, cp.j, cp.distance, "step " + std::to_string(n));
  } else {
    cp.distance = std::numeric_limits<double>::infinity();
  }

  if (result.multipliers.size() > 0 && result.multipliers.maxCoeff() > 0.0) {
    const double u = problem.gradient(znew).norm();
    const double bound = multiplier_bound(u, cfg_.neighbor_bound, std::max<std::size_t>(np, 3), np);
    if (result.multipliers.maxCoeff() > bound * (1.0 + 1e-9)) ++traj_.multiplier_bound_warnings;
  }

  cum_dissipation_ += dt * diss;
  h1_ += (znew - zprev).squaredNorm() / dt;
  ctx_->advance(znew);

  DiagnosticsRecord rec;
  rec.step = n;
  rec.t = t;
  rec.delay_quadratic = delay_quadratic(*ctx_);
  rec.cumulative_dissipation = cum_dissipation_;
  rec.load = load_.value(znew);
  rec.ledger_slack = traj_.ledger_rhs - (rec.delay_quadratic + rec.cumulative_dissipation + rec.load);
  rec.h1_sum = h1_;
  rec.msd = msd_of(znew);
  rec.kkt = result.kkt;
  rec.min_distance = cp.distance;
  rec.iterations = result.iterations;
  rec.converged = result.converged;
  record(rec, &ce, &result.multipliers);

  warm_.clear();
  for (std::size_t k = 0; k < ce.size(); ++k) {
    const double l = result.multipliers[static_cast<Eigen::Index>(k)];
    if (l > 0.0) warm_.push_back({{ce.pairs()[k].i, ce.pairs()[k].j}, l});
  }
  steps_ = n;
  if (n % cfg_.stride == 0 || n == total_steps_) traj_.frames.push_back({n, t, znew});
  last_ = std::move(result);
  last_ce_ = std::move(ce);
  return traj_.diagnostics.back();
}

void Simulation::run_to_end() {
  while (!finished()) step();
}

Trajectory run(const SimConfig& cfg) {
  Simulation sim(cfg);
  sim.run_to_end();
  return sim.take_trajectory();
}

Eigen::VectorXd interpolate(const Trajectory& traj, double t, InterpolationMode mode) {
  const auto& f = traj.frames;
  if (f.empty()) throw ValidationError("interpolate: trajectory has no frames");
  const double t_end = f.back().t;
  const double slack = 1e-12 * std::max(1.0, t_end);
  if (!(t >= -slack) || t > t_end + slack)
    throw ValidationError("interpolate: time " + std::to_string(t) + " outside [0, " + std::to_string(t_end) + "]");
  for (const auto& fr : f)
    if (std::abs(fr.t - t) <= slack) return fr.q;
  // First frame with t_k >= t; the interval (t_{k-1}, t_k] holds t.
  const auto it = std::lower_bound(f.begin(), f.end(), t, [](const Frame& fr, double x) { return fr.t < x; });
  const std::size_t k = static_cast<std::size_t>(it - f.begin());
  if (k == 0) return f.front().q;
  if (mode == InterpolationMode::constant) return f[k].q;
  const double w = (t - f[k - 1].t) / (f[k].t - f[k - 1].t);
  return (1.0 - w) * f[k - 1].q + w * f[k].q;
}

double msd(const Eigen::VectorXd& q, const Eigen::VectorXd& reference) {
  if (q.size() != reference.size() || q.size() == 0) throw ValidationError("msd: dimension mismatch");
  return (q - reference).squaredNorm() / static_cast<double>(q.size() / 2);
}

std::vector<double> msd(const Trajectory& traj, const Eigen::VectorXd& reference) {
  std::vector<double> out;
  out.reserve(traj.frames.size());
  for (const auto& fr : traj.frames) out.push_back(msd(fr.q, reference));
  return out;
}

std::vector<double> activation(const std::vector<Eigen::VectorXd>& series, std::size_t n_particles, double tol) {
  const std::size_t pairs = n_particles * (n_particles > 0 ? n_particles - 1 : 0) / 2;
  std::vector<double> out;
  out.reserve(series.size());
  for (const auto& l : series) {
    if (static_cast<std::size_t>(l.size()) != pairs)
      throw ValidationError("activation: multiplier vector length must be N(N-1)/2");
    if (pairs == 0) {
      out.push_back(0.0);
      continue;
    }
    const auto count = (l.array().abs() > tol).count();
    out.push_back(static_cast<double>(count) / static_cast<double>(pairs));
  }
  return out;
}

double activation(const std::vector<MultiplierEntry>& entries, std::size_t n_particles, double tol) {
  const std::size_t pairs = n_particles * (n_particles > 0 ? n_particles - 1 : 0) / 2;
  if (pairs == 0) return 0.0;
  std::size_t count = 0;
  for (const auto& e : entries)
    if (std::abs(e.lambda) > tol) ++count;
  return static_cast<double>(count) / static_cast<double>(pairs);
}

double ledger_check(const Trajectory& traj) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& d : traj.diagnostics) worst = std::max(worst, -d.ledger_slack);
  return worst;
}

double compactness_proxy(const Trajectory& traj) {
  double s = 0.0;
  for (std::size_t k = 1; k < traj.frames.size(); ++k) {
    const double h = traj.frames[k].t - traj.frames[k - 1].t;
    if (h > 0.0) s += (traj.frames[k].q - traj.frames[k - 1].q).squaredNorm() / h;
  }
  return s;
}

}  // namespace dcm
