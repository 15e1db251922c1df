#include "dcm/reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dcm/errors.hpp"

namespace dcm {

double ou_msd_exact(double t, double z0_sq) {
  if (t < 0.0) throw ValidationError("ou_msd_exact: t must be >= 0");
  const double e = std::exp(-2.0 * t);
  return z0_sq * e + 0.5 * (1.0 - e);
}

double ou_msd_scaled(double t, double z0_sq, double nu, double sigma, double friction) {
  if (t < 0.0) throw ValidationError("ou_msd_scaled: t must be >= 0");
  if (!(nu > 0.0) || !(friction > 0.0)) throw ValidationError("ou_msd_scaled: nu and friction must be positive");
  const double e = std::exp(-2.0 * nu / friction * t);
  return z0_sq * e + sigma * sigma / (nu * friction) * (1.0 - e);
}

Eigen::VectorXd no_contact_decay(double t, const Eigen::VectorXd& z0, double rate) {
  if (t < 0.0) throw ValidationError("no_contact_decay: t must be >= 0");
  return z0 * std::exp(-rate * t);
}

FrictionWeights FrictionWeights::from_rates(const RateModel& rates) {
  FrictionWeights w;
  for (std::size_t i = 0; i < rates.size(); ++i) w.mu1.push_back(closed_form_moment(rates, i, 1));
  return w;
}

FrictionWeights FrictionWeights::from_grid(const DensityGrid& grid) {
  FrictionWeights w;
  for (const auto& p : grid.particles) w.mu1.push_back(p.mu1);
  return w;
}

Trajectory friction_limit_run(const SimConfig& cfg, const FrictionWeights& weights, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("friction limit: time step must be positive");
  const std::size_t np = cfg.initial.size();
  if (np == 0) throw ValidationError("particles: at least one particle is required");
  if (weights.mu1.size() != np) throw ValidationError("friction limit: one weight per particle required");
  for (double m : weights.mu1)
    if (!(m > 0.0)) throw ValidationError("friction limit: weights must be positive");
  cfg.domain.validate();
  const ExternalLoad load = build_load(cfg);
  const std::size_t steps = static_cast<std::size_t>(std::floor(cfg.horizon / dt * (1.0 + 1e-12)));

  Eigen::VectorXd stiffness(2 * static_cast<Eigen::Index>(np));
  for (std::size_t i = 0; i < np; ++i) stiffness.segment<2>(2 * static_cast<Eigen::Index>(i)).setConstant(weights.mu1[i] / dt);
  const Eigen::VectorXd ref = cfg.msd_reference ? *cfg.msd_reference : Eigen::VectorXd::Zero(stiffness.size());

  Eigen::VectorXd z = cfg.initial.coordinates();
  const ClosestPair cp0 = min_signed_distance(cfg.initial, cfg.domain);
  if (cfg.contacts && cp0.distance < -cfg.feasibility_tol)
    throw InfeasibleConfigurationError(cp0.i, cp0.j, cp0.distance, "initial configuration");

  Trajectory traj;
  traj.dt = dt;
  traj.n_particles = np;
  traj.radii.assign(cfg.initial.radii().begin(), cfg.initial.radii().end());
  traj.ledger_rhs = load.value(z);
  traj.frames.push_back({0, 0.0, z});
  DiagnosticsRecord d0;
  d0.load = traj.ledger_rhs;
  d0.msd = msd(z, ref);
  d0.min_distance = cp0.distance;
  traj.diagnostics.push_back(d0);
  traj.multipliers.emplace_back();

  const bool closed = load.curvature.has_value();
  double movement = 0.0, h1 = 0.0;
  std::vector<std::pair<std::pair<std::size_t, std::size_t>, double>> warm_pairs;
  for (std::size_t n = 1; n <= steps; ++n) {
    const double t = static_cast<double>(n) * dt;
    ConstraintEval ce;
    if (cfg.contacts && np > 1) {
      LinearizeOptions lo;
      lo.tolerance = cfg.feasibility_tol;
      lo.prune_cutoff = cfg.prune_cutoff;
      ce = linearize(cfg.initial.with_coordinates(z), cfg.domain, lo);
    } else {
      ce = ConstraintEval(z, cfg.domain, {}, np);
    }
    const StepProblem problem(stiffness, z, load, LoadTreatment::exact, z);
    Eigen::VectorXd warm = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ce.size()));
    for (const auto& [key, v] : warm_pairs) {
      const std::size_t k = ce.find(key.first, key.second);
      if (k < ce.size()) warm[static_cast<Eigen::Index>(k)] = v;
    }
    const SolverResult res = closed && cfg.solver.kind == SolverKind::uzawa
                                 ? uzawa_solve(problem, ce, cfg.solver.uzawa, &warm)
                                 : penalty_solve(problem, ce, cfg.solver.penalty, &z);
    if (!res.converged) {
      if (cfg.solver.on_failure == FailurePolicy::abort)
        throw SolverError("friction limit step " + std::to_string(n) + ": solver " + to_string(res.status));
      ++traj.failed_steps;
    }
    const Eigen::VectorXd& znew = res.primal;
    ClosestPair cp;
    cp.distance = std::numeric_limits<double>::infinity();
    if (np > 1) {
      cp = min_signed_distance(cfg.initial.with_coordinates(znew), cfg.domain);
      if (cfg.contacts && res.converged && cp.distance < -cfg.feasibility_tol)
        throw InfeasibleConfigurationError(cp.i, cp.j, cp.distance, "friction limit step " + std::to_string(n));
    }
    const Eigen::VectorXd dz = znew - z;
    double step_move = 0.0;
    for (std::size_t i = 0; i < np; ++i)
      step_move += 0.5 * weights.mu1[i] / dt * dz.segment<2>(2 * static_cast<Eigen::Index>(i)).squaredNorm();
    movement += step_move;
    h1 += dz.squaredNorm() / dt;

    DiagnosticsRecord rec;
    rec.step = n;
    rec.t = t;
    rec.delay_quadratic = step_move;
    rec.cumulative_dissipation = movement;
    rec.load = load.value(znew);
    rec.ledger_slack = traj.ledger_rhs - (rec.load + movement);
    rec.h1_sum = h1;
    rec.msd = msd(znew, ref);
    rec.kkt = res.kkt;
    rec.min_distance = cp.distance;
    rec.iterations = res.iterations;
    rec.converged = res.converged;
    std::vector<MultiplierEntry> entries;
    warm_pairs.clear();
    for (std::size_t k = 0; k < ce.size(); ++k) {
      const double l = res.multipliers[static_cast<Eigen::Index>(k)];
      if (l != 0.0) entries.push_back({ce.pairs()[k].i, ce.pairs()[k].j, l});
      if (l > 0.0) warm_pairs.push_back({{ce.pairs()[k].i, ce.pairs()[k].j}, l});
    }
    rec.activation = activation(entries, np, cfg.activation_tol);
    traj.diagnostics.push_back(rec);
    traj.multipliers.push_back(std::move(entries));
    z = znew;
    if (n % cfg.stride == 0 || n == steps) traj.frames.push_back({n, t, z});
  }
  return traj;
}

double sup_distance(const Trajectory& a, const Trajectory& b) {
  if (a.frames.empty() || b.frames.empty()) throw ValidationError("sup_distance: empty trajectory");
  const double t_end = std::min(a.frames.back().t, b.frames.back().t);
  double worst = 0.0;
  for (const auto& fr : a.frames) {
    if (fr.t > t_end + 1e-12 * std::max(1.0, t_end)) break;
    const Eigen::VectorXd zb = interpolate(b, std::min(fr.t, b.frames.back().t), InterpolationMode::linear);
    if (zb.size() != fr.q.size()) throw ValidationError("sup_distance: trajectories differ in dimension");
    worst = std::max(worst, (fr.q - zb).norm());
  }
  return worst;
}

}  // namespace dcm
