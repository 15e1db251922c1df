#include "dcm/solvers.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <limits>

#include "dcm/errors.hpp"

namespace dcm {

namespace {

void require_closed_form(const StepProblem& problem) {
  if (!problem.has_closed_form())
    throw SolverError("Uzawa needs a load with constant curvature or a linearized load; use the penalty solver");
}

void check_sizes(const StepProblem& problem, const ConstraintEval& ce) {
  if (ce.n_particles() != problem.n_particles())
    throw ValidationError("constraints and step problem disagree on the particle count");
}

SolverResult finish(const StepProblem& problem, const ConstraintEval& ce, Eigen::VectorXd q, Eigen::VectorXd lambda,
                    std::size_t iterations, SolverStatus status, const KktTolerances& tol) {
  SolverResult r;
  r.kkt = kkt_residual(problem, ce, q, lambda);
  r.primal = std::move(q);
  r.multipliers = std::move(lambda);
  r.iterations = iterations;
  r.converged = status == SolverStatus::converged && kkt_satisfied(r.kkt, tol, problem.load_gradient_scale());
  r.status = r.converged ? SolverStatus::converged
                         : (status == SolverStatus::converged ? SolverStatus::max_iterations : status);
  return r;
}

}  // namespace

std::string to_string(SolverStatus s) {
  switch (s) {
    case SolverStatus::converged: return "converged";
    case SolverStatus::max_iterations: return "max_iterations";
    case SolverStatus::diverged: return "diverged";
    case SolverStatus::line_search_failure: return "line_search_failure";
    case SolverStatus::schedule_exhausted: return "schedule_exhausted";
  }
  return "unknown";
}

bool kkt_satisfied(const KktResiduals& r, const KktTolerances& tol, double grad_scale) {
  return r.stationarity <= tol.stationarity * (1.0 + grad_scale) && r.feasibility <= tol.feasibility &&
         r.complementarity <= tol.complementarity;
}

KktResiduals kkt_residual(const StepProblem& problem, const ConstraintEval& ce, const Eigen::VectorXd& primal,
                          const Eigen::VectorXd& lambda) {
  check_sizes(problem, ce);
  KktResiduals r;
  Eigen::VectorXd g = problem.gradient(primal);
  if (ce.size() > 0) {
    g += ce.apply_transpose(lambda);
    const Eigen::VectorXd phi = ce.evaluate(primal);
    r.feasibility = std::max(0.0, phi.maxCoeff());
    r.complementarity = lambda.cwiseProduct(phi).cwiseAbs().sum();
  }
  r.stationarity = g.norm();
  return r;
}

Eigen::VectorXd uzawa_inner_minimize(const StepProblem& problem, const ConstraintEval& ce,
                                     const Eigen::VectorXd& lambda) {
  require_closed_form(problem);
  check_sizes(problem, ce);
  if (ce.size() == 0) return problem.linear_term().cwiseQuotient(problem.diagonal());
  return (problem.linear_term() - ce.apply_transpose(lambda)).cwiseQuotient(problem.diagonal());
}

Eigen::VectorXd uzawa_inner_minimize(const EnergyContext& ctx, const Eigen::VectorXd& load_gradient_at_prev,
                                     const ConstraintEval& ce, const Eigen::VectorXd& lambda) {
  const Eigen::VectorXd& theta = ctx.theta();
  if (!(theta.minCoeff() > 0.0)) throw SolverError("zero theta: the bond density is empty for at least one particle");
  if (load_gradient_at_prev.size() != theta.size()) throw ValidationError("load gradient has the wrong dimension");
  Eigen::VectorXd rhs = ctx.targets() - ctx.epsilon() * load_gradient_at_prev;
  if (ce.size() > 0) rhs -= ctx.epsilon() * ce.apply_transpose(lambda);
  return rhs.cwiseQuotient(theta);
}

double uzawa_step_bound(const DensityGrid& grid, double epsilon, std::size_t n_constraints) {
  if (n_constraints < 1) throw ValidationError("uzawa_step_bound: need at least one constraint");
  if (!(epsilon > 0.0)) throw ValidationError("uzawa_step_bound: epsilon must be positive");
  return 2.0 * grid.min_theta() / (epsilon * 2.0 * static_cast<double>(n_constraints));
}

double uzawa_step_bound(const StepProblem& problem, std::size_t n_constraints) {
  if (n_constraints < 1) throw ValidationError("uzawa_step_bound: need at least one constraint");
  return 2.0 * problem.stiffness().minCoeff() / (2.0 * static_cast<double>(n_constraints));
}

std::optional<SolverResult> active_set_finish(const StepProblem& problem, const ConstraintEval& ce,
                                              const Eigen::VectorXd& lambda, const KktTolerances& tol) {
  require_closed_form(problem);
  const std::size_t m = ce.size();
  const Eigen::VectorXd hinv = problem.diagonal().cwiseInverse();
  const Eigen::VectorXd q0 = problem.linear_term().cwiseProduct(hinv);
  const Eigen::VectorXd phi0 = ce.evaluate(q0);

  std::vector<char> in(m, 0);
  {
    const Eigen::VectorXd phi = ce.evaluate(uzawa_inner_minimize(problem, ce, lambda));
    for (std::size_t k = 0; k < m; ++k) in[k] = lambda[static_cast<Eigen::Index>(k)] > 0.0 || phi[static_cast<Eigen::Index>(k)] > 0.0;
  }
  const std::size_t passes = 8 + m;
  for (std::size_t pass = 0; pass < passes; ++pass) {
    std::vector<std::size_t> S;
    for (std::size_t k = 0; k < m; ++k)
      if (in[k]) S.push_back(k);
    Eigen::VectorXd lam = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
    if (!S.empty()) {
      const auto s = static_cast<Eigen::Index>(S.size());
      Eigen::MatrixXd A(s, static_cast<Eigen::Index>(problem.dimension()));
      Eigen::VectorXd rhs(s);
      for (Eigen::Index a = 0; a < s; ++a) {
        A.row(a) = ce.gradient(S[static_cast<std::size_t>(a)]).transpose();
        rhs[a] = phi0[static_cast<Eigen::Index>(S[static_cast<std::size_t>(a)])];
      }
      const Eigen::MatrixXd M = A * hinv.asDiagonal() * A.transpose();
      const Eigen::VectorXd sol = M.completeOrthogonalDecomposition().solve(rhs);
      if (!sol.allFinite()) return std::nullopt;
      for (Eigen::Index a = 0; a < s; ++a) lam[static_cast<Eigen::Index>(S[static_cast<std::size_t>(a)])] = sol[a];
    }
    const double floor = -1e-13 * (1.0 + lam.cwiseAbs().maxCoeff());
    const Eigen::VectorXd q = uzawa_inner_minimize(problem, ce, lam.cwiseMax(0.0));
    const Eigen::VectorXd phi = ce.evaluate(q);
    bool changed = false;
    std::vector<char> next(m, 0);
    for (std::size_t k = 0; k < m; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      next[k] = in[k] ? lam[kk] > floor : phi[kk] > tol.feasibility;
      if (next[k] != in[k]) changed = true;
    }
    if (!changed) {
      Eigen::VectorXd lc = lam.cwiseMax(0.0);
      SolverResult r = finish(problem, ce, q, lc, 0, SolverStatus::converged, tol);
      if (r.converged) return r;
      return std::nullopt;
    }
    in = std::move(next);
  }
  return std::nullopt;
}

SolverResult uzawa_solve(const StepProblem& problem, const ConstraintEval& ce, const UzawaSettings& settings,
                         const Eigen::VectorXd* warm_start) {
  require_closed_form(problem);
  check_sizes(problem, ce);
  const std::size_t m = ce.size();
  const auto mm = static_cast<Eigen::Index>(m);
  if (m == 0) {
    Eigen::VectorXd q = uzawa_inner_minimize(problem, ce, Eigen::VectorXd());
    return finish(problem, ce, std::move(q), Eigen::VectorXd(), 1, SolverStatus::converged, settings.tol);
  }
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(mm);
  if (warm_start && warm_start->size() == mm) lambda = warm_start->cwiseMax(0.0);

  const double eta =
      settings.policy == StepPolicy::fixed ? settings.step : settings.safety * uzawa_step_bound(problem, m);
  if (!(eta > 0.0) || !std::isfinite(eta)) throw ValidationError("solver.eta: dual step must be positive");

  double scale = lambda.norm();
  std::vector<double> residuals;
  Eigen::VectorXd q;
  for (std::size_t r = 1; r <= settings.max_iter; ++r) {
    q = uzawa_inner_minimize(problem, ce, lambda);
    const Eigen::VectorXd phi = ce.evaluate(q);
    const double feas = std::max(0.0, phi.maxCoeff());
    const double comp = lambda.cwiseProduct(phi).cwiseAbs().sum();
    if (feas <= settings.tol.feasibility && comp <= settings.tol.complementarity) {
      SolverResult res = finish(problem, ce, q, lambda, r, SolverStatus::converged, settings.tol);
      if (res.converged) {
        if (settings.polish_interval > 0) {
          if (auto polished = active_set_finish(problem, ce, lambda, settings.tol)) {
            polished->iterations = r;
            return *polished;
          }
        }
        return res;
      }
    }
    if (settings.polish_interval > 0 && r % settings.polish_interval == 0) {
      if (auto polished = active_set_finish(problem, ce, lambda, settings.tol)) {
        polished->iterations = r;
        return *polished;
      }
    }
    Eigen::VectorXd next = (lambda + eta * phi).cwiseMax(0.0);
    if (!next.allFinite()) return finish(problem, ce, q, lambda, r, SolverStatus::diverged, settings.tol);
    if (r == 1) scale = std::max(scale, next.norm());
    if (scale > 0.0 && next.norm() > settings.divergence_factor * scale)
      return finish(problem, ce, q, next, r, SolverStatus::diverged, settings.tol);
    const double res = (next - lambda).norm();
    residuals.push_back(res);
    const std::size_t w = settings.stall_window;
    if (w > 0 && residuals.size() > w && res > 1e-14 * (1.0 + next.norm()) &&
        res >= residuals[residuals.size() - 1 - w])
      return finish(problem, ce, q, next, r, SolverStatus::diverged, settings.tol);
    lambda = std::move(next);
  }
  return finish(problem, ce, q, lambda, settings.max_iter, SolverStatus::max_iterations, settings.tol);
}

std::vector<double> PenaltySettings::default_schedule() {
  std::vector<double> s;
  for (int k = 0; k <= 7; ++k) s.push_back(1e-2 * std::pow(4.0, -k));
  return s;
}

namespace {

// Shifted penalty: Phi(q) + 1/(2 delta) sum max(phi_k + delta mu_k, 0)^2.
struct ShiftedPenalty {
  const StepProblem& problem;
  const ConstraintEval& ce;
  double delta;
  const Eigen::VectorXd& mu;

  Eigen::VectorXd weights(const Eigen::VectorXd& phi) const { return (mu + phi / delta).cwiseMax(0.0); }
  double value(const Eigen::VectorXd& q) const {
    double v = problem.objective(q);
    if (ce.size() == 0) return v;
    const Eigen::VectorXd s = (ce.evaluate(q) + delta * mu).cwiseMax(0.0);
    return v + 0.5 / delta * s.squaredNorm();
  }
  Eigen::VectorXd gradient(const Eigen::VectorXd& q) const {
    Eigen::VectorXd g = problem.gradient(q);
    if (ce.size() > 0) g += ce.apply_transpose(weights(ce.evaluate(q)));
    return g;
  }
};

struct NewtonOutcome {
  bool ok = true;
  std::size_t steps = 0;
};

NewtonOutcome newton_minimize(const ShiftedPenalty& f, Eigen::VectorXd& q, const PenaltySettings& st) {
  NewtonOutcome out;
  const double gtol = st.inner_tol * (1.0 + f.problem.load_gradient_scale());
  for (std::size_t it = 0; it < st.max_inner; ++it) {
    const Eigen::VectorXd g = f.gradient(q);
    if (g.norm() <= gtol) return out;
    Eigen::MatrixXd H = f.problem.hessian(q);
    if (f.ce.size() > 0) {
      const Eigen::VectorXd phi = f.ce.evaluate(q);
      for (std::size_t k = 0; k < f.ce.size(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        if (f.mu[kk] + phi[kk] / f.delta > 0.0) {
          const Eigen::VectorXd a = f.ce.gradient(k);
          H.noalias() += (a * a.transpose()) / f.delta;
        }
      }
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    Eigen::VectorXd d = ldlt.solve(-g);
    if (ldlt.info() != Eigen::Success || !d.allFinite()) d = -g;
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      d = -g;
      slope = -g.squaredNorm();
    }
    const double f0 = f.value(q);
    const double slack = 1e-14 * (1.0 + std::abs(f0));
    double t = 1.0;
    bool accepted = false;
    for (std::size_t b = 0; b <= st.max_backtracks; ++b) {
      const Eigen::VectorXd trial = q + t * d;
      const double ft = f.value(trial);
      if (ft <= f0 + st.armijo * t * slope || (ft <= f0 + slack && t == 1.0)) {
        q = trial;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    ++out.steps;
    if (!accepted) {
      out.ok = false;
      return out;
    }
    if ((t * d).norm() <= 1e-16 * (1.0 + q.norm())) return out;
  }
  return out;
}

}  // namespace

SolverResult penalty_solve(const StepProblem& problem, const ConstraintEval& ce, const PenaltySettings& settings,
                           const Eigen::VectorXd* initial, std::vector<PenaltyStage>* trace) {
  check_sizes(problem, ce);
  if (settings.schedule.empty()) throw ValidationError("penalty schedule is empty");
  for (std::size_t k = 0; k < settings.schedule.size(); ++k) {
    if (!(settings.schedule[k] > 0.0)) throw ValidationError("penalty schedule must be positive");
    if (k > 0 && !(settings.schedule[k] < settings.schedule[k - 1]))
      throw ValidationError("penalty schedule must be strictly decreasing");
  }
  const auto mm = static_cast<Eigen::Index>(ce.size());
  Eigen::VectorXd q = initial && initial->size() == static_cast<Eigen::Index>(problem.dimension())
                          ? *initial
                          : problem.expansion_point();
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(mm);
  std::size_t total = 0;
  if (trace) trace->clear();
  for (double delta : settings.schedule) {
    const ShiftedPenalty f{problem, ce, delta, zero};
    const NewtonOutcome o = newton_minimize(f, q, settings);
    total += o.steps;
    if (trace) {
      const double viol = ce.size() ? penalty_value(ce, q).value : 0.0;
      trace->push_back({delta, problem.objective(q), viol, o.steps});
    }
    if (!o.ok)
      return finish(problem, ce, q, ce.size() ? f.weights(ce.evaluate(q)) : zero, total,
                    SolverStatus::line_search_failure, settings.tol);
  }
  const double delta = settings.schedule.back();
  Eigen::VectorXd lambda = ce.size() ? (ce.evaluate(q) / delta).cwiseMax(0.0).eval() : zero;
  SolverResult res = finish(problem, ce, q, lambda, total, SolverStatus::converged, settings.tol);
  for (std::size_t u = 0; u < settings.multiplier_updates && !res.converged && ce.size() > 0; ++u) {
    const ShiftedPenalty f{problem, ce, delta, lambda};
    const NewtonOutcome o = newton_minimize(f, q, settings);
    total += o.steps;
    if (!o.ok) return finish(problem, ce, q, lambda, total, SolverStatus::line_search_failure, settings.tol);
    lambda = f.weights(ce.evaluate(q));
    res = finish(problem, ce, q, lambda, total, SolverStatus::converged, settings.tol);
  }
  if (!res.converged) res.status = SolverStatus::schedule_exhausted;
  return res;
}

double projection_identity_check(const StepProblem& problem, const ConstraintEval& ce, const SolverResult& result,
                                 double dt) {
  if (!(dt > 0.0)) throw ValidationError("projection check: time step must be positive");
  const Eigen::VectorXd& z = result.primal;
  const Eigen::VectorXd y = z - dt * problem.gradient(z);
  const auto n = static_cast<Eigen::Index>(problem.dimension());
  StepProblem proj(Eigen::VectorXd::Ones(n), y, zero_load(), LoadTreatment::exact, y);
  UzawaSettings st;
  st.polish_interval = 1;
  st.stall_window = 0;
  const SolverResult p = uzawa_solve(proj, ce, st);
  if (!p.converged) throw SolverError("projection check: inner projection did not converge");
  return (p.primal - z).norm();
}

}  // namespace dcm
