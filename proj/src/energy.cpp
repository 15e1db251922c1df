#include "dcm/energy.hpp"

#include <array>
#include <cmath>
#include <string>

#include "dcm/errors.hpp"

namespace dcm {

PastProvider PastProvider::constant(const Eigen::VectorXd& q) {
  PastProvider p;
  p.trajectory = [q](double) { return q; };
  p.lipschitz.assign(static_cast<std::size_t>(q.size() / 2), 0.0);
  return p;
}

PastProvider PastProvider::drift(const Eigen::VectorXd& q0, const Eigen::VectorXd& velocity) {
  if (velocity.size() != q0.size()) throw ValidationError("past.velocity: one velocity per particle required");
  PastProvider p;
  p.trajectory = [q0, velocity](double t) -> Eigen::VectorXd { return q0 + t * velocity; };
  for (Eigen::Index i = 0; i < q0.size() / 2; ++i) p.lipschitz.push_back(velocity.segment<2>(2 * i).norm());
  return p;
}

Eigen::VectorXd past_average(const PastProvider& past, double t0, double t1) {
  static constexpr std::array<double, 4> nodes{-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                                               0.8611363115940526};
  static constexpr std::array<double, 4> weights{0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                                                 0.3478548451374538};
  const double mid = 0.5 * (t0 + t1), half = 0.5 * (t1 - t0);
  Eigen::VectorXd acc;
  for (std::size_t k = 0; k < 4; ++k) {
    Eigen::VectorXd v = past.trajectory(mid + half * nodes[k]);
    if (k == 0)
      acc = 0.5 * weights[k] * v;
    else
      acc += 0.5 * weights[k] * v;
  }
  return acc;
}

History::History(const PastProvider& past, double dt, std::size_t depth) : depth_(depth), dt_(dt) {
  if (!(dt > 0.0)) throw ValidationError("history: time step must be positive");
  if (!past.trajectory) throw ValidationError("history: past provider is empty");
  ring_.resize(depth + 1);
  past_.resize(depth + 1);
  for (std::size_t s = 0; s <= depth; ++s) {
    const long long m = static_cast<long long>(s) - static_cast<long long>(depth);
    past_[s] = past_average(past, static_cast<double>(m) * dt, static_cast<double>(m + 1) * dt);
  }
  lipschitz_ = past.lipschitz;
  // Slot (head_ - k) mod (depth+1) holds Z^{-k}.
  head_ = depth;
  for (std::size_t s = 0; s <= depth; ++s) ring_[s] = past_[s];
  n_ = 0;
}

const Eigen::VectorXd& History::back(std::size_t k) const {
  if (k > depth_) throw ValidationError("history lag " + std::to_string(k) + " exceeds depth " + std::to_string(depth_));
  const std::size_t cap = depth_ + 1;
  return ring_[(head_ + cap - k) % cap];
}

void History::push(Eigen::VectorXd z) {
  if (z.size() != ring_.front().size()) throw ValidationError("history: configuration has the wrong dimension");
  head_ = (head_ + 1) % (depth_ + 1);
  ring_[head_] = std::move(z);
  ++n_;
}

ExternalLoad quadratic_load(double nu) {
  if (!(nu > 0.0) || !std::isfinite(nu)) throw ValidationError("load.nu: must be positive");
  ExternalLoad f;
  f.value = [nu](const Eigen::VectorXd& q) { return 0.5 * nu * q.squaredNorm(); };
  f.gradient = [nu](const Eigen::VectorXd& q) -> Eigen::VectorXd { return nu * q; };
  f.modulus = nu;
  f.curvature = nu;
  f.name = "quadratic";
  return f;
}

ExternalLoad quadratic_load(double nu, Eigen::VectorXd centers) {
  if (!(nu > 0.0) || !std::isfinite(nu)) throw ValidationError("load.nu: must be positive");
  ExternalLoad f;
  f.value = [nu, centers](const Eigen::VectorXd& q) {
    if (q.size() != centers.size()) throw ValidationError("load.centers: dimension mismatch");
    return 0.5 * nu * (q - centers).squaredNorm();
  };
  f.gradient = [nu, centers](const Eigen::VectorXd& q) -> Eigen::VectorXd {
    if (q.size() != centers.size()) throw ValidationError("load.centers: dimension mismatch");
    return nu * (q - centers);
  };
  f.modulus = nu;
  f.curvature = nu;
  f.name = "quadratic";
  return f;
}

ExternalLoad zero_load() {
  ExternalLoad f;
  f.value = [](const Eigen::VectorXd&) { return 0.0; };
  f.gradient = [](const Eigen::VectorXd& q) -> Eigen::VectorXd { return Eigen::VectorXd::Zero(q.size()); };
  f.strictly_convex = false;
  f.curvature = 0.0;
  f.name = "zero";
  return f;
}

double load_gradient_error(const ExternalLoad& load, const Eigen::VectorXd& q) {
  const Eigen::VectorXd g = load.gradient(q);
  Eigen::VectorXd fd(q.size());
  Eigen::VectorXd x = q;
  for (Eigen::Index c = 0; c < q.size(); ++c) {
    const double h = 1e-5 * std::max(1.0, std::abs(q[c]));
    x[c] = q[c] + h;
    const double fp = load.value(x);
    x[c] = q[c] - h;
    const double fm = load.value(x);
    x[c] = q[c];
    fd[c] = (fp - fm) / (2.0 * h);
  }
  return (fd - g).norm() / std::max(1.0, g.norm());
}

ExternalLoad custom_load(std::function<double(const Eigen::VectorXd&)> value,
                         std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient,
                         const std::vector<Eigen::VectorXd>& probes, double tol) {
  if (!value || !gradient) throw ValidationError("custom load needs both a value and a gradient");
  ExternalLoad f;
  f.value = std::move(value);
  f.gradient = std::move(gradient);
  f.name = "custom";
  for (const auto& p : probes) {
    const double err = load_gradient_error(f, p);
    if (!(err <= tol))
      throw ValidationError("custom load: gradient fails the finite-difference check (relative error " +
                            std::to_string(err) + ")");
  }
  return f;
}

EnergyContext::EnergyContext(std::shared_ptr<const DensityGrid> grid, History history, double epsilon)
    : grid_(std::move(grid)), history_(std::move(history)), epsilon_(epsilon) {
  if (!grid_) throw ValidationError("energy context: missing density grid");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ValidationError("epsilon: must be positive");
  if (history_.depth() < grid_->L_max) throw ValidationError("history depth below the density truncation index");
  if (history_.n_particles() != grid_->size())
    throw ValidationError("history and density grid disagree on the particle count");
  const auto n = static_cast<Eigen::Index>(grid_->size());
  theta_.resize(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) theta_.segment<2>(2 * i).setConstant(grid_->particles[i].theta);
  recompute_targets();
}

void EnergyContext::recompute_targets() {
  const DensityGrid& g = *grid_;
  const auto n = static_cast<Eigen::Index>(g.size());
  targets_ = Eigen::VectorXd::Zero(2 * n);
  for (std::size_t l = 1; l <= g.L_max; ++l) {
    const Eigen::VectorXd& z = history_.back(l - 1);
    for (Eigen::Index i = 0; i < n; ++i) targets_.segment<2>(2 * i) += g.particles[i].R[l] * z.segment<2>(2 * i);
  }
  targets_ *= g.delta_a;
}

void EnergyContext::advance(Eigen::VectorXd z) {
  history_.push(std::move(z));
  recompute_targets();
}

double delay_energy(const EnergyContext& ctx, const Eigen::VectorXd& q) {
  const DensityGrid& g = ctx.grid();
  const auto n = static_cast<Eigen::Index>(g.size());
  if (q.size() != 2 * n) throw ValidationError("energy: configuration has the wrong dimension");
  double s = 0.0;
  for (std::size_t l = 1; l <= g.L_max; ++l) {
    const Eigen::VectorXd& z = ctx.history().back(l - 1);
    for (Eigen::Index i = 0; i < n; ++i)
      s += (q.segment<2>(2 * i) - z.segment<2>(2 * i)).squaredNorm() * g.particles[i].R[l];
  }
  return g.delta_a / (2.0 * ctx.epsilon()) * s;
}

double energy_value(const EnergyContext& ctx, const ExternalLoad& load, const Eigen::VectorXd& q) {
  return delay_energy(ctx, q) + load.value(q);
}

Eigen::VectorXd delay_operator(const EnergyContext& ctx, const Eigen::VectorXd& q) {
  if (q.size() != ctx.theta().size()) throw ValidationError("delay operator: configuration has the wrong dimension");
  return (ctx.theta().cwiseProduct(q) - ctx.targets()) / ctx.epsilon();
}

Eigen::VectorXd energy_gradient(const EnergyContext& ctx, const ExternalLoad& load, const Eigen::VectorXd& q) {
  return delay_operator(ctx, q) + load.gradient(q);
}

double dissipation(const EnergyContext& ctx) {
  const DensityGrid& g = ctx.grid();
  const auto n = static_cast<Eigen::Index>(g.size());
  const Eigen::VectorXd& latest = ctx.history().back(0);
  double s = 0.0;
  for (std::size_t l = 1; l + 1 <= g.L_max; ++l) {
    const Eigen::VectorXd& z = ctx.history().back(l);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& p = g.particles[i];
      s += (latest.segment<2>(2 * i) - z.segment<2>(2 * i)).squaredNorm() * p.R[l + 1] * p.zeta[l + 1];
    }
  }
  const double eps = ctx.epsilon();
  return 0.5 * g.delta_a * s / (eps * eps);
}

double delay_quadratic(const EnergyContext& ctx) {
  const DensityGrid& g = ctx.grid();
  const auto n = static_cast<Eigen::Index>(g.size());
  const Eigen::VectorXd& latest = ctx.history().back(0);
  double s = 0.0;
  for (std::size_t l = 1; l <= g.L_max; ++l) {
    const Eigen::VectorXd& z = ctx.history().back(l);
    for (Eigen::Index i = 0; i < n; ++i)
      s += (latest.segment<2>(2 * i) - z.segment<2>(2 * i)).squaredNorm() * g.particles[i].R[l];
  }
  return g.delta_a / (2.0 * ctx.epsilon()) * s;
}

}  // namespace dcm
