#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>

#include "dcm/energy.hpp"
#include "dcm/errors.hpp"

using namespace dcm;

namespace {

// One particle, delta_a = 1, only R_1 = 0.5.
std::shared_ptr<const DensityGrid> single_weight_grid() {
  auto g = std::make_shared<DensityGrid>();
  g->delta_a = 1.0;
  g->L_max = 1;
  g->tail_tol = 1e-12;
  ParticleDensity p;
  p.R = {0.0, 0.5};
  p.zeta = {1.0, 1.0, 1.0};
  p.theta = 0.5;
  p.mu0 = 0.5;
  g->particles.push_back(p);
  return g;
}

std::shared_ptr<const DensityGrid> grid_for(std::size_t n, double da, double beta = 1.0, double zeta = 1.0) {
  return std::make_shared<const DensityGrid>(build_density(RateModel::uniform(n, beta, OffRate::constant(zeta)), da));
}

Eigen::VectorXd random_vector(std::mt19937_64& rng, Eigen::Index n, double s = 1.0) {
  std::normal_distribution<double> n01;
  Eigen::VectorXd v(n);
  for (Eigen::Index c = 0; c < n; ++c) v[c] = s * n01(rng);
  return v;
}

// Context whose history was filled by pushing random configurations.
EnergyContext random_context(std::mt19937_64& rng, std::size_t n, double da, double eps, int pushes = 40) {
  auto grid = grid_for(n, da);
  const Eigen::Index d = 2 * static_cast<Eigen::Index>(n);
  History h(PastProvider::constant(random_vector(rng, d)), eps * da, grid->L_max);
  EnergyContext ctx(grid, std::move(h), eps);
  for (int k = 0; k < pushes; ++k) ctx.advance(random_vector(rng, d));
  return ctx;
}

// Direct double sum of the delay energy; back(0) carries R_1.
double delay_oracle(const EnergyContext& ctx, const Eigen::VectorXd& q) {
  const auto& g = ctx.grid();
  double e = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t l = 1; l <= g.L_max; ++l) {
      const Eigen::Vector2d d = q.segment<2>(2 * i) - ctx.history().back(l - 1).segment<2>(2 * i);
      e += d.squaredNorm() * g.particles[i].R[l];
    }
  return g.delta_a / (2.0 * ctx.epsilon()) * e;
}

}  // namespace

TEST_CASE("energy value example") {
  History h(PastProvider::constant(Eigen::Vector2d::Zero()), 1.0, 1);
  EnergyContext ctx(single_weight_grid(), std::move(h), 1.0);
  const ExternalLoad F = quadratic_load(1.0);
  CHECK(energy_value(ctx, F, Eigen::Vector2d(2, 0)) == doctest::Approx(3.0));
}

TEST_CASE("energy reduces to the load when the history equals q") {
  const Eigen::Vector4d q(1, -2, 3, 0.5);
  auto grid = grid_for(2, 0.1);
  EnergyContext ctx(grid, History(PastProvider::constant(q), 0.01, grid->L_max), 0.1);
  const ExternalLoad F = quadratic_load(2.0);
  CHECK(energy_value(ctx, F, q) == doctest::Approx(F.value(q)).epsilon(1e-14));
  CHECK(delay_operator(ctx, q).norm() < 1e-12);
  CHECK(dissipation(ctx) == 0.0);
  const Eigen::VectorXd g = energy_gradient(ctx, zero_load(), q);
  CHECK(g.norm() < 1e-12);
}

TEST_CASE("delay energy matches the direct sum and is nonnegative") {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 20; ++t) {
    const auto ctx = random_context(rng, 3, 0.2, 0.3);
    const Eigen::VectorXd q = random_vector(rng, 6);
    const ExternalLoad F = quadratic_load(0.7);
    CHECK(delay_energy(ctx, q) == doctest::Approx(delay_oracle(ctx, q)).epsilon(1e-11));
    CHECK(energy_value(ctx, F, q) - F.value(q) >= 0.0);
  }
}

TEST_CASE("energy gradient matches central differences") {
  std::mt19937_64 rng(2);
  const ExternalLoad F = quadratic_load(1.3);
  for (int t = 0; t < 100; ++t) {
    const auto ctx = random_context(rng, 2, 0.25, 0.5, 10);
    const Eigen::VectorXd q = random_vector(rng, 4);
    const Eigen::VectorXd g = energy_gradient(ctx, F, q);
    Eigen::VectorXd fd(4);
    for (int c = 0; c < 4; ++c) {
      const double h = 1e-5 * std::max(1.0, std::abs(q[c]));
      Eigen::VectorXd a = q, b = q;
      a[c] += h;
      b[c] -= h;
      fd[c] = (energy_value(ctx, F, a) - energy_value(ctx, F, b)) / (2 * h);
    }
    CHECK((fd - g).norm() <= 1e-6 * std::max(1.0, g.norm()));
  }
}

TEST_CASE("gradient closed form and epsilon scaling") {
  std::mt19937_64 rng(3);
  const auto ctx = random_context(rng, 2, 0.2, 0.4);
  const Eigen::VectorXd q = random_vector(rng, 4);
  const ExternalLoad F = quadratic_load(1.0);
  const Eigen::VectorXd expected =
      (ctx.theta().cwiseProduct(q) - ctx.targets()) / ctx.epsilon() + F.gradient(q);
  CHECK((energy_gradient(ctx, F, q) - expected).norm() < 1e-12);
  CHECK((delay_operator(ctx, q) + F.gradient(q) - energy_gradient(ctx, F, q)).norm() < 1e-12);

  EnergyContext twice(ctx.grid_ptr(), ctx.history(), 2.0 * ctx.epsilon());
  CHECK((delay_operator(twice, q) - 0.5 * delay_operator(ctx, q)).norm() < 1e-13);
}

TEST_CASE("delay operator of a linear drift approaches the friction force") {
  const double da = 0.01, eps = 0.1;
  auto grid = grid_for(1, da);
  const Eigen::Vector2d v(1.5, -0.5);
  History h(PastProvider::drift(Eigen::Vector2d::Zero(), v), eps * da, grid->L_max);
  EnergyContext ctx(grid, std::move(h), eps);
  const Eigen::VectorXd L = delay_operator(ctx, ctx.history().back(0));
  const Eigen::Vector2d friction = 0.5 * v;  // first moment 1/2
  CHECK((L - friction).norm() <= 0.05 * friction.norm());
}

TEST_CASE("past averages are exact for affine pasts") {
  const Eigen::Vector2d q0(1, 2), v(3, -1);
  const auto past = PastProvider::drift(q0, v);
  const Eigen::VectorXd avg = past_average(past, -0.3, -0.1);
  CHECK((avg - (q0 - 0.2 * v)).norm() < 1e-14);
  History h(past, 0.1, 5);
  CHECK((h.back(0) - (q0 + 0.05 * v)).norm() < 1e-14);
  CHECK((h.back(3) - (q0 - 0.25 * v)).norm() < 1e-14);
  CHECK(h.past_lipschitz()[0] == doctest::Approx(v.norm()));
}

TEST_CASE("history ring buffer") {
  History h(PastProvider::constant(Eigen::Vector2d::Zero()), 0.1, 3);
  for (int k = 1; k <= 5; ++k) h.push(Eigen::Vector2d(k, 0));
  CHECK(h.back(0).x() == 5);
  CHECK(h.back(3).x() == 2);
  CHECK(h.latest_index() == 5);
  CHECK_THROWS_AS(h.back(4), ValidationError);
  CHECK_THROWS_AS(h.push(Eigen::Vector4d::Zero()), ValidationError);
}

TEST_CASE("context rejects a history shorter than the density") {
  auto grid = grid_for(1, 0.1);
  CHECK_THROWS_AS(EnergyContext(grid, History(PastProvider::constant(Eigen::Vector2d::Zero()), 0.01, 3), 0.1),
                  ValidationError);
  CHECK_THROWS_AS(
      EnergyContext(grid, History(PastProvider::constant(Eigen::Vector2d::Zero()), 0.01, grid->L_max), 0.0),
      ValidationError);
}

TEST_CASE("dissipation is nonnegative and matches the direct sum") {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 20; ++t) {
    const auto ctx = random_context(rng, 2, 0.3, 0.2);
    const auto& g = ctx.grid();
    double oracle = 0.0;
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t l = 1; l + 1 <= g.L_max; ++l) {
        const Eigen::Vector2d u =
            (ctx.history().back(0).segment<2>(2 * i) - ctx.history().back(l).segment<2>(2 * i)) / ctx.epsilon();
        oracle += u.squaredNorm() * g.particles[i].R[l + 1] * g.particles[i].zeta[l + 1];
      }
    oracle *= g.delta_a / 2.0;
    const double d = dissipation(ctx);
    CHECK(d >= 0.0);
    CHECK(d == doctest::Approx(oracle).epsilon(1e-11));
  }
}

TEST_CASE("unconstrained minimizer decreases the energy") {
  std::mt19937_64 rng(5);
  const double nu = 0.8;
  const ExternalLoad F = quadratic_load(nu);
  for (int t = 0; t < 50; ++t) {
    const auto ctx = random_context(rng, 3, 0.2, 0.3);
    const Eigen::VectorXd qstar =
        ctx.targets().cwiseQuotient(ctx.theta() + Eigen::VectorXd::Constant(6, ctx.epsilon() * nu));
    CHECK(energy_gradient(ctx, F, qstar).norm() < 1e-9);
    CHECK(energy_value(ctx, F, qstar) <= energy_value(ctx, F, ctx.history().back(0)) + 1e-12);
  }
}

TEST_CASE("delay energy is translation covariant") {
  std::mt19937_64 rng(6);
  auto grid = grid_for(2, 0.2);
  const double eps = 0.3;
  std::vector<Eigen::VectorXd> path;
  for (int k = 0; k < 30; ++k) path.push_back(random_vector(rng, 4));
  const Eigen::Vector4d shift(3, -1, 3, -1);
  const Eigen::VectorXd start = random_vector(rng, 4);
  EnergyContext a(grid, History(PastProvider::constant(start), eps * 0.2, grid->L_max), eps);
  EnergyContext b(grid, History(PastProvider::constant(start + shift), eps * 0.2, grid->L_max), eps);
  for (const auto& z : path) {
    a.advance(z);
    b.advance(z + shift);
  }
  const Eigen::VectorXd q = random_vector(rng, 4);
  CHECK(delay_energy(b, q + shift) == doctest::Approx(delay_energy(a, q)).epsilon(1e-12));
}

TEST_CASE("energy Hessian is diagonal with theta/eps + nu") {
  std::mt19937_64 rng(7);
  const double nu = 1.7;
  const ExternalLoad F = quadratic_load(nu);
  const auto ctx = random_context(rng, 2, 0.2, 0.25);
  const Eigen::VectorXd q = random_vector(rng, 4);
  for (int c = 0; c < 4; ++c) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(4);
    e[c] = 1.0;
    const Eigen::VectorXd col = energy_gradient(ctx, F, q + e) - energy_gradient(ctx, F, q);
    for (int r = 0; r < 4; ++r) {
      const double expected = r == c ? ctx.theta()[c] / ctx.epsilon() + nu : 0.0;
      CHECK(col[r] == doctest::Approx(expected).epsilon(1e-10).scale(1.0));
    }
    CHECK(col[c] > 0.0);
  }
}

TEST_CASE("quadratic load") {
  const ExternalLoad F = quadratic_load(1.0);
  CHECK(F.value(Eigen::Vector2d::Zero()) == 0.0);
  CHECK(F.gradient(Eigen::Vector2d::Zero()).norm() == 0.0);
  CHECK(F.value(Eigen::Vector2d(4, 0)) == doctest::Approx(8.0));
  CHECK(F.value(Eigen::Vector4d(2, 2, 2, 2)) == doctest::Approx(8.0));
  std::mt19937_64 rng(8);
  for (int t = 0; t < 20; ++t) CHECK(load_gradient_error(quadratic_load(2.5), random_vector(rng, 6, 3.0)) < 1e-6);
  CHECK_THROWS_AS(quadratic_load(0.0), ValidationError);
  CHECK_THROWS_AS(quadratic_load(-1.0), ValidationError);
  const ExternalLoad C = quadratic_load(2.0, Eigen::Vector2d(1, 1));
  CHECK(C.value(Eigen::Vector2d(1, 1)) == 0.0);
  CHECK(C.gradient(Eigen::Vector2d(2, 1)).isApprox(Eigen::Vector2d(2, 0)));
}

TEST_CASE("custom load hook passes or fails the self-check") {
  std::vector<Eigen::VectorXd> probes{Eigen::Vector2d(0.3, -1), Eigen::Vector2d(2, 1)};
  auto value = [](const Eigen::VectorXd& q) { return std::cosh(q[0]) + q[1] * q[1] * q[1] * q[1]; };
  auto good = [](const Eigen::VectorXd& q) {
    return Eigen::VectorXd(Eigen::Vector2d(std::sinh(q[0]), 4 * q[1] * q[1] * q[1]));
  };
  auto bad = [](const Eigen::VectorXd& q) { return Eigen::VectorXd(Eigen::Vector2d(std::sinh(q[0]), q[1])); };
  const ExternalLoad ok = custom_load(value, good, probes);
  CHECK(ok.value(Eigen::Vector2d(0, 0)) == doctest::Approx(1.0));
  CHECK_THROWS_AS(custom_load(value, bad, probes), ValidationError);
}
