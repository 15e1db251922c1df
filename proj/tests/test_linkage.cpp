#include <doctest.h>

#include <cmath>
#include <random>

#include "dcm/errors.hpp"
#include "dcm/linkage.hpp"

using namespace dcm;

namespace {

RateModel unit_rates(std::size_t n = 1) { return RateModel::uniform(n, 1.0, OffRate::constant(1.0)); }

RateModel random_rates(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> beta(0.0, 5.0), zeta(0.2, 5.0), gap(0.1, 2.0);
  std::bernoulli_distribution tab(0.5);
  std::uniform_int_distribution<int> knots(1, 6);
  RateModel m;
  for (std::size_t i = 0; i < n; ++i) {
    ParticleRates p;
    p.on_rate = beta(rng);
    if (tab(rng)) {
      std::vector<double> ages, values;
      double a = 0.0;
      for (int k = knots(rng); k > 0; --k) {
        ages.push_back(a);
        values.push_back(zeta(rng));
        a += gap(rng);
      }
      p.off_rate = OffRate::tabulated(ages, values);
    } else {
      p.off_rate = OffRate::constant(zeta(rng));
    }
    m.particles.push_back(p);
  }
  return m;
}

// Composite Simpson rule on [a, b].
template <class F>
double simpson(F f, double a, double b, int n = 20000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int k = 1; k < n; ++k) s += (k % 2 ? 4.0 : 2.0) * f(a + k * h);
  return s * h / 3.0;
}

// Exact L1 distance between R_l = (1 + da)^-l / (2 + 2 da) on [l da, (l+1) da)
// and exp(-a) / 2, cell by cell with the crossing point split out.
double unit_rate_l1_oracle(double da, std::size_t cells) {
  auto F = [](double a) { return -std::exp(-a) / 2; };  // antiderivative
  double total = 0.0;
  for (std::size_t l = 0; l < cells; ++l) {
    const double r = std::pow(1.0 + da, -static_cast<double>(l)) / (2.0 + 2.0 * da);
    const double a0 = l * da, a1 = (l + 1) * da;
    const double cross = -std::log(2.0 * r);
    auto piece = [&](double lo, double hi) { return std::abs(r * (hi - lo) - (F(hi) - F(lo))); };
    if (cross > a0 && cross < a1)
      total += piece(a0, cross) + piece(cross, a1);
    else
      total += piece(a0, a1);
  }
  return total;
}

}  // namespace

TEST_CASE("unit rates: boundary value and recursion") {
  const auto g = build_density(unit_rates(), 0.1);
  const auto& p = g.particles[0];
  // geometric series: R_0 = 1 / (2 + 2 delta_a)
  CHECK(p.R[0] == doctest::Approx(1.0 / 2.2).epsilon(1e-12));
  CHECK(p.R[0] == doctest::Approx(0.454545454545).epsilon(1e-10));
  for (std::size_t l = 1; l < 20; ++l) CHECK(p.R[l] == doctest::Approx(p.R[l - 1] / 1.1).epsilon(1e-14));
  CHECK(p.boundary == doctest::Approx(1.1 * p.R[0]).epsilon(1e-14));
  CHECK(p.mu0 == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(p.theta == doctest::Approx(p.mu0 - 0.1 * p.R[0]).epsilon(1e-12));
}

TEST_CASE("no births give a zero density") {
  const auto rates = RateModel::uniform(2, 0.0, OffRate::constant(1.0));
  const auto g = build_density(rates, 0.1);
  for (const auto& p : g.particles) {
    for (double r : p.R) CHECK(r == 0.0);
    CHECK(p.mu0 == 0.0);
    CHECK(p.mu1 == 0.0);
    CHECK(p.mu2 == 0.0);
  }
  CHECK(closed_form_density(rates, 0, 0.3) == 0.0);
  for (double e : l1_consistency_error(g, rates)) CHECK(e == 0.0);
}

TEST_CASE("build_density rejects bad steps and tolerances") {
  CHECK_THROWS_AS(build_density(unit_rates(), 0.0), ValidationError);
  CHECK_THROWS_AS(build_density(unit_rates(), -0.1), ValidationError);
  CHECK_THROWS_AS(build_density(unit_rates(), 0.1, 0.0), ValidationError);
  CHECK_THROWS_AS(build_density(unit_rates(), 0.1, 1.0), ValidationError);
}

TEST_CASE("tail bound that cannot be certified within the cap is an error") {
  const auto rates = RateModel::uniform(1, 1.0, OffRate::constant(1e-9));
  CHECK_THROWS_AS(build_density(rates, 1e-3), SolverError);
}

TEST_CASE("positivity, saturation and monotone decay on random rate models") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> step(0.02, 0.5);
  int violations = 0;
  for (int t = 0; t < 200; ++t) {
    const auto rates = random_rates(rng, 3);
    const auto g = build_density(rates, step(rng));
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto& p = g.particles[i];
      if (p.mu0 > 1.0) ++violations;
      for (std::size_t l = 0; l < p.R.size(); ++l) {
        if (p.R[l] < 0.0) ++violations;
        if (l > 0 && p.R[l] > p.R[l - 1]) ++violations;
      }
      if (p.boundary < 0.0) ++violations;
      CHECK(p.theta == doctest::Approx(p.mu0 - g.delta_a * p.R[0]).epsilon(1e-12));
      // certified geometric tail: delta_a * sum_{l > L} R_l <= R_L / zeta_min
      const double tail = p.R[g.L_max] / rates[i].off_rate.lower_bound();
      CHECK(tail <= 1.0001 * g.tail_tol * std::max(p.mu0, 1e-300) + 1e-300);
    }
  }
  CHECK(violations == 0);
}

TEST_CASE("mass above one forces a negative boundary value") {
  CHECK(boundary_from_mass(1.0, 1.2) < 0.0);
  CHECK(boundary_from_mass(2.0, 0.5) == doctest::Approx(1.0));
  CHECK(boundary_from_mass(2.0, 1.0) == 0.0);
}

TEST_CASE("closed form for unit rates") {
  const auto rates = unit_rates();
  CHECK(closed_form_density(rates, 0, 0.0) == doctest::Approx(0.5).epsilon(1e-14));
  for (double a : {0.1, 0.7, 2.0, 5.0}) CHECK(closed_form_density(rates, 0, a) == doctest::Approx(std::exp(-a) / 2));
  CHECK(closed_form_moment(rates, 0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(closed_form_moment(rates, 0, 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(closed_form_moment(rates, 0, 2) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(closed_form_density(rates, 0, -1.0), ValidationError);
}

TEST_CASE("closed form for constant rates") {
  const auto rates = RateModel::uniform(1, 3.0, OffRate::constant(2.0));
  for (double a : {0.0, 0.4, 3.0})
    CHECK(closed_form_density(rates, 0, a) == doctest::Approx(3.0 * std::exp(-2.0 * a) / (1.0 + 1.5)));
}

TEST_CASE("closed form for a tabulated rate against Simpson quadrature") {
  // zeta(a) = 1 + a on [0, 4], constant 5 beyond
  const auto rates = RateModel::uniform(1, 2.0, OffRate::tabulated({0.0, 4.0}, {1.0, 5.0}));
  auto survival = [](double a) {
    return a <= 4.0 ? std::exp(-(a + a * a / 2)) : std::exp(-12.0 - 5.0 * (a - 4.0));
  };
  const double mass = simpson(survival, 0.0, 4.0) + std::exp(-12.0) / 5.0;
  const double c = 2.0 / (1.0 + 2.0 * mass);
  for (double a : {0.0, 0.5, 1.7, 3.9, 4.5})
    CHECK(closed_form_density(rates, 0, a) == doctest::Approx(c * survival(a)).epsilon(1e-9));
  const double m1 = simpson([&](double a) { return a * survival(a); }, 0.0, 4.0) +
                    std::exp(-12.0) * (4.0 / 5.0 + 1.0 / 25.0);
  CHECK(closed_form_moment(rates, 0, 1) == doctest::Approx(c * m1).epsilon(1e-8));
}

TEST_CASE("constant table and constant rate agree") {
  const auto a = RateModel::uniform(1, 1.5, OffRate::constant(0.7));
  const auto b = RateModel::uniform(1, 1.5, OffRate::tabulated({0.0, 3.0}, {0.7, 0.7}));
  const auto ga = build_density(a, 0.05), gb = build_density(b, 0.05);
  CHECK(ga.particles[0].mu0 == doctest::Approx(gb.particles[0].mu0).epsilon(1e-12));
  CHECK(closed_form_moment(a, 0, 2) == doctest::Approx(closed_form_moment(b, 0, 2)).epsilon(1e-9));
}

TEST_CASE("off-rate validation") {
  CHECK_THROWS_AS(OffRate::constant(0.0), ValidationError);
  CHECK_THROWS_AS(OffRate::tabulated({0.0, 0.0}, {1.0, 1.0}), ValidationError);
  CHECK_THROWS_AS(OffRate::tabulated({0.0, 1.0}, {1.0, -1.0}), ValidationError);
  CHECK_THROWS_AS(OffRate::tabulated({}, {}), ValidationError);
  const auto t = OffRate::tabulated({1.0, 3.0}, {2.0, 4.0});
  CHECK(t(0.0) == 2.0);
  CHECK(t(2.0) == doctest::Approx(3.0));
  CHECK(t(10.0) == 4.0);
  CHECK(t.cumulative(3.0) == doctest::Approx(2.0 + 6.0));
  CHECK(t.lipschitz() == doctest::Approx(1.0));
}

TEST_CASE("L1 consistency refinement for unit rates") {
  const auto rates = unit_rates();
  const double e1 = l1_consistency_error(build_density(rates, 0.1), rates)[0];
  const double e2 = l1_consistency_error(build_density(rates, 0.05), rates)[0];
  const double e3 = l1_consistency_error(build_density(rates, 0.025), rates)[0];
  CHECK(e1 > e2);
  CHECK(e2 > e3);
  const double order = std::log2(e1 / e3) / 2.0;
  CHECK(order >= 0.9);
  CHECK(e1 == doctest::Approx(unit_rate_l1_oracle(0.1, build_density(rates, 0.1).L_max)).epsilon(1e-9));
  CHECK(e3 == doctest::Approx(unit_rate_l1_oracle(0.025, build_density(rates, 0.025).L_max)).epsilon(1e-9));
  // oracle values, frozen
  CHECK(e1 == doctest::Approx(2.104e-2).epsilon(2e-3));
  CHECK(e2 == doctest::Approx(1.066e-2).epsilon(2e-3));
  CHECK(e3 == doctest::Approx(5.367e-3).epsilon(2e-3));
}

TEST_CASE("L1 error oracle by fine sub-sampling") {
  const auto rates = RateModel::uniform(1, 2.0, OffRate::tabulated({0.0, 2.0}, {0.5, 3.0}));
  const auto g = build_density(rates, 0.2);
  double oracle = 0.0;
  const int sub = 400;
  for (std::size_t l = 0; l < g.L_max; ++l) {
    const double h = g.delta_a / sub;
    for (int s = 0; s < sub; ++s) {
      const double a = l * g.delta_a + (s + 0.5) * h;
      oracle += std::abs(piecewise_density(g, 0, a) - closed_form_density(rates, 0, a)) * h;
    }
  }
  const double err = l1_consistency_error(g, rates)[0];
  CHECK(err >= 0.0);
  CHECK(err == doctest::Approx(oracle).epsilon(1e-4));
}

TEST_CASE("discrete moments approach the analytic ones at first order") {
  const auto rates = RateModel::uniform(1, 1.3, OffRate::constant(0.8));
  for (int k = 0; k <= 2; ++k) {
    const double exact = closed_form_moment(rates, 0, k);
    double prev = INFINITY;
    for (double da : {0.1, 0.05, 0.025}) {
      const auto& p = build_density(rates, da).particles[0];
      const double mk = k == 0 ? p.mu0 : k == 1 ? p.mu1 : p.mu2;
      const double err = std::abs(mk - exact);
      CHECK(err <= 10.0 * da);
      CHECK(err <= prev + 1e-10);  // k = 0, 1 are exact up to truncation
      prev = err;
    }
  }
}
