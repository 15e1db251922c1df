#include <doctest.h>

#include <cmath>
#include <random>

#include "dcm/errors.hpp"
#include "dcm/geometry.hpp"

using namespace dcm;

namespace {

Configuration pair_at(Vec2 a, Vec2 b, double ra = 1.0, double rb = 1.0) {
  return Configuration::from_points({a, b}, {ra, rb});
}

// Minimum over image offsets in [-3, 3]^2 of the center separation.
struct BruteImage {
  double norm;
  Vec2 separation;
};

BruteImage brute_force_image(Vec2 x, double L, double H) {
  BruteImage best{std::numeric_limits<double>::infinity(), Vec2::Zero()};
  for (int h = -3; h <= 3; ++h)
    for (int k = -3; k <= 3; ++k) {
      const double sx = x.x() - h * L, sy = x.y() - k * H;
      const double n = std::sqrt(sx * sx + sy * sy);
      if (n < best.norm) best = {n, Vec2(sx, sy)};
    }
  return best;
}

}  // namespace

TEST_CASE("signed distance examples") {
  CHECK(signed_distance(pair_at({0, 0}, {3, 0}), 0, 1) == doctest::Approx(1.0));
  CHECK(signed_distance(pair_at({0, 0}, {2, 0}), 0, 1) == 0.0);
  CHECK(signed_distance(pair_at({0, 0}, {1.5, 0}), 0, 1) == doctest::Approx(-0.5));
}

TEST_CASE("signed distance rejects bad indices") {
  const auto q = pair_at({0, 0}, {3, 0});
  CHECK_THROWS_AS(signed_distance(q, 1, 0), ValidationError);
  CHECK_THROWS_AS(signed_distance(q, 0, 2), ValidationError);
  CHECK_THROWS_AS(signed_distance(q, 1, 1), ValidationError);
}

TEST_CASE("configuration validation") {
  CHECK_THROWS_AS(Configuration::from_points({{0, 0}}, {-1.0}), ValidationError);
  CHECK_THROWS_AS(Configuration::from_points({{0, 0}}, {0.0}), ValidationError);
  CHECK_THROWS_AS(Configuration::from_points({{NAN, 0}}, {1.0}), ValidationError);
  CHECK_THROWS_AS(Configuration::from_points({}, {}), ValidationError);
  CHECK_THROWS_AS(Configuration::from_points({{0, 0}, {1, 1}}, {1.0}), ValidationError);
}

TEST_CASE("distance gradient examples") {
  const auto g = distance_gradient(pair_at({0, 0}, {3, 0}), 0, 1);
  CHECK(g.direction.x() == 1.0);
  CHECK(g.direction.y() == 0.0);
  Eigen::VectorXd expected(4);
  expected << -1, 0, 1, 0;
  CHECK(g.embedded(2) == expected);

  const auto g2 = distance_gradient(pair_at({0, 0}, {0, 5}), 0, 1);
  CHECK(g2.direction.x() == 0.0);
  CHECK(g2.direction.y() == 1.0);

  const auto g3 = distance_gradient(pair_at({1, 1}, {2, 2}), 0, 1);
  CHECK(g3.direction.x() == doctest::Approx(std::sqrt(2.0) / 2));
  CHECK(g3.direction.y() == doctest::Approx(std::sqrt(2.0) / 2));
  CHECK(g3.direction.norm() == doctest::Approx(1.0));
}

TEST_CASE("coincident centers are a singular gradient") {
  CHECK_THROWS_AS(distance_gradient(pair_at({1, 1}, {1, 1}), 0, 1), SingularGradientError);
  const auto torus = DomainSpec::make_torus(10, 10);
  CHECK_THROWS_AS(periodic_gradient(pair_at({1, 1}, {11, 1}), 0, 1, torus), SingularGradientError);
}

TEST_CASE("embedded gradients have norm sqrt 2 and sit in slots i and j") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Vec2> pts;
    for (int p = 0; p < 5; ++p) pts.emplace_back(u(rng), u(rng));
    const auto q = Configuration::from_points(pts, std::vector<double>(5, 0.1));
    const auto g = distance_gradient(q, 1, 3);
    const Eigen::VectorXd e = g.embedded(5);
    CHECK(e.norm() == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
    for (int c : {0, 1, 4, 5, 8, 9}) CHECK(e[c] == 0.0);
    CHECK(e.segment<2>(2) == -g.direction);
    CHECK(e.segment<2>(6) == g.direction);
  }
}

TEST_CASE("feasibility examples") {
  const auto plane = DomainSpec::make_plane();
  CHECK(is_feasible(pair_at({0, 0}, {3, 0}), plane, 0.0));
  CHECK_FALSE(is_feasible(pair_at({0, 0}, {1.5, 0}), plane, 0.0));
  CHECK(is_feasible(Configuration::from_points({{0, 0}}, {1.0}), plane, 0.0));
  CHECK(is_feasible(pair_at({0, 0}, {2 - 1e-10, 0}), plane, 1e-9));
  CHECK_THROWS_AS(is_feasible(pair_at({0, 0}, {3, 0}), plane, -1.0), ValidationError);
}

TEST_CASE("wrap examples") {
  const auto torus = DomainSpec::make_torus(10, 10);
  auto w = wrap({12, -3}, torus);
  CHECK(w.point.x() == doctest::Approx(2));
  CHECK(w.point.y() == doctest::Approx(7));
  CHECK(w.cell_x == 1);
  CHECK(w.cell_y == -1);
  w = wrap({0, 0}, torus);
  CHECK(w.point == Vec2(0, 0));
  CHECK(w.cell_x == 0);
  CHECK(w.cell_y == 0);
  w = wrap({10, 10}, torus);
  CHECK(w.point == Vec2(0, 0));
  CHECK(w.cell_x == 1);
  CHECK(w.cell_y == 1);
  CHECK_THROWS_AS(wrap({0, 0}, DomainSpec::make_plane()), ValidationError);
}

TEST_CASE("wrap stays in the half-open cell") {
  const auto torus = DomainSpec::make_torus(3.7, 1.3);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int t = 0; t < 2000; ++t) {
    const Vec2 x(u(rng), u(rng));
    const auto w = wrap(x, torus);
    CHECK(w.point.x() >= 0.0);
    CHECK(w.point.x() < 3.7);
    CHECK(w.point.y() >= 0.0);
    CHECK(w.point.y() < 1.3);
    CHECK(w.point.x() + w.cell_x * 3.7 == doctest::Approx(x.x()).epsilon(1e-12));
    CHECK(w.point.y() + w.cell_y * 1.3 == doctest::Approx(x.y()).epsilon(1e-12));
  }
}

TEST_CASE("torus validation") {
  CHECK_THROWS_AS(DomainSpec::make_torus(0, 1), ValidationError);
  CHECK_THROWS_AS(DomainSpec::make_torus(1, -1), ValidationError);
}

TEST_CASE("periodic distance examples") {
  const auto torus = DomainSpec::make_torus(10, 10);
  // 1-D reduction: separation 6 on a period of 10 gives 4.
  const auto a = periodic_signed_distance(pair_at({0, 0}, {6, 0}, 0.5, 0.5), 0, 1, torus);
  CHECK(a.distance + 1.0 == doctest::Approx(4.0));
  const auto b = periodic_signed_distance(pair_at({1, 0}, {9, 0}), 0, 1, torus);
  CHECK(b.distance == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("periodic distance equals brute force over [-3,3]^2 exactly") {
  std::mt19937_64 rng(20240117);
  std::uniform_real_distribution<double> side(1.0, 20.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> rad(0.05, 1.0);
  int mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    const double L = side(rng), H = side(rng);
    const auto torus = DomainSpec::make_torus(L, H);
    const Vec2 a(unit(rng) * L, unit(rng) * H), b(unit(rng) * L, unit(rng) * H);
    const double ra = rad(rng), rb = rad(rng);
    const auto q = pair_at(a, b, ra, rb);
    const auto pd = periodic_signed_distance(q, 0, 1, torus);
    const auto brute = brute_force_image(b - a, L, H);
    if (pd.distance != brute.norm - (ra + rb)) ++mismatches;
  }
  CHECK(mismatches == 0);
}

TEST_CASE("periodic distance is invariant under lattice translations") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> shift(-4, 4);
  const double L = 7.0, H = 4.5;
  const auto torus = DomainSpec::make_torus(L, H);
  for (int t = 0; t < 500; ++t) {
    const Vec2 a(u(rng) * L, u(rng) * H), b(u(rng) * L, u(rng) * H);
    const double d0 = periodic_signed_distance(pair_at(a, b, 0.2, 0.3), 0, 1, torus).distance;
    const Vec2 a2 = a + Vec2(shift(rng) * L, shift(rng) * H);
    const Vec2 b2 = b + Vec2(shift(rng) * L, shift(rng) * H);
    const double d1 = periodic_signed_distance(pair_at(a2, b2, 0.2, 0.3), 0, 1, torus).distance;
    CHECK(d1 == doctest::Approx(d0).epsilon(1e-11));
  }
}

TEST_CASE("periodic and plane distances agree inside one cell") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(4.0, 6.0);
  const auto torus = DomainSpec::make_torus(10, 10);
  for (int t = 0; t < 300; ++t) {
    const auto q = pair_at({u(rng), u(rng)}, {u(rng), u(rng)}, 0.1, 0.1);
    if ((q.position(1) - q.position(0)).norm() < 1e-9) continue;
    CHECK(periodic_signed_distance(q, 0, 1, torus).distance == doctest::Approx(signed_distance(q, 0, 1)));
    const auto gp = periodic_gradient(q, 0, 1, torus), gq = distance_gradient(q, 0, 1);
    CHECK((gp.direction - gq.direction).norm() < 1e-12);
  }
}

TEST_CASE("signed distance is symmetric and translation invariant") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int t = 0; t < 300; ++t) {
    const Vec2 a(u(rng), u(rng)), b(u(rng), u(rng)), s(u(rng), u(rng));
    const double d = signed_distance(pair_at(a, b, 0.5, 0.7), 0, 1);
    CHECK(signed_distance(pair_at(b, a, 0.7, 0.5), 0, 1) == doctest::Approx(d));
    CHECK(signed_distance(pair_at(a + s, b + s, 0.5, 0.7), 0, 1) == doctest::Approx(d).epsilon(1e-12));
  }
}

TEST_CASE("periodic gradient examples") {
  const auto torus = DomainSpec::make_torus(10, 10);
  const auto g = periodic_gradient(pair_at({1, 0}, {9, 0}), 0, 1, torus);
  CHECK(g.direction.x() == doctest::Approx(-1.0));
  CHECK(g.direction.y() == doctest::Approx(0.0));
  // swapping the roles flips the direction
  const auto gs = periodic_gradient(pair_at({9, 0}, {1, 0}), 0, 1, torus);
  CHECK((gs.direction + g.direction).norm() < 1e-14);
  CHECK((gs.embedded(2) + g.embedded(2)).norm() < 1e-14);
}

TEST_CASE("half-period ties pick the smallest offset and are flagged") {
  const auto torus = DomainSpec::make_torus(10, 10);
  const auto pd = periodic_signed_distance(pair_at({0, 0}, {5, 0}, 0.5, 0.5), 0, 1, torus);
  CHECK(pd.degenerate);
  CHECK(pd.h == 0);
  CHECK(pd.k == 0);
  CHECK(pd.distance == doctest::Approx(4.0));
  const auto clean = periodic_signed_distance(pair_at({0, 0}, {3, 1}, 0.5, 0.5), 0, 1, torus);
  CHECK_FALSE(clean.degenerate);
}

TEST_CASE("prox-regularity radius") {
  const std::vector<double> ones3(3, 1.0), ones2(2, 1.0);
  // independent evaluation: (sin(pi/3) / (2 sqrt 2))^3 * 2 / 6
  const double s = std::sin(M_PI / 3.0) / (2.0 * std::sqrt(2.0));
  const double oracle = s * s * s * 2.0 / 6.0;
  const double eta = prox_regularity_eta(3, 2, ones3);
  CHECK(eta == doctest::Approx(oracle).epsilon(1e-13));
  CHECK(eta == doctest::Approx(9.5686e-3).epsilon(1e-4));
  // hand value quoted to four figures as 9.570e-3
  CHECK(std::abs(eta - 9.570e-3) / 9.570e-3 < 5e-4);
  CHECK(prox_regularity_eta(2, 1, ones2) == 0.0);
  const std::vector<double> scaled(3, 2.5);
  CHECK(prox_regularity_eta(3, 2, scaled) == doctest::Approx(2.5 * eta).epsilon(1e-13));
}
