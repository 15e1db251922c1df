#include "dcm/linkage.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <string>

#include "dcm/errors.hpp"

namespace dcm {

namespace {

constexpr std::size_t kMaxAgeSteps = 50'000'000;

double gk(auto&& f, double a, double b) {
  if (b <= a) return 0.0;
  double err = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 15, 1e-14, &err);
  if (!std::isfinite(v) || err > 1e-9 * std::max(1.0, std::abs(v)))
    throw SolverError("quadrature did not converge on [" + std::to_string(a) + ", " + std::to_string(b) + "]");
  return v;
}

}  // namespace

OffRate OffRate::constant(double rate) {
  if (!(rate > 0.0) || !std::isfinite(rate)) throw ValidationError("rates.zeta: off-rate must be positive");
  OffRate r;
  r.values_ = {rate};
  return r;
}

OffRate OffRate::tabulated(std::vector<double> ages, std::vector<double> values) {
  if (ages.empty() || ages.size() != values.size())
    throw ValidationError("rates.zeta: table needs matching, nonempty ages and values");
  for (std::size_t k = 0; k < ages.size(); ++k) {
    if (!std::isfinite(ages[k]) || ages[k] < 0.0) throw ValidationError("rates.zeta: ages must be finite and >= 0");
    if (k > 0 && !(ages[k] > ages[k - 1])) throw ValidationError("rates.zeta: ages must be strictly increasing");
    if (!(values[k] > 0.0) || !std::isfinite(values[k]))
      throw ValidationError("rates.zeta: tabulated off-rates must be positive");
  }
  OffRate r;
  if (ages.size() == 1) {
    r.values_ = {values[0]};
    return r;
  }
  r.ages_ = std::move(ages);
  r.values_ = std::move(values);
  return r;
}

double OffRate::operator()(double age) const {
  if (ages_.empty()) return values_[0];
  if (age <= ages_.front()) return values_.front();
  if (age >= ages_.back()) return values_.back();
  const auto it = std::upper_bound(ages_.begin(), ages_.end(), age);
  const std::size_t k = static_cast<std::size_t>(it - ages_.begin());
  const double w = (age - ages_[k - 1]) / (ages_[k] - ages_[k - 1]);
  return values_[k - 1] + w * (values_[k] - values_[k - 1]);
}

double OffRate::cumulative(double age) const {
  if (age <= 0.0) return 0.0;
  if (ages_.empty()) return values_[0] * age;
  double total = 0.0;
  const double head = std::min(age, ages_.front());
  total += values_.front() * head;
  if (age <= ages_.front()) return total;
  for (std::size_t k = 1; k < ages_.size(); ++k) {
    const double a0 = ages_[k - 1];
    const double a1 = std::min(ages_[k], age);
    if (a1 <= a0) break;
    total += 0.5 * ((*this)(a0) + (*this)(a1)) * (a1 - a0);
    if (age <= ages_[k]) return total;
  }
  total += values_.back() * (age - ages_.back());
  return total;
}

double OffRate::lower_bound() const { return *std::min_element(values_.begin(), values_.end()); }
double OffRate::upper_bound() const { return *std::max_element(values_.begin(), values_.end()); }

double OffRate::lipschitz() const {
  double L = 0.0;
  for (std::size_t k = 1; k < ages_.size(); ++k)
    L = std::max(L, std::abs(values_[k] - values_[k - 1]) / (ages_[k] - ages_[k - 1]));
  return L;
}

RateModel RateModel::uniform(std::size_t n_particles, double on_rate, const OffRate& off_rate) {
  RateModel m;
  m.particles.assign(n_particles, ParticleRates{on_rate, off_rate});
  m.validate();
  return m;
}

void RateModel::validate() const {
  for (std::size_t i = 0; i < particles.size(); ++i) {
    const double b = particles[i].on_rate;
    if (!(b >= 0.0) || !std::isfinite(b))
      throw ValidationError("rates.beta[" + std::to_string(i) + "]: on-rate must be finite and >= 0");
    if (!(particles[i].off_rate.lower_bound() > 0.0))
      throw ValidationError("rates.zeta[" + std::to_string(i) + "]: off-rate must be positive");
  }
}

double DensityGrid::min_theta() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& p : particles) m = std::min(m, p.theta);
  return particles.empty() ? 0.0 : m;
}

double boundary_from_mass(double on_rate, double mu0) { return on_rate * (1.0 - mu0); }

DensityGrid build_density(const RateModel& rates, double delta_a, double tail_tol) {
  if (!(delta_a > 0.0) || !std::isfinite(delta_a)) throw ValidationError("delta_a: age step must be positive");
  if (!(tail_tol > 0.0 && tail_tol < 1.0)) throw ValidationError("tail_tol must lie in (0, 1)");
  rates.validate();

  DensityGrid grid;
  grid.delta_a = delta_a;
  grid.tail_tol = tail_tol;
  grid.particles.resize(rates.size());

  // Pass 1: boundary values and per-particle truncation index.
  std::vector<std::vector<double>> products(rates.size());
  std::size_t L_max = 1;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    const ParticleRates& pr = rates[i];
    ParticleDensity& pd = grid.particles[i];
    pd.on_rate = pr.on_rate;
    if (pr.on_rate == 0.0) continue;
    const double zmin = pr.off_rate.lower_bound();
    std::vector<double>& P = products[i];
    P.push_back(1.0);
    double S = 0.0;
    // Sum of the products, to machine precision via the geometric tail bound.
    for (std::size_t l = 1;; ++l) {
      if (l > kMaxAgeSteps)
        throw SolverError("density tail bound not certified within " + std::to_string(kMaxAgeSteps) +
                          " age steps (off-rate lower bound too small)");
      const double p = P.back() / (1.0 + delta_a * pr.off_rate(static_cast<double>(l) * delta_a));
      P.push_back(p);
      S += p;
      if (p / (delta_a * zmin) <= 1e-17 * S) break;
    }
    const double z0 = pr.off_rate(0.0);
    const double R0 = pr.on_rate / (1.0 + delta_a * (pr.on_rate + z0 + pr.on_rate * S));
    pd.boundary = (1.0 + delta_a * z0) * R0;
    const double mass = delta_a * R0 * (1.0 + S);
    std::size_t own = 1;
    while (own + 1 < P.size() && R0 * P[own] / zmin >= tail_tol * mass) ++own;
    pd.own_length = own;
    pd.R.assign(1, R0);
    L_max = std::max(L_max, own);
  }
  grid.L_max = L_max;

  // Pass 2: fill the common grid and moments.
  for (std::size_t i = 0; i < rates.size(); ++i) {
    const ParticleRates& pr = rates[i];
    ParticleDensity& pd = grid.particles[i];
    pd.zeta.resize(L_max + 2);
    for (std::size_t l = 0; l < L_max + 2; ++l) pd.zeta[l] = pr.off_rate(static_cast<double>(l) * delta_a);
    if (pr.on_rate == 0.0) {
      pd.R.assign(L_max + 1, 0.0);
      continue;
    }
    const double R0 = pd.R[0];
    pd.R.resize(L_max + 1);
    for (std::size_t l = 1; l <= L_max; ++l) pd.R[l] = pd.R[l - 1] / (1.0 + delta_a * pd.zeta[l]);
    double theta = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::size_t l = 1; l <= L_max; ++l) {
      const double a = static_cast<double>(l) * delta_a;
      theta += pd.R[l];
      m1 += a * pd.R[l];
      m2 += a * a * pd.R[l];
    }
    pd.theta = delta_a * theta;
    pd.mu0 = delta_a * R0 + pd.theta;
    pd.mu1 = delta_a * m1;
    pd.mu2 = delta_a * m2;
  }
  return grid;
}

ClosedFormDensity::ClosedFormDensity(const ParticleRates& rates) : rates_(rates) {
  if (rates_.on_rate == 0.0) return;
  const double J = survival_integral(0.0, std::numeric_limits<double>::infinity(), 0);
  c_ = rates_.on_rate / (1.0 + rates_.on_rate * J);
}

// Integral of a^k exp(-Z(a)) over [a, b], b may be +inf.
double ClosedFormDensity::survival_integral(double a, double b, int k) const {
  const OffRate& z = rates_.off_rate;
  if (b <= a) return 0.0;
  // Exponential tail of a constant rate zeta starting at age A, integrated over [a, b].
  auto exp_piece = [&](double A, double zeta, double lo, double hi) {
    const double scale = std::exp(-z.cumulative(A));
    // Antiderivative of a^k e^{-zeta (a - A)}.
    auto anti = [&](double x) {
      if (std::isinf(x)) return 0.0;
      const double e = std::exp(-zeta * (x - A));
      if (k == 0) return -e / zeta;
      if (k == 1) return -e * (x / zeta + 1.0 / (zeta * zeta));
      return -e * (x * x / zeta + 2.0 * x / (zeta * zeta) + 2.0 / (zeta * zeta * zeta));
    };
    return scale * (anti(hi) - anti(lo));
  };
  if (z.is_constant()) return exp_piece(0.0, z(0.0), a, b);

  const auto& ages = z.ages();
  double total = 0.0;
  // Before the first knot the rate is constant.
  if (a < ages.front()) total += exp_piece(0.0, z(0.0), a, std::min(b, ages.front()));
  auto f = [&](double x) { return std::pow(x, k) * std::exp(-z.cumulative(x)); };
  for (std::size_t m = 1; m < ages.size(); ++m) {
    const double lo = std::max(a, ages[m - 1]);
    const double hi = std::min(b, ages[m]);
    if (hi > lo) total += gk(f, lo, hi);
  }
  if (b > ages.back()) total += exp_piece(ages.back(), z.values().back(), std::max(a, ages.back()), b);
  return total;
}

double ClosedFormDensity::operator()(double age) const {
  if (age < 0.0) throw ValidationError("closed_form_density: age must be >= 0");
  if (c_ == 0.0) return 0.0;
  return c_ * std::exp(-rates_.off_rate.cumulative(age));
}

double ClosedFormDensity::integral(double a, double b) const {
  if (c_ == 0.0) return 0.0;
  return c_ * survival_integral(a, b, 0);
}

double ClosedFormDensity::moment(int k) const {
  if (k < 0 || k > 2) throw ValidationError("closed_form_moment: order must be 0, 1 or 2");
  if (c_ == 0.0) return 0.0;
  return c_ * survival_integral(0.0, std::numeric_limits<double>::infinity(), k);
}

double closed_form_density(const RateModel& rates, std::size_t i, double age) {
  if (i >= rates.size()) throw ValidationError("particle index out of range");
  return ClosedFormDensity(rates[i])(age);
}

double closed_form_moment(const RateModel& rates, std::size_t i, int k) {
  if (i >= rates.size()) throw ValidationError("particle index out of range");
  return ClosedFormDensity(rates[i]).moment(k);
}

double piecewise_density(const DensityGrid& grid, std::size_t i, double age) {
  if (i >= grid.size()) throw ValidationError("particle index out of range");
  if (age < 0.0) throw ValidationError("age must be >= 0");
  const auto l = static_cast<std::size_t>(std::floor(age / grid.delta_a));
  if (l > grid.L_max) return 0.0;
  return grid.particles[i].R[l];
}

std::vector<double> l1_consistency_error(const DensityGrid& grid, const RateModel& rates) {
  if (grid.size() != rates.size()) throw ValidationError("grid and rate model sizes differ");
  std::vector<double> out(grid.size(), 0.0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (rates[i].on_rate == 0.0) continue;
    const ClosedFormDensity rho(rates[i]);
    const auto& R = grid.particles[i].R;
    double err = 0.0;
    for (std::size_t l = 0; l < grid.L_max; ++l) {
      const double a0 = static_cast<double>(l) * grid.delta_a;
      const double a1 = static_cast<double>(l + 1) * grid.delta_a;
      const double r = R[l];
      // The closed form is strictly decreasing: at most one crossing per cell.
      if (rho(a0) <= r) {
        err += r * (a1 - a0) - rho.integral(a0, a1);
      } else if (rho(a1) >= r) {
        err += rho.integral(a0, a1) - r * (a1 - a0);
      } else {
        double lo = a0, hi = a1;
        for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, a1); ++it) {
          const double mid = 0.5 * (lo + hi);
          (rho(mid) > r ? lo : hi) = mid;
        }
        const double x = 0.5 * (lo + hi);
        err += rho.integral(a0, x) - r * (x - a0);
        err += r * (a1 - x) - rho.integral(x, a1);
      }
    }
    out[i] = std::max(err, 0.0);
  }
  return out;
}

}  // namespace dcm
