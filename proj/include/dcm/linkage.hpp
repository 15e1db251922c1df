#pragma once

#include <cstddef>
#include <vector>

namespace dcm {

/// Age-dependent unbinding rate. Constant, or tabulated with linear
/// interpolation and constant extrapolation outside the table.
class OffRate {
 public:
  OffRate() = default;  // constant rate 1
  static OffRate constant(double rate);
  static OffRate tabulated(std::vector<double> ages, std::vector<double> values);

  double operator()(double age) const;
  /// Integral of the rate over [0, age].
  double cumulative(double age) const;

  bool is_constant() const { return ages_.empty(); }
  double lower_bound() const;
  double upper_bound() const;
  double lipschitz() const;
  /// Knot ages (empty for a constant rate) and values (one entry for a constant rate).
  const std::vector<double>& ages() const { return ages_; }
  const std::vector<double>& values() const { return values_; }

  friend bool operator==(const OffRate&, const OffRate&) = default;

 private:
  std::vector<double> ages_;
  std::vector<double> values_{1.0};
};

struct ParticleRates {
  double on_rate = 1.0;
  OffRate off_rate;

  friend bool operator==(const ParticleRates&, const ParticleRates&) = default;
};

struct RateModel {
  std::vector<ParticleRates> particles;

  static RateModel uniform(std::size_t n_particles, double on_rate, const OffRate& off_rate);
  std::size_t size() const { return particles.size(); }
  const ParticleRates& operator[](std::size_t i) const { return particles[i]; }
  void validate() const;

  friend bool operator==(const RateModel&, const RateModel&) = default;
};

struct ParticleDensity {
  double on_rate = 0.0;
  double boundary = 0.0;      // R_b
  std::vector<double> R;      // l = 0..L_max
  std::vector<double> zeta;   // off-rate at a_l = l*delta_a, l = 0..L_max+1
  double mu0 = 0.0;
  double mu1 = 0.0;
  double mu2 = 0.0;
  double theta = 0.0;         // delta_a * sum_{l>=1} R_l
  std::size_t own_length = 0; // truncation index certified for this particle alone
};

struct DensityGrid {
  double delta_a = 0.0;
  std::size_t L_max = 0;
  double tail_tol = 0.0;
  std::vector<ParticleDensity> particles;

  std::size_t size() const { return particles.size(); }
  double min_theta() const;
};

/// Implicit Euler discretization of the age-structured bond density, truncated
/// where the certified tail mass drops below tail_tol * mu0.
DensityGrid build_density(const RateModel& rates, double delta_a, double tail_tol = 1e-12);

/// Boundary value implied by a given total mass: R_b = beta (1 - mu0).
double boundary_from_mass(double on_rate, double mu0);

/// Exact (or quadrature-evaluated) stationary bond density of one particle.
class ClosedFormDensity {
 public:
  ClosedFormDensity(const ParticleRates& rates);
  double operator()(double age) const;
  /// Integral of the density over [a, b].
  double integral(double a, double b) const;
  /// Age moment of order k (0, 1 or 2).
  double moment(int k) const;
  double boundary() const { return c_; }

 private:
  double survival_integral(double a, double b, int k) const;
  ParticleRates rates_;
  double c_ = 0.0;
};

double closed_form_density(const RateModel& rates, std::size_t i, double age);
double closed_form_moment(const RateModel& rates, std::size_t i, int k);

/// Piecewise constant reconstruction of the discrete density.
double piecewise_density(const DensityGrid& grid, std::size_t i, double age);

/// L1 distance between the piecewise constant discrete density and the closed
/// form over [0, L_max * delta_a], one value per particle.
std::vector<double> l1_consistency_error(const DensityGrid& grid, const RateModel& rates);

}  // namespace dcm
