#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace dcm {

using Vec2 = Eigen::Vector2d;

/// Disk centers packed as q = (x_0, y_0, x_1, y_1, ...) plus fixed radii.
class Configuration {
 public:
  Configuration() = default;
  /// Throws ValidationError on empty input, size mismatch, non-positive radius
  /// or non-finite coordinate.
  Configuration(Eigen::VectorXd coordinates, std::vector<double> radii);

  static Configuration from_points(const std::vector<Vec2>& points, std::vector<double> radii);

  std::size_t size() const { return static_cast<std::size_t>(q_.size() / 2); }
  bool empty() const { return q_.size() == 0; }
  const Eigen::VectorXd& coordinates() const { return q_; }
  Vec2 position(std::size_t i) const { return q_.segment<2>(2 * static_cast<Eigen::Index>(i)); }
  double radius(std::size_t i) const { return (*radii_)[i]; }
  std::span<const double> radii() const;
  double max_radius() const;

  /// Same radii, new centers (radii storage is shared, not copied).
  Configuration with_coordinates(Eigen::VectorXd coordinates) const;

  friend bool operator==(const Configuration& a, const Configuration& b);

 private:
  Eigen::VectorXd q_;
  std::shared_ptr<const std::vector<double>> radii_;
};

enum class DomainKind { plane, torus };

struct DomainSpec {
  DomainKind kind = DomainKind::plane;
  double L = 0.0;
  double H = 0.0;

  static DomainSpec make_plane() { return {}; }
  /// Throws ValidationError unless L > 0 and H > 0.
  static DomainSpec make_torus(double L, double H);
  bool is_torus() const { return kind == DomainKind::torus; }
  void validate() const;

  friend bool operator==(const DomainSpec&, const DomainSpec&) = default;
};

/// Gradient of D_ij: -e at slot i, +e at slot j.
struct PairGradient {
  std::size_t i = 0;
  std::size_t j = 0;
  Vec2 direction = Vec2::Zero();

  Eigen::VectorXd embedded(std::size_t n_particles) const;
};

double signed_distance(const Configuration& q, std::size_t i, std::size_t j);
PairGradient distance_gradient(const Configuration& q, std::size_t i, std::size_t j);

struct Wrapped {
  Vec2 point;
  long long cell_x = 0;
  long long cell_y = 0;
};

/// Reduce x into [0, L) x [0, H).
Wrapped wrap(const Vec2& x, const DomainSpec& torus);

struct PeriodicDistance {
  double distance = 0.0;
  int h = 0;  // offset in {0,1} after reducing q_j - q_i
  int k = 0;
  bool degenerate = false;  // several offsets tie for the minimum
  Vec2 separation = Vec2::Zero();  // nearest-image q_j - q_i
};

PeriodicDistance periodic_signed_distance(const Configuration& q, std::size_t i, std::size_t j,
                                          const DomainSpec& torus);
PairGradient periodic_gradient(const Configuration& q, std::size_t i, std::size_t j, const DomainSpec& torus);

/// Dispatch on the domain kind.
double pair_distance(const Configuration& q, std::size_t i, std::size_t j, const DomainSpec& dom);
PairGradient pair_gradient(const Configuration& q, std::size_t i, std::size_t j, const DomainSpec& dom);

bool is_feasible(const Configuration& q, const DomainSpec& dom, double tol);

struct ClosestPair {
  double distance = 0.0;  // +inf when there is no pair
  std::size_t i = 0;
  std::size_t j = 0;
};
ClosestPair min_signed_distance(const Configuration& q, const DomainSpec& dom);

/// Prox-regularity radius of the feasible set for N_p disks with at most
/// n_neighbors contacts each.
double prox_regularity_eta(std::size_t n_particles, std::size_t n_neighbors, std::span<const double> radii);

/// sin(pi * num / den), exactly zero when num/den is an integer.
double sin_pi_fraction(double num, double den);

}  // namespace dcm
