#pragma once

#include <cstddef>

#include "cslucb/numerics.hpp"

namespace cslucb::confidence {

/// Constants of the confidence radius.
struct BetaParams {
  double sigma = 0.1;          // sub-Gaussian noise scale
  Eigen::Index dim = 1;        // feature dimension d
  double feature_bound = 1.0;  // D, bound on feature norms
  double lambda = 1.0;         // ridge regularizer
  double param_bound = 1.0;    // A, bound on ||theta*||
  double delta = 0.05;         // confidence level

  /// Throws std::invalid_argument on out-of-domain constants.
  void validate() const;
};

/// beta(m) = sigma * sqrt(d * log((1 + (m + 1) D^2 / lambda) / delta)) + sqrt(lambda) * A,
/// the radius used after m absorbed observations.
double beta(std::size_t m, const BetaParams& p);

/// Online regularized least squares: V = lambda I + sum psi psi^T,
/// s = sum psi y, theta = V^{-1} s.
class RidgeState {
 public:
  RidgeState(Eigen::Index dim, double lambda);

  void update(const Vector& psi, double y);

  double lambda() const { return lambda_; }
  Eigen::Index dim() const { return gram_.dim(); }
  const numerics::SpdMatrix& gram() const { return gram_; }
  const Vector& target() const { return target_; }
  const Vector& estimate() const { return estimate_; }
  std::size_t count() const { return count_; }

 private:
  double lambda_;
  numerics::SpdMatrix gram_;
  Vector target_;
  Vector estimate_;
  std::size_t count_ = 0;
};

RidgeState ridge_update(RidgeState state, const Vector& psi, double y);

/// {theta : ||theta - center||_shape <= radius}.
class ConfidenceEllipsoid {
 public:
  ConfidenceEllipsoid(Vector center, numerics::SpdMatrix shape, double radius);
  ConfidenceEllipsoid(const RidgeState& ridge, double radius);

  const Vector& center() const { return center_; }
  const numerics::SpdMatrix& shape() const { return shape_; }
  double radius() const { return radius_; }
  Eigen::Index dim() const { return center_.size(); }

 private:
  Vector center_;
  numerics::SpdMatrix shape_;
  double radius_;
};

/// Relative slack on the membership test.
inline constexpr double kMembershipTolerance = 1e-9;

/// max over the ellipsoid of psi^T theta = psi^T center + radius * ||psi||_{shape^{-1}}.
double ucb_value(const ConfidenceEllipsoid& b, const Vector& psi);
/// min over the ellipsoid of psi^T theta = psi^T center - radius * ||psi||_{shape^{-1}}.
double lcb_value(const ConfidenceEllipsoid& b, const Vector& psi);
bool contains(const ConfidenceEllipsoid& b, const Vector& theta);

/// center + radius * L^{-T} u for a unit vector u: a point on the boundary.
Vector boundary_point(const ConfidenceEllipsoid& b, const Vector& unit_direction);

}  // namespace cslucb::confidence
