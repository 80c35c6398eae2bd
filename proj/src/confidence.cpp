#include "cslucb/confidence.hpp"

#include <cmath>
#include <stdexcept>

namespace cslucb::confidence {

void BetaParams::validate() const {
  auto finite_nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
  if (!finite_nonneg(sigma)) throw std::invalid_argument("BetaParams: sigma must be finite and >= 0");
  if (dim < 1) throw std::invalid_argument("BetaParams: dimension must be >= 1");
  if (!finite_nonneg(feature_bound)) throw std::invalid_argument("BetaParams: feature bound must be >= 0");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("BetaParams: lambda must be > 0");
  if (!finite_nonneg(param_bound)) throw std::invalid_argument("BetaParams: parameter bound must be >= 0");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("BetaParams: delta must lie in (0, 1)");
  if (sigma == 0.0 && param_bound == 0.0) throw std::invalid_argument("BetaParams: radius would be zero");
}

double beta(std::size_t m, const BetaParams& p) {
  p.validate();
  const double growth =
      1.0 + (static_cast<double>(m) + 1.0) * p.feature_bound * p.feature_bound / p.lambda;
  const double log_arg = growth / p.delta;
  if (!(log_arg > 1.0)) throw std::domain_error("beta: log argument must exceed 1");
  return p.sigma * std::sqrt(static_cast<double>(p.dim) * std::log(log_arg)) +
         std::sqrt(p.lambda) * p.param_bound;
}

RidgeState::RidgeState(Eigen::Index dim, double lambda)
    : lambda_(lambda),
      gram_(numerics::SpdMatrix::scaled_identity(dim, lambda)),
      target_(Vector::Zero(dim)),
      estimate_(Vector::Zero(dim)) {}

void RidgeState::update(const Vector& psi, double y) {
  if (psi.size() != dim()) throw std::invalid_argument("ridge_update: dimension mismatch");
  if (!psi.allFinite() || !std::isfinite(y)) throw std::invalid_argument("ridge_update: non-finite input");
  gram_.add_outer(psi);
  target_ += y * psi;
  estimate_ = gram_.solve(target_);
  ++count_;
}

RidgeState ridge_update(RidgeState state, const Vector& psi, double y) {
  state.update(psi, y);
  return state;
}

ConfidenceEllipsoid::ConfidenceEllipsoid(Vector center, numerics::SpdMatrix shape, double radius)
    : center_(std::move(center)), shape_(std::move(shape)), radius_(radius) {
  if (center_.size() != shape_.dim()) throw std::invalid_argument("ConfidenceEllipsoid: dimension mismatch");
  if (!(radius_ >= 0.0) || !std::isfinite(radius_)) {
    throw std::invalid_argument("ConfidenceEllipsoid: radius must be finite and >= 0");
  }
}

ConfidenceEllipsoid::ConfidenceEllipsoid(const RidgeState& ridge, double radius)
    : ConfidenceEllipsoid(ridge.estimate(), ridge.gram(), radius) {}

namespace {

double width(const ConfidenceEllipsoid& b, const Vector& psi) {
  if (psi.size() != b.dim()) throw std::invalid_argument("confidence bound: dimension mismatch");
  if (b.radius() == 0.0) return 0.0;
  return b.radius() * numerics::weighted_norm_inv(psi, b.shape());
}

}  // namespace

double ucb_value(const ConfidenceEllipsoid& b, const Vector& psi) {
  const double w = width(b, psi);
  return psi.dot(b.center()) + w;
}

double lcb_value(const ConfidenceEllipsoid& b, const Vector& psi) {
  const double w = width(b, psi);
  return psi.dot(b.center()) - w;
}

bool contains(const ConfidenceEllipsoid& b, const Vector& theta) {
  if (theta.size() != b.dim()) throw std::invalid_argument("contains: dimension mismatch");
  return numerics::weighted_norm(theta - b.center(), b.shape()) <=
         b.radius() * (1.0 + kMembershipTolerance);
}

Vector boundary_point(const ConfidenceEllipsoid& b, const Vector& unit_direction) {
  if (unit_direction.size() != b.dim()) throw std::invalid_argument("boundary_point: dimension mismatch");
  return b.center() + b.radius() * b.shape().backward_substitute(unit_direction);
}

}  // namespace cslucb::confidence
