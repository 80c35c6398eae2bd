#include <doctest.h>

#include <cmath>
#include <numbers>

#include <boost/multiprecision/cpp_dec_float.hpp>

#include "cslucb/confidence.hpp"
#include "cslucb/random.hpp"

using namespace cslucb;
using namespace cslucb::confidence;
using numerics::SpdMatrix;
using hp = boost::multiprecision::cpp_dec_float_50;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

BetaParams params(double sigma, Eigen::Index d, double D, double lambda, double A, double delta) {
  BetaParams p;
  p.sigma = sigma;
  p.dim = d;
  p.feature_bound = D;
  p.lambda = lambda;
  p.param_bound = A;
  p.delta = delta;
  return p;
}

double beta_oracle(std::size_t m, const BetaParams& p) {
  const hp growth = hp(1) + (hp(m) + 1) * hp(p.feature_bound) * hp(p.feature_bound) / hp(p.lambda);
  const hp r = hp(p.sigma) * sqrt(hp(p.dim) * log(growth / hp(p.delta))) + sqrt(hp(p.lambda)) * hp(p.param_bound);
  return r.convert_to<double>();
}

SpdMatrix random_shape(Eigen::Index d, Rng& rng) {
  auto m = SpdMatrix::scaled_identity(d, 0.5);
  for (Eigen::Index i = 0; i < 2 * d; ++i) m.add_outer(standard_normal_vector(d, rng));
  return m;
}

}  // namespace

TEST_CASE("ridge estimates by hand") {
  RidgeState r(2, 1.0);
  CHECK(r.estimate().isZero(0.0));
  CHECK(r.count() == 0);
  r.update(Vector::Unit(2, 0), 1.0);
  CHECK(r.estimate()(0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(r.estimate()(1) == 0.0);
  r.update(Vector::Unit(2, 0), 1.0);
  CHECK(r.estimate()(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(r.count() == 2);

  const auto copy = ridge_update(r, vec({0, 1}), 3.0);
  CHECK(copy.count() == 3);
  CHECK(r.count() == 2);
  CHECK(copy.estimate()(1) == doctest::Approx(1.5));

  CHECK_THROWS_AS(r.update(vec({1, NAN}), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(r.update(vec({1, 0}), INFINITY), std::invalid_argument);
  CHECK_THROWS_AS(r.update(vec({1, 0, 0}), 1.0), std::invalid_argument);
}

TEST_CASE("ridge invariants over long sequences") {
  Rng rng(21);
  const Eigen::Index d = 15;
  RidgeState r(d, 1.0);
  Matrix v = Matrix::Identity(d, d);
  Vector s = Vector::Zero(d);
  for (int i = 0; i < 2000; ++i) {
    const Vector psi = standard_normal_vector(d, rng);
    const double y = rng() % 2 ? 1.0 : -0.5;
    r.update(psi, y);
    v += psi * psi.transpose();
    s += y * psi;
  }
  CHECK((r.gram().entries() - v).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK((r.gram().entries() * r.estimate() - r.target()).norm() <= 1e-10 * r.target().norm());
  CHECK((r.target() - s).norm() < 1e-9);
  CHECK(r.count() == 2000);
}

TEST_CASE("beta closed forms") {
  CHECK(beta(0, params(0.0, 15, 1, 1, 5, 0.05)) == 5.0);
  CHECK(beta(1000, params(0.0, 15, 1, 1, 5, 0.05)) == 5.0);
  CHECK(beta(7, params(0.0, 3, 2, 4, 2, 0.1)) == 4.0);
  const auto p = params(0.1, 15, 1, 1, 5, 0.05);
  CHECK(std::abs(beta(0, p) - beta_oracle(0, p)) <= 1e-12 * beta_oracle(0, p));
  Rng rng(5);
  std::uniform_real_distribution<double> u(0.01, 3.0);
  for (int i = 0; i < 50; ++i) {
    const auto q = params(u(rng), 1 + static_cast<Eigen::Index>(rng() % 240), u(rng), u(rng), u(rng),
                          std::uniform_real_distribution<double>(1e-4, 0.99)(rng));
    const std::size_t m = rng() % 100000;
    CHECK(std::abs(beta(m, q) - beta_oracle(m, q)) <= 1e-12 * beta_oracle(m, q));
  }
}

TEST_CASE("beta parameter validation") {
  CHECK_THROWS_AS(beta(0, params(0.1, 0, 1, 1, 1, 0.05)), std::invalid_argument);
  CHECK_THROWS_AS(beta(0, params(0.1, 2, 1, 0, 1, 0.05)), std::invalid_argument);
  CHECK_THROWS_AS(beta(0, params(0.1, 2, 1, 1, 1, 1.0)), std::invalid_argument);
  CHECK_THROWS_AS(beta(0, params(0.1, 2, 1, 1, 1, 0.0)), std::invalid_argument);
  CHECK_THROWS_AS(beta(0, params(-0.1, 2, 1, 1, 1, 0.5)), std::invalid_argument);
  CHECK_THROWS_AS(beta(0, params(0.0, 2, 1, 1, 0.0, 0.5)), std::invalid_argument);
}

TEST_CASE("beta monotonicity sweeps") {
  const auto base = params(0.1, 15, 16.8, 1.0, 5.48, 0.05);
  double prev = 0.0;
  for (std::size_t m = 0; m < 5000; m += 7) {
    const double b = beta(m, base);
    CHECK(b >= prev);
    prev = b;
  }
  for (double s : {0.0, 0.05, 0.1, 0.5, 2.0}) {
    auto lo = base;
    lo.sigma = s;
    auto hi = lo;
    hi.sigma = s + 0.01;
    CHECK(beta(10, hi) >= beta(10, lo));
    auto a_hi = lo;
    a_hi.param_bound = base.param_bound + 1.0;
    CHECK(beta(10, a_hi) >= beta(10, lo));
  }
  // Growth in lambda holds while the sqrt(lambda) A term dominates.
  prev = 0.0;
  for (double lambda = 0.5; lambda < 100.0; lambda *= 1.3) {
    auto p = base;
    p.lambda = lambda;
    CHECK(beta(100, p) >= prev);
    prev = beta(100, p);
  }
}

TEST_CASE("beta can decrease in lambda when the noise term dominates") {
  const auto lo = params(1.0, 15, 10, 1.0, 0.01, 0.05);
  auto hi = lo;
  hi.lambda = 2.0;
  CHECK(beta(0, hi) < beta(0, lo));
}

TEST_CASE("ucb and lcb examples") {
  const ConfidenceEllipsoid unit(Vector::Zero(2), SpdMatrix(Matrix::Identity(2, 2)), 2.0);
  CHECK(ucb_value(unit, vec({3, 4})) == doctest::Approx(10.0).epsilon(1e-15));
  CHECK(lcb_value(unit, vec({3, 4})) == doctest::Approx(-10.0).epsilon(1e-15));
  CHECK(lcb_value(unit, Vector::Zero(2)) == 0.0);

  Matrix diag = Matrix::Zero(2, 2);
  diag(0, 0) = 4.0;
  diag(1, 1) = 1.0;
  const ConfidenceEllipsoid shifted(Vector::Unit(2, 0), SpdMatrix(diag), 1.0);
  CHECK(ucb_value(shifted, Vector::Unit(2, 0)) == doctest::Approx(1.5).epsilon(1e-15));

  const ConfidenceEllipsoid point(vec({0.3, -0.7}), SpdMatrix(diag), 0.0);
  CHECK(ucb_value(point, vec({2, 1})) == doctest::Approx(-0.1));
  CHECK(lcb_value(point, vec({2, 1})) == doctest::Approx(-0.1));

  CHECK_THROWS_AS(ucb_value(unit, vec({1, 2, 3})), std::invalid_argument);
  CHECK_THROWS_AS(ConfidenceEllipsoid(Vector::Zero(2), SpdMatrix(diag), -1.0), std::invalid_argument);
  CHECK_THROWS_AS(ConfidenceEllipsoid(Vector::Zero(3), SpdMatrix(diag), 1.0), std::invalid_argument);
}

TEST_CASE("ucb against uniform boundary sampling in two dimensions") {
  const ConfidenceEllipsoid unit(Vector::Zero(2), SpdMatrix(Matrix::Identity(2, 2)), 2.0);
  const Vector psi = vec({3, 4});
  double best = -INFINITY;
  for (int i = 0; i < 100000; ++i) {
    const double a = 2.0 * std::numbers::pi * i / 100000.0;
    best = std::max(best, psi.dot(boundary_point(unit, vec({std::cos(a), std::sin(a)}))));
  }
  const double gap = best - ucb_value(unit, psi);
  CHECK(gap <= 1e-9);
  CHECK(gap >= -1e-2);
}

TEST_CASE("membership") {
  const ConfidenceEllipsoid unit(Vector::Zero(2), SpdMatrix(Matrix::Identity(2, 2)), 1.0);
  CHECK(contains(unit, Vector::Zero(2)));
  CHECK_FALSE(contains(unit, vec({2, 0})));

  Rng rng(17);
  for (int rep = 0; rep < 50; ++rep) {
    const Eigen::Index d = 1 + rep % 15;
    const ConfidenceEllipsoid b(standard_normal_vector(d, rng), random_shape(d, rng), 0.5 + rep % 3);
    CHECK(contains(b, b.center()));
    const Vector u = standard_normal_vector(d, rng).normalized();
    const Vector edge = boundary_point(b, u);
    CHECK(contains(b, edge));
    CHECK_FALSE(contains(b, b.center() + 1.001 * (edge - b.center())));
  }
}

TEST_CASE("linear functionals of members lie between lcb and ucb") {
  Rng rng(19);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int rep = 0; rep < 10; ++rep) {
    const Eigen::Index d = 2 + rep;
    const ConfidenceEllipsoid b(standard_normal_vector(d, rng), random_shape(d, rng), 1.5);
    const Vector psi = standard_normal_vector(d, rng);
    const double lo = lcb_value(b, psi);
    const double hi = ucb_value(b, psi);
    for (int i = 0; i < 1000; ++i) {
      const Vector u = standard_normal_vector(d, rng).normalized();
      const Vector theta = b.center() + std::pow(unif(rng), 1.0 / d) * (boundary_point(b, u) - b.center());
      REQUIRE(contains(b, theta));
      const double v = psi.dot(theta);
      CHECK(v >= lo - 1e-12 * std::abs(lo));
      CHECK(v <= hi + 1e-12 * std::abs(hi));
    }
  }
}

TEST_CASE("ellipsoids built from observations cover the parameter") {
  // Small-scale version of the coverage experiment: d = 3, T = 300.
  Rng rng(23);
  const Eigen::Index d = 3;
  const Vector theta = vec({0.5, -0.3, 0.2});
  const auto p = params(0.1, d, 2.0, 1.0, theta.norm(), 0.05);
  int covered = 0;
  for (int run = 0; run < 40; ++run) {
    RidgeState r(d, 1.0);
    bool ok = true;
    std::normal_distribution<double> noise(0.0, 0.1);
    for (int t = 0; t < 300 && ok; ++t) {
      ok = contains(ConfidenceEllipsoid(r, beta(r.count(), p)), theta);
      Vector psi = standard_normal_vector(d, rng);
      if (psi.norm() > 2.0) psi *= 2.0 / psi.norm();
      r.update(psi, theta.dot(psi) + noise(rng));
    }
    covered += ok ? 1 : 0;
  }
  CHECK(covered >= 38);
}
