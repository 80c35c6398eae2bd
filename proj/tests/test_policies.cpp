#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "cslucb/environments.hpp"
#include "cslucb/policies.hpp"
#include "micro_instance.hpp"

using namespace cslucb;
using namespace cslucb::policies;
using confidence::BetaParams;
using confidence::ConfidenceEllipsoid;
using numerics::SpdMatrix;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

BetaParams noiseless(Eigen::Index d, double a) {
  BetaParams p;
  p.sigma = 0.0;
  p.dim = d;
  p.param_bound = a;
  return p;
}

}  // namespace

TEST_CASE("linucb_select examples") {
  const Vector theta = vec({0.2, 0.9, -0.4});
  const ConfidenceEllipsoid exact(theta, SpdMatrix::scaled_identity(3, 1.0), 0.0);
  Rng rng(1);
  std::vector<Vector> psi;
  for (int i = 0; i < 8; ++i) psi.push_back(standard_normal_vector(3, rng));
  std::size_t truth = 0;
  for (std::size_t i = 1; i < psi.size(); ++i) {
    if (theta.dot(psi[i]) > theta.dot(psi[truth])) truth = i;
  }
  CHECK(linucb_select(exact, psi) == truth);

  const ConfidenceEllipsoid unit(Vector::Zero(2), SpdMatrix::scaled_identity(2, 1.0), 1.0);
  const std::vector<Vector> two{Vector::Unit(2, 0), 2.0 * Vector::Unit(2, 1)};
  CHECK(linucb_select(unit, two) == 1);
  const std::vector<Vector> same{vec({1, 1}), vec({1, 1}), vec({1, 1})};
  CHECK(linucb_select(unit, same) == 0);
  CHECK_THROWS_AS(linucb_select(unit, std::vector<Vector>{}), std::invalid_argument);
  CHECK_THROWS_AS(linucb_select(unit, std::vector<Vector>{vec({1, 2, 3})}), std::invalid_argument);
}

TEST_CASE("baseline_kth_best") {
  const Vector theta = vec({1.0});
  const std::vector<Vector> psi{vec({0.9}), vec({0.5}), vec({0.1})};
  CHECK(baseline_kth_best(theta, psi, 1) == 0);
  CHECK(baseline_kth_best(theta, psi, 2) == 1);
  CHECK(baseline_kth_best(theta, psi, 3) == 2);
  CHECK_THROWS_AS(baseline_kth_best(theta, psi, 0), std::invalid_argument);
  CHECK_THROWS_AS(baseline_kth_best(theta, psi, 4), std::invalid_argument);
  const std::vector<Vector> tied{vec({0.5}), vec({0.7}), vec({0.5})};
  CHECK(baseline_kth_best(theta, tied, 2) == 0);
  CHECK(baseline_kth_best(theta, tied, 3) == 2);

  // Synthetic setting, rank 10 checked by counting strictly better actions.
  environments::SyntheticConfig cfg;
  Rng rng(3);
  environments::SyntheticQuadraticEnv env(cfg, rng);
  for (int rep = 0; rep < 20; ++rep) {
    const Vector c = env.sample_context(rng);
    const auto mu = env.stochastic_distribution(c);
    std::vector<Vector> feats;
    std::vector<double> r;
    for (const auto& a : env.actions().actions()) {
      feats.push_back(feature_model::expected_features(env.feature_map(), a, mu, 1, rng));
      r.push_back(env.theta_star().dot(feats.back()));
    }
    const std::size_t b = baseline_kth_best(env.theta_star(), feats, 10);
    const auto better = std::count_if(r.begin(), r.end(), [&](double v) { return v > r[b]; });
    CHECK(better == 9);
  }
}

TEST_CASE("conservative gate") {
  // Degenerate ellipsoid at the true parameter: the gate is the true constraint.
  const Vector theta = vec({0.5, 0.25});
  PolicyState s(noiseless(2, 1.0));
  s.ellipsoid = ConfidenceEllipsoid(theta, SpdMatrix::scaled_identity(2, 1.0), 0.0);
  s.optimistic_sum = vec({2.0, 1.0});
  s.sum_baseline_all = 3.0;
  s.sum_baseline_played = 1.0;
  const Vector cand = vec({0.4, 0.4});
  for (double alpha : {0.05, 0.2, 0.5, 0.9}) {
    for (double rb : {0.1, 0.5, 1.0}) {
      const auto g = conservative_gate(s, cand, rb, alpha);
      const double truth = theta.dot(s.optimistic_sum + cand) + s.sum_baseline_played;
      CHECK(g.pass == (truth >= (1 - alpha) * (s.sum_baseline_all + rb)));
      CHECK(g.lower_bound == doctest::Approx(theta.dot(s.optimistic_sum + cand)));
      CHECK(g.margin == doctest::Approx(truth - (1 - alpha) * (s.sum_baseline_all + rb)));
    }
  }

  // First round: L is minus the width, so any positive baseline reward fails.
  BetaParams p;
  p.dim = 15;
  PolicyState fresh(p);
  Rng rng(4);
  const Vector psi = standard_normal_vector(15, rng);
  const auto g = conservative_gate(fresh, psi, 0.3, 0.5);
  CHECK(g.lower_bound == doctest::Approx(-confidence::beta(0, p) * psi.norm()));
  CHECK_FALSE(g.pass);

  // alpha close to 1 removes the right-hand side.
  PolicyState tolerant(p);
  tolerant.sum_baseline_played = 100.0;
  tolerant.sum_baseline_all = 100.0;
  CHECK(conservative_gate(tolerant, 0.01 * psi, 0.3, 1.0 - 1e-12).pass);

  CHECK_THROWS_AS(conservative_gate(fresh, psi, 0.3, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(conservative_gate(fresh, psi, 0.3, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(conservative_gate(fresh, vec({1, 2}), 0.3, 0.5), std::invalid_argument);
}

TEST_CASE("step bookkeeping and reward protocol") {
  BetaParams p;
  p.dim = 2;
  ConservativeLinUcb pol(p, 0.5);
  const std::vector<Vector> psi{vec({0.5, 0.1}), vec({0.2, 0.6})};
  auto d = pol.step(psi, 1, 0.3);
  CHECK(d.play_type == PlayType::baseline);
  CHECK(d.action == 1);
  CHECK_THROWS_AS(pol.absorb_reward(0.2), std::logic_error);
  CHECK(pol.state().baseline_plays == 1);
  CHECK(pol.state().sum_baseline_played == doctest::Approx(0.3));
  CHECK(pol.state().sum_baseline_all == doctest::Approx(0.3));

  // Rich baseline history lets the next candidate through.
  ConservativeLinUcb easy(p, 0.9);
  std::size_t optimistic = 0;
  for (int t = 0; t < 30; ++t) {
    const auto dec = easy.step(psi, 1, 0.3);
    if (dec.play_type == PlayType::optimistic) {
      ++optimistic;
      const Vector center_before = easy.state().ellipsoid.center();
      CHECK(easy.awaiting_reward());
      CHECK_THROWS_AS(easy.step(psi, 1, 0.3), std::logic_error);
      easy.absorb_reward(0.4);
      CHECK_FALSE(easy.awaiting_reward());
      CHECK_THROWS_AS(easy.absorb_reward(0.4), std::logic_error);
      CHECK(easy.state().ellipsoid.center() != center_before);
    } else {
      const Vector center = easy.state().ellipsoid.center();
      const double radius = easy.state().ellipsoid.radius();
      CHECK(dec.action == 1);
      CHECK(center == easy.state().ellipsoid.center());
      CHECK(radius == easy.state().ellipsoid.radius());
    }
    CHECK(easy.state().rounds() == static_cast<std::size_t>(t + 1));
  }
  CHECK(optimistic > 0);
  CHECK(easy.state().ridge.count() == easy.state().optimistic_plays);
  CHECK_THROWS_AS(ConservativeLinUcb(p, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(easy.step(psi, 5, 0.3), std::invalid_argument);
}

TEST_CASE("perfect knowledge and a lax constraint reduce to the optimistic trace") {
  Rng rng(8);
  const Vector theta = vec({0.7, 0.2, 0.4});
  PolicyState s(noiseless(3, 1.0));
  s.ellipsoid = ConfidenceEllipsoid(theta, SpdMatrix::scaled_identity(3, 1.0), 0.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<Vector> psi;
    for (int k = 0; k < 5; ++k) psi.push_back(standard_normal_vector(3, rng).cwiseAbs());
    std::size_t best = 0;
    for (std::size_t k = 1; k < psi.size(); ++k) {
      if (theta.dot(psi[k]) > theta.dot(psi[best])) best = k;
    }
    const std::size_t cand = linucb_select(s.ellipsoid, psi);
    CHECK(cand == best);
    const double rb = theta.dot(psi[baseline_kth_best(theta, psi, 5)]);
    CHECK(conservative_gate(s, psi[cand], rb, 1.0 - 1e-9).pass);
    s.optimistic_sum += psi[cand];
    s.sum_baseline_all += rb;
  }
}

TEST_CASE("clipping clamps observations") {
  BetaParams p;
  p.dim = 1;
  PolicyState clipped(p, true);
  clipped.absorb(vec({1.0}), 5.0);
  CHECK(clipped.ridge.target()(0) == 1.0);
  PolicyState raw(p, false);
  raw.absorb(vec({1.0}), 5.0);
  CHECK(raw.ridge.target()(0) == 5.0);
}

TEST_CASE("hand-stepped micro instance") {
  micro::MicroEnv env;
  const auto p = micro::beta_params();
  for (double alpha : {0.5, 0.8}) {
    env.rewind();
    Rng noise(99);
    std::vector<double> y(micro::contexts().size());
    ConservativeLinUcb pol(p, alpha);
    std::vector<RoundDecision> got;
    for (std::size_t t = 0; t < micro::contexts().size(); ++t) {
      const Vector c = env.sample_context(noise);
      const std::size_t b = micro::kTheta[0] * c(0) >= micro::kTheta[1] * c(1) ? 1 : 0;
      const double rb = env.theta_star().dot(env.feature_map().evaluate(env.actions()[b], c));
      const auto d = clucb_step(pol, env.feature_map(), env.actions(), c, b, rb);
      got.push_back(d);
      y[t] = environments::realize_reward(env, d.action, c, noise);
      if (d.play_type == PlayType::optimistic) pol.absorb_reward(y[t]);
    }
    const auto want = micro::hand_step(alpha, [&](std::size_t t, int) { return y[t]; });
    std::size_t optimistic = 0;
    for (std::size_t t = 0; t < want.size(); ++t) {
      CAPTURE(t);
      CHECK(got[t].action == static_cast<std::size_t>(want[t].action));
      CHECK((got[t].play_type == PlayType::optimistic) == want[t].optimistic);
      CHECK(std::abs(got[t].lower_bound - want[t].lower_bound) <= 1e-9);
      optimistic += want[t].optimistic ? 1 : 0;
    }
    CHECK(optimistic > 0);
    CHECK(optimistic < want.size());
  }
}

TEST_CASE("clucb and cslucb agree under point masses") {
  environments::SyntheticConfig cfg;
  Rng arng(5);
  environments::SyntheticQuadraticEnv env(cfg, arng);
  BetaParams p;
  p.dim = 15;
  p.feature_bound = 10.0;
  p.param_bound = env.theta_star().norm();
  ConservativeLinUcb a(p, 0.3);
  ConservativeLinUcb b(p, 0.3);
  Rng rng(6);
  for (int t = 0; t < 200; ++t) {
    const Vector c = env.sample_context(rng);
    std::vector<Vector> psi;
    const auto mu = feature_model::ContextDistribution::dirac(c);
    for (const auto& x : env.actions().actions()) {
      psi.push_back(feature_model::expected_features(env.feature_map(), x, mu, 1, rng));
    }
    const std::size_t base = baseline_kth_best(env.theta_star(), psi, 10);
    const double rb = env.theta_star().dot(psi[base]);
    const auto da = cslucb_step(a, psi, base, rb);
    const auto db = clucb_step(b, env.feature_map(), env.actions(), c, base, rb);
    REQUIRE(da.action == db.action);
    REQUIRE(da.play_type == db.play_type);
    CHECK(da.lower_bound == db.lower_bound);
    if (da.play_type == PlayType::optimistic) {
      const double y = environments::realize_reward(env, da.action, c, rng);
      a.absorb_reward(y);
      b.absorb_reward(y);
    }
  }
}
