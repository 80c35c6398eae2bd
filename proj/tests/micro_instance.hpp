#pragma once

// Two-action, two-dimensional instance with point-mass contexts and the
// literal step-by-step algorithm on explicit 2x2 algebra.

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "cslucb/confidence.hpp"
#include "cslucb/environments.hpp"

namespace micro {

using cslucb::Matrix;
using cslucb::Vector;

inline constexpr double kSigma = 0.1;
inline constexpr double kLambda = 1.0;
inline constexpr double kDelta = 0.05;
inline constexpr double kFeatureBound = 1.0;
inline constexpr std::array<double, 2> kTheta{0.6, 0.4};

inline const std::vector<std::array<double, 2>>& contexts() {
  static const std::vector<std::array<double, 2>> c{
      {0.90, 0.30}, {0.40, 0.80}, {0.70, 0.60}, {0.25, 0.95}, {0.85, 0.50},
      {0.55, 0.35}, {0.30, 0.70}, {0.95, 0.90}, {0.60, 0.20}, {0.45, 0.65}};
  return c;
}

// phi(x, c) = x .* c.
class HadamardMap final : public cslucb::feature_model::FeatureMap {
 public:
  Eigen::Index dim() const override { return 2; }
  Eigen::Index action_dim() const override { return 2; }
  Eigen::Index context_dim() const override { return 2; }
  Vector evaluate(const Vector& x, const Vector& c) const override { return x.cwiseProduct(c); }
};

class MicroEnv final : public cslucb::environments::Environment {
 public:
  MicroEnv()
      : Environment(cslucb::environments::ContextMode::stochastic),
        actions_({Vector::Unit(2, 0), Vector::Unit(2, 1)}),
        theta_(Vector{{kTheta[0], kTheta[1]}}) {}

  std::string kind() const override { return "micro"; }
  const cslucb::feature_model::FeatureMap& feature_map() const override { return map_; }
  const cslucb::feature_model::ActionSet& actions() const override { return actions_; }
  const Vector& theta_star() const override { return theta_; }
  double noise_sigma() const override { return kSigma; }
  std::size_t baseline_rank() const override { return 2; }
  nlohmann::json to_json() const override { return {{"kind", "micro"}}; }

  // Replays the fixed context table, one entry per call.
  Vector sample_context(cslucb::Rng&) const override {
    const auto& c = contexts()[next_++ % contexts().size()];
    return Vector{{c[0], c[1]}};
  }
  cslucb::feature_model::ContextDistribution stochastic_distribution(const Vector& c) const override {
    return cslucb::feature_model::ContextDistribution::dirac(c);
  }

  void rewind() const { next_ = 0; }

 private:
  HadamardMap map_;
  cslucb::feature_model::ActionSet actions_;
  Vector theta_;
  mutable std::size_t next_ = 0;
};

struct OracleRound {
  int action;
  bool optimistic;
  double lower_bound;
};

// Follows the algorithm literally; `reward(t, action)` supplies the observation.
template <class RewardFn>
std::vector<OracleRound> hand_step(double alpha, RewardFn reward) {
  double v11 = kLambda, v12 = 0.0, v22 = kLambda;
  double s1 = 0.0, s2 = 0.0;
  double l1 = 0.0, l2 = 0.0;
  int m = 0;
  double baseline_played = 0.0;
  double baseline_all = 0.0;
  const double a_norm = std::sqrt(kTheta[0] * kTheta[0] + kTheta[1] * kTheta[1]);

  std::vector<OracleRound> out;
  for (std::size_t t = 0; t < contexts().size(); ++t) {
    const auto& c = contexts()[t];
    const double psi[2][2] = {{c[0], 0.0}, {0.0, c[1]}};
    const double r0 = kTheta[0] * c[0];
    const double r1 = kTheta[1] * c[1];
    // Rank 2 of 2 in descending order; ties keep index order.
    const int b = r0 >= r1 ? 1 : 0;
    const double rb = b == 0 ? r0 : r1;

    const double det = v11 * v22 - v12 * v12;
    const double i11 = v22 / det, i12 = -v12 / det, i22 = v11 / det;
    const double th1 = i11 * s1 + i12 * s2;
    const double th2 = i12 * s1 + i22 * s2;
    const double growth = 1.0 + (m + 1) * kFeatureBound * kFeatureBound / kLambda;
    const double beta = kSigma * std::sqrt(2.0 * std::log(growth / kDelta)) + std::sqrt(kLambda) * a_norm;
    auto inv_norm = [&](double x, double y) { return std::sqrt(i11 * x * x + 2 * i12 * x * y + i22 * y * y); };

    const double u0 = psi[0][0] * th1 + psi[0][1] * th2 + beta * inv_norm(psi[0][0], psi[0][1]);
    const double u1 = psi[1][0] * th1 + psi[1][1] * th2 + beta * inv_norm(psi[1][0], psi[1][1]);
    const int cand = u1 > u0 ? 1 : 0;
    const double q1 = l1 + psi[cand][0];
    const double q2 = l2 + psi[cand][1];
    const double lower = q1 * th1 + q2 * th2 - beta * inv_norm(q1, q2);

    OracleRound r{};
    r.lower_bound = lower;
    if (lower + baseline_played >= (1.0 - alpha) * (baseline_all + rb)) {
      r.action = cand;
      r.optimistic = true;
      const double y = reward(t, cand);
      const double p1 = psi[cand][0], p2 = psi[cand][1];
      v11 += p1 * p1;
      v12 += p1 * p2;
      v22 += p2 * p2;
      s1 += y * p1;
      s2 += y * p2;
      l1 += p1;
      l2 += p2;
      ++m;
    } else {
      r.action = b;
      r.optimistic = false;
      baseline_played += rb;
    }
    baseline_all += rb;
    out.push_back(r);
  }
  return out;
}

inline cslucb::confidence::BetaParams beta_params() {
  cslucb::confidence::BetaParams p;
  p.sigma = kSigma;
  p.dim = 2;
  p.feature_bound = kFeatureBound;
  p.lambda = kLambda;
  p.param_bound = std::sqrt(kTheta[0] * kTheta[0] + kTheta[1] * kTheta[1]);
  p.delta = kDelta;
  return p;
}

}  // namespace micro
