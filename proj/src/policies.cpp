#include "cslucb/policies.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace cslucb::policies {

std::string_view to_string(PlayType t) { return t == PlayType::optimistic ? "optimistic" : "baseline"; }

PlayType play_type_from_string(std::string_view s) {
  if (s == "optimistic") return PlayType::optimistic;
  if (s == "baseline") return PlayType::baseline;
  throw std::invalid_argument("unknown play type: " + std::string(s));
}

namespace {

void check_feature_set(std::span<const Vector> psi, Eigen::Index dim) {
  if (psi.empty()) throw std::invalid_argument("policy: empty feature set");
  for (const auto& v : psi) {
    if (v.size() != dim) throw std::invalid_argument("policy: feature dimension mismatch");
  }
}

}  // namespace

std::size_t linucb_select(const confidence::ConfidenceEllipsoid& b, std::span<const Vector> psi) {
  check_feature_set(psi, b.dim());
  std::size_t best = 0;
  double best_value = confidence::ucb_value(b, psi[0]);
  for (std::size_t i = 1; i < psi.size(); ++i) {
    const double v = confidence::ucb_value(b, psi[i]);
    if (v > best_value) {
      best_value = v;
      best = i;
    }
  }
  return best;
}

std::size_t baseline_kth_best(const Vector& theta_star, std::span<const Vector> psi, std::size_t k) {
  check_feature_set(psi, theta_star.size());
  if (k < 1 || k > psi.size()) {
    throw std::invalid_argument("baseline_kth_best: rank " + std::to_string(k) + " outside 1.." +
                                std::to_string(psi.size()));
  }
  std::vector<double> reward(psi.size());
  for (std::size_t i = 0; i < psi.size(); ++i) reward[i] = theta_star.dot(psi[i]);
  std::vector<std::size_t> order(psi.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return reward[a] > reward[b]; });
  return order[k - 1];
}

PolicyState::PolicyState(const confidence::BetaParams& p, bool clip)
    : params(p),
      clip_rewards(clip),
      ridge(p.dim, p.lambda),
      ellipsoid(ridge, confidence::beta(0, p)),
      optimistic_sum(Vector::Zero(p.dim)) {}

void PolicyState::absorb(const Vector& psi, double y) {
  if (clip_rewards) y = std::clamp(y, 0.0, 1.0);
  ridge.update(psi, y);
  ellipsoid = confidence::ConfidenceEllipsoid(ridge, confidence::beta(ridge.count(), params));
}

GateResult conservative_gate(const PolicyState& state, const Vector& candidate_psi, double baseline_reward_now,
                             double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("conservative_gate: alpha must lie in (0, 1)");
  if (candidate_psi.size() != state.optimistic_sum.size()) {
    throw std::invalid_argument("conservative_gate: dimension mismatch");
  }
  GateResult g;
  g.lower_bound = confidence::lcb_value(state.ellipsoid, state.optimistic_sum + candidate_psi);
  const double lhs = g.lower_bound + state.sum_baseline_played;
  const double rhs = (1.0 - alpha) * (state.sum_baseline_all + baseline_reward_now);
  g.margin = lhs - rhs;
  g.pass = lhs >= rhs;
  return g;
}

LinUcb::LinUcb(const confidence::BetaParams& params, bool clip_rewards) : state_(params, clip_rewards) {}

std::size_t LinUcb::select(std::span<const Vector> psi) const { return linucb_select(state_.ellipsoid, psi); }

void LinUcb::absorb_reward(const Vector& psi, double y) {
  state_.absorb(psi, y);
  state_.optimistic_sum += psi;
  ++state_.optimistic_plays;
}

ConservativeLinUcb::ConservativeLinUcb(const confidence::BetaParams& params, double alpha, bool clip_rewards)
    : state_(params, clip_rewards), alpha_(alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("ConservativeLinUcb: alpha must lie in (0, 1)");
}

RoundDecision ConservativeLinUcb::step(std::span<const Vector> psi, std::size_t baseline_action,
                                       double baseline_reward_now) {
  if (pending_) throw std::logic_error("ConservativeLinUcb: previous optimistic round has no reward yet");
  if (baseline_action >= psi.size()) throw std::invalid_argument("ConservativeLinUcb: baseline action out of range");
  if (!std::isfinite(baseline_reward_now)) throw std::invalid_argument("ConservativeLinUcb: non-finite baseline reward");

  RoundDecision d;
  d.candidate = linucb_select(state_.ellipsoid, psi);
  const GateResult gate = conservative_gate(state_, psi[d.candidate], baseline_reward_now, alpha_);
  d.lower_bound = gate.lower_bound;
  d.margin = gate.margin;

  state_.sum_baseline_all += baseline_reward_now;
  if (gate.pass) {
    d.play_type = PlayType::optimistic;
    d.action = d.candidate;
    pending_ = psi[d.candidate];
  } else {
    d.play_type = PlayType::baseline;
    d.action = baseline_action;
    state_.sum_baseline_played += baseline_reward_now;
    ++state_.baseline_plays;
  }
  return d;
}

void ConservativeLinUcb::absorb_reward(double y) {
  if (!pending_) {
    throw std::logic_error("ConservativeLinUcb: no optimistic round awaiting a reward (baseline rounds and "
                           "repeated calls are rejected)");
  }
  state_.absorb(*pending_, y);
  state_.optimistic_sum += *pending_;
  ++state_.optimistic_plays;
  pending_.reset();
}

RoundDecision cslucb_step(ConservativeLinUcb& policy, std::span<const Vector> expected_psi,
                          std::size_t baseline_action, double baseline_reward_now) {
  return policy.step(expected_psi, baseline_action, baseline_reward_now);
}

RoundDecision clucb_step(ConservativeLinUcb& policy, const feature_model::FeatureMap& map,
                         const feature_model::ActionSet& actions, const Vector& context,
                         std::size_t baseline_action, double baseline_reward_now) {
  std::vector<Vector> psi;
  psi.reserve(actions.size());
  for (const auto& a : actions.actions()) psi.push_back(feature_model::features(map, a, context));
  return policy.step(psi, baseline_action, baseline_reward_now);
}

}  // namespace cslucb::policies
