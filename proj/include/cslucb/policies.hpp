#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>

#include "cslucb/confidence.hpp"
#include "cslucb/feature_model.hpp"

namespace cslucb::policies {

enum class PlayType { optimistic, baseline };

std::string_view to_string(PlayType t);
PlayType play_type_from_string(std::string_view s);

/// argmax_x ucb_value(b, psi_x); ties go to the lowest index.
std::size_t linucb_select(const confidence::ConfidenceEllipsoid& b, std::span<const Vector> psi);

/// Action whose expected reward theta_star^T psi_x has descending rank k
/// (1-based); ties ordered by index.
std::size_t baseline_kth_best(const Vector& theta_star, std::span<const Vector> psi, std::size_t k);

/// Per-policy learning state shared by the UCB policies.
struct PolicyState {
  PolicyState(const confidence::BetaParams& params, bool clip_rewards = false);

  confidence::BetaParams params;
  bool clip_rewards;
  confidence::RidgeState ridge;
  confidence::ConfidenceEllipsoid ellipsoid;
  Vector optimistic_sum;             // l_t, sum of played expected features
  std::size_t optimistic_plays = 0;  // m_t
  std::size_t baseline_plays = 0;    // n_t
  double sum_baseline_all = 0.0;     // sum_{i<=t} r_b,i
  double sum_baseline_played = 0.0;  // sum over baseline rounds of r_b,i

  std::size_t rounds() const { return optimistic_plays + baseline_plays; }

  /// Absorbs (psi, y) into the ridge and rebuilds the ellipsoid with beta(m).
  void absorb(const Vector& psi, double y);
};

struct GateResult {
  bool pass = false;
  double lower_bound = 0.0;  // L_t
  double margin = 0.0;       // L_t + played baseline sum - (1 - alpha) * all baseline sum
};

/// Pessimistic check of the cumulative baseline constraint for a candidate.
GateResult conservative_gate(const PolicyState& state, const Vector& candidate_psi, double baseline_reward_now,
                             double alpha);

struct RoundDecision {
  std::size_t action = 0;
  PlayType play_type = PlayType::baseline;
  std::size_t candidate = 0;  // x'_t
  double lower_bound = 0.0;
  double margin = 0.0;
};

/// Unconstrained optimistic policy.
class LinUcb {
 public:
  explicit LinUcb(const confidence::BetaParams& params, bool clip_rewards = false);

  std::size_t select(std::span<const Vector> psi) const;
  void absorb_reward(const Vector& psi, double y);

  const PolicyState& state() const { return state_; }

 private:
  PolicyState state_;
};

/// Conservative linear UCB over a per-round feature set. With expected
/// features under the context distribution this is the stochastic
/// conservative algorithm; with realized-context features it is CLUCB.
/// Every optimistic step must be followed by exactly one absorb_reward.
class ConservativeLinUcb {
 public:
  ConservativeLinUcb(const confidence::BetaParams& params, double alpha, bool clip_rewards = false);

  RoundDecision step(std::span<const Vector> psi, std::size_t baseline_action, double baseline_reward_now);
  void absorb_reward(double y);

  double alpha() const { return alpha_; }
  const PolicyState& state() const { return state_; }
  bool awaiting_reward() const { return pending_.has_value(); }

 private:
  PolicyState state_;
  double alpha_;
  std::optional<Vector> pending_;
};

/// One round of the stochastic conservative algorithm given expected features.
RoundDecision cslucb_step(ConservativeLinUcb& policy, std::span<const Vector> expected_psi,
                          std::size_t baseline_action, double baseline_reward_now);

/// One round of CLUCB: features are built from the observed context.
RoundDecision clucb_step(ConservativeLinUcb& policy, const feature_model::FeatureMap& map,
                         const feature_model::ActionSet& actions, const Vector& context,
                         std::size_t baseline_action, double baseline_reward_now);

}  // namespace cslucb::policies
