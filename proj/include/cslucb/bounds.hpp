#pragma once

#include <cstddef>
#include <span>

#include <json.hpp>

#include "cslucb/numerics.hpp"

namespace cslucb::bounds {

/// Problem constants entering the regret and baseline-play bounds.
/// Defaults follow rewards in [0, 1]: gap_high = reward_high = 1, gap_low = 0.
struct TheoryParams {
  double dim = 1;
  double param_bound = 1;    // A
  double feature_bound = 1;  // D
  double lambda = 1;
  double sigma = 0.1;
  double delta = 0.05;
  double alpha = 0.5;
  double reward_low = 0.5;   // r_l
  double reward_high = 1.0;  // r_h
  double gap_low = 0.0;      // Delta_l
  double gap_high = 1.0;     // Delta_h
  double horizon = 1000;     // T

  void validate() const;
};

void to_json(nlohmann::json& j, const TheoryParams& p);

/// Regret of the optimistic rounds after m_T of them:
/// 4 sqrt(m d log(lambda + m D / d)) [A sqrt(lambda) + sigma sqrt(2 log(1/delta) + d log(1 + m D/(lambda d)))].
double ucb_regret_bound(const TheoryParams& p, double optimistic_plays);

/// Upper bound on baseline plays; requires lambda >= max(1, D^2).
double nT_upper_bound(const TheoryParams& p);

/// Lower bound on baseline plays; requires lambda >= D^2.
double nT_lower_bound(const TheoryParams& p);

struct RegretBoundReport {
  double ucb_term = 0;           // ucb_regret_bound at m_T = T
  double conservatism_term = 0;  // nT_upper_bound * Delta_h
  double context_term = 0;       // 4 sqrt(2 T log(1/delta))
  double total() const { return ucb_term + conservatism_term + context_term; }
};

RegretBoundReport total_regret_bound(const TheoryParams& p);

/// 2 d log(1 + k D^2 / (lambda d)).
double elliptical_potential_bound(std::size_t k, double feature_bound, double lambda, double dim);

/// sum_i min(1, ||Y_i||^2_{V_{i-1}^{-1}}) with V_0 = lambda I and V_i = V_{i-1} + Y_i Y_i^T.
double elliptical_potential_sum(std::span<const Vector> sequence, double lambda);

struct PotentialCheck {
  double lhs = 0;
  double rhs = 0;
  bool holds = false;
};

/// Evaluates both sides for a sequence whose norms are bounded by feature_bound.
PotentialCheck check_elliptical_potential(std::span<const Vector> sequence, double feature_bound, double lambda);

/// (16 c1^2 / (25 c3)) [log(2 c1 sqrt(c2) e / c3)]^2.
double lemma2_bound(double c1, double c2, double c3);

struct Lemma2Check {
  double grid_max = 0;  // max over the grid of c1 sqrt(m) log(c2 m) - c3 m
  double argmax = 0;
  double bound = 0;
  bool holds = false;
};

/// Grid maximum over log-spaced m in [m_low, m_high] against lemma2_bound.
Lemma2Check check_lemma2(double c1, double c2, double c3, double m_low = 2.0, double m_high = 1e6,
                         std::size_t points = 200001);

}  // namespace cslucb::bounds
