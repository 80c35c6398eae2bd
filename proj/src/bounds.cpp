#include "cslucb/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "cslucb/numerics.hpp"

namespace cslucb::bounds {

void TheoryParams::validate() const {
  auto nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
  if (!(dim >= 1.0)) throw std::invalid_argument("TheoryParams: dim must be >= 1");
  if (!nonneg(param_bound) || !nonneg(feature_bound) || !nonneg(sigma)) {
    throw std::invalid_argument("TheoryParams: A, D and sigma must be >= 0");
  }
  if (!(lambda > 0.0)) throw std::invalid_argument("TheoryParams: lambda must be > 0");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("TheoryParams: delta must lie in (0, 1)");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("TheoryParams: alpha must lie in (0, 1)");
  if (!(reward_low > 0.0 && reward_low < reward_high)) {
    throw std::invalid_argument("TheoryParams: need 0 < reward_low < reward_high");
  }
  if (!(gap_low >= 0.0 && gap_low <= gap_high)) throw std::invalid_argument("TheoryParams: need 0 <= gap_low <= gap_high");
  if (!(horizon >= 0.0)) throw std::invalid_argument("TheoryParams: horizon must be >= 0");
}

void to_json(nlohmann::json& j, const TheoryParams& p) {
  j = nlohmann::json{{"d", p.dim},           {"A", p.param_bound},  {"D", p.feature_bound},
                     {"lambda", p.lambda},   {"sigma", p.sigma},    {"delta", p.delta},
                     {"alpha", p.alpha},     {"r_low", p.reward_low}, {"r_high", p.reward_high},
                     {"gap_low", p.gap_low}, {"gap_high", p.gap_high}, {"T", p.horizon}};
}

double ucb_regret_bound(const TheoryParams& p, double m) {
  p.validate();
  if (!(m >= 0.0)) throw std::invalid_argument("ucb_regret_bound: m_T must be >= 0");
  if (m == 0.0) return 0.0;
  const double d = p.dim;
  const double lead = m * d * std::log(p.lambda + m * p.feature_bound / d);
  const double noise = 2.0 * std::log(1.0 / p.delta) + d * std::log(1.0 + m * p.feature_bound / (p.lambda * d));
  if (lead < 0.0 || noise < 0.0) throw std::domain_error("ucb_regret_bound: negative logarithm term");
  return 4.0 * std::sqrt(lead) * (p.param_bound * std::sqrt(p.lambda) + p.sigma * std::sqrt(noise));
}

double nT_upper_bound(const TheoryParams& p) {
  p.validate();
  if (p.lambda < std::max(1.0, p.feature_bound * p.feature_bound)) {
    throw std::domain_error("nT_upper_bound: requires lambda >= max(1, D^2)");
  }
  const double scale = p.param_bound * std::sqrt(p.lambda) + p.sigma;
  const double slack = p.gap_low + p.alpha * p.reward_low;
  const double log_term = std::log(62.0 * p.dim * scale / (std::sqrt(p.delta) * slack));
  return 1.0 + 114.0 * p.dim * p.dim * scale * scale / (p.alpha * p.reward_low * slack) * log_term * log_term;
}

double nT_lower_bound(const TheoryParams& p) {
  p.validate();
  if (p.lambda < p.feature_bound * p.feature_bound) throw std::domain_error("nT_lower_bound: requires lambda >= D^2");
  const double scale = p.param_bound * std::sqrt(p.lambda) + p.sigma;
  const double slack = p.gap_high + p.alpha * p.reward_high;
  const double log_term = std::log(10.0 * p.dim * scale / (std::sqrt(p.delta) * slack));
  return p.dim * p.dim * scale * scale / (p.alpha * p.reward_high * slack) * log_term * log_term;
}

RegretBoundReport total_regret_bound(const TheoryParams& p) {
  RegretBoundReport r;
  r.ucb_term = ucb_regret_bound(p, p.horizon);
  r.conservatism_term = nT_upper_bound(p) * p.gap_high;
  r.context_term = 4.0 * std::sqrt(2.0 * p.horizon * std::log(1.0 / p.delta));
  return r;
}

double elliptical_potential_bound(std::size_t k, double feature_bound, double lambda, double dim) {
  if (!(lambda > 0.0) || !(dim >= 1.0) || !(feature_bound >= 0.0)) {
    throw std::invalid_argument("elliptical_potential_bound: invalid parameters");
  }
  return 2.0 * dim * std::log1p(static_cast<double>(k) * feature_bound * feature_bound / (lambda * dim));
}

double elliptical_potential_sum(std::span<const Vector> sequence, double lambda) {
  if (sequence.empty()) return 0.0;
  auto v = numerics::SpdMatrix::scaled_identity(sequence.front().size(), lambda);
  double acc = 0.0;
  for (const auto& y : sequence) {
    acc += std::min(1.0, v.inverse_quadratic(y));
    v.add_outer(y);
  }
  return acc;
}

PotentialCheck check_elliptical_potential(std::span<const Vector> sequence, double feature_bound, double lambda) {
  for (const auto& y : sequence) {
    if (y.norm() > feature_bound * (1.0 + 1e-12)) {
      throw std::invalid_argument("check_elliptical_potential: vector norm exceeds the feature bound");
    }
  }
  PotentialCheck c;
  const double dim = sequence.empty() ? 1.0 : static_cast<double>(sequence.front().size());
  c.lhs = elliptical_potential_sum(sequence, lambda);
  c.rhs = elliptical_potential_bound(sequence.size(), feature_bound, lambda, dim);
  c.holds = c.lhs <= c.rhs * (1.0 + 1e-12);
  return c;
}

double lemma2_bound(double c1, double c2, double c3) {
  if (!(c1 > 0.0 && c2 > 0.0 && c3 > 0.0)) throw std::invalid_argument("lemma2_bound: constants must be positive");
  const double l = std::log(2.0 * c1 * std::sqrt(c2) * std::numbers::e / c3);
  return 16.0 * c1 * c1 / (25.0 * c3) * l * l;
}

Lemma2Check check_lemma2(double c1, double c2, double c3, double m_low, double m_high, std::size_t points) {
  if (!(m_low >= 2.0 && m_high > m_low) || points < 2) throw std::invalid_argument("check_lemma2: bad grid");
  Lemma2Check c;
  c.bound = lemma2_bound(c1, c2, c3);
  const double a = std::log(m_low);
  const double b = std::log(m_high);
  for (std::size_t i = 0; i < points; ++i) {
    const double m = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1));
    const double g = c1 * std::sqrt(m) * std::log(c2 * m) - c3 * m;
    if (i == 0 || g > c.grid_max) {
      c.grid_max = g;
      c.argmax = m;
    }
  }
  c.holds = c.grid_max <= c.bound;
  return c;
}

}  // namespace cslucb::bounds
