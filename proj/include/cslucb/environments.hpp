#pragma once

#include <cstddef>
#include <memory>
#include <string>

#include <json.hpp>

#include "cslucb/bilinear.hpp"
#include "cslucb/feature_model.hpp"
#include "cslucb/random.hpp"

namespace cslucb::environments {

/// What the learner sees each round: the context distribution
/// (stochastic) or the realized context itself (observed, a point mass).
enum class ContextMode { stochastic, observed };

struct RoundSample {
  feature_model::ContextDistribution mu;
  Vector context;  // environment-private in stochastic mode
};

/// Simulated contextual bandit with a linear reward <theta*, phi(x, c)> + noise.
/// Read-only after construction; all randomness is passed in.
class Environment {
 public:
  explicit Environment(ContextMode mode) : mode_(mode) {}
  virtual ~Environment() = default;

  virtual std::string kind() const = 0;
  virtual const feature_model::FeatureMap& feature_map() const = 0;
  virtual const feature_model::ActionSet& actions() const = 0;
  virtual const Vector& theta_star() const = 0;
  virtual double noise_sigma() const = 0;
  virtual std::size_t baseline_rank() const = 0;
  virtual nlohmann::json to_json() const = 0;

  /// Draws the round's realized context c_t.
  virtual Vector sample_context(Rng& rng) const = 0;
  /// Learner-visible mu_t in stochastic mode, centered on c_t.
  virtual feature_model::ContextDistribution stochastic_distribution(const Vector& context) const = 0;

  ContextMode mode() const { return mode_; }
  feature_model::ContextDistribution distribution(const Vector& context, ContextMode mode) const;

 private:
  ContextMode mode_;
};

struct SyntheticConfig {
  Eigen::Index dim = 5;               // p, action and context dimension
  std::size_t num_actions = 20;
  double noise_sigma = 0.1;
  std::size_t baseline_rank = 10;
  double context_mean = 0.0;          // c_t ~ N(context_mean 1, context_scale^2 I)
  double context_scale = 1.0;
  double mu_scale = 1.0;              // mu_t = N(c_t, mu_scale^2 I)
  ContextMode mode = ContextMode::stochastic;
};

/// Quadratic reward sum_i (x_i - c_i)^2 with Gaussian actions and contexts.
class SyntheticQuadraticEnv final : public Environment {
 public:
  /// Actions are drawn once from rng (standard Gaussian entries).
  SyntheticQuadraticEnv(const SyntheticConfig& config, Rng& action_rng);
  SyntheticQuadraticEnv(const SyntheticConfig& config, feature_model::ActionSet actions);

  std::string kind() const override { return "synthetic"; }
  const feature_model::FeatureMap& feature_map() const override { return map_; }
  const feature_model::ActionSet& actions() const override { return actions_; }
  const Vector& theta_star() const override { return theta_star_; }
  double noise_sigma() const override { return config_.noise_sigma; }
  std::size_t baseline_rank() const override { return config_.baseline_rank; }
  nlohmann::json to_json() const override;

  Vector sample_context(Rng& rng) const override;
  feature_model::ContextDistribution stochastic_distribution(const Vector& context) const override;

  const SyntheticConfig& config() const { return config_; }

 private:
  SyntheticConfig config_;
  feature_model::QuadraticFeatureMap map_;
  feature_model::ActionSet actions_;
  Vector theta_star_;
};

struct BilinearEnvConfig {
  double noise_sigma = 0.1;
  std::size_t baseline_rank = 16;
  double mu_scale = 1.0;  // mu_t perturbs the numeric block with N(0, mu_scale^2)
  ContextMode mode = ContextMode::stochastic;
  bilinear::YieldSchema schema{};
};

/// Yield simulator driven by a fitted bilinear model; theta* = vec(V) under
/// the block feature map, so <theta*, phi(x, c)> = c^T W V_x.
class BilinearEnv final : public Environment {
 public:
  BilinearEnv(const BilinearEnvConfig& config, bilinear::BilinearModel model);

  std::string kind() const override { return "bilinear"; }
  const feature_model::FeatureMap& feature_map() const override { return map_; }
  const feature_model::ActionSet& actions() const override { return actions_; }
  const Vector& theta_star() const override { return theta_star_; }
  double noise_sigma() const override { return config_.noise_sigma; }
  std::size_t baseline_rank() const override { return config_.baseline_rank; }
  nlohmann::json to_json() const override;

  Vector sample_context(Rng& rng) const override;
  feature_model::ContextDistribution stochastic_distribution(const Vector& context) const override;

  const bilinear::BilinearModel& model() const { return model_; }

 private:
  BilinearEnvConfig config_;
  bilinear::BilinearModel model_;
  feature_model::BilinearFeatureMap map_;
  feature_model::ActionSet actions_;
  Vector theta_star_;
};

/// (mu_t, c_t) using the environment's own context mode.
RoundSample sample_round(const Environment& env, Rng& rng);

/// <theta*, phi(x, c)>.
double expected_reward(const Environment& env, std::size_t action, const Vector& context);
/// <theta*, phi(x, c)> + eta, eta ~ N(0, sigma^2).
double realize_reward(const Environment& env, std::size_t action, const Vector& context, Rng& rng);

/// argmax_x <theta*, E_mu[phi(x, c)]>, ties to the lowest index.
std::size_t best_action_under_mu(const Environment& env, const feature_model::ContextDistribution& mu,
                                 std::size_t mc_budget, Rng& rng);

std::string to_string(ContextMode m);
ContextMode context_mode_from_string(const std::string& s);

void to_json(nlohmann::json& j, const SyntheticConfig& c);
void from_json(const nlohmann::json& j, SyntheticConfig& c);
void to_json(nlohmann::json& j, const BilinearEnvConfig& c);
void from_json(const nlohmann::json& j, BilinearEnvConfig& c);

}  // namespace cslucb::environments
