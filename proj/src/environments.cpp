#include "cslucb/environments.hpp"

#include <stdexcept>

namespace cslucb::environments {

using feature_model::ActionSet;
using feature_model::ContextDistribution;

ContextDistribution Environment::distribution(const Vector& context, ContextMode mode) const {
  if (mode == ContextMode::observed) return ContextDistribution::dirac(context);
  return stochastic_distribution(context);
}

// ---------------------------------------------------------------------------

namespace {

ActionSet gaussian_actions(const SyntheticConfig& c, Rng& rng) {
  if (c.dim <= 0 || c.num_actions == 0) throw std::invalid_argument("SyntheticConfig: empty dimensions");
  std::vector<Vector> a;
  a.reserve(c.num_actions);
  for (std::size_t i = 0; i < c.num_actions; ++i) a.push_back(standard_normal_vector(c.dim, rng));
  return ActionSet(std::move(a));
}

void validate(const SyntheticConfig& c) {
  if (c.dim <= 0) throw std::invalid_argument("SyntheticConfig: dim must be positive");
  if (!(c.noise_sigma >= 0.0)) throw std::invalid_argument("SyntheticConfig: noise_sigma must be >= 0");
  if (!(c.context_scale >= 0.0) || !(c.mu_scale >= 0.0)) {
    throw std::invalid_argument("SyntheticConfig: scales must be >= 0");
  }
}

}  // namespace

SyntheticQuadraticEnv::SyntheticQuadraticEnv(const SyntheticConfig& config, Rng& action_rng)
    : SyntheticQuadraticEnv(config, gaussian_actions(config, action_rng)) {}

SyntheticQuadraticEnv::SyntheticQuadraticEnv(const SyntheticConfig& config, ActionSet actions)
    : Environment(config.mode), config_(config), map_(config.dim), actions_(std::move(actions)) {
  validate(config_);
  if (actions_.action_dim() != config_.dim) throw std::invalid_argument("SyntheticQuadraticEnv: action dimension");
  if (config_.baseline_rank < 1 || config_.baseline_rank > actions_.size()) {
    throw std::invalid_argument("SyntheticQuadraticEnv: baseline rank out of range");
  }
  const Eigen::Index p = config_.dim;
  theta_star_.resize(3 * p);
  theta_star_.head(2 * p).setOnes();
  theta_star_.tail(p).setConstant(-2.0);
}

Vector SyntheticQuadraticEnv::sample_context(Rng& rng) const {
  return Vector::Constant(config_.dim, config_.context_mean) +
         config_.context_scale * standard_normal_vector(config_.dim, rng);
}

ContextDistribution SyntheticQuadraticEnv::stochastic_distribution(const Vector& context) const {
  return ContextDistribution::gaussian(context,
                                       config_.mu_scale * config_.mu_scale * Matrix::Identity(config_.dim, config_.dim));
}

nlohmann::json SyntheticQuadraticEnv::to_json() const {
  nlohmann::json j = config_;
  nlohmann::json acts = nlohmann::json::array();
  for (const auto& a : actions_.actions()) acts.push_back(std::vector<double>(a.data(), a.data() + a.size()));
  j["actions"] = acts;
  return j;
}

// ---------------------------------------------------------------------------

namespace {

ActionSet one_hot_actions(std::size_t k) {
  std::vector<Vector> a;
  a.reserve(k);
  for (std::size_t i = 0; i < k; ++i) a.push_back(Vector::Unit(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)));
  return ActionSet(std::move(a));
}

}  // namespace

BilinearEnv::BilinearEnv(const BilinearEnvConfig& config, bilinear::BilinearModel model)
    : Environment(config.mode),
      config_(config),
      model_(std::move(model)),
      map_((model_.validate(), model_.site_weights), model_.num_actions()),
      actions_(one_hot_actions(model_.num_actions())) {
  if (static_cast<std::size_t>(model_.context_dim()) != config_.schema.context_dim() ||
      model_.num_actions() != config_.schema.actions) {
    throw std::invalid_argument("BilinearEnv: model shape does not match schema");
  }
  if (config_.baseline_rank < 1 || config_.baseline_rank > model_.num_actions()) {
    throw std::invalid_argument("BilinearEnv: baseline rank out of range");
  }
  if (!(config_.noise_sigma >= 0.0) || !(config_.mu_scale >= 0.0)) {
    throw std::invalid_argument("BilinearEnv: negative scale");
  }
  theta_star_ = model_.action_factors.reshaped();
}

Vector BilinearEnv::sample_context(Rng& rng) const { return bilinear::sample_site_context(config_.schema, rng); }

ContextDistribution BilinearEnv::stochastic_distribution(const Vector& context) const {
  const auto n = context.size();
  Vector var = Vector::Zero(n);
  var.head(static_cast<Eigen::Index>(config_.schema.numeric_features)).setConstant(config_.mu_scale * config_.mu_scale);
  return ContextDistribution::gaussian(context, var.asDiagonal().toDenseMatrix());
}

nlohmann::json BilinearEnv::to_json() const {
  nlohmann::json j = config_;
  j["model"] = model_;
  return j;
}

// ---------------------------------------------------------------------------

RoundSample sample_round(const Environment& env, Rng& rng) {
  Vector c = env.sample_context(rng);
  auto mu = env.distribution(c, env.mode());
  return RoundSample{std::move(mu), std::move(c)};
}

double expected_reward(const Environment& env, std::size_t action, const Vector& context) {
  return env.theta_star().dot(feature_model::features(env.feature_map(), env.actions()[action], context));
}

double realize_reward(const Environment& env, std::size_t action, const Vector& context, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double eta = normal(rng);
  return expected_reward(env, action, context) + env.noise_sigma() * eta;
}

std::size_t best_action_under_mu(const Environment& env, const ContextDistribution& mu, std::size_t mc_budget,
                                 Rng& rng) {
  std::size_t best = 0;
  double best_value = 0.0;
  for (std::size_t x = 0; x < env.actions().size(); ++x) {
    const double v = env.theta_star().dot(
        feature_model::expected_features(env.feature_map(), env.actions()[x], mu, mc_budget, rng));
    if (x == 0 || v > best_value) {
      best_value = v;
      best = x;
    }
  }
  return best;
}

std::string to_string(ContextMode m) { return m == ContextMode::observed ? "observed" : "stochastic"; }

ContextMode context_mode_from_string(const std::string& s) {
  if (s == "observed") return ContextMode::observed;
  if (s == "stochastic") return ContextMode::stochastic;
  throw std::invalid_argument("unknown context mode: " + s);
}

void to_json(nlohmann::json& j, const SyntheticConfig& c) {
  j = nlohmann::json{{"dim", c.dim},
                     {"num_actions", c.num_actions},
                     {"noise_sigma", c.noise_sigma},
                     {"baseline_rank", c.baseline_rank},
                     {"context_mean", c.context_mean},
                     {"context_scale", c.context_scale},
                     {"mu_scale", c.mu_scale},
                     {"context_mode", to_string(c.mode)}};
}

void from_json(const nlohmann::json& j, SyntheticConfig& c) {
  SyntheticConfig d{};
  c.dim = j.value("dim", d.dim);
  c.num_actions = j.value("num_actions", d.num_actions);
  c.noise_sigma = j.value("noise_sigma", d.noise_sigma);
  c.baseline_rank = j.value("baseline_rank", d.baseline_rank);
  c.context_mean = j.value("context_mean", d.context_mean);
  c.context_scale = j.value("context_scale", d.context_scale);
  c.mu_scale = j.value("mu_scale", d.mu_scale);
  c.mode = context_mode_from_string(j.value("context_mode", to_string(d.mode)));
}

void to_json(nlohmann::json& j, const BilinearEnvConfig& c) {
  j = nlohmann::json{{"noise_sigma", c.noise_sigma},
                     {"baseline_rank", c.baseline_rank},
                     {"mu_scale", c.mu_scale},
                     {"context_mode", to_string(c.mode)},
                     {"numeric_features", c.schema.numeric_features},
                     {"locations", c.schema.locations},
                     {"num_actions", c.schema.actions}};
}

void from_json(const nlohmann::json& j, BilinearEnvConfig& c) {
  BilinearEnvConfig d{};
  c.noise_sigma = j.value("noise_sigma", d.noise_sigma);
  c.baseline_rank = j.value("baseline_rank", d.baseline_rank);
  c.mu_scale = j.value("mu_scale", d.mu_scale);
  c.mode = context_mode_from_string(j.value("context_mode", to_string(d.mode)));
  c.schema.numeric_features = j.value("numeric_features", d.schema.numeric_features);
  c.schema.locations = j.value("locations", d.schema.locations);
  c.schema.actions = j.value("num_actions", d.schema.actions);
}

}  // namespace cslucb::environments
