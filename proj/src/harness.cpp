#include "cslucb/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

#include "cslucb/random.hpp"
#include "cslucb/text.hpp"

namespace cslucb::harness {

using environments::ContextMode;
using environments::Environment;
using nlohmann::json;

namespace {

constexpr std::uint64_t kContextStream = 1;
constexpr std::uint64_t kNoiseStream = 2;
constexpr std::uint64_t kMonteCarloStream = 3;
constexpr std::uint64_t kActionTag = 0xAC710;
constexpr std::uint64_t kPrepassTag = 0x9E9A55;
constexpr std::uint64_t kSurrogateTag = 0x5A1;
constexpr std::uint64_t kFitTag = 0xF17;

}  // namespace

std::string to_string(PolicyKind p) {
  switch (p) {
    case PolicyKind::linucb: return "linucb";
    case PolicyKind::clucb: return "clucb";
    case PolicyKind::cslucb: return "cslucb";
  }
  return "unknown";
}

PolicyKind policy_from_string(const std::string& s) {
  if (s == "linucb") return PolicyKind::linucb;
  if (s == "clucb") return PolicyKind::clucb;
  if (s == "cslucb") return PolicyKind::cslucb;
  throw std::invalid_argument("unknown policy: " + s);
}

ContextMode learner_view(PolicyKind p) {
  return p == PolicyKind::cslucb ? ContextMode::stochastic : ContextMode::observed;
}

// ---------------------------------------------------------------------------
// Configuration

ExperimentConfig default_config(const std::string& environment) {
  ExperimentConfig c;
  c.environment = environment;
  if (environment == "bilinear") {
    c.alphas = {0.2, 0.4, 0.6, 0.9};
    c.horizon = 1000;
  } else if (environment != "synthetic") {
    throw std::invalid_argument("unknown environment: " + environment);
  }
  return c;
}

void ExperimentConfig::validate() const {
  if (environment != "synthetic" && environment != "bilinear") {
    throw std::invalid_argument("config: unknown environment '" + environment + "'");
  }
  if (horizon < 1) throw std::invalid_argument("config: horizon must be >= 1");
  if (trials < 1) throw std::invalid_argument("config: trials must be >= 1");
  if (policies.empty()) throw std::invalid_argument("config: no policies");
  const bool constrained = std::any_of(policies.begin(), policies.end(),
                                       [](PolicyKind p) { return p != PolicyKind::linucb; });
  if (constrained && alphas.empty()) throw std::invalid_argument("config: no alpha values");
  for (double a : alphas) {
    if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("config: alpha " + text::format_double(a) + " outside (0, 1)");
  }
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("config: delta must lie in (0, 1)");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("config: lambda must be > 0");
  if (sigma && !(*sigma >= 0.0)) throw std::invalid_argument("config: sigma must be >= 0");
  if (param_bound && !(*param_bound >= 0.0)) throw std::invalid_argument("config: param_bound must be >= 0");
  if (feature_bound && !(*feature_bound >= 0.0)) throw std::invalid_argument("config: feature_bound must be >= 0");
  if (!feature_bound && prepass_draws == 0) {
    throw std::invalid_argument("config: prepass_draws must be positive when feature_bound is not given");
  }
  if (!(feature_quantile > 0.0 && feature_quantile <= 1.0)) {
    throw std::invalid_argument("config: feature_quantile must lie in (0, 1]");
  }
  if (mc_budget == 0) throw std::invalid_argument("config: mc_budget must be positive");
  if (baseline_rank && *baseline_rank == 0) throw std::invalid_argument("config: baseline_rank must be >= 1");
  if (curve_points < 2) throw std::invalid_argument("config: curve_points must be >= 2");
}

namespace {

template <class T>
void put_optional(json& j, const char* key, const std::optional<T>& v) {
  j[key] = v ? json(*v) : json(nullptr);
}

template <class T>
void get_optional(const json& j, const char* key, std::optional<T>& v) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  v = j.at(key).get<T>();
}

json surrogate_json(const bilinear::SurrogateOptions& s) {
  return json{{"rows", s.rows}, {"latent", s.latent}, {"noise", s.noise}};
}

json sgd_json(const bilinear::SgdOptions& s) {
  return json{{"learning_rate", s.learning_rate}, {"lambda_v", s.lambda_v}, {"lambda_w", s.lambda_w},
              {"epochs", s.epochs},               {"latent", s.latent},     {"init_scale", s.init_scale}};
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument("config: " + where + " must be an object");
  for (const auto& [k, _] : j.items()) {
    if (!allowed.count(k)) throw std::invalid_argument("config: unknown key '" + k + "' in " + where);
  }
}

}  // namespace

void to_json(json& j, const ExperimentConfig& c) {
  j = json::object();
  j["environment"] = c.environment;
  j["synthetic"] = c.synthetic;
  j["bilinear"] = c.bilinear;
  put_optional(j, "model_path", c.model_path);
  j["surrogate"] = surrogate_json(c.surrogate);
  j["sgd"] = sgd_json(c.sgd);
  json pol = json::array();
  for (auto p : c.policies) pol.push_back(to_string(p));
  j["policies"] = pol;
  j["alphas"] = c.alphas;
  j["horizon"] = c.horizon;
  j["trials"] = c.trials;
  j["seed"] = c.seed;
  j["delta"] = c.delta;
  j["lambda"] = c.lambda;
  put_optional(j, "sigma", c.sigma);
  put_optional(j, "baseline_rank", c.baseline_rank);
  put_optional(j, "param_bound", c.param_bound);
  put_optional(j, "feature_bound", c.feature_bound);
  j["prepass_draws"] = c.prepass_draws;
  j["feature_quantile"] = c.feature_quantile;
  j["mc_budget"] = c.mc_budget;
  j["clip_rewards"] = c.clip_rewards;
  j["track_coverage"] = c.track_coverage;
  put_optional(j, "reward_low", c.reward_low);
  put_optional(j, "reward_high", c.reward_high);
  put_optional(j, "gap_low", c.gap_low);
  put_optional(j, "gap_high", c.gap_high);
  j["out_dir"] = c.out_dir;
  j["write_traces"] = c.write_traces;
  j["curve_points"] = c.curve_points;
  j["threads"] = c.threads;
}

void from_json(const json& j, ExperimentConfig& c) {
  static const std::set<std::string> keys{
      "environment",   "synthetic",     "bilinear",     "model_path",    "surrogate",     "sgd",
      "policies",      "alphas",        "horizon",      "trials",        "seed",          "delta",
      "lambda",        "sigma",         "baseline_rank", "param_bound",  "feature_bound", "prepass_draws",
      "feature_quantile", "mc_budget",  "clip_rewards", "track_coverage", "reward_low",   "reward_high",
      "gap_low",       "gap_high",      "out_dir",      "write_traces",  "curve_points",  "threads"};
  check_keys(j, keys, "config");
  ExperimentConfig d = default_config(j.value("environment", std::string("synthetic")));
  c = d;
  if (j.contains("synthetic")) c.synthetic = j.at("synthetic").get<environments::SyntheticConfig>();
  if (j.contains("bilinear")) c.bilinear = j.at("bilinear").get<environments::BilinearEnvConfig>();
  get_optional(j, "model_path", c.model_path);
  if (j.contains("surrogate")) {
    const auto& s = j.at("surrogate");
    check_keys(s, {"rows", "latent", "noise"}, "surrogate");
    c.surrogate.rows = s.value("rows", d.surrogate.rows);
    c.surrogate.latent = s.value("latent", d.surrogate.latent);
    c.surrogate.noise = s.value("noise", d.surrogate.noise);
  }
  c.surrogate.schema = c.bilinear.schema;
  if (j.contains("sgd")) {
    const auto& s = j.at("sgd");
    check_keys(s, {"learning_rate", "lambda_v", "lambda_w", "epochs", "latent", "init_scale"}, "sgd");
    c.sgd.learning_rate = s.value("learning_rate", d.sgd.learning_rate);
    c.sgd.lambda_v = s.value("lambda_v", d.sgd.lambda_v);
    c.sgd.lambda_w = s.value("lambda_w", d.sgd.lambda_w);
    c.sgd.epochs = s.value("epochs", d.sgd.epochs);
    c.sgd.latent = s.value("latent", d.sgd.latent);
    c.sgd.init_scale = s.value("init_scale", d.sgd.init_scale);
  }
  if (j.contains("policies")) {
    c.policies.clear();
    for (const auto& p : j.at("policies")) c.policies.push_back(policy_from_string(p.get<std::string>()));
  }
  if (j.contains("alphas")) c.alphas = j.at("alphas").get<std::vector<double>>();
  c.horizon = j.value("horizon", d.horizon);
  c.trials = j.value("trials", d.trials);
  c.seed = j.value("seed", d.seed);
  c.delta = j.value("delta", d.delta);
  c.lambda = j.value("lambda", d.lambda);
  get_optional(j, "sigma", c.sigma);
  get_optional(j, "baseline_rank", c.baseline_rank);
  get_optional(j, "param_bound", c.param_bound);
  get_optional(j, "feature_bound", c.feature_bound);
  c.prepass_draws = j.value("prepass_draws", d.prepass_draws);
  c.feature_quantile = j.value("feature_quantile", d.feature_quantile);
  c.mc_budget = j.value("mc_budget", d.mc_budget);
  c.clip_rewards = j.value("clip_rewards", d.clip_rewards);
  c.track_coverage = j.value("track_coverage", d.track_coverage);
  get_optional(j, "reward_low", c.reward_low);
  get_optional(j, "reward_high", c.reward_high);
  get_optional(j, "gap_low", c.gap_low);
  get_optional(j, "gap_high", c.gap_high);
  c.out_dir = j.value("out_dir", d.out_dir);
  c.write_traces = j.value("write_traces", d.write_traces);
  c.curve_points = j.value("curve_points", d.curve_points);
  c.threads = j.value("threads", d.threads);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
  auto c = j.get<ExperimentConfig>();
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Trials

bool RegretTrace::constraint_held() const {
  return std::all_of(rounds.begin(), rounds.end(), [](const RoundRecord& r) { return r.constraint_slack >= 0.0; });
}

namespace {

void require_finite(double v, std::size_t t, const char* what) {
  if (!std::isfinite(v)) {
    throw std::runtime_error("round " + std::to_string(t) + ": non-finite " + what);
  }
}

std::size_t argmax_first(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

RegretTrace run_trial(const Environment& env, const TrialSettings& s, std::uint64_t master_seed, std::size_t trial) {
  if (s.horizon < 1) throw std::invalid_argument("run_trial: horizon must be >= 1");
  s.beta.validate();
  if (s.beta.dim != env.feature_map().dim()) throw std::invalid_argument("run_trial: beta dimension mismatch");
  const bool constrained = s.policy != PolicyKind::linucb;
  if (constrained && !(s.alpha > 0.0 && s.alpha < 1.0)) {
    throw std::invalid_argument("run_trial: alpha must lie in (0, 1)");
  }
  const auto& actions = env.actions();
  if (s.baseline_rank < 1 || s.baseline_rank > actions.size()) {
    throw std::invalid_argument("run_trial: baseline rank out of range");
  }

  Rng context_rng(derive_seed(master_seed, {trial, kContextStream}));
  Rng noise_rng(derive_seed(master_seed, {trial, kNoiseStream}));
  Rng mc_rng(derive_seed(master_seed, {trial, kMonteCarloStream}));

  RegretTrace trace;
  trace.policy = to_string(s.policy);
  trace.alpha = constrained ? s.alpha : 0.0;
  trace.trial = trial;
  trace.rounds.reserve(s.horizon);
  trace.lower_bounds.reserve(s.horizon);
  trace.baseline_known.reserve(s.horizon);
  trace.baseline_realized.reserve(s.horizon);

  std::optional<policies::LinUcb> lin;
  std::optional<policies::ConservativeLinUcb> cons;
  if (constrained) {
    cons.emplace(s.beta, s.alpha, s.clip_rewards);
  } else {
    lin.emplace(s.beta, s.clip_rewards);
  }
  auto state = [&]() -> const policies::PolicyState& { return constrained ? cons->state() : lin->state(); };

  const Vector& theta = env.theta_star();
  const ContextMode view = learner_view(s.policy);
  const std::size_t k = actions.size();
  std::vector<Vector> psi(k);
  std::vector<double> expected(k);
  std::vector<double> realized(k);

  double regret_realized = 0.0;
  double regret_expected = 0.0;
  double played_expected = 0.0;
  double baseline_total = 0.0;

  for (std::size_t t = 1; t <= s.horizon; ++t) {
    const Vector c = env.sample_context(context_rng);
    const auto mu = env.distribution(c, view);
    for (std::size_t x = 0; x < k; ++x) {
      psi[x] = feature_model::expected_features(env.feature_map(), actions[x], mu, s.mc_budget, mc_rng);
      expected[x] = theta.dot(psi[x]);
      realized[x] = environments::expected_reward(env, x, c);
      require_finite(expected[x], t, "expected reward");
      require_finite(realized[x], t, "reward");
    }
    const std::size_t best = argmax_first(expected);
    const std::size_t b = policies::baseline_kth_best(theta, psi, s.baseline_rank);
    const double rb = expected[b];

    if (s.track_coverage && !confidence::contains(state().ellipsoid, theta) && trace.theta_covered) {
      trace.theta_covered = false;
      trace.first_uncovered = t;
    }

    RoundRecord rec;
    rec.t = t;
    double lower = std::numeric_limits<double>::quiet_NaN();
    if (constrained) {
      const auto d = cons->step(psi, b, rb);
      rec.action = d.action;
      rec.play_type = d.play_type;
      lower = d.lower_bound;
      require_finite(lower, t, "lower confidence bound");
    } else {
      rec.action = lin->select(psi);
      rec.play_type = policies::PlayType::optimistic;
    }

    rec.reward = environments::realize_reward(env, rec.action, c, noise_rng);
    require_finite(rec.reward, t, "observed reward");
    if (rec.play_type == policies::PlayType::optimistic) {
      if (constrained) {
        cons->absorb_reward(rec.reward);
      } else {
        lin->absorb_reward(psi[rec.action], rec.reward);
      }
      require_finite(state().ellipsoid.center().squaredNorm(), t, "ridge estimate");
    }

    regret_realized += realized[best] - realized[rec.action];
    regret_expected += expected[best] - expected[rec.action];
    played_expected += expected[rec.action];
    baseline_total += rb;
    rec.regret_realized = regret_realized;
    rec.regret_expected = regret_expected;
    rec.constraint_slack = played_expected - (1.0 - trace.alpha) * baseline_total;
    rec.m = state().optimistic_plays;
    rec.n = state().baseline_plays;

    trace.rounds.push_back(rec);
    trace.lower_bounds.push_back(lower);
    trace.baseline_known.push_back(rb);
    trace.baseline_realized.push_back(realized[b]);
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Experiment setup

namespace {

std::unique_ptr<Environment> build_environment(const ExperimentConfig& config, json& info) {
  if (config.environment == "synthetic") {
    Rng rng(derive_seed(config.seed, {kActionTag}));
    return std::make_unique<environments::SyntheticQuadraticEnv>(config.synthetic, rng);
  }
  bilinear::BilinearModel model;
  if (config.model_path) {
    model = bilinear::load_model(*config.model_path);
    info["model_source"] = *config.model_path;
  } else {
    auto surrogate_opts = config.surrogate;
    surrogate_opts.schema = config.bilinear.schema;
    Rng srng(derive_seed(config.seed, {kSurrogateTag}));
    const auto surrogate = bilinear::make_surrogate(surrogate_opts, srng);
    Rng frng(derive_seed(config.seed, {kFitTag}));
    auto fit = bilinear::sgd_fit(surrogate.data, config.sgd, frng);
    info["model_source"] = "surrogate";
    info["training_mse"] = fit.mse_trace.empty() ? bilinear::mean_squared_error(fit.model, surrogate.data)
                                                 : fit.mse_trace.back();
    model = std::move(fit.model);
  }
  return std::make_unique<environments::BilinearEnv>(config.bilinear, std::move(model));
}

double nearest_rank_quantile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
  idx = std::clamp<std::size_t>(idx, 1, v.size());
  return v[idx - 1];
}

}  // namespace

Setup prepare(const ExperimentConfig& config) {
  config.validate();
  Setup s;
  json info = json::object();
  s.env = build_environment(config, info);
  const Environment& env = *s.env;
  const auto& actions = env.actions();
  s.baseline_rank = config.baseline_rank.value_or(env.baseline_rank());
  if (s.baseline_rank > actions.size()) throw std::invalid_argument("config: baseline_rank exceeds the number of actions");

  // Pre-pass over fresh contexts: feature norms under both learner views and
  // the baseline reward and gap ranges under the context distributions.
  std::vector<double> norms;
  double rb_low = std::numeric_limits<double>::infinity();
  double rb_high = -std::numeric_limits<double>::infinity();
  double gap_low = std::numeric_limits<double>::infinity();
  double gap_high = -std::numeric_limits<double>::infinity();
  Rng rng(derive_seed(config.seed, {kPrepassTag}));
  const Vector& theta = env.theta_star();
  std::vector<Vector> psi(actions.size());
  norms.reserve(config.prepass_draws * actions.size() * 2);
  for (std::size_t i = 0; i < config.prepass_draws; ++i) {
    const Vector c = env.sample_context(rng);
    const auto mu = env.stochastic_distribution(c);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t x = 0; x < actions.size(); ++x) {
      psi[x] = feature_model::expected_features(env.feature_map(), actions[x], mu, config.mc_budget, rng);
      norms.push_back(psi[x].norm());
      norms.push_back(feature_model::features(env.feature_map(), actions[x], c).norm());
      best = std::max(best, theta.dot(psi[x]));
    }
    const double rb = theta.dot(psi[policies::baseline_kth_best(theta, psi, s.baseline_rank)]);
    rb_low = std::min(rb_low, rb);
    rb_high = std::max(rb_high, rb);
    gap_low = std::min(gap_low, best - rb);
    gap_high = std::max(gap_high, best - rb);
  }

  s.beta.dim = env.feature_map().dim();
  s.beta.sigma = config.sigma.value_or(env.noise_sigma());
  s.beta.lambda = config.lambda;
  s.beta.delta = config.delta;
  s.beta.param_bound = config.param_bound.value_or(theta.norm());
  s.beta.feature_bound = config.feature_bound ? *config.feature_bound
                                              : nearest_rank_quantile(norms, config.feature_quantile);
  s.beta.validate();

  s.theory.dim = static_cast<double>(s.beta.dim);
  s.theory.param_bound = s.beta.param_bound;
  s.theory.feature_bound = s.beta.feature_bound;
  s.theory.lambda = s.beta.lambda;
  s.theory.sigma = s.beta.sigma;
  s.theory.delta = s.beta.delta;
  const bool have_prepass = config.prepass_draws > 0;
  s.theory.reward_low = config.reward_low.value_or(have_prepass ? rb_low : s.theory.reward_low);
  s.theory.reward_high = config.reward_high.value_or(have_prepass ? rb_high : s.theory.reward_high);
  s.theory.gap_low = config.gap_low.value_or(have_prepass ? gap_low : s.theory.gap_low);
  s.theory.gap_high = config.gap_high.value_or(have_prepass ? gap_high : s.theory.gap_high);
  s.theory.horizon = static_cast<double>(config.horizon);

  s.constants = info;
  s.constants["A"] = s.beta.param_bound;
  s.constants["D"] = s.beta.feature_bound;
  s.constants["D_source"] = config.feature_bound ? "config" : "prepass_quantile";
  s.constants["sigma"] = s.beta.sigma;
  s.constants["lambda"] = s.beta.lambda;
  s.constants["delta"] = s.beta.delta;
  s.constants["dim"] = s.beta.dim;
  s.constants["baseline_rank"] = s.baseline_rank;
  s.constants["beta0"] = confidence::beta(0, s.beta);
  s.constants["feature_quantile"] = config.feature_quantile;
  s.constants["prepass_draws"] = config.prepass_draws;
  if (have_prepass) {
    s.constants["prepass"] = json{{"baseline_reward_min", rb_low},
                                  {"baseline_reward_max", rb_high},
                                  {"gap_min", gap_low},
                                  {"gap_max", gap_high},
                                  {"feature_norm_max", *std::max_element(norms.begin(), norms.end())}};
  }
  return s;
}

TrialSettings settings_for(const ExperimentConfig& config, const Setup& setup, PolicyKind policy, double alpha) {
  TrialSettings t;
  t.policy = policy;
  t.alpha = policy == PolicyKind::linucb ? 0.0 : alpha;
  t.horizon = config.horizon;
  t.baseline_rank = setup.baseline_rank;
  t.beta = setup.beta;
  t.mc_budget = config.mc_budget;
  t.clip_rewards = config.clip_rewards;
  t.track_coverage = config.track_coverage;
  return t;
}

RegretTrace run_trial(const ExperimentConfig& config, PolicyKind policy, double alpha, std::size_t trial) {
  const Setup setup = prepare(config);
  return run_trial(*setup.env, settings_for(config, setup, policy, alpha), config.seed, trial);
}

// ---------------------------------------------------------------------------
// Aggregation

namespace {

struct Moments {
  double mean = 0;
  double se = 0;
};

Moments moments(const std::vector<double>& v) {
  Moments m;
  const double n = static_cast<double>(v.size());
  double sum = 0.0;
  for (double x : v) sum += x;
  m.mean = sum / n;
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return m;
}

std::vector<std::size_t> curve_indices(std::size_t horizon, std::size_t points) {
  std::vector<std::size_t> idx;
  if (horizon <= points) {
    for (std::size_t i = 0; i < horizon; ++i) idx.push_back(i);
    return idx;
  }
  for (std::size_t i = 0; i < points; ++i) {
    const auto j = static_cast<std::size_t>(
        std::llround(static_cast<double>(i) * static_cast<double>(horizon - 1) / static_cast<double>(points - 1)));
    if (idx.empty() || j != idx.back()) idx.push_back(j);
  }
  return idx;
}

using Field = double (*)(const RoundRecord&);

const std::vector<std::pair<const char*, Field>>& fields() {
  static const std::vector<std::pair<const char*, Field>> f{
      {"regret_realized", [](const RoundRecord& r) { return r.regret_realized; }},
      {"regret_expected", [](const RoundRecord& r) { return r.regret_expected; }},
      {"constraint_slack", [](const RoundRecord& r) { return r.constraint_slack; }},
      {"m_t", [](const RoundRecord& r) { return static_cast<double>(r.m); }},
      {"n_t", [](const RoundRecord& r) { return static_cast<double>(r.n); }},
  };
  return f;
}

}  // namespace

json aggregate(const std::vector<RegretTrace>& traces, std::size_t curve_points) {
  if (curve_points < 2) throw std::invalid_argument("aggregate: curve_points must be >= 2");
  std::map<std::pair<std::string, double>, std::vector<const RegretTrace*>> groups;
  for (const auto& t : traces) groups[{t.policy, t.alpha}].push_back(&t);

  json cells = json::array();
  for (auto& [key, group] : groups) {
    std::sort(group.begin(), group.end(), [](auto* a, auto* b) { return a->trial < b->trial; });
    for (std::size_t i = 1; i < group.size(); ++i) {
      if (group[i]->trial == group[i - 1]->trial) {
        throw std::invalid_argument("aggregate: duplicate trial " + std::to_string(group[i]->trial) + " for " +
                                    key.first);
      }
    }
    const std::size_t horizon = group.front()->rounds.size();
    if (horizon == 0) throw std::invalid_argument("aggregate: empty trace");
    for (auto* t : group) {
      if (t->rounds.size() != horizon) throw std::invalid_argument("aggregate: traces of unequal length in " + key.first);
    }

    json cell;
    cell["policy"] = key.first;
    cell["alpha"] = key.second;
    cell["trials"] = group.size();
    cell["horizon"] = horizon;

    json curves;
    const auto idx = curve_indices(horizon, curve_points);
    std::vector<std::size_t> ts;
    for (auto i : idx) ts.push_back(group.front()->rounds[i].t);
    curves["t"] = ts;
    std::vector<double> column(group.size());
    for (const auto& [name, get] : fields()) {
      std::vector<double> mean;
      std::vector<double> se;
      for (auto i : idx) {
        for (std::size_t g = 0; g < group.size(); ++g) column[g] = get(group[g]->rounds[i]);
        const auto m = moments(column);
        mean.push_back(m.mean);
        se.push_back(m.se);
      }
      curves[std::string(name) + "_mean"] = mean;
      curves[std::string(name) + "_se"] = se;
    }
    cell["curves"] = curves;

    json final_table;
    final_table["T"] = group.front()->rounds.back().t;
    for (const auto& [name, get] : fields()) {
      for (std::size_t g = 0; g < group.size(); ++g) column[g] = get(group[g]->rounds.back());
      const auto m = moments(column);
      final_table[name] = json{{"mean", m.mean}, {"se", m.se}};
    }
    for (std::size_t g = 0; g < group.size(); ++g) {
      column[g] = group[g]->rounds.back().regret_realized / static_cast<double>(group[g]->rounds.back().t);
    }
    const auto per_step = moments(column);
    final_table["per_step_regret"] = json{{"mean", per_step.mean}, {"se", per_step.se}};
    cell["final"] = final_table;

    std::size_t violating_trials = 0;
    std::size_t violating_rounds = 0;
    double min_slack = std::numeric_limits<double>::infinity();
    for (auto* t : group) {
      std::size_t v = 0;
      for (const auto& r : t->rounds) {
        if (r.constraint_slack < 0.0) ++v;
        min_slack = std::min(min_slack, r.constraint_slack);
      }
      violating_rounds += v;
      if (v > 0) ++violating_trials;
    }
    cell["violations"] = json{{"trials_with_violation", violating_trials},
                              {"violating_rounds", violating_rounds},
                              {"min_slack", min_slack},
                              {"safe_fraction", 1.0 - static_cast<double>(violating_trials) /
                                                          static_cast<double>(group.size())}};
    cells.push_back(cell);
  }
  return json{{"cells", cells}};
}

// ---------------------------------------------------------------------------
// Experiments

namespace {

json bound_report(const Setup& setup, const CellResult& cell, std::size_t horizon) {
  auto p = setup.theory;
  p.horizon = static_cast<double>(horizon);
  json out = json::object();
  auto attempt = [&](const char* name, auto&& f) {
    try {
      out[name] = f();
    } catch (const std::exception& e) {
      out[name] = json{{"error", e.what()}};
    }
  };
  if (cell.policy == PolicyKind::linucb) {
    p.alpha = 0.5;  // unused by the optimistic-round bound
    attempt("ucb_regret_bound", [&] { return bounds::ucb_regret_bound(p, p.horizon); });
    return out;
  }
  p.alpha = cell.alpha;
  json params;
  bounds::to_json(params, p);
  out["params"] = params;
  attempt("ucb_regret_bound", [&] { return bounds::ucb_regret_bound(p, p.horizon); });
  attempt("nT_upper_bound", [&] { return bounds::nT_upper_bound(p); });
  attempt("nT_lower_bound", [&] { return bounds::nT_lower_bound(p); });
  attempt("total_regret_bound", [&] {
    const auto r = bounds::total_regret_bound(p);
    return json{{"ucb_term", r.ucb_term},
                {"conservatism_term", r.conservatism_term},
                {"context_term", r.context_term},
                {"total", r.total()}};
  });
  if (out["nT_upper_bound"].is_number() && !cell.traces.empty()) {
    const double cap = out["nT_upper_bound"].get<double>();
    std::size_t within = 0;
    for (const auto& t : cell.traces) within += static_cast<double>(t.rounds.back().n) <= cap ? 1 : 0;
    out["trials_within_nT_upper"] = within;
  }
  return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  const Setup setup = prepare(config);

  ExperimentResult result;
  for (auto p : config.policies) {
    if (p == PolicyKind::linucb) {
      result.cells.push_back(CellResult{p, 0.0, {}, std::nullopt});
    } else {
      for (double a : config.alphas) result.cells.push_back(CellResult{p, a, {}, std::nullopt});
    }
  }

  const std::size_t tasks = result.cells.size() * config.trials;
  std::vector<std::optional<RegretTrace>> slots(tasks);
  std::vector<std::string> errors(tasks);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks; i = next++) {
      const auto& cell = result.cells[i / config.trials];
      const std::size_t trial = i % config.trials;
      try {
        slots[i] = run_trial(*setup.env, settings_for(config, setup, cell.policy, cell.alpha), config.seed, trial);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  std::size_t threads = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, tasks);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  json failures = json::array();
  std::vector<RegretTrace> all;
  for (std::size_t i = 0; i < tasks; ++i) {
    auto& cell = result.cells[i / config.trials];
    if (slots[i]) {
      cell.traces.push_back(std::move(*slots[i]));
    } else {
      const std::string name = to_string(cell.policy) + " alpha=" + text::format_double(cell.alpha);
      if (!cell.error) cell.error = errors[i];
      failures.push_back(json{{"cell", name}, {"trial", i % config.trials}, {"error", errors[i]}});
    }
  }
  for (const auto& cell : result.cells) all.insert(all.end(), cell.traces.begin(), cell.traces.end());

  json summary;
  summary["config"] = config;
  summary["environment"] = setup.env->to_json();
  summary["constants"] = setup.constants;
  json agg = all.empty() ? json{{"cells", json::array()}} : aggregate(all, config.curve_points);
  for (auto& c : agg["cells"]) {
    for (const auto& cell : result.cells) {
      const double a = cell.policy == PolicyKind::linucb ? 0.0 : cell.alpha;
      if (to_string(cell.policy) != c["policy"].get<std::string>() || a != c["alpha"].get<double>()) continue;
      c["bounds"] = bound_report(setup, cell, config.horizon);
      if (config.track_coverage) {
        std::size_t covered = 0;
        for (const auto& t : cell.traces) covered += t.theta_covered ? 1 : 0;
        c["coverage"] = json{{"trials_covered", covered},
                             {"fraction", static_cast<double>(covered) / static_cast<double>(cell.traces.size())}};
      }
    }
  }
  summary["cells"] = agg["cells"];
  summary["failures"] = failures;
  result.summary = std::move(summary);

  if (!config.out_dir.empty()) {
    const std::filesystem::path out(config.out_dir);
    std::filesystem::create_directories(out);
    if (config.write_traces) {
      std::filesystem::create_directories(out / "traces");
      for (const auto& t : all) write_trace_file(out / "traces" / trace_file_name(t), t);
    }
    std::ofstream f(out / "summary.json");
    if (!f) throw std::runtime_error("cannot write " + (out / "summary.json").string());
    f << result.summary.dump(2) << '\n';
  }
  return result;
}

// ---------------------------------------------------------------------------
// Trace files

const char* const kTraceHeader =
    "t,policy,alpha,trial,action,play_type,reward,regret_realized,regret_expected,constraint_slack,m_t,n_t";

void write_trace_csv(std::ostream& out, const RegretTrace& trace) {
  out << kTraceHeader << '\n';
  const std::string alpha = text::format_double(trace.alpha);
  for (const auto& r : trace.rounds) {
    out << r.t << ',' << trace.policy << ',' << alpha << ',' << trace.trial << ',' << r.action << ','
        << policies::to_string(r.play_type) << ',' << text::format_double(r.reward) << ','
        << text::format_double(r.regret_realized) << ',' << text::format_double(r.regret_expected) << ','
        << text::format_double(r.constraint_slack) << ',' << r.m << ',' << r.n << '\n';
  }
}

std::vector<RegretTrace> read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("trace: empty input");
  if (text::trim(line) != kTraceHeader) throw std::invalid_argument("trace: unexpected header '" + line + "'");
  std::vector<RegretTrace> out;
  std::map<std::tuple<std::string, double, std::size_t>, std::size_t> index;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    const auto cells = text::split(text::trim(line), ',');
    if (cells.size() != 12) {
      throw std::invalid_argument("trace line " + std::to_string(lineno) + ": expected 12 fields, got " +
                                  std::to_string(cells.size()));
    }
    try {
      RoundRecord r;
      r.t = text::parse_size(cells[0]);
      const std::string policy(text::trim(cells[1]));
      const double alpha = text::parse_double(cells[2]);
      const std::size_t trial = text::parse_size(cells[3]);
      r.action = text::parse_size(cells[4]);
      r.play_type = policies::play_type_from_string(text::trim(cells[5]));
      r.reward = text::parse_double(cells[6]);
      r.regret_realized = text::parse_double(cells[7]);
      r.regret_expected = text::parse_double(cells[8]);
      r.constraint_slack = text::parse_double(cells[9]);
      r.m = text::parse_size(cells[10]);
      r.n = text::parse_size(cells[11]);
      const auto key = std::make_tuple(policy, alpha, trial);
      auto it = index.find(key);
      if (it == index.end()) {
        it = index.emplace(key, out.size()).first;
        RegretTrace t;
        t.policy = policy;
        t.alpha = alpha;
        t.trial = trial;
        out.push_back(std::move(t));
      }
      out[it->second].rounds.push_back(r);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("trace line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_trace_file(const std::filesystem::path& path, const RegretTrace& trace) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  write_trace_csv(f, trace);
}

std::vector<RegretTrace> read_trace_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw std::invalid_argument("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<RegretTrace> out;
  for (const auto& p : files) {
    std::ifstream f(p);
    if (!f) throw std::runtime_error("cannot open " + p.string());
    try {
      auto part = read_trace_csv(f);
      for (auto& t : part) out.push_back(std::move(t));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(p.filename().string() + ": " + e.what());
    }
  }
  if (out.empty()) throw std::invalid_argument("no trace files in " + dir.string());
  return out;
}

std::string trace_file_name(const RegretTrace& trace) {
  return trace.policy + "_alpha" + text::format_double(trace.alpha) + "_trial" + std::to_string(trace.trial) + ".csv";
}

}  // namespace cslucb::harness
