#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cslucb/bilinear.hpp"
#include "cslucb/bounds.hpp"
#include "cslucb/confidence.hpp"
#include "cslucb/environments.hpp"
#include "cslucb/policies.hpp"

namespace cslucb::harness {

/// linucb: observed contexts, no constraint. clucb: observed contexts with the
/// conservative gate. cslucb: context distributions with the conservative gate.
enum class PolicyKind { linucb, clucb, cslucb };

std::string to_string(PolicyKind p);
PolicyKind policy_from_string(const std::string& s);
environments::ContextMode learner_view(PolicyKind p);

struct ExperimentConfig {
  std::string environment = "synthetic";  // "synthetic" | "bilinear"
  environments::SyntheticConfig synthetic{};
  environments::BilinearEnvConfig bilinear{};
  std::optional<std::string> model_path;  // fitted bilinear model (JSON); surrogate fit otherwise
  bilinear::SurrogateOptions surrogate{};
  bilinear::SgdOptions sgd{};

  std::vector<PolicyKind> policies{PolicyKind::linucb, PolicyKind::clucb, PolicyKind::cslucb};
  std::vector<double> alphas{0.1, 0.3, 0.5, 0.8};
  std::size_t horizon = 2000;
  std::size_t trials = 100;
  std::uint64_t seed = 1;

  double delta = 0.05;
  double lambda = 1.0;
  std::optional<double> sigma;                // learner noise scale; environment's by default
  std::optional<std::size_t> baseline_rank;   // overrides the environment default
  std::optional<double> param_bound;          // A; ||theta*|| by default
  std::optional<double> feature_bound;        // D; pre-pass quantile by default
  std::size_t prepass_draws = 10000;
  double feature_quantile = 0.999;
  std::size_t mc_budget = feature_model::kDefaultMonteCarloBudget;
  bool clip_rewards = false;
  bool track_coverage = true;

  // Bound-report constants; pre-pass estimates by default.
  std::optional<double> reward_low;
  std::optional<double> reward_high;
  std::optional<double> gap_low;
  std::optional<double> gap_high;

  std::string out_dir;  // empty: nothing written
  bool write_traces = true;
  std::size_t curve_points = 500;
  std::size_t threads = 0;  // 0: hardware concurrency

  void validate() const;
};

/// Defaults per environment: synthetic alphas {0.1, 0.3, 0.5, 0.8} with T = 2000,
/// bilinear alphas {0.2, 0.4, 0.6, 0.9} with T = 1000.
ExperimentConfig default_config(const std::string& environment);

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);
ExperimentConfig load_config(const std::filesystem::path& path);

/// One CSV row.
struct RoundRecord {
  std::size_t t = 0;
  std::size_t action = 0;
  policies::PlayType play_type = policies::PlayType::optimistic;
  double reward = 0;
  double regret_realized = 0;   // cumulative, realized context
  double regret_expected = 0;   // cumulative, expected features
  double constraint_slack = 0;  // sum <theta*, psi_x> - (1 - alpha) sum r_b
  std::size_t m = 0;
  std::size_t n = 0;

  bool operator==(const RoundRecord&) const = default;
};

struct RegretTrace {
  std::string policy;
  double alpha = 0;
  std::size_t trial = 0;
  std::vector<RoundRecord> rounds;

  // Not serialized.
  std::vector<double> lower_bounds;       // L_t (NaN for linucb)
  std::vector<double> baseline_known;     // r_b,t given to the learner
  std::vector<double> baseline_realized;  // r(b_t, c_t)
  bool theta_covered = true;              // theta* in B_t for every round
  std::optional<std::size_t> first_uncovered;

  bool constraint_held() const;
};

/// Everything a trial needs besides the environment.
struct TrialSettings {
  PolicyKind policy = PolicyKind::cslucb;
  double alpha = 0.5;
  std::size_t horizon = 2000;
  std::size_t baseline_rank = 10;
  confidence::BetaParams beta{};
  std::size_t mc_budget = feature_model::kDefaultMonteCarloBudget;
  bool clip_rewards = false;
  bool track_coverage = true;
};

/// Seeds for trial j derive from (master, j) only, so a trial's trace does
/// not depend on which other trials run.
RegretTrace run_trial(const environments::Environment& env, const TrialSettings& settings,
                      std::uint64_t master_seed, std::size_t trial);

/// Environment and constants shared by every cell of an experiment.
struct Setup {
  std::unique_ptr<environments::Environment> env;
  confidence::BetaParams beta;
  std::size_t baseline_rank = 1;
  bounds::TheoryParams theory;  // alpha and T filled per cell
  nlohmann::json constants;
};

Setup prepare(const ExperimentConfig& config);
TrialSettings settings_for(const ExperimentConfig& config, const Setup& setup, PolicyKind policy, double alpha);

/// Runs trial `trial` of one (policy, alpha) cell of the configuration.
RegretTrace run_trial(const ExperimentConfig& config, PolicyKind policy, double alpha, std::size_t trial);

struct CellResult {
  PolicyKind policy;
  double alpha;
  std::vector<RegretTrace> traces;
  std::optional<std::string> error;
};

struct ExperimentResult {
  nlohmann::json summary;
  std::vector<CellResult> cells;
};

/// All (policy, alpha, trial) cells; linucb runs once with alpha = 0.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Per-(policy, alpha) curves, final-round table and violation counts from
/// traces alone (CSV fields only).
nlohmann::json aggregate(const std::vector<RegretTrace>& traces, std::size_t curve_points);

// Trace files.
extern const char* const kTraceHeader;
void write_trace_csv(std::ostream& out, const RegretTrace& trace);
std::vector<RegretTrace> read_trace_csv(std::istream& in);
void write_trace_file(const std::filesystem::path& path, const RegretTrace& trace);
std::vector<RegretTrace> read_trace_dir(const std::filesystem::path& dir);
std::string trace_file_name(const RegretTrace& trace);

}  // namespace cslucb::harness
