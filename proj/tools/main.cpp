#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cslucb/bilinear.hpp"
#include "cslucb/harness.hpp"
#include "cslucb/random.hpp"
#include "cslucb/text.hpp"

namespace {

using namespace cslucb;
using nlohmann::json;

struct RunFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::size_t> trials;
  std::optional<std::size_t> horizon;
  std::optional<std::size_t> threads;
  std::vector<double> alphas;
  std::vector<std::string> policies;
  std::optional<std::string> model;
  bool no_traces = false;
};

void add_run_flags(CLI::App* cmd, RunFlags& f, bool bilinear) {
  cmd->add_option("--config", f.config, "JSON experiment config")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "Master seed");
  cmd->add_option("--out-dir", f.out_dir, "Directory for summary.json and traces/");
  cmd->add_option("--trials", f.trials, "Trials per cell");
  cmd->add_option("--horizon", f.horizon, "Rounds per trial");
  cmd->add_option("--alpha", f.alphas, "Conservatism level (repeatable)")->take_all();
  cmd->add_option("--policy", f.policies, "linucb, clucb or cslucb (repeatable)")->take_all();
  cmd->add_option("--threads", f.threads, "Worker threads (0: all cores)");
  cmd->add_flag("--no-traces", f.no_traces, "Skip per-trial CSV output");
  if (bilinear) cmd->add_option("--model", f.model, "Fitted model JSON from train-bilinear")->check(CLI::ExistingFile);
}

void print_table(const json& summary) {
  std::printf("%-8s %6s %7s %14s %12s %10s %10s\n", "policy", "alpha", "trials", "R_T", "R_T/T", "n_T", "violating");
  for (const auto& c : summary["cells"]) {
    const auto& f = c["final"];
    std::printf("%-8s %6.2f %7zu %8.2f±%-5.2f %12.5f %10.1f %10zu\n", c["policy"].get<std::string>().c_str(),
                c["alpha"].get<double>(), c["trials"].get<std::size_t>(), f["regret_realized"]["mean"].get<double>(),
                f["regret_realized"]["se"].get<double>(), f["per_step_regret"]["mean"].get<double>(),
                f["n_t"]["mean"].get<double>(), c["violations"]["trials_with_violation"].get<std::size_t>());
  }
  for (const auto& e : summary["failures"]) {
    std::fprintf(stderr, "failed: %s trial %zu: %s\n", e["cell"].get<std::string>().c_str(),
                 e["trial"].get<std::size_t>(), e["error"].get<std::string>().c_str());
  }
}

int run(const std::string& environment, const RunFlags& f) {
  auto config = f.config.empty() ? harness::default_config(environment) : harness::load_config(f.config);
  if (config.environment != environment) {
    throw std::invalid_argument("config environment is '" + config.environment + "', expected '" + environment + "'");
  }
  if (f.seed) config.seed = *f.seed;
  if (f.out_dir) config.out_dir = *f.out_dir;
  if (f.trials) config.trials = *f.trials;
  if (f.horizon) config.horizon = *f.horizon;
  if (f.threads) config.threads = *f.threads;
  if (!f.alphas.empty()) config.alphas = f.alphas;
  if (!f.policies.empty()) {
    config.policies.clear();
    for (const auto& p : f.policies) config.policies.push_back(harness::policy_from_string(p));
  }
  if (f.model) config.model_path = *f.model;
  if (f.no_traces) config.write_traces = false;
  config.validate();

  const auto result = harness::run_experiment(config);
  const auto& k = result.summary["constants"];
  std::printf("d=%lld A=%.4f D=%.4f beta0=%.4f\n", k["dim"].get<long long>(), k["A"].get<double>(),
              k["D"].get<double>(), k["beta0"].get<double>());
  print_table(result.summary);
  if (!config.out_dir.empty()) std::printf("wrote %s/summary.json\n", config.out_dir.c_str());
  return result.summary["failures"].empty() ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conservative linear UCB with context distributions"};
  app.require_subcommand(1);

  RunFlags synth;
  auto* rs = app.add_subcommand("run-synthetic", "Run the synthetic quadratic experiment");
  add_run_flags(rs, synth, false);

  RunFlags bil;
  auto* rb = app.add_subcommand("run-bilinear", "Run the bilinear yield experiment");
  add_run_flags(rb, bil, true);

  auto* tb = app.add_subcommand("train-bilinear", "Fit the bilinear yield model by SGD");
  std::string data_path;
  std::string model_out = "model.json";
  std::string save_data;
  std::uint64_t train_seed = 1;
  bilinear::SgdOptions sgd;
  bilinear::SurrogateOptions surrogate;
  tb->add_option("--data", data_path, "CSV with columns f1..f6,loc0..loc21,action,yield (surrogate if omitted)")
      ->check(CLI::ExistingFile);
  tb->add_option("--out", model_out, "Output model JSON");
  tb->add_option("--save-data", save_data, "Also write the training data as CSV");
  tb->add_option("--seed", train_seed, "Seed for surrogate data, initialization and shuffling");
  tb->add_option("--epochs", sgd.epochs);
  tb->add_option("--lr", sgd.learning_rate);
  tb->add_option("--latent", sgd.latent);
  tb->add_option("--lambda-v", sgd.lambda_v);
  tb->add_option("--lambda-w", sgd.lambda_w);
  tb->add_option("--rows", surrogate.rows, "Surrogate rows");
  tb->add_option("--noise", surrogate.noise, "Surrogate noise scale");

  auto* rp = app.add_subcommand("report", "Re-aggregate trace CSVs into a summary");
  std::string trace_dir;
  std::string report_out;
  std::size_t curve_points = 500;
  rp->add_option("--traces", trace_dir, "Directory of per-trial CSVs")->required()->check(CLI::ExistingDirectory);
  rp->add_option("--out", report_out, "Summary JSON path (stdout if omitted)");
  rp->add_option("--curve-points", curve_points, "Maximum points per curve");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*rs) return run("synthetic", synth);
    if (*rb) return run("bilinear", bil);
    if (*tb) {
      Rng data_rng(derive_seed(train_seed, {0}));
      Rng fit_rng(derive_seed(train_seed, {1}));
      bilinear::YieldDataset data;
      if (data_path.empty()) {
        surrogate.latent = sgd.latent;
        data = bilinear::make_surrogate(surrogate, data_rng).data;
      } else {
        data = bilinear::load_dataset(data_path);
      }
      if (!save_data.empty()) bilinear::save_dataset(save_data, data);
      const auto fit = bilinear::sgd_fit(data, sgd, fit_rng);
      bilinear::save_model(model_out, fit.model);
      std::printf("rows=%zu epochs=%zu mse=%.6g objective=%.6g\n", data.size(), sgd.epochs,
                  bilinear::mean_squared_error(fit.model, data), bilinear::objective(fit.model, data, sgd));
      std::printf("wrote %s\n", model_out.c_str());
      return 0;
    }
    if (*rp) {
      const auto summary = harness::aggregate(harness::read_trace_dir(trace_dir), curve_points);
      if (report_out.empty()) {
        std::cout << summary.dump(2) << '\n';
      } else {
        std::ofstream f(report_out);
        if (!f) throw std::runtime_error("cannot write " + report_out);
        f << summary.dump(2) << '\n';
        std::printf("wrote %s\n", report_out.c_str());
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
