#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "cslucb/numerics.hpp"
#include "cslucb/random.hpp"

namespace cslucb::bilinear {

/// Column layout of a yield file: f1..f<numeric>, loc0..loc<locations-1>, action, yield.
struct YieldSchema {
  std::size_t numeric_features = 6;
  std::size_t locations = 22;
  std::size_t actions = 24;

  std::size_t context_dim() const { return numeric_features + locations; }
  std::vector<std::string> header() const;
};

struct YieldRow {
  Vector context;
  std::size_t action = 0;
  double yield = 0.0;
};

struct YieldDataset {
  YieldSchema schema;
  std::vector<YieldRow> rows;

  std::size_t size() const { return rows.size(); }
  /// Checks shapes, action ids, finiteness and the one-hot location block.
  void validate() const;
};

/// Raised for malformed yield files; the message names the offending row.
class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

YieldDataset load_dataset(const std::filesystem::path& path, const YieldSchema& schema = {});
void save_dataset(const std::filesystem::path& path, const YieldDataset& data);

/// y ~ c^T W V_x. site_weights is context_dim x latent; action_factors is
/// latent x num_actions with column x holding V_x.
struct BilinearModel {
  Matrix site_weights;
  Matrix action_factors;

  Eigen::Index latent() const { return site_weights.cols(); }
  Eigen::Index context_dim() const { return site_weights.rows(); }
  std::size_t num_actions() const { return static_cast<std::size_t>(action_factors.cols()); }
  void validate() const;
};

void to_json(nlohmann::json& j, const BilinearModel& m);
void from_json(const nlohmann::json& j, BilinearModel& m);
BilinearModel load_model(const std::filesystem::path& path);
void save_model(const std::filesystem::path& path, const BilinearModel& m);

double predict(const BilinearModel& model, const Vector& context, std::size_t action);
double mean_squared_error(const BilinearModel& model, const YieldDataset& data);

struct SgdOptions {
  double learning_rate = 0.015;
  double lambda_v = 0.001;
  double lambda_w = 0.001;
  std::size_t epochs = 300;
  Eigen::Index latent = 10;
  double init_scale = 0.1;  // initial entries ~ N(0, init_scale^2)
};

struct FitResult {
  BilinearModel model;
  std::vector<double> loss_trace;  // regularized objective after each epoch
  std::vector<double> mse_trace;   // training MSE after each epoch
};

/// Random initial model with entries N(0, init_scale^2).
BilinearModel initial_model(const YieldSchema& schema, const SgdOptions& opts, Rng& rng);

/// Per-example SGD on
///   sum_i (y_i - c_i^T W V_{x_i})^2 + lambda_v ||V_{x_i}||^2 + (lambda_w / n) ||W||^2,
/// (the W penalty is spread over the n examples, summing to lambda_w ||W||^2 per pass).
/// Shuffle order comes from rng. Throws std::runtime_error naming the epoch on divergence.
FitResult sgd_fit(const YieldDataset& data, const SgdOptions& opts, Rng& rng);
FitResult sgd_fit(const YieldDataset& data, const SgdOptions& opts, BilinearModel start, Rng& rng);

/// Full regularized objective over the dataset.
double objective(const BilinearModel& model, const YieldDataset& data, const SgdOptions& opts);

/// Loss of one example with its share of the W penalty, and its gradient.
double example_loss(const BilinearModel& model, const YieldRow& row, const SgdOptions& opts, std::size_t n);
struct ExampleGradient {
  Matrix site_weights;  // d loss / d W
  Vector action_factor; // d loss / d V_x
};
ExampleGradient example_gradient(const BilinearModel& model, const YieldRow& row, const SgdOptions& opts,
                                 std::size_t n);

/// Synthetic stand-in for field yield data: a positive-yield ground-truth
/// model, uniform location choice, standardized numeric features.
struct SurrogateOptions {
  std::size_t rows = 2000;
  Eigen::Index latent = 10;
  double noise = 0.01;
  YieldSchema schema{};
};

struct Surrogate {
  BilinearModel truth;
  YieldDataset data;
};

BilinearModel make_surrogate_truth(const SurrogateOptions& opts, Rng& rng);
Vector sample_site_context(const YieldSchema& schema, Rng& rng);
Surrogate make_surrogate(const SurrogateOptions& opts, Rng& rng);

}  // namespace cslucb::bilinear
