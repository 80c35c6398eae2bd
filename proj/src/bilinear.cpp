#include "cslucb/bilinear.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "cslucb/text.hpp"

namespace cslucb::bilinear {

std::vector<std::string> YieldSchema::header() const {
  std::vector<std::string> h;
  for (std::size_t i = 1; i <= numeric_features; ++i) h.push_back("f" + std::to_string(i));
  for (std::size_t i = 0; i < locations; ++i) h.push_back("loc" + std::to_string(i));
  h.emplace_back("action");
  h.emplace_back("yield");
  return h;
}

namespace {

void validate_row(const YieldSchema& schema, const YieldRow& row, std::size_t index) {
  const auto where = [&] { return "row " + std::to_string(index) + ": "; };
  if (static_cast<std::size_t>(row.context.size()) != schema.context_dim()) {
    throw DatasetError(where() + "context has wrong dimension");
  }
  if (!row.context.allFinite() || !std::isfinite(row.yield)) throw DatasetError(where() + "non-finite value");
  if (row.action >= schema.actions) {
    throw DatasetError(where() + "action id " + std::to_string(row.action) + " out of range 0.." +
                       std::to_string(schema.actions - 1));
  }
  const auto block = row.context.tail(static_cast<Eigen::Index>(schema.locations));
  for (Eigen::Index i = 0; i < block.size(); ++i) {
    if (block(i) != 0.0 && block(i) != 1.0) throw DatasetError(where() + "location block is not one-hot");
  }
  if (block.sum() != 1.0) throw DatasetError(where() + "location block must contain exactly one 1");
}

}  // namespace

void YieldDataset::validate() const {
  for (std::size_t i = 0; i < rows.size(); ++i) validate_row(schema, rows[i], i + 1);
}

YieldDataset load_dataset(const std::filesystem::path& path, const YieldSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line) || text::trim(line).empty()) throw DatasetError(path.string() + ": empty file");

  const auto header = text::split(text::trim(line), ',');
  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) column[std::string(text::trim(header[i]))] = i;
  std::vector<std::size_t> index;
  for (const auto& name : schema.header()) {
    auto it = column.find(name);
    if (it == column.end()) throw DatasetError(path.string() + ": missing column '" + name + "'");
    index.push_back(it->second);
  }

  YieldDataset data{schema, {}};
  const Eigen::Index cdim = static_cast<Eigen::Index>(schema.context_dim());
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    ++row_no;
    const auto cells = text::split(text::trim(line), ',');
    if (cells.size() != header.size()) {
      throw DatasetError("row " + std::to_string(row_no) + ": expected " + std::to_string(header.size()) +
                         " cells, got " + std::to_string(cells.size()));
    }
    auto cell = [&](std::size_t k) -> std::string_view { return text::trim(cells[index[k]]); };
    YieldRow row;
    row.context.resize(cdim);
    try {
      for (Eigen::Index k = 0; k < cdim; ++k) row.context(k) = text::parse_double(cell(static_cast<std::size_t>(k)));
      row.action = text::parse_size(cell(static_cast<std::size_t>(cdim)));
      row.yield = text::parse_double(cell(static_cast<std::size_t>(cdim) + 1));
    } catch (const std::invalid_argument& e) {
      throw DatasetError("row " + std::to_string(row_no) + ": " + e.what());
    }
    validate_row(schema, row, row_no);
    data.rows.push_back(std::move(row));
  }
  if (data.rows.empty()) throw DatasetError(path.string() + ": empty dataset");
  return data;
}

void save_dataset(const std::filesystem::path& path, const YieldDataset& data) {
  data.validate();
  std::ofstream out(path);
  if (!out) throw DatasetError("cannot write " + path.string());
  const auto header = data.schema.header();
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& row : data.rows) {
    for (Eigen::Index k = 0; k < row.context.size(); ++k) out << text::format_double(row.context(k)) << ',';
    out << row.action << ',' << text::format_double(row.yield) << '\n';
  }
}

// ---------------------------------------------------------------------------

void BilinearModel::validate() const {
  if (site_weights.size() == 0 || action_factors.size() == 0) throw std::invalid_argument("BilinearModel: empty");
  if (site_weights.cols() != action_factors.rows()) {
    throw std::invalid_argument("BilinearModel: latent dimensions of W and V disagree");
  }
  if (!site_weights.allFinite() || !action_factors.allFinite()) {
    throw std::invalid_argument("BilinearModel: non-finite entries");
  }
}

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(r);
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw std::invalid_argument("matrix JSON must be a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.at(0).size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& r = j.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(r.size()) != cols) throw std::invalid_argument("matrix JSON rows differ in length");
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = r.at(static_cast<std::size_t>(k)).get<double>();
  }
  return m;
}

}  // namespace

void to_json(nlohmann::json& j, const BilinearModel& m) {
  j = nlohmann::json{{"site_weights", matrix_to_json(m.site_weights)},
                     {"action_factors", matrix_to_json(m.action_factors)}};
}

void from_json(const nlohmann::json& j, BilinearModel& m) {
  m.site_weights = matrix_from_json(j.at("site_weights"));
  m.action_factors = matrix_from_json(j.at("action_factors"));
  m.validate();
}

BilinearModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file " + path.string());
  return nlohmann::json::parse(in).get<BilinearModel>();
}

void save_model(const std::filesystem::path& path, const BilinearModel& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file " + path.string());
  out << nlohmann::json(m).dump(2) << '\n';
}

double predict(const BilinearModel& model, const Vector& context, std::size_t action) {
  if (context.size() != model.context_dim()) throw std::invalid_argument("predict: context dimension mismatch");
  if (action >= model.num_actions()) throw std::invalid_argument("predict: action id out of range");
  return context.dot(model.site_weights * model.action_factors.col(static_cast<Eigen::Index>(action)));
}

double mean_squared_error(const BilinearModel& model, const YieldDataset& data) {
  if (data.rows.empty()) throw std::invalid_argument("mean_squared_error: empty dataset");
  double acc = 0.0;
  for (const auto& r : data.rows) {
    const double e = r.yield - predict(model, r.context, r.action);
    acc += e * e;
  }
  return acc / static_cast<double>(data.rows.size());
}

double objective(const BilinearModel& model, const YieldDataset& data, const SgdOptions& opts) {
  double acc = 0.0;
  for (const auto& r : data.rows) {
    const double e = r.yield - predict(model, r.context, r.action);
    acc += e * e + opts.lambda_v * model.action_factors.col(static_cast<Eigen::Index>(r.action)).squaredNorm();
  }
  return acc + opts.lambda_w * model.site_weights.squaredNorm();
}

double example_loss(const BilinearModel& model, const YieldRow& row, const SgdOptions& opts, std::size_t n) {
  const double e = row.yield - predict(model, row.context, row.action);
  const auto v = model.action_factors.col(static_cast<Eigen::Index>(row.action));
  return e * e + opts.lambda_v * v.squaredNorm() +
         opts.lambda_w / static_cast<double>(n) * model.site_weights.squaredNorm();
}

ExampleGradient example_gradient(const BilinearModel& model, const YieldRow& row, const SgdOptions& opts,
                                 std::size_t n) {
  const auto x = static_cast<Eigen::Index>(row.action);
  const Vector v = model.action_factors.col(x);
  const Vector site = model.site_weights.transpose() * row.context;
  const double e = row.yield - row.context.dot(model.site_weights * v);
  ExampleGradient g;
  g.site_weights = -2.0 * e * row.context * v.transpose() +
                   2.0 * opts.lambda_w / static_cast<double>(n) * model.site_weights;
  g.action_factor = -2.0 * e * site + 2.0 * opts.lambda_v * v;
  return g;
}

BilinearModel initial_model(const YieldSchema& schema, const SgdOptions& opts, Rng& rng) {
  if (opts.latent <= 0) throw std::invalid_argument("initial_model: latent dimension must be positive");
  std::normal_distribution<double> normal(0.0, opts.init_scale);
  BilinearModel m;
  m.site_weights.resize(static_cast<Eigen::Index>(schema.context_dim()), opts.latent);
  m.action_factors.resize(opts.latent, static_cast<Eigen::Index>(schema.actions));
  for (Eigen::Index i = 0; i < m.site_weights.size(); ++i) m.site_weights.data()[i] = normal(rng);
  for (Eigen::Index i = 0; i < m.action_factors.size(); ++i) m.action_factors.data()[i] = normal(rng);
  return m;
}

FitResult sgd_fit(const YieldDataset& data, const SgdOptions& opts, Rng& rng) {
  BilinearModel start = initial_model(data.schema, opts, rng);
  return sgd_fit(data, opts, std::move(start), rng);
}

FitResult sgd_fit(const YieldDataset& data, const SgdOptions& opts, BilinearModel start, Rng& rng) {
  if (!(opts.learning_rate > 0.0)) throw std::invalid_argument("sgd_fit: learning rate must be positive");
  if (opts.lambda_v < 0.0 || opts.lambda_w < 0.0) throw std::invalid_argument("sgd_fit: negative regularizer");
  if (data.rows.empty()) throw std::invalid_argument("sgd_fit: empty dataset");
  start.validate();
  if (static_cast<std::size_t>(start.context_dim()) != data.schema.context_dim() ||
      start.num_actions() != data.schema.actions) {
    throw std::invalid_argument("sgd_fit: model shape does not match dataset schema");
  }

  FitResult result{std::move(start), {}, {}};
  BilinearModel& m = result.model;
  const std::size_t n = data.rows.size();
  const double lr = opts.learning_rate;
  const double w_decay = 2.0 * opts.lambda_w / static_cast<double>(n);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Vector v(m.latent());
  Vector site(m.latent());

  for (std::size_t epoch = 1; epoch <= opts.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t idx : order) {
      const auto& r = data.rows[idx];
      auto vx = m.action_factors.col(static_cast<Eigen::Index>(r.action));
      v = vx;
      site.noalias() = m.site_weights.transpose() * r.context;
      const double e = r.yield - site.dot(v);
      // Both gradients are taken at the pre-step parameters.
      vx -= lr * (-2.0 * e * site + 2.0 * opts.lambda_v * v);
      m.site_weights *= (1.0 - lr * w_decay);
      m.site_weights.noalias() += (2.0 * lr * e) * r.context * v.transpose();
    }
    const double loss = objective(m, data, opts);
    const double mse = mean_squared_error(m, data);
    if (!std::isfinite(loss) || !std::isfinite(mse)) {
      throw std::runtime_error("sgd_fit: diverged at epoch " + std::to_string(epoch));
    }
    result.loss_trace.push_back(loss);
    result.mse_trace.push_back(mse);
  }
  return result;
}

// ---------------------------------------------------------------------------

BilinearModel make_surrogate_truth(const SurrogateOptions& opts, Rng& rng) {
  const YieldSchema& s = opts.schema;
  const auto latent = opts.latent;
  const double root = std::sqrt(static_cast<double>(latent));
  std::uniform_real_distribution<double> unit(0.5, 1.5);
  std::normal_distribution<double> numeric_weight(0.0, 0.05);

  BilinearModel m;
  m.site_weights.resize(static_cast<Eigen::Index>(s.context_dim()), latent);
  m.action_factors.resize(latent, static_cast<Eigen::Index>(s.actions));
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(s.numeric_features); ++i) {
    for (Eigen::Index k = 0; k < latent; ++k) m.site_weights(i, k) = numeric_weight(rng);
  }
  for (Eigen::Index i = static_cast<Eigen::Index>(s.numeric_features); i < m.site_weights.rows(); ++i) {
    for (Eigen::Index k = 0; k < latent; ++k) m.site_weights(i, k) = 0.5 * unit(rng) / root;
  }
  for (Eigen::Index i = 0; i < m.action_factors.size(); ++i) m.action_factors.data()[i] = unit(rng) / root;
  return m;
}

Vector sample_site_context(const YieldSchema& schema, Rng& rng) {
  Vector c = Vector::Zero(static_cast<Eigen::Index>(schema.context_dim()));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < schema.numeric_features; ++i) c(static_cast<Eigen::Index>(i)) = normal(rng);
  std::uniform_int_distribution<std::size_t> field(0, schema.locations - 1);
  c(static_cast<Eigen::Index>(schema.numeric_features + field(rng))) = 1.0;
  return c;
}

Surrogate make_surrogate(const SurrogateOptions& opts, Rng& rng) {
  Surrogate s{make_surrogate_truth(opts, rng), YieldDataset{opts.schema, {}}};
  std::uniform_int_distribution<std::size_t> action(0, opts.schema.actions - 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  s.data.rows.reserve(opts.rows);
  for (std::size_t i = 0; i < opts.rows; ++i) {
    YieldRow r;
    r.context = sample_site_context(opts.schema, rng);
    r.action = action(rng);
    r.yield = predict(s.truth, r.context, r.action) + opts.noise * normal(rng);
    s.data.rows.push_back(std::move(r));
  }
  return s;
}

}  // namespace cslucb::bilinear
