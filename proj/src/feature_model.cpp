#include "cslucb/feature_model.hpp"

#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace cslucb::feature_model {

ActionSet::ActionSet(std::vector<Vector> actions) : actions_(std::move(actions)) {
  if (actions_.empty()) throw std::invalid_argument("ActionSet: at least one action required");
  const Eigen::Index p = actions_.front().size();
  for (std::size_t i = 0; i < actions_.size(); ++i) {
    if (actions_[i].size() != p) throw std::invalid_argument("ActionSet: inconsistent action dimensions");
    if (!actions_[i].allFinite()) throw std::invalid_argument("ActionSet: non-finite action " + std::to_string(i));
    for (std::size_t j = 0; j < i; ++j) {
      if (actions_[i] == actions_[j]) {
        throw std::invalid_argument("ActionSet: duplicate actions " + std::to_string(j) + " and " +
                                    std::to_string(i));
      }
    }
  }
}

ContextDistribution ContextDistribution::dirac(Vector point) {
  if (point.size() == 0 || !point.allFinite()) {
    throw std::invalid_argument("Dirac: point must be non-empty and finite");
  }
  return ContextDistribution(Dirac{std::move(point)});
}

ContextDistribution ContextDistribution::gaussian(Vector mean, Matrix covariance) {
  const Eigen::Index n = mean.size();
  if (n == 0 || covariance.rows() != n || covariance.cols() != n) {
    throw std::invalid_argument("Gaussian: mean/covariance shape mismatch");
  }
  if (!mean.allFinite() || !covariance.allFinite()) {
    throw std::invalid_argument("Gaussian: non-finite parameters");
  }
  const double scale = std::max(1.0, covariance.cwiseAbs().maxCoeff());
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw std::invalid_argument("Gaussian: covariance not symmetric");
  }
  covariance = 0.5 * (covariance + covariance.transpose());

  Matrix factor;
  Eigen::LLT<Matrix> llt(covariance);
  if (llt.info() == Eigen::Success) {
    factor = llt.matrixL();
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(covariance);
    const Vector ev = eig.eigenvalues();
    if (ev.minCoeff() < -1e-12 * scale) {
      throw std::invalid_argument("Gaussian: covariance not positive semidefinite");
    }
    factor = eig.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }
  return ContextDistribution(Gaussian{std::move(mean), std::move(covariance), std::move(factor)});
}

ContextDistribution ContextDistribution::discrete(std::vector<Vector> support,
                                                  std::vector<double> weights) {
  if (support.empty() || support.size() != weights.size()) {
    throw std::invalid_argument("Discrete: support and weights must be non-empty and equal length");
  }
  const Eigen::Index n = support.front().size();
  double total = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (support[i].size() != n || n == 0 || !support[i].allFinite()) {
      throw std::invalid_argument("Discrete: invalid support point " + std::to_string(i));
    }
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) {
      throw std::invalid_argument("Discrete: negative or non-finite weight " + std::to_string(i));
    }
    total += weights[i];
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("Discrete: weights must sum to 1");
  return ContextDistribution(Discrete{std::move(support), std::move(weights)});
}

Eigen::Index ContextDistribution::dim() const {
  struct {
    Eigen::Index operator()(const Dirac& d) const { return d.point.size(); }
    Eigen::Index operator()(const Gaussian& g) const { return g.mean.size(); }
    Eigen::Index operator()(const Discrete& d) const { return d.support.front().size(); }
  } visitor;
  return std::visit(visitor, value_);
}

Vector ContextDistribution::mean() const {
  struct {
    Vector operator()(const Dirac& d) const { return d.point; }
    Vector operator()(const Gaussian& g) const { return g.mean; }
    Vector operator()(const Discrete& d) const {
      Vector m = Vector::Zero(d.support.front().size());
      for (std::size_t i = 0; i < d.support.size(); ++i) m += d.weights[i] * d.support[i];
      return m;
    }
  } visitor;
  return std::visit(visitor, value_);
}

Vector ContextDistribution::sample(Rng& rng) const {
  if (const auto* d = as_dirac()) return d->point;
  if (const auto* g = as_gaussian()) {
    return g->mean + g->sampling_factor * standard_normal_vector(g->mean.size(), rng);
  }
  const auto& d = std::get<Discrete>(value_);
  std::discrete_distribution<std::size_t> pick(d.weights.begin(), d.weights.end());
  return d.support[pick(rng)];
}

// ---------------------------------------------------------------------------

QuadraticFeatureMap::QuadraticFeatureMap(Eigen::Index p) : p_(p) {
  if (p <= 0) throw std::invalid_argument("QuadraticFeatureMap: p must be positive");
}

Vector QuadraticFeatureMap::evaluate(const Vector& x, const Vector& c) const {
  Vector phi(3 * p_);
  phi.segment(0, p_) = x.array().square();
  phi.segment(p_, p_) = c.array().square();
  phi.segment(2 * p_, p_) = x.array() * c.array();
  return phi;
}

std::optional<Vector> QuadraticFeatureMap::analytic_expectation(const Vector& x,
                                                                const ContextDistribution& mu) const {
  const auto* g = mu.as_gaussian();
  if (g == nullptr) return std::nullopt;
  Vector phi(3 * p_);
  phi.segment(0, p_) = x.array().square();
  phi.segment(p_, p_) = g->mean.array().square() + g->covariance.diagonal().array();
  phi.segment(2 * p_, p_) = x.array() * g->mean.array();
  return phi;
}

BilinearFeatureMap::BilinearFeatureMap(Matrix site_weights, std::size_t num_actions)
    : site_weights_(std::move(site_weights)), num_actions_(static_cast<Eigen::Index>(num_actions)) {
  if (site_weights_.size() == 0 || num_actions == 0) {
    throw std::invalid_argument("BilinearFeatureMap: empty weights or action set");
  }
  if (!site_weights_.allFinite()) throw std::invalid_argument("BilinearFeatureMap: non-finite weights");
}

std::size_t BilinearFeatureMap::action_index(const Vector& action) const {
  if (action.size() != num_actions_) throw std::invalid_argument("BilinearFeatureMap: action is not one-hot");
  Eigen::Index hot = -1;
  for (Eigen::Index i = 0; i < action.size(); ++i) {
    if (action(i) == 1.0 && hot < 0) {
      hot = i;
    } else if (action(i) != 0.0) {
      throw std::invalid_argument("BilinearFeatureMap: action is not one-hot");
    }
  }
  if (hot < 0) throw std::invalid_argument("BilinearFeatureMap: action is not one-hot");
  return static_cast<std::size_t>(hot);
}

Vector BilinearFeatureMap::evaluate(const Vector& action, const Vector& context) const {
  const auto x = static_cast<Eigen::Index>(action_index(action));
  Vector phi = Vector::Zero(dim());
  phi.segment(x * latent(), latent()).noalias() = site_weights_.transpose() * context;
  return phi;
}

std::optional<Vector> BilinearFeatureMap::analytic_expectation(const Vector& action,
                                                               const ContextDistribution& mu) const {
  if (mu.as_gaussian() == nullptr) return std::nullopt;
  return evaluate(action, mu.mean());
}

// ---------------------------------------------------------------------------

namespace {

void check_inputs(const FeatureMap& map, const Vector& action, Eigen::Index context_dim) {
  if (action.size() != map.action_dim()) {
    throw std::invalid_argument("features: action dimension mismatch");
  }
  if (context_dim != map.context_dim()) {
    throw std::invalid_argument("features: context dimension mismatch");
  }
}

Vector checked_output(const FeatureMap& map, Vector phi) {
  if (phi.size() != map.dim()) throw std::logic_error("features: feature map returned wrong dimension");
  if (!phi.allFinite()) throw std::domain_error("features: non-finite feature vector");
  return phi;
}

}  // namespace

Vector features(const FeatureMap& map, const Vector& action, const Vector& context) {
  check_inputs(map, action, context.size());
  return checked_output(map, map.evaluate(action, context));
}

Vector expected_features(const FeatureMap& map, const Vector& action,
                         const ContextDistribution& mu, std::size_t mc_budget, Rng& rng) {
  check_inputs(map, action, mu.dim());
  if (const auto* d = mu.as_dirac()) return checked_output(map, map.evaluate(action, d->point));
  if (const auto* d = mu.as_discrete()) {
    Vector acc = Vector::Zero(map.dim());
    for (std::size_t i = 0; i < d->support.size(); ++i) {
      acc += d->weights[i] * map.evaluate(action, d->support[i]);
    }
    return checked_output(map, std::move(acc));
  }
  if (auto exact = map.analytic_expectation(action, mu)) return checked_output(map, std::move(*exact));

  if (mc_budget == 0) throw std::invalid_argument("expected_features: Monte-Carlo budget must be positive");
  Vector acc = Vector::Zero(map.dim());
  for (std::size_t s = 0; s < mc_budget; ++s) acc += map.evaluate(action, mu.sample(rng));
  return checked_output(map, acc / static_cast<double>(mc_budget));
}

}  // namespace cslucb::feature_model
