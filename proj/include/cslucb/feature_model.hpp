#pragma once

#include <cstddef>
#include <optional>
#include <variant>
#include <vector>

#include "cslucb/numerics.hpp"
#include "cslucb/random.hpp"

namespace cslucb::feature_model {

inline constexpr std::size_t kDefaultMonteCarloBudget = 1000;

/// Ordered, duplicate-free list of action vectors. Index i names action i.
class ActionSet {
 public:
  explicit ActionSet(std::vector<Vector> actions);

  std::size_t size() const { return actions_.size(); }
  Eigen::Index action_dim() const { return actions_.front().size(); }
  const Vector& operator[](std::size_t i) const { return actions_.at(i); }
  const std::vector<Vector>& actions() const { return actions_; }

 private:
  std::vector<Vector> actions_;
};

struct Dirac {
  Vector point;
};

struct Gaussian {
  Vector mean;
  Matrix covariance;
  Matrix sampling_factor;  // S with S S^T = covariance
};

struct Discrete {
  std::vector<Vector> support;
  std::vector<double> weights;
};

/// Distribution over contexts, one of point mass, Gaussian or finite mixture.
class ContextDistribution {
 public:
  using Variant = std::variant<Dirac, Gaussian, Discrete>;

  static ContextDistribution dirac(Vector point);
  /// covariance must be symmetric positive semidefinite.
  static ContextDistribution gaussian(Vector mean, Matrix covariance);
  /// weights nonnegative and summing to 1 within 1e-12.
  static ContextDistribution discrete(std::vector<Vector> support, std::vector<double> weights);

  Eigen::Index dim() const;
  Vector mean() const;
  Vector sample(Rng& rng) const;

  const Variant& variant() const { return value_; }
  const Dirac* as_dirac() const { return std::get_if<Dirac>(&value_); }
  const Gaussian* as_gaussian() const { return std::get_if<Gaussian>(&value_); }
  const Discrete* as_discrete() const { return std::get_if<Discrete>(&value_); }

 private:
  explicit ContextDistribution(Variant v) : value_(std::move(v)) {}
  Variant value_;
};

/// phi(x, c) in R^d.
class FeatureMap {
 public:
  virtual ~FeatureMap() = default;

  virtual Eigen::Index dim() const = 0;
  virtual Eigen::Index action_dim() const = 0;
  virtual Eigen::Index context_dim() const = 0;
  virtual Vector evaluate(const Vector& action, const Vector& context) const = 0;

  /// Closed-form E_{c~mu}[phi(x, c)] when this map supports it for mu.
  virtual std::optional<Vector> analytic_expectation(const Vector& /*action*/,
                                                     const ContextDistribution& /*mu*/) const {
    return std::nullopt;
  }
};

/// [x_1^2..x_p^2, c_1^2..c_p^2, x_1 c_1..x_p c_p], d = 3p.
/// Gaussian contexts have closed-form moments: E[c_i^2] = m_i^2 + S_ii.
class QuadraticFeatureMap final : public FeatureMap {
 public:
  explicit QuadraticFeatureMap(Eigen::Index p);

  Eigen::Index dim() const override { return 3 * p_; }
  Eigen::Index action_dim() const override { return p_; }
  Eigen::Index context_dim() const override { return p_; }
  Vector evaluate(const Vector& action, const Vector& context) const override;
  std::optional<Vector> analytic_expectation(const Vector& action,
                                             const ContextDistribution& mu) const override;

 private:
  Eigen::Index p_;
};

/// Block embedding for the bilinear yield model: action x is a one-hot
/// vector of length K and phi(x, c) places W^T c in block x of a
/// (K * latent)-vector. With theta = vec(V), <theta, phi(x, c)> = c^T W V_x.
/// Linear in c, so every expectation is phi(x, E[c]).
class BilinearFeatureMap final : public FeatureMap {
 public:
  BilinearFeatureMap(Matrix site_weights, std::size_t num_actions);

  Eigen::Index dim() const override { return num_actions_ * latent(); }
  Eigen::Index action_dim() const override { return num_actions_; }
  Eigen::Index context_dim() const override { return site_weights_.rows(); }
  Eigen::Index latent() const { return site_weights_.cols(); }
  const Matrix& site_weights() const { return site_weights_; }

  Vector evaluate(const Vector& action, const Vector& context) const override;
  std::optional<Vector> analytic_expectation(const Vector& action,
                                             const ContextDistribution& mu) const override;

  /// Index of the hot entry; throws unless action is exactly one-hot.
  std::size_t action_index(const Vector& action) const;

 private:
  Matrix site_weights_;
  Eigen::Index num_actions_;
};

/// phi(x, c) with dimension and finiteness checks.
Vector features(const FeatureMap& map, const Vector& action, const Vector& context);

/// E_{c~mu}[phi(x, c)]: exact for Dirac and Discrete, the map's closed form when
/// available, otherwise the mean of mc_budget draws from rng.
Vector expected_features(const FeatureMap& map, const Vector& action,
                         const ContextDistribution& mu,
                         std::size_t mc_budget, Rng& rng);

}  // namespace cslucb::feature_model
