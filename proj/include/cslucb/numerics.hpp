#pragma once

#include <cstddef>
#include <stdexcept>

#include <Eigen/Core>

namespace cslucb {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

namespace numerics {

/// Raised when a matrix that must be positive definite fails to factor.
class FactorizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Symmetric positive-definite matrix with a maintained lower Cholesky
/// factor. Built as lambda*I and grown by rank-one outer products, so the
/// factor is kept current with an O(d^2) update instead of refactoring.
class SpdMatrix {
 public:
  /// lambda * I_dim; lambda must be positive.
  static SpdMatrix scaled_identity(Eigen::Index dim, double lambda);

  /// Validates finiteness, symmetry (1e-12 relative) and factors the matrix.
  explicit SpdMatrix(const Matrix& entries);

  Eigen::Index dim() const { return entries_.rows(); }
  const Matrix& entries() const { return entries_; }
  /// Lower-triangular L with entries() = L L^T.
  const Matrix& cholesky_lower() const { return lower_; }
  std::size_t rank_one_updates() const { return updates_; }

  /// entries += v v^T, then symmetrize and update the factor.
  void add_outer(const Vector& v);

  /// Solves entries() x = b.
  Vector solve(const Vector& b) const;
  /// u^T entries()^{-1} u via a single forward substitution.
  double inverse_quadratic(const Vector& u) const;
  /// Solves L z = b; zero leading/interior entries of b are skipped.
  Vector forward_substitute(const Vector& b) const;
  /// Solves L^T x = z.
  Vector backward_substitute(const Vector& z) const;

  // Full refactorization cadence for the incrementally updated factor.
  static constexpr std::size_t kRefactorInterval = 256;

 private:
  SpdMatrix() = default;
  void refactor();

  Matrix entries_;
  Matrix lower_;
  std::size_t updates_ = 0;
  std::size_t since_refactor_ = 0;
};

Vector solve_spd(const SpdMatrix& m, const Vector& b);

/// sqrt(u^T M u).
double weighted_norm(const Vector& u, const SpdMatrix& m);

/// sqrt(u^T M^{-1} u), computed through the Cholesky factor.
double weighted_norm_inv(const Vector& u, const SpdMatrix& m);

bool all_finite(const Vector& v);
bool all_finite(const Matrix& m);

}  // namespace numerics
}  // namespace cslucb
