#include "cslucb/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Cholesky>

namespace cslucb::numerics {

namespace {

void require_dim(Eigen::Index expected, Eigen::Index got, const char* what) {
  if (expected != got) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (expected " +
                                std::to_string(expected) + ", got " +
                                std::to_string(got) + ")");
  }
}

void require_finite(const Vector& v, const char* what) {
  if (!all_finite(v)) {
    throw std::invalid_argument(std::string(what) + ": non-finite entries");
  }
}

}  // namespace

bool all_finite(const Vector& v) { return v.allFinite(); }
bool all_finite(const Matrix& m) { return m.allFinite(); }

SpdMatrix SpdMatrix::scaled_identity(Eigen::Index dim, double lambda) {
  if (dim <= 0) throw std::invalid_argument("scaled_identity: dimension must be positive");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("scaled_identity: lambda must be positive and finite");
  }
  SpdMatrix m;
  m.entries_ = lambda * Matrix::Identity(dim, dim);
  m.lower_ = std::sqrt(lambda) * Matrix::Identity(dim, dim);
  return m;
}

SpdMatrix::SpdMatrix(const Matrix& entries) : entries_(entries) {
  if (entries_.rows() != entries_.cols() || entries_.rows() == 0) {
    throw std::invalid_argument("SpdMatrix: matrix must be square and non-empty");
  }
  if (!all_finite(entries_)) throw std::invalid_argument("SpdMatrix: non-finite entries");
  const double scale = std::max(entries_.cwiseAbs().maxCoeff(), 1.0);
  if ((entries_ - entries_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw std::invalid_argument("SpdMatrix: matrix is not symmetric");
  }
  entries_ = 0.5 * (entries_ + entries_.transpose());
  refactor();
}

void SpdMatrix::refactor() {
  Eigen::LLT<Matrix> llt(entries_);
  if (llt.info() != Eigen::Success) {
    throw FactorizationError("SpdMatrix: Cholesky factorization failed (matrix not positive definite)");
  }
  lower_ = llt.matrixL();
  since_refactor_ = 0;
}

void SpdMatrix::add_outer(const Vector& v) {
  require_dim(dim(), v.size(), "SpdMatrix::add_outer");
  require_finite(v, "SpdMatrix::add_outer");

  entries_.noalias() += v * v.transpose();
  entries_ = 0.5 * (entries_ + entries_.transpose());
  ++updates_;

  if (++since_refactor_ >= kRefactorInterval) {
    refactor();
    return;
  }

  // Rotation-based rank-one update of L; columns where w is zero are unchanged.
  const Eigen::Index n = dim();
  Vector w = v;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double wk = w(k);
    if (wk == 0.0) continue;
    const double lkk = lower_(k, k);
    const double r = std::hypot(lkk, wk);
    const double c = r / lkk;
    const double s = wk / lkk;
    lower_(k, k) = r;
    const Eigen::Index tail = n - k - 1;
    if (tail > 0) {
      auto lcol = lower_.col(k).tail(tail);
      auto wtail = w.tail(tail);
      lcol = (lcol + s * wtail) / c;
      wtail = c * wtail - s * lcol;
    }
  }
  if (!(lower_.diagonal().minCoeff() > 0.0) || !all_finite(lower_)) {
    refactor();
  }
}

Vector SpdMatrix::forward_substitute(const Vector& b) const {
  require_dim(dim(), b.size(), "forward_substitute");
  const Eigen::Index n = dim();
  Vector z = b;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (z(j) == 0.0) continue;
    z(j) /= lower_(j, j);
    const Eigen::Index tail = n - j - 1;
    if (tail > 0) z.tail(tail).noalias() -= z(j) * lower_.col(j).tail(tail);
  }
  return z;
}

Vector SpdMatrix::backward_substitute(const Vector& z) const {
  require_dim(dim(), z.size(), "backward_substitute");
  const Eigen::Index n = dim();
  Vector x = z;
  for (Eigen::Index j = n - 1; j >= 0; --j) {
    const Eigen::Index tail = n - j - 1;
    double acc = x(j);
    if (tail > 0) acc -= lower_.col(j).tail(tail).dot(x.tail(tail));
    x(j) = acc / lower_(j, j);
  }
  return x;
}

Vector SpdMatrix::solve(const Vector& b) const {
  require_dim(dim(), b.size(), "solve_spd");
  require_finite(b, "solve_spd");
  return backward_substitute(forward_substitute(b));
}

double SpdMatrix::inverse_quadratic(const Vector& u) const {
  require_dim(dim(), u.size(), "weighted_norm_inv");
  require_finite(u, "weighted_norm_inv");
  return forward_substitute(u).squaredNorm();
}

Vector solve_spd(const SpdMatrix& m, const Vector& b) { return m.solve(b); }

double weighted_norm(const Vector& u, const SpdMatrix& m) {
  require_dim(m.dim(), u.size(), "weighted_norm");
  require_finite(u, "weighted_norm");
  const double q = u.dot(m.entries() * u);
  if (q < 0.0) {
    throw std::domain_error("weighted_norm: negative quadratic form (matrix not positive definite)");
  }
  return std::sqrt(q);
}

double weighted_norm_inv(const Vector& u, const SpdMatrix& m) {
  return std::sqrt(m.inverse_quadratic(u));
}

}  // namespace cslucb::numerics
