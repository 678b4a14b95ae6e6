#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

namespace secl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Thrown when a matrix that must be symmetric positive (semi)definite is not.
class NotPositiveDefinite : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

// Relative PSD threshold: eigenvalues down to -kPsdTolerance * ||m|| are accepted.
inline constexpr double kPsdTolerance = 1e-10;

inline bool is_psd(const Matrix& m, double rel_tol = kPsdTolerance) {
  if (m.rows() != m.cols()) return false;
  if (m.size() == 0) return true;
  const Matrix s = symmetrize(m);
  const double scale = std::max(s.norm(), 1.0);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(s, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff() >= -rel_tol * scale;
}

/// Symmetric positive definite matrix. Construction symmetrizes the input and
/// rejects anything that fails a Cholesky factorization.
class SpdMatrix {
 public:
  SpdMatrix() = default;

  explicit SpdMatrix(const Matrix& m, const char* what = "matrix") {
    if (m.rows() != m.cols() || m.rows() == 0) {
      throw std::invalid_argument(std::string(what) + " must be a non-empty square matrix");
    }
    if (!m.allFinite()) {
      throw NotPositiveDefinite(std::string(what) + " has non-finite entries");
    }
    m_ = symmetrize(m);
    Eigen::LLT<Matrix> llt(m_);
    if (llt.info() != Eigen::Success) {
      throw NotPositiveDefinite(std::string(what) + " is not positive definite");
    }
  }

  const Matrix& matrix() const noexcept { return m_; }
  Eigen::Index dim() const noexcept { return m_.rows(); }

  Matrix inverse() const { return symmetrize(m_.llt().solve(Matrix::Identity(dim(), dim()))); }

  double log_determinant() const {
    Eigen::LLT<Matrix> llt(m_);
    return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  }

 private:
  Matrix m_;
};

/// Square root S with S Sᵀ = m for a PSD matrix; negative eigenvalues within
/// tolerance are clamped to zero, so singular covariances are fine.
inline Matrix psd_sqrt(const Matrix& m, const char* what = "covariance") {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument(std::string(what) + " must be square");
  }
  if (m.size() == 0) return m;
  if (!is_psd(m)) {
    throw NotPositiveDefinite(std::string(what) + " is not positive semidefinite");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(m));
  const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal();
}

}  // namespace secl
