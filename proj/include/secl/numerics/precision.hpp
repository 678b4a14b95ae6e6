#pragma once

#include <Eigen/Cholesky>

#include "secl/numerics/linalg.hpp"

namespace secl {

/// Factor phi of the precision nbar^{-1} with phi' phi = nbar^{-1}.
///
/// phi is the transpose of the lower Cholesky factor of nbar^{-1}, so it is
/// upper triangular and invertible.
inline Matrix factor_precision(const SpdMatrix& nbar) {
  const SpdMatrix sigma(nbar.inverse(), "precision");
  Eigen::LLT<Matrix> llt(sigma.matrix());
  return llt.matrixU();
}

}  // namespace secl
