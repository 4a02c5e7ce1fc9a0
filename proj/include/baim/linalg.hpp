#ifndef BAIM_LINALG_HPP
#define BAIM_LINALG_HPP

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "baim/tape.hpp"
#include "baim/tensor.hpp"
#include "baim/types.hpp"

namespace baim {

// Symmetric PSD square root via eigendecomposition: R = V sqrt(L) V^T.
// Input must be symmetric within 1e-8; eigenvalues in [-1e-8, 0) are
// clamped to zero, anything lower is a domain error.
inline Tensor psd_sqrt(const Tensor& S) {
  if (S.rank() != 2 || S.rows() != S.cols())
    throw dim_error("psd_sqrt: expected a square matrix, got " + S.shape_str());
  require_finite(S, "psd_sqrt: input");
  const long d = S.rows();
  real asym = 0;
  for (long i = 0; i < d; ++i)
    for (long j = i + 1; j < d; ++j) asym = std::max(asym, std::abs(S.at(i, j) - S.at(j, i)));
  if (asym > real(1e-8))
    throw numeric_error("psd_sqrt: matrix is not symmetric (max asymmetry " + std::to_string(asym) + ")");

  EigenMat M = mat_view(S);
  M = real(0.5) * (M + M.transpose().eval());
  Eigen::SelfAdjointEigenSolver<EigenMat> eig(M);
  if (eig.info() != Eigen::Success) throw numeric_error("psd_sqrt: eigendecomposition failed");

  EigenVec lam = eig.eigenvalues();
  for (long i = 0; i < d; ++i) {
    if (lam[i] < real(-1e-8))
      throw numeric_error("psd_sqrt: matrix is indefinite (eigenvalue " + std::to_string(lam[i]) + ")");
    lam[i] = std::sqrt(std::max(lam[i], real(0)));
  }
  EigenMat R = eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
  R = real(0.5) * (R + R.transpose().eval());

  Tensor out({d, d});
  mat_view(out) = R;
  return out;
}

}  // namespace baim

#endif  // BAIM_LINALG_HPP
