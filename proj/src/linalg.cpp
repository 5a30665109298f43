#include "msdbn/linalg.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

namespace msdbn {

Eigen::LLT<Mat> chol(const Mat& m, const char* what) {
  Eigen::LLT<Mat> llt(m);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error(std::string(what) +
                             ": matrix is not positive definite");
  return llt;
}

Eigen::LLT<Mat> chol_jittered(const Mat& m, const char* what, double jitter) {
  Eigen::LLT<Mat> llt(m);
  if (llt.info() == Eigen::Success) return llt;
  Mat bumped = m + jitter * Mat::Identity(m.rows(), m.cols());
  llt.compute(bumped);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error(std::string(what) +
                             ": matrix is not positive definite even after "
                             "adding diagonal jitter");
  std::cerr << "warning: " << what << ": added diagonal jitter " << jitter
            << " to restore positive definiteness\n";
  return llt;
}

double log_det(const Eigen::LLT<Mat>& llt) {
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

Mat floor_eigenvalues(const Mat& m, double floor, bool* clipped) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(m);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("floor_eigenvalues: eigendecomposition failed");
  Vec values = eig.eigenvalues();
  bool any = false;
  for (int i = 0; i < values.size(); ++i) {
    if (values(i) < floor) {
      values(i) = floor;
      any = true;
    }
  }
  if (clipped) *clipped = any;
  if (!any) return m;
  return symmetrize(eig.eigenvectors() * values.asDiagonal() *
                    eig.eigenvectors().transpose());
}

}  // namespace msdbn
