#pragma once

#include <Eigen/Dense>

namespace msdbn {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

inline Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

// Cholesky factor of a symmetric positive-definite matrix. Throws
// std::runtime_error naming `what` when the factorization fails.
Eigen::LLT<Mat> chol(const Mat& m, const char* what);

// Same, but retries once with `jitter` added to the diagonal (warning on
// stderr) before giving up. For covariances that may be numerically
// borderline, not for matrices whose singularity is an error in itself.
Eigen::LLT<Mat> chol_jittered(const Mat& m, const char* what,
                              double jitter = 1e-10);

double log_det(const Eigen::LLT<Mat>& llt);

// Clamps eigenvalues of a symmetric matrix from below. Sets *clipped when
// any eigenvalue was raised.
Mat floor_eigenvalues(const Mat& m, double floor, bool* clipped = nullptr);

}  // namespace msdbn
