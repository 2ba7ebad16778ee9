#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace chimeramix {

/// Gaussian fit of feature activations.
struct ActivationStats {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  int64_t n = 0;

  int64_t dim() const { return mu.size(); }
};

/// Sample mean and unbiased covariance of the rows of `features` (N x d, N >= 2).
ActivationStats activation_stats(const Eigen::MatrixXd& features);

/// Square root of a symmetric positive semi-definite matrix; negative eigenvalues from
/// round-off are clamped to zero.
Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m);

/// Frechet distance between two Gaussians:
/// |mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2), clamped at 0.
double fid(const ActivationStats& a, const ActivationStats& b);

}  // namespace chimeramix
