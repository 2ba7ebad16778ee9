#include "chimeramix/fid.hpp"

#include <Eigen/Eigenvalues>

#include <string>

#include "chimeramix/errors.hpp"

namespace chimeramix {

ActivationStats activation_stats(const Eigen::MatrixXd& features) {
  if (features.rows() < 2) {
    throw InvalidArgument("activation statistics need at least 2 samples, got " +
                          std::to_string(features.rows()));
  }
  if (!features.allFinite()) throw InvalidArgument("features contain non-finite values");
  ActivationStats s;
  s.n = features.rows();
  s.mu = features.colwise().mean().transpose();
  const Eigen::MatrixXd centered = features.rowwise() - s.mu.transpose();
  s.sigma = (centered.transpose() * centered) / static_cast<double>(s.n - 1);
  s.sigma = 0.5 * (s.sigma + s.sigma.transpose());
  return s;
}

Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) throw Error("eigendecomposition failed");
  const Eigen::VectorXd roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
}

namespace {

double trace_sqrt_psd(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw Error("eigendecomposition failed");
  return eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
}

void check_stats(const ActivationStats& s, const char* which) {
  if (s.sigma.rows() != s.dim() || s.sigma.cols() != s.dim()) {
    throw InvalidArgument(std::string(which) + ": covariance shape does not match the mean");
  }
  if (!s.mu.allFinite() || !s.sigma.allFinite()) {
    throw InvalidArgument(std::string(which) + ": statistics contain non-finite values");
  }
}

}  // namespace

double fid(const ActivationStats& a, const ActivationStats& b) {
  check_stats(a, "first");
  check_stats(b, "second");
  if (a.dim() != b.dim()) {
    throw InvalidArgument("feature dimension mismatch: " + std::to_string(a.dim()) + " vs " +
                          std::to_string(b.dim()));
  }
  const double mean_term = (a.mu - b.mu).squaredNorm();
  const Eigen::MatrixXd root_a = sqrt_psd(a.sigma);
  const double cross = trace_sqrt_psd(root_a * b.sigma * root_a);
  const double value = mean_term + a.sigma.trace() + b.sigma.trace() - 2.0 * cross;
  return value > 0.0 ? value : 0.0;
}

}  // namespace chimeramix
