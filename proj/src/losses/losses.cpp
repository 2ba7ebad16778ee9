#include "chimeramix/losses.hpp"

#include "chimeramix/errors.hpp"

namespace chimeramix {

void LossWeights::validate() const {
  if (alpha_rec < 0.0 || alpha_per < 0.0 || alpha_disc < 0.0) {
    throw InvalidArgument("loss weights must be non-negative");
  }
}

namespace {

void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  if (!a.sizes().equals(b.sizes())) {
    throw InvalidArgument(std::string(what) + ": shape mismatch");
  }
}

}  // namespace

torch::Tensor reconstruction_loss(const torch::Tensor& x1_hat, const torch::Tensor& x1,
                                  const torch::Tensor& x2_hat, const torch::Tensor& x2) {
  require_same_shape(x1_hat, x1, "reconstruction_loss");
  require_same_shape(x2_hat, x2, "reconstruction_loss");
  return (x1_hat - x1).pow(2).mean() + (x2_hat - x2).pow(2).mean();
}

torch::Tensor perceptual_loss(const torch::Tensor& x_hat, const torch::Tensor& x,
                              const PerceptualOptions& options) {
  require_same_shape(x_hat, x, "perceptual_loss");
  const auto pyramid = build_laplacian_pyramid(x_hat - x, options.level_count);
  auto total = torch::zeros({}, x.options());
  double weight = 1.0;
  for (const auto& band : pyramid.bands) {
    total = total + weight * band.abs().mean();
    weight *= 4.0;
  }
  if (options.include_lowpass) {
    total = total + weight * pyramid.lowpass.abs().mean();
  }
  return total;
}

torch::Tensor lsgan_d_loss(const torch::Tensor& real_scores, const torch::Tensor& fake_scores) {
  return (real_scores - 1.0).pow(2).mean() + fake_scores.pow(2).mean();
}

torch::Tensor lsgan_g_loss(const torch::Tensor& fake_scores) {
  return (fake_scores - 1.0).pow(2).mean();
}

torch::Tensor generator_total_loss(const GeneratorLossParts& parts, const LossWeights& weights) {
  weights.validate();
  return weights.alpha_rec * parts.reconstruction + weights.alpha_per * parts.perceptual +
         weights.alpha_disc * parts.adversarial;
}

}  // namespace chimeramix
