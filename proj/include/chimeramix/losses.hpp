#pragma once

#include <torch/torch.h>

#include <vector>

namespace chimeramix {

struct LossWeights {
  double alpha_rec = 1000.0;
  double alpha_per = 1.0;
  double alpha_disc = 1.0;

  void validate() const;
};

/// Laplacian pyramid of an N x C x H x W batch.
///
/// G_0 = x, G_{j+1} = every second sample of blur(G_j) with the separable binomial
/// kernel [1 4 6 4 1] / 16 (replicate borders); band j = G_j - up(G_{j+1}) where `up`
/// is bilinear resampling (half-pixel centers) back to the size of G_j.
struct LaplacianPyramid {
  std::vector<torch::Tensor> bands;  // level_count band-pass residuals, finest first
  torch::Tensor lowpass;             // G_{level_count}

  int64_t level_count() const { return static_cast<int64_t>(bands.size()); }
  /// Adds the bands back from coarse to fine; telescopes to the original input.
  torch::Tensor reconstruct() const;
};

torch::Tensor binomial_blur(const torch::Tensor& x);
torch::Tensor pyramid_downsample(const torch::Tensor& x);
torch::Tensor pyramid_upsample(const torch::Tensor& x, int64_t height, int64_t width);

/// Requires both spatial dims >= 2^level_count.
LaplacianPyramid build_laplacian_pyramid(const torch::Tensor& x, int64_t level_count);

/// Mean squared error per pair, summed over the two reconstruction pairs.
torch::Tensor reconstruction_loss(const torch::Tensor& x1_hat, const torch::Tensor& x1,
                                  const torch::Tensor& x2_hat, const torch::Tensor& x2);

struct PerceptualOptions {
  int64_t level_count = 3;
  bool include_lowpass = true;  // low-pass term gets weight 2^(2 * level_count)
};

/// sum_j 4^j * mean|L_j(x_hat) - L_j(x)|, coarse levels weighted up.
torch::Tensor perceptual_loss(const torch::Tensor& x_hat, const torch::Tensor& x,
                              const PerceptualOptions& options = {});

/// mean((real - 1)^2) + mean(fake^2).
torch::Tensor lsgan_d_loss(const torch::Tensor& real_scores, const torch::Tensor& fake_scores);

/// mean((fake - 1)^2).
torch::Tensor lsgan_g_loss(const torch::Tensor& fake_scores);

struct GeneratorLossParts {
  torch::Tensor reconstruction;
  torch::Tensor perceptual;
  torch::Tensor adversarial;
};

torch::Tensor generator_total_loss(const GeneratorLossParts& parts, const LossWeights& weights);

}  // namespace chimeramix
