#include "chimeramix/errors.hpp"
#include "chimeramix/losses.hpp"

namespace chimeramix {

namespace F = torch::nn::functional;

torch::Tensor binomial_blur(const torch::Tensor& x) {
  const int64_t channels = x.size(1);
  const auto taps = torch::tensor({1.0, 4.0, 6.0, 4.0, 1.0}, x.options()) / 16.0;
  const auto horizontal = taps.view({1, 1, 1, 5}).expand({channels, 1, 1, 5}).contiguous();
  const auto vertical = taps.view({1, 1, 5, 1}).expand({channels, 1, 5, 1}).contiguous();
  auto padded = F::pad(x, F::PadFuncOptions({2, 2, 2, 2}).mode(torch::kReplicate));
  auto out = F::conv2d(padded, horizontal, F::Conv2dFuncOptions().groups(channels));
  return F::conv2d(out, vertical, F::Conv2dFuncOptions().groups(channels));
}

torch::Tensor pyramid_downsample(const torch::Tensor& x) {
  using torch::indexing::None;
  using torch::indexing::Slice;
  return binomial_blur(x).index({Slice(), Slice(), Slice(None, None, 2), Slice(None, None, 2)});
}

torch::Tensor pyramid_upsample(const torch::Tensor& x, int64_t height, int64_t width) {
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .size(std::vector<int64_t>{height, width})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

torch::Tensor LaplacianPyramid::reconstruct() const {
  auto current = lowpass;
  for (auto it = bands.rbegin(); it != bands.rend(); ++it) {
    current = *it + pyramid_upsample(current, it->size(2), it->size(3));
  }
  return current;
}

LaplacianPyramid build_laplacian_pyramid(const torch::Tensor& x, int64_t level_count) {
  if (x.dim() != 4) {
    throw InvalidArgument("laplacian pyramid expects an N x C x H x W batch");
  }
  if (level_count < 1) {
    throw InvalidArgument("laplacian pyramid needs at least one level");
  }
  const int64_t needed = int64_t{1} << level_count;
  if (x.size(2) < needed || x.size(3) < needed) {
    throw InvalidArgument("laplacian pyramid with " + std::to_string(level_count) +
                          " levels needs spatial dims >= " + std::to_string(needed) + ", got " +
                          std::to_string(x.size(2)) + "x" + std::to_string(x.size(3)));
  }
  LaplacianPyramid pyramid;
  auto current = x;
  for (int64_t j = 0; j < level_count; ++j) {
    auto coarser = pyramid_downsample(current);
    pyramid.bands.push_back(current - pyramid_upsample(coarser, current.size(2), current.size(3)));
    current = coarser;
  }
  pyramid.lowpass = current;
  return pyramid;
}

}  // namespace chimeramix
