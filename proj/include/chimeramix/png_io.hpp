#pragma once

#include <filesystem>
#include <vector>

#include "chimeramix/dataset.hpp"

namespace chimeramix {

/// Planar float image in [0, 1]; the PNG boundary converts to/from interleaved 8-bit RGB.
struct PlanarImage {
  ImageShape shape;
  std::vector<float> pixels;  // C x H x W
};

/// Reads any PNG as 8-bit RGB (palette, gray and alpha are expanded/stripped).
PlanarImage read_png(const std::filesystem::path& path);

/// Writes 1-channel images as grayscale, 3-channel as RGB.
void write_png(const std::filesystem::path& path, const ImageView& image);

}  // namespace chimeramix
