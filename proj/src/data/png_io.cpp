#include "chimeramix/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "chimeramix/errors.hpp"

namespace chimeramix {

PlanarImage read_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_file(&image, path.c_str()) == 0) {
    throw FormatError("cannot read PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr) == 0) {
    png_image_free(&image);
    throw FormatError("cannot decode PNG " + path.string() + ": " + image.message);
  }
  PlanarImage out;
  out.shape = {static_cast<int64_t>(image.height), static_cast<int64_t>(image.width), 3};
  out.pixels.resize(static_cast<size_t>(out.shape.elements()));
  const int64_t plane = out.shape.pixels();
  for (int64_t p = 0; p < plane; ++p) {
    for (int64_t c = 0; c < 3; ++c) {
      out.pixels[static_cast<size_t>(c * plane + p)] =
          static_cast<float>(buffer[static_cast<size_t>(p * 3 + c)]) / 255.0f;
    }
  }
  return out;
}

void write_png(const std::filesystem::path& path, const ImageView& view) {
  const auto& shape = view.shape;
  if (shape.channels != 1 && shape.channels != 3) {
    throw InvalidArgument("PNG output supports 1 or 3 channels, got " +
                          std::to_string(shape.channels));
  }
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(shape.width);
  image.height = static_cast<png_uint_32>(shape.height);
  image.format = shape.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;

  const int64_t plane = shape.pixels();
  std::vector<png_byte> buffer(static_cast<size_t>(shape.elements()));
  for (int64_t p = 0; p < plane; ++p) {
    for (int64_t c = 0; c < shape.channels; ++c) {
      const float v = std::clamp(view.data[static_cast<size_t>(c * plane + p)], 0.0f, 1.0f);
      buffer[static_cast<size_t>(p * shape.channels + c)] =
          static_cast<png_byte>(std::lround(v * 255.0f));
    }
  }
  if (png_image_write_to_file(&image, path.c_str(), 0, buffer.data(), 0, nullptr) == 0) {
    throw FormatError("cannot write PNG " + path.string() + ": " + image.message);
  }
}

}  // namespace chimeramix
