#include "chimeramix/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "chimeramix/errors.hpp"

namespace chimeramix {

namespace {

using Color = std::array<float, 3>;

Color random_color(std::mt19937_64& rng) {
  return {static_cast<float>(uniform_unit(rng)), static_cast<float>(uniform_unit(rng)),
          static_cast<float>(uniform_unit(rng))};
}

Color jittered(const Color& center, double amount, std::mt19937_64& rng) {
  Color c;
  for (int i = 0; i < 3; ++i) {
    c[i] = std::clamp(center[i] + static_cast<float>(amount * (2.0 * uniform_unit(rng) - 1.0)),
                      0.0f, 1.0f);
  }
  return c;
}

constexpr std::array<Color, 3> kClassTints{Color{0.85f, 0.25f, 0.2f}, Color{0.25f, 0.75f, 0.3f},
                                           Color{0.2f, 0.3f, 0.85f}};

float color_distance(const Color& a, const Color& b) {
  float d = 0.0f;
  for (int c = 0; c < 3; ++c) d += (a[c] - b[c]) * (a[c] - b[c]);
  return std::sqrt(d);
}

class Canvas {
 public:
  explicit Canvas(int64_t side) : side_(side), pixels_(static_cast<size_t>(3 * side * side)) {}

  void fill(const Color& color) {
    for (int64_t c = 0; c < 3; ++c) {
      std::fill_n(pixels_.begin() + c * side_ * side_, side_ * side_, color[c]);
    }
  }

  template <typename Inside>
  void paint(const Color& color, Inside inside) {
    for (int64_t y = 0; y < side_; ++y) {
      for (int64_t x = 0; x < side_; ++x) {
        if (!inside(y, x)) continue;
        for (int64_t c = 0; c < 3; ++c) pixels_[static_cast<size_t>((c * side_ + y) * side_ + x)] = color[c];
      }
    }
  }

  void add_noise(double sigma, std::mt19937_64& rng) {
    for (auto& v : pixels_) {
      v = std::clamp(v + static_cast<float>(sigma * standard_normal(rng)), 0.0f, 1.0f);
    }
  }

  void append_to(std::vector<float>& out) const {
    out.insert(out.end(), pixels_.begin(), pixels_.end());
  }

 private:
  int64_t side_;
  std::vector<float> pixels_;
};

constexpr uint64_t kPaletteSeed = 0x9a1e77e;

void check_sizes(int64_t per_class, int64_t side) {
  if (per_class < 1) throw InvalidArgument("synthetic datasets need >= 1 image per class");
  if (side < 8) throw InvalidArgument("synthetic images must be at least 8 pixels wide");
}

}  // namespace

LabeledImageDataset make_flat_color_dataset(int64_t classes, int64_t per_class, int64_t side,
                                            double noise, uint64_t seed) {
  check_sizes(per_class, side);
  if (classes < 1) throw InvalidArgument("synthetic datasets need >= 1 class");
  std::mt19937_64 palette_rng(kPaletteSeed);
  std::vector<Color> base(static_cast<size_t>(classes));
  for (auto& color : base) color = random_color(palette_rng);
  std::mt19937_64 rng(seed);
  std::vector<float> pixels;
  std::vector<int64_t> labels;
  for (int64_t i = 0; i < per_class; ++i) {
    for (int64_t k = 0; k < classes; ++k) {
      Canvas canvas(side);
      canvas.fill(base[static_cast<size_t>(k)]);
      canvas.add_noise(noise, rng);
      canvas.append_to(pixels);
      labels.push_back(k);
    }
  }
  return LabeledImageDataset("flat-color", {side, side, 3}, classes, std::move(pixels),
                             std::move(labels));
}

LabeledImageDataset make_two_class_fixture(int64_t per_class, int64_t side, uint64_t seed) {
  check_sizes(per_class, side);
  std::mt19937_64 rng(seed);
  const std::array<Color, 2> tints{Color{0.85f, 0.2f, 0.15f}, Color{0.15f, 0.3f, 0.85f}};
  std::vector<float> pixels;
  std::vector<int64_t> labels;
  for (int64_t i = 0; i < per_class; ++i) {
    for (int64_t k = 0; k < 2; ++k) {
      Canvas canvas(side);
      const auto g = static_cast<float>(0.35 + 0.3 * uniform_unit(rng));
      canvas.fill({g, g, g});
      const double cy = side * (0.25 + 0.5 * uniform_unit(rng));
      const double cx = side * (0.25 + 0.5 * uniform_unit(rng));
      const double r = side * (0.15 + 0.1 * uniform_unit(rng));
      canvas.paint(tints[static_cast<size_t>(k)], [&](int64_t y, int64_t x) {
        return (y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r;
      });
      canvas.add_noise(0.03, rng);
      canvas.append_to(pixels);
      labels.push_back(k);
    }
  }
  return LabeledImageDataset("two-class-fixture", {side, side, 3}, 2, std::move(pixels),
                             std::move(labels));
}

LabeledImageDataset make_structured_dataset(int64_t per_class, int64_t side, uint64_t seed,
                                            double noise) {
  check_sizes(per_class, side);
  std::mt19937_64 rng(seed);
  std::vector<float> pixels;
  std::vector<int64_t> labels;
  const double s = static_cast<double>(side);
  for (int64_t i = 0; i < per_class; ++i) {
    for (int64_t k = 0; k < 3; ++k) {
      Canvas canvas(side);
      const Color object = jittered(kClassTints[static_cast<size_t>(k)], 0.15, rng);
      Color background = random_color(rng);
      while (color_distance(object, background) < 0.5f) background = random_color(rng);
      canvas.fill(background);

      // distractor square, shared by all classes
      const Color distractor = random_color(rng);
      const double dsize = s * 0.2;
      const double dy = (s - dsize) * uniform_unit(rng);
      const double dx = (s - dsize) * uniform_unit(rng);
      canvas.paint(distractor, [&](int64_t y, int64_t x) {
        return y >= dy && y < dy + dsize && x >= dx && x < dx + dsize && (y + x) % 2 == 0;
      });

      const double half = s * (0.24 + 0.1 * uniform_unit(rng));
      const double cy = half + (s - 2.0 * half) * uniform_unit(rng);
      const double cx = half + (s - 2.0 * half) * uniform_unit(rng);
      canvas.paint(object, [&](int64_t y, int64_t x) {
        const double ry = y + 0.5 - cy;
        const double rx = x + 0.5 - cx;
        switch (k) {
          case 0:
            return std::abs(ry) <= half && std::abs(rx) <= half;
          case 1:
            return ry * ry + rx * rx <= half * half;
          default:
            return std::abs(ry) <= half && std::abs(rx) <= half &&
                   (std::abs(ry) <= half / 3.0 || std::abs(rx) <= half / 3.0);
        }
      });
      canvas.add_noise(noise, rng);
      canvas.append_to(pixels);
      labels.push_back(k);
    }
  }
  return LabeledImageDataset("structured", {side, side, 3}, 3, std::move(pixels),
                             std::move(labels));
}

}  // namespace chimeramix
