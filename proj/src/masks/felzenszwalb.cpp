#include "chimeramix/felzenszwalb.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "chimeramix/errors.hpp"

namespace chimeramix {

void FelzParams::validate() const {
  if (!(scale > 0.0)) throw InvalidArgument("felzenszwalb scale must be > 0");
  if (min_size < 1) throw InvalidArgument("felzenszwalb min_size must be >= 1");
  if (!(sigma >= 0.0)) throw InvalidArgument("felzenszwalb sigma must be >= 0");
}

std::vector<int64_t> SegmentationMap::region_sizes() const {
  std::vector<int64_t> sizes(static_cast<size_t>(region_count), 0);
  for (const int32_t l : labels) ++sizes[static_cast<size_t>(l)];
  return sizes;
}

std::vector<float> gaussian_smooth(const ImageView& image, double sigma) {
  const auto& s = image.shape;
  std::vector<float> out(image.data.begin(), image.data.end());
  if (sigma <= 0.0) return out;

  const auto radius = static_cast<int64_t>(std::ceil(4.0 * sigma));
  std::vector<double> kernel(static_cast<size_t>(2 * radius + 1));
  for (int64_t i = -radius; i <= radius; ++i) {
    kernel[static_cast<size_t>(i + radius)] = std::exp(-0.5 * (i * i) / (sigma * sigma));
  }
  const double norm = std::accumulate(kernel.begin(), kernel.end(), 0.0);
  for (auto& k : kernel) k /= norm;

  std::vector<float> tmp(out.size());
  const int64_t h = s.height;
  const int64_t w = s.width;
  for (int64_t c = 0; c < s.channels; ++c) {
    float* plane = out.data() + c * h * w;
    float* scratch = tmp.data() + c * h * w;
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int64_t i = -radius; i <= radius; ++i) {
          const int64_t xx = std::clamp<int64_t>(x + i, 0, w - 1);
          acc += kernel[static_cast<size_t>(i + radius)] * plane[y * w + xx];
        }
        scratch[y * w + x] = static_cast<float>(acc);
      }
    }
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int64_t i = -radius; i <= radius; ++i) {
          const int64_t yy = std::clamp<int64_t>(y + i, 0, h - 1);
          acc += kernel[static_cast<size_t>(i + radius)] * scratch[yy * w + x];
        }
        plane[y * w + x] = static_cast<float>(acc);
      }
    }
  }
  return out;
}

namespace {

struct Edge {
  int64_t a;
  int64_t b;
  double weight;
};

class DisjointSets {
 public:
  explicit DisjointSets(int64_t n)
      : parent_(static_cast<size_t>(n)), size_(static_cast<size_t>(n), 1) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }

  int64_t find(int64_t x) {
    while (parent_[static_cast<size_t>(x)] != x) {
      auto& p = parent_[static_cast<size_t>(x)];
      p = parent_[static_cast<size_t>(p)];
      x = p;
    }
    return x;
  }

  /// Joins two roots; returns the surviving root.
  int64_t join(int64_t a, int64_t b) {
    if (size_[static_cast<size_t>(a)] < size_[static_cast<size_t>(b)]) std::swap(a, b);
    parent_[static_cast<size_t>(b)] = a;
    size_[static_cast<size_t>(a)] += size_[static_cast<size_t>(b)];
    return a;
  }

  int64_t size(int64_t root) const { return size_[static_cast<size_t>(root)]; }

 private:
  std::vector<int64_t> parent_;
  std::vector<int64_t> size_;
};

}  // namespace

SegmentationMap felzenszwalb_segment(const ImageView& image, const FelzParams& params) {
  params.validate();
  const auto& s = image.shape;
  const int64_t h = s.height;
  const int64_t w = s.width;
  const int64_t plane = h * w;
  const auto smoothed = gaussian_smooth(image, params.sigma);

  auto distance = [&](int64_t p, int64_t q) {
    double acc = 0.0;
    for (int64_t c = 0; c < s.channels; ++c) {
      const double d = smoothed[static_cast<size_t>(c * plane + p)] -
                       smoothed[static_cast<size_t>(c * plane + q)];
      acc += d * d;
    }
    return std::sqrt(acc);
  };

  std::vector<Edge> edges;
  edges.reserve(static_cast<size_t>(plane * 4));
  const bool eight = params.connectivity == Connectivity::kEight;
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      const int64_t p = y * w + x;
      if (x + 1 < w) edges.push_back({p, p + 1, distance(p, p + 1)});
      if (y + 1 < h) edges.push_back({p, p + w, distance(p, p + w)});
      if (eight && x + 1 < w && y + 1 < h) edges.push_back({p, p + w + 1, distance(p, p + w + 1)});
      if (eight && x + 1 < w && y > 0) edges.push_back({p, p - w + 1, distance(p, p - w + 1)});
    }
  }
  std::stable_sort(edges.begin(), edges.end(),
                   [](const Edge& l, const Edge& r) { return l.weight < r.weight; });

  DisjointSets sets(plane);
  // threshold[root] = Int(C) + scale / |C|; Int of a singleton is 0.
  std::vector<double> threshold(static_cast<size_t>(plane), params.scale);
  for (const auto& e : edges) {
    const int64_t a = sets.find(e.a);
    const int64_t b = sets.find(e.b);
    if (a == b) continue;
    if (e.weight <= threshold[static_cast<size_t>(a)] &&
        e.weight <= threshold[static_cast<size_t>(b)]) {
      const int64_t root = sets.join(a, b);
      threshold[static_cast<size_t>(root)] =
          e.weight + params.scale / static_cast<double>(sets.size(root));
    }
  }
  // Edges are still sorted, so the first edge seen for a small component is its cheapest.
  for (const auto& e : edges) {
    const int64_t a = sets.find(e.a);
    const int64_t b = sets.find(e.b);
    if (a != b && (sets.size(a) < params.min_size || sets.size(b) < params.min_size)) {
      sets.join(a, b);
    }
  }

  SegmentationMap map;
  map.height = h;
  map.width = w;
  map.labels.resize(static_cast<size_t>(plane));
  std::vector<int32_t> dense(static_cast<size_t>(plane), -1);
  int32_t next = 0;
  for (int64_t p = 0; p < plane; ++p) {
    auto& slot = dense[static_cast<size_t>(sets.find(p))];
    if (slot < 0) slot = next++;
    map.labels[static_cast<size_t>(p)] = slot;
  }
  map.region_count = next;
  return map;
}

}  // namespace chimeramix
