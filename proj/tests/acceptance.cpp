// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset.

#include <torch/torch.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "chimeramix/checkpoint.hpp"
#include "chimeramix/classifier_trainer.hpp"
#include "chimeramix/evaluation.hpp"
#include "chimeramix/felzenszwalb.hpp"
#include "chimeramix/fid.hpp"
#include "chimeramix/generator_trainer.hpp"
#include "chimeramix/losses.hpp"
#include "chimeramix/masks.hpp"
#include "chimeramix/pipeline.hpp"
#include "chimeramix/schedules.hpp"
#include "chimeramix/synthetic.hpp"
#include "chimeramix/tensor_ops.hpp"
#include "oracles.hpp"

using namespace chimeramix;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok) {
      pass_ = false;
      if (!failures_.empty()) failures_ += "; ";
      failures_ += what;
    }
  }
  void note(const std::string& text) {
    if (!notes_.empty()) notes_ += ", ";
    notes_ += text;
  }
  Outcome outcome() const {
    return {pass_, pass_ ? notes_ : failures_ + (notes_.empty() ? "" : " | " + notes_)};
  }

 private:
  bool pass_ = true;
  std::string failures_;
  std::string notes_;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream out;
  out.precision(precision);
  out << v;
  return out.str();
}

oracle::Image to_oracle(const torch::Tensor& chw) {
  const auto t = chw.to(torch::kFloat64).contiguous();
  oracle::Image img(t.size(0), t.size(1), t.size(2));
  std::copy_n(t.data_ptr<double>(), img.v.size(), img.v.begin());
  return img;
}

double max_abs(const torch::Tensor& t) { return t.abs().max().item<double>(); }

fs::path scratch_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("chimeramix_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

GeneratorConfig tiny_generator(int64_t side, int64_t base = 8) {
  GeneratorConfig g;
  g.n_res_blocks = 2;
  g.mix_after_block = 1;
  g.base_channels = base;
  g.input_height = side;
  g.input_width = side;
  return g;
}

DiscriminatorConfig tiny_discriminator(int64_t width = 8) {
  DiscriminatorConfig d;
  d.block_channels = {width, 2 * width};
  return d;
}

// 1. Mixing identities.
Outcome criterion_mixing() {
  Checker c;
  torch::manual_seed(11);
  const auto e1 = torch::randn({3, 16, 8, 8});
  const auto e2 = torch::randn({3, 16, 8, 8});
  const auto ones = torch::ones({3, 1, 8, 8});
  const auto zeros = torch::zeros({3, 1, 8, 8});
  c.expect(torch::equal(mix_features(e1, e2, ones), e1), "all-ones mask did not return e1");
  c.expect(torch::equal(mix_features(e1, e2, zeros), e2), "all-zeros mask did not return e2");
  int symmetric = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = torch::randint(0, 2, {3, 1, 8, 8}).to(torch::kFloat32);
    symmetric += torch::equal(mix_features(e1, e2, m), mix_features(e2, e1, 1.0 - m)) ? 1 : 0;
  }
  c.expect(symmetric == 20, "complement swap broke on " + std::to_string(20 - symmetric) + "/20");

  // Same identities on real encoder features, through the generator's own path.
  Generator g(tiny_generator(16, 4));
  torch::NoGradGuard no_grad;
  const auto x1 = torch::rand({2, 3, 16, 16}) * 2 - 1;
  const auto x2 = torch::rand({2, 3, 16, 16}) * 2 - 1;
  const auto f1 = g->encode(x1);
  const auto f2 = g->encode(x2);
  c.expect(torch::equal(mix_features(f1, f2, torch::ones({2, 1, 4, 4})), f1),
           "encoder features: ones mask");
  c.expect(torch::allclose(g->generate(x1, x2, torch::ones({2, 1, 4, 4})), g->decode(f1), 0.0, 1e-6),
           "generate with ones mask differs from decode(encode(x1))");
  c.note("bitwise identities hold on random and encoder features");
  return c.outcome();
}

// 2. Loss oracles, linearity, gradients.
Outcome criterion_losses() {
  Checker c;
  torch::manual_seed(5);
  const auto opts = torch::TensorOptions().dtype(torch::kFloat64);
  const auto a = torch::rand({2, 3, 4, 4}, opts);
  const auto b = torch::rand({2, 3, 4, 4}, opts);
  const auto a2 = torch::rand({2, 3, 4, 4}, opts);
  const auto b2 = torch::rand({2, 3, 4, 4}, opts);

  // reconstruction: per-pair mean squared error, summed
  double rec_oracle = 0.0;
  for (const auto& [p, q] : {std::pair{a, b}, std::pair{a2, b2}}) {
    const double* pd = p.data_ptr<double>();
    const double* qd = q.data_ptr<double>();
    double s = 0.0;
    for (int64_t i = 0; i < p.numel(); ++i) s += (pd[i] - qd[i]) * (pd[i] - qd[i]);
    rec_oracle += s / static_cast<double>(p.numel());
  }
  const double rec = reconstruction_loss(a, b, a2, b2).item<double>();
  c.expect(std::abs(rec - rec_oracle) <= 1e-6, "L_rec " + fmt(rec, 12) + " vs " + fmt(rec_oracle, 12));

  // perceptual: separate pyramids per image built by plain loops
  for (const bool lowpass : {true, false}) {
    std::vector<oracle::Image> xh;
    std::vector<oracle::Image> x;
    for (int64_t n = 0; n < 2; ++n) {
      xh.push_back(to_oracle(a[n]));
      x.push_back(to_oracle(b[n]));
    }
    const double per_oracle = oracle::perceptual(xh, x, 2, lowpass);
    const double per = perceptual_loss(a, b, {2, lowpass}).item<double>();
    c.expect(std::abs(per - per_oracle) <= 1e-6,
             "L_per(lowpass=" + std::to_string(lowpass) + ") " + fmt(per, 12) + " vs " +
                 fmt(per_oracle, 12));
  }

  // least-squares adversarial terms
  const auto real = torch::rand({2, 1, 4, 4}, opts);
  const auto fake = torch::rand({2, 1, 4, 4}, opts);
  double d_oracle_real = 0.0;
  double d_oracle_fake = 0.0;
  double g_oracle = 0.0;
  for (int64_t i = 0; i < real.numel(); ++i) {
    const double r = real.data_ptr<double>()[i];
    const double f = fake.data_ptr<double>()[i];
    d_oracle_real += (r - 1) * (r - 1);
    d_oracle_fake += f * f;
    g_oracle += (f - 1) * (f - 1);
  }
  const double n = static_cast<double>(real.numel());
  const double d_oracle = d_oracle_real / n + d_oracle_fake / n;
  c.expect(std::abs(lsgan_d_loss(real, fake).item<double>() - d_oracle) <= 1e-6, "LSGAN D");
  c.expect(std::abs(lsgan_g_loss(fake).item<double>() - g_oracle / n) <= 1e-6, "LSGAN G");

  // composite loss is linear in the weights
  GeneratorLossParts parts{torch::tensor(0.37, opts), torch::tensor(1.25, opts),
                           torch::tensor(0.81, opts)};
  bool linear = true;
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const LossWeights w{1000.0 * uniform_unit(rng), uniform_unit(rng), uniform_unit(rng)};
    const LossWeights w2{2 * w.alpha_rec, 2 * w.alpha_per, 2 * w.alpha_disc};
    const double t = generator_total_loss(parts, w).item<double>();
    const double t2 = generator_total_loss(parts, w2).item<double>();
    const double direct = w.alpha_rec * 0.37 + w.alpha_per * 1.25 + w.alpha_disc * 0.81;
    linear = linear && t2 == 2.0 * t && t == direct;
    const LossWeights only_rec{w.alpha_rec, 0.0, 0.0};
    linear = linear && generator_total_loss(parts, only_rec).item<double>() == w.alpha_rec * 0.37;
  }
  c.expect(linear, "composite loss not exactly linear in alpha");

  // analytic gradients against central differences on a float64 toy model
  torch::manual_seed(17);
  auto bundle = GeneratorBundle::create(tiny_generator(8, 4), tiny_discriminator(4));
  bundle.generator->to(torch::kFloat64);
  bundle.discriminator->to(torch::kFloat64);
  const auto x1 = torch::rand({2, 3, 8, 8}, opts) * 2 - 1;
  const auto x2 = torch::rand({2, 3, 8, 8}, opts) * 2 - 1;
  const auto mask = torch::tensor({1.0, 0.0, 0.0, 1.0}, opts).view({1, 1, 2, 2});
  const LossWeights weights;
  const PerceptualOptions per_opts{2, true};
  auto g_loss = [&]() {
    auto& g = bundle.generator;
    const auto e1 = g->encode(x1);
    const auto e2 = g->encode(x2);
    const auto mixed = g->decode(mix_features(e1, e2, mask));
    const auto x1_hat = g->decode(mix_features(e1, e2, torch::ones_like(mask)));
    const auto x2_hat = g->decode(mix_features(e1, e2, torch::zeros_like(mask)));
    GeneratorLossParts p{reconstruction_loss(x1_hat, x1, x2_hat, x2),
                         perceptual_loss(x1_hat, x1, per_opts) + perceptual_loss(x2_hat, x2, per_opts),
                         lsgan_g_loss(bundle.discriminator->forward(mixed))};
    return generator_total_loss(p, weights);
  };
  auto d_loss = [&]() {
    const auto mixed = bundle.generator->generate(x1, x2, mask).detach();
    return lsgan_d_loss(bundle.discriminator->forward(torch::cat({x1, x2})),
                        bundle.discriminator->forward(mixed));
  };

  int checked = 0;
  int zero = 0;
  double worst = 0.0;
  auto check_module = [&](torch::nn::Module& module, const std::function<torch::Tensor()>& loss_fn) {
    for (auto& p : bundle.generator->parameters()) p.mutable_grad() = torch::Tensor();
    for (auto& p : bundle.discriminator->parameters()) p.mutable_grad() = torch::Tensor();
    loss_fn().backward();
    std::mt19937_64 pick(99);
    for (auto& p : module.parameters()) {
      const auto grad = p.grad().clone();
      auto flat = p.data().view(-1);
      const auto gflat = grad.view(-1);
      std::vector<int64_t> entries{gflat.abs().argmax().item<int64_t>(),
                                   uniform_index(pick, flat.numel()),
                                   uniform_index(pick, flat.numel())};
      for (const int64_t idx : entries) {
        const double original = flat[idx].item<double>();
        const double eps = 1e-6;
        torch::NoGradGuard no_grad;
        flat[idx] = original + eps;
        const double up = loss_fn().item<double>();
        flat[idx] = original - eps;
        const double down = loss_fn().item<double>();
        flat[idx] = original;
        const double fd = (up - down) / (2 * eps);
        const double an = gflat[idx].item<double>();
        ++checked;
        if (std::abs(an) < 1e-6 && std::abs(fd) < 1e-6) {
          ++zero;
          continue;
        }
        const double rel = std::abs(an - fd) / std::max(std::abs(an), std::abs(fd));
        worst = std::max(worst, rel);
      }
    }
  };
  check_module(*bundle.generator, g_loss);
  check_module(*bundle.discriminator, d_loss);
  c.expect(worst <= 1e-4, "gradient relative error " + fmt(worst));
  c.note(std::to_string(checked) + " gradient entries, worst rel err " + fmt(worst, 3) + " (" +
         std::to_string(zero) + " structurally zero)");
  return c.outcome();
}

// 3. Laplacian pyramid.
Outcome criterion_pyramid() {
  Checker c;
  torch::manual_seed(2);
  for (const auto& size : {std::pair<int64_t, int64_t>{16, 16}, {32, 24}, {9, 13}}) {
    const auto x = torch::rand({2, 3, size.first, size.second}, torch::kFloat64);
    const int64_t levels = size.first >= 16 && size.second >= 16 ? 3 : 2;
    const auto p = build_laplacian_pyramid(x, levels);
    const double err = max_abs(p.reconstruct() - x);
    c.expect(err <= 1e-6, "reconstruction error " + fmt(err));
  }
  const auto constant = torch::full({1, 3, 16, 16}, 0.3, torch::kFloat64);
  const auto pc = build_laplacian_pyramid(constant, 3);
  double band_max = 0.0;
  for (const auto& band : pc.bands) band_max = std::max(band_max, max_abs(band));
  c.expect(band_max <= 1e-6, "constant image band magnitude " + fmt(band_max));
  c.expect(max_abs(pc.lowpass - 0.3) <= 1e-6, "constant image low-pass drifted");
  c.note("reconstruction exact to 1e-6; constant bands zero");
  return c.outcome();
}

// 4. Segmentation.
Outcome criterion_segmentation() {
  Checker c;
  const FelzParams params;
  {
    std::vector<float> px(3 * 20 * 20, 0.4f);
    const auto seg = felzenszwalb_segment(ImageView{px, {20, 20, 3}}, params);
    c.expect(seg.region_count == 1, "constant image gave " + std::to_string(seg.region_count) +
                                        " regions");
  }
  {
    const int64_t h = 24, w = 24;
    std::vector<float> px(static_cast<size_t>(3 * h * w));
    std::vector<int> tone(static_cast<size_t>(h * w));
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        const bool right = x >= 10 + y / 3;  // slanted boundary
        tone[static_cast<size_t>(y * w + x)] = right ? 1 : 0;
        px[static_cast<size_t>((0 * h + y) * w + x)] = right ? 0.1f : 0.9f;
        px[static_cast<size_t>((1 * h + y) * w + x)] = right ? 0.2f : 0.1f;
        px[static_cast<size_t>((2 * h + y) * w + x)] = right ? 0.9f : 0.2f;
      }
    }
    FelzParams p;
    p.sigma = 0.0;
    p.min_size = 10;
    const auto seg = felzenszwalb_segment(ImageView{px, {h, w, 3}}, p);
    int cc = 0;
    const auto components = oracle::connected_components(tone, h, w, 8, &cc);
    c.expect(seg.region_count == 2, "two-tone image gave " + std::to_string(seg.region_count));
    c.expect(oracle::same_partition(seg.labels, components), "two-tone partition mismatch");
  }
  std::mt19937_64 rng(123);
  int violations = 0;
  bool deterministic = true;
  for (int trial = 0; trial < 100; ++trial) {
    const int64_t h = 16 + uniform_index(rng, 17);
    const int64_t w = 16 + uniform_index(rng, 17);
    std::vector<float> px(static_cast<size_t>(3 * h * w));
    const int64_t block = 2 + uniform_index(rng, 6);
    std::vector<float> palette(3 * 64);
    for (auto& v : palette) v = static_cast<float>(uniform_unit(rng));
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        const auto cell = static_cast<size_t>(((y / block) * 7 + (x / block) * 3) % 64);
        for (int64_t ch = 0; ch < 3; ++ch) {
          px[static_cast<size_t>((ch * h + y) * w + x)] =
              palette[3 * cell + static_cast<size_t>(ch)] + 0.05f * static_cast<float>(uniform_unit(rng));
        }
      }
    }
    FelzParams p;
    p.scale = 10.0 + 200.0 * uniform_unit(rng);
    p.min_size = 1 + uniform_index(rng, 40);
    p.sigma = 0.8 * uniform_unit(rng);
    p.connectivity = uniform_unit(rng) < 0.5 ? Connectivity::kFour : Connectivity::kEight;
    const ImageView view{px, {h, w, 3}};
    const auto seg = felzenszwalb_segment(view, p);
    const auto again = felzenszwalb_segment(view, p);
    deterministic = deterministic && seg.labels == again.labels;
    // partition: dense labels, every label used, every region connected, min size
    std::vector<int> lbl(seg.labels.begin(), seg.labels.end());
    bool dense = true;
    for (const int l : lbl) dense = dense && l >= 0 && l < seg.region_count;
    const auto sizes = seg.region_sizes();
    for (const auto s : sizes) dense = dense && s > 0;
    int cc = 0;
    oracle::connected_components(lbl, h, w, static_cast<int>(p.connectivity), &cc);
    const bool connected = cc == seg.region_count;
    bool min_ok = true;
    if (h * w >= p.min_size) {
      for (const auto s : sizes) min_ok = min_ok && s >= p.min_size;
    }
    if (!dense || !connected || !min_ok) ++violations;
  }
  c.expect(violations == 0, std::to_string(violations) + "/100 random images broke invariants");
  c.expect(deterministic, "segmentation not deterministic");
  c.note("1 region on constant, 2 on two-tone, invariants on 100 random images");
  return c.outcome();
}

// 5. Mask statistics.
Outcome criterion_masks() {
  Checker c;
  std::mt19937_64 rng(8);
  bool blocks = true;
  double mean_sum = 0.0;
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    const auto m = sample_grid_mask(4, 16, 16, rng);
    double ones = 0.0;
    for (int64_t y = 0; y < 16; ++y) {
      for (int64_t x = 0; x < 16; ++x) {
        blocks = blocks && m.at(y, x) == m.at((y / 4) * 4, (x / 4) * 4);
        ones += m.at(y, x);
      }
    }
    mean_sum += ones / 256.0;
  }
  const double mean = mean_sum / trials;
  c.expect(blocks, "grid mask not constant on 4x4 blocks");
  c.expect(std::abs(mean - 0.5) <= 0.02, "grid Bernoulli mean " + fmt(mean));

  // non-divisible grid: cell of row y is floor(y * g / H')
  bool cells = true;
  for (int t = 0; t < 200; ++t) {
    const auto m = sample_grid_mask(3, 10, 7, rng);
    for (int64_t y = 0; y < 10; ++y) {
      for (int64_t x = 0; x < 7; ++x) {
        for (int64_t y2 = 0; y2 < 10; ++y2) {
          for (int64_t x2 = 0; x2 < 7; ++x2) {
            if (y * 3 / 10 == y2 * 3 / 10 && x * 3 / 7 == x2 * 3 / 7) {
              cells = cells && m.at(y, x) == m.at(y2, x2);
            }
          }
        }
      }
    }
  }
  c.expect(cells, "grid cells not constant for non-divisible sizes");

  // segmentation masks on regions aligned with the 4x downsampling grid
  SegmentationMap seg;
  seg.height = 32;
  seg.width = 32;
  seg.labels.resize(32 * 32);
  std::vector<int> block_region(64);
  for (int i = 0; i < 64; ++i) block_region[static_cast<size_t>(i)] = static_cast<int>(uniform_index(rng, 5));
  for (int64_t y = 0; y < 32; ++y) {
    for (int64_t x = 0; x < 32; ++x) {
      seg.labels[static_cast<size_t>(y * 32 + x)] = block_region[static_cast<size_t>((y / 4) * 8 + x / 4)];
    }
  }
  seg.region_count = 5;
  bool aligned = true;
  for (int region = 0; region < 5; ++region) {
    std::vector<uint8_t> sel(5, 0);
    sel[static_cast<size_t>(region)] = 1;
    const auto m = downsample_region_mask(seg, sel, 8, 8);
    for (int64_t i = 0; i < 64; ++i) {
      aligned = aligned && m.values[static_cast<size_t>(i)] == (block_region[static_cast<size_t>(i)] == region ? 1 : 0);
    }
  }
  c.expect(aligned, "aligned segmentation mask differs from the area oracle");

  // arbitrary regions: compare with the area fraction >= 0.5 rule
  bool threshold = true;
  for (int t = 0; t < 50; ++t) {
    SegmentationMap s;
    s.height = 24;
    s.width = 20;
    s.region_count = 3;
    s.labels.resize(24 * 20);
    for (auto& l : s.labels) l = static_cast<int32_t>(uniform_index(rng, 3));
    std::vector<uint8_t> sel{1, 0, static_cast<uint8_t>(uniform_index(rng, 2))};
    const auto m = downsample_region_mask(s, sel, 6, 5);
    for (int64_t fy = 0; fy < 6; ++fy) {
      for (int64_t fx = 0; fx < 5; ++fx) {
        int inside = 0;
        for (int64_t y = fy * 4; y < fy * 4 + 4; ++y) {
          for (int64_t x = fx * 4; x < fx * 4 + 4; ++x) inside += sel[static_cast<size_t>(s.at(y, x))];
        }
        threshold = threshold && m.at(fy, fx) == (2 * inside >= 16 ? 1 : 0);
      }
    }
  }
  c.expect(threshold, "segmentation mask disagrees with the area threshold oracle");
  c.note("grid mean " + fmt(mean) + " over 10^4 masks");
  return c.outcome();
}

// 6. FID.
Outcome criterion_fid() {
  Checker c;
  std::mt19937_64 rng(4);
  Eigen::MatrixXd f(200, 6);
  for (int64_t i = 0; i < f.size(); ++i) f.data()[i] = standard_normal(rng);
  f.col(1) += 0.5 * f.col(0);
  const auto a = activation_stats(f);
  const double self = fid(a, a);
  c.expect(std::abs(self) <= 1e-6, "fid(a, a) = " + fmt(self));

  ActivationStats d1{Eigen::Vector2d(0.3, -1.0), Eigen::Vector2d(4.0, 1.0).asDiagonal(), 10};
  ActivationStats d2{Eigen::Vector2d(0.3, -1.0), Eigen::Vector2d(1.0, 1.0).asDiagonal(), 10};
  const double diag = fid(d1, d2);
  c.expect(std::abs(diag - 1.0) <= 1e-6, "diag(4,1) vs diag(1,1) gave " + fmt(diag, 12));

  // commuting covariances: shared eigenbasis, closed form |dmu|^2 + sum (sqrt l - sqrt n)^2
  Eigen::MatrixXd q = Eigen::MatrixXd::Random(5, 5);
  const Eigen::MatrixXd basis = Eigen::HouseholderQR<Eigen::MatrixXd>(q).householderQ();
  const Eigen::VectorXd l1 = (Eigen::VectorXd(5) << 3.0, 0.5, 2.0, 0.0, 1.5).finished();
  const Eigen::VectorXd l2 = (Eigen::VectorXd(5) << 1.0, 0.25, 4.0, 0.7, 1.5).finished();
  ActivationStats c1{Eigen::VectorXd::Zero(5), basis * l1.asDiagonal() * basis.transpose(), 10};
  ActivationStats c2{Eigen::VectorXd::Constant(5, 0.2), basis * l2.asDiagonal() * basis.transpose(), 10};
  double closed = 5 * 0.04;
  for (int i = 0; i < 5; ++i) closed += std::pow(std::sqrt(l1[i]) - std::sqrt(l2[i]), 2);
  const double commuting = fid(c1, c2);
  c.expect(std::abs(commuting - closed) <= 1e-6,
           "commuting closed form " + fmt(commuting, 12) + " vs " + fmt(closed, 12));

  Eigen::MatrixXd g(150, 6);
  for (int64_t i = 0; i < g.size(); ++i) g.data()[i] = 0.7 * standard_normal(rng) + 0.1;
  const auto b = activation_stats(g);
  const double ab = fid(a, b);
  const double ba = fid(b, a);
  c.expect(std::abs(ab - ba) <= 1e-8, "asymmetry " + fmt(std::abs(ab - ba)));
  c.note("diag case " + fmt(diag, 10) + ", |fid(a,b)-fid(b,a)| = " + fmt(std::abs(ab - ba), 3));
  return c.outcome();
}

// 7. Schedules.
Outcome criterion_schedules() {
  Checker c;
  const std::vector<int64_t> milestones{60, 120, 160};
  const double lr0 = 2e-4;
  c.expect(step_lr(0, lr0, milestones, 0.2) == lr0, "epoch 0");
  c.expect(step_lr(59, lr0, milestones, 0.2) == lr0, "epoch 59");
  for (int k = 1; k <= 3; ++k) {
    const int64_t e = milestones[static_cast<size_t>(k - 1)];
    c.expect(step_lr(e, lr0, milestones, 0.2) == lr0 * std::pow(0.2, k),
             "epoch " + std::to_string(e));
  }
  c.expect(std::abs(step_lr(160, lr0, milestones, 0.2) / lr0 - 0.008) <= 1e-15, "0.008 at 160");
  c.expect(step_lr(199, lr0, milestones, 1.0) == lr0, "factor 1 not constant");
  for (const double l : {0.0046, 0.0074, 0.1}) {
    c.expect(cosine_lr(0, 200, l) == l, "cosine start");
    c.expect(cosine_lr(200, 200, l) == 0.0, "cosine end");
  }
  c.note("step and cosine closed forms exact");
  return c.outcome();
}

// 8. Batch replacement frequency.
Outcome criterion_replacement() {
  Checker c;
  const auto ds = make_flat_color_dataset(2, 3, 8, 0.05, 1);
  PixelMixer mixer;
  GridMaskSampler masks(2, 2, 2);
  Augmenter aug{&mixer, &masks, 0.5, ReplacementMode::kWholeBatch};
  std::mt19937_64 rng(21);
  const std::vector<int64_t> idx{0, 3, 4};
  const auto images = images_to_tensor(ds, idx);
  int replaced = 0;
  bool whole = true;
  const int batches = 10000;
  for (int i = 0; i < batches; ++i) {
    const auto out = augment_batch(images, idx, ds, aug, rng);
    whole = whole && (out.replaced == 0 || out.replaced == 3);
    replaced += out.replaced > 0 ? 1 : 0;
  }
  const double frac = static_cast<double>(replaced) / batches;
  c.expect(std::abs(frac - 0.5) <= 0.02, "replaced fraction " + fmt(frac));
  c.expect(whole, "partial batch replacement in whole-batch mode");
  c.note("replaced fraction " + fmt(frac) + " over 10^4 batches");
  return c.outcome();
}

// 9. Overfitting a single image.
Outcome criterion_overfit() {
  Checker c;
  const auto pool = make_structured_dataset(1, 16, 77);
  const std::vector<int64_t> one{0};
  const auto single = pool.select(one);
  int successes = 0;
  std::string ratios;
  for (const uint64_t seed : {0u, 1u, 2u}) {
    GenTrainConfig cfg;
    cfg.epochs = 1000;
    cfg.batch_size = 4;
    cfg.repetition_base = 4;
    cfg.lr0 = 1e-3;
    cfg.weight_decay = 0.0;
    cfg.max_steps = 50;
    std::vector<double> l_rec;
    GenTrainOptions options;
    options.on_step = [&](const GenStepMetrics& m) { l_rec.push_back(m.l_rec); };
    const auto gcfg = generator_config_for(single, cfg, tiny_generator(32));
    train_generator(single, gcfg, tiny_discriminator(), cfg, {seed, seed}, options);
    const double ratio = l_rec.back() / l_rec.front();
    successes += l_rec.size() == 50 && ratio <= 0.1 ? 1 : 0;
    ratios += (ratios.empty() ? "" : "/") + fmt(ratio, 3);
  }
  c.expect(successes == 3, std::to_string(successes) + "/3 seeds reached a 90% drop");
  c.note("final/initial L_rec " + ratios);
  return c.outcome();
}

// 10. Directional end-to-end comparison on the structured synthetic dataset.
struct EndToEndSetup {
  int64_t side = 16;
  int64_t pool_per_class = 40;
  int64_t samples_per_class = 5;
  int64_t test_per_class = 100;
  int64_t gen_steps = 800;
  int64_t gen_base = 16;
  bool gen_pre_upsample = false;
  int64_t gen_batch = 16;
  int64_t cls_epochs = 15;
  int64_t cls_repetition_base = 100;
  int64_t cls_width = 16;
  int64_t seeds = 3;
};

Outcome criterion_end_to_end() {
  Checker c;
  const EndToEndSetup setup;
  const auto pool = make_structured_dataset(setup.pool_per_class, setup.side, 4242);
  const auto test = make_structured_dataset(setup.test_per_class, setup.side, 777);

  std::vector<double> baseline, cm_grid, cm_seg, gridmix;
  for (uint64_t seed = 0; seed < static_cast<uint64_t>(setup.seeds); ++seed) {
    const auto train = subsample_per_class(pool, setup.samples_per_class, seed).dataset;
    auto t0 = std::chrono::steady_clock::now();
    auto lap = [&] {
      const auto now = std::chrono::steady_clock::now();
      const double s = std::chrono::duration<double>(now - t0).count();
      t0 = now;
      return fmt(s, 3) + "s";
    };

    GenTrainConfig gen_cfg;
    gen_cfg.batch_size = setup.gen_batch;
    gen_cfg.pre_upsample = setup.gen_pre_upsample;
    gen_cfg.lr0 = 1e-3;
    gen_cfg.weight_decay = 0.0;
    gen_cfg.epochs = 1000;
    gen_cfg.max_steps = setup.gen_steps;
    gen_cfg.milestones = {};
    gen_cfg.repetition_base = 50;
    gen_cfg.masks.felzenszwalb.scale = 30.0;
    gen_cfg.masks.felzenszwalb.min_size = 12;
    const auto gcfg = generator_config_for(train, gen_cfg, tiny_generator(32, setup.gen_base));
    const int64_t feat = gcfg.feature_height();
    auto train_gen = [&](MaskKind kind) {
      auto cfg = gen_cfg;
      cfg.masks.kind = kind;
      return train_generator(train, gcfg, tiny_discriminator(16), cfg, {seed, seed}).bundle;
    };

    ClassifierConfig ccfg;
    ccfg.arch = ClassifierArch::kTinyResNet;
    ccfg.num_classes = 3;
    ccfg.tiny_width = setup.cls_width;
    ClsTrainConfig tcfg;
    tcfg.epochs = setup.cls_epochs;
    tcfg.repetition_base = setup.cls_repetition_base;
    tcfg.eval_every = setup.cls_epochs;

    int64_t replaced = 0;
    auto run_cls = [&](ChimeraMixer* mixer, const MaskSampler* masks) {
      ClsTrainOptions opts;
      opts.test_set = &test;
      opts.mixer = mixer;
      opts.masks = masks;
      opts.on_epoch = [&](const ClsEpochMetrics& m) { replaced += m.replaced_batches; };
      return *train_classifier(train, ccfg, tcfg, {seed + 100, seed + 100}, opts).final_accuracy;
    };

    MaskConfig grid_cfg = gen_cfg.masks;
    MaskConfig seg_cfg = gen_cfg.masks;
    seg_cfg.kind = MaskKind::kSegmentation;
    std::string times;
    baseline.push_back(run_cls(nullptr, nullptr));
    times += " cls " + lap();
    {
      auto bundle = train_gen(MaskKind::kGrid);
      times += " gen " + lap();
      const auto grid_masks = make_mask_sampler(grid_cfg, train, feat, feat);
      GeneratorMixer mixer(bundle.generator);
      cm_grid.push_back(run_cls(&mixer, grid_masks.get()));
      times += " cls " + lap();
    }
    {
      auto bundle = train_gen(MaskKind::kSegmentation);
      times += " gen " + lap();
      const auto seg_masks = make_mask_sampler(seg_cfg, train, feat, feat);
      GeneratorMixer mixer(bundle.generator);
      cm_seg.push_back(run_cls(&mixer, seg_masks.get()));
      times += " cls " + lap();
    }
    {
      const auto grid_masks = make_mask_sampler(grid_cfg, train, feat, feat);
      PixelMixer mixer;
      gridmix.push_back(run_cls(&mixer, grid_masks.get()));
      times += " cls " + lap();
    }
    std::cerr << "  seed " << seed << ": baseline " << baseline.back() << " cm+grid "
              << cm_grid.back() << " cm+seg " << cm_seg.back() << " gridmix " << gridmix.back()
              << " | replaced " << replaced << times << std::endl;
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (const double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  int seg_wins = 0;
  for (size_t i = 0; i < cm_seg.size(); ++i) seg_wins += cm_seg[i] >= gridmix[i] ? 1 : 0;
  c.expect(mean(cm_grid) >= mean(baseline),
           "ChimeraMix+Grid mean " + fmt(mean(cm_grid)) + " < baseline " + fmt(mean(baseline)));
  c.expect(seg_wins >= 2, "ChimeraMix+Seg >= GridMix in only " + std::to_string(seg_wins) + "/3 seeds");
  c.note("means: baseline " + fmt(mean(baseline)) + ", cm+grid " + fmt(mean(cm_grid)) +
         ", cm+seg " + fmt(mean(cm_seg)) + ", gridmix " + fmt(mean(gridmix)) + "; seg>=gridmix " +
         std::to_string(seg_wins) + "/3");
  return c.outcome();
}

// 11. Determinism of full tiny-preset runs.
Outcome criterion_determinism() {
  Checker c;
  std::vector<std::string> gen_csv, cls_csv;
  for (int run = 0; run < 2; ++run) {
    const auto dir = scratch_dir("determinism_" + std::to_string(run));
    auto cfg = preset_config("tiny-ci");
    cfg.output_dir = (dir / "out").string();
    cfg.seeds = {3, 4, 5};
    std::ostringstream log;
    run_train_generator(cfg, log);
    run_train_classifier(cfg, AugmentSource::kGenerator, fs::path(cfg.output_dir) / "generator.ckpt", log);
    auto slurp = [](const fs::path& p) {
      std::ifstream in(p, std::ios::binary);
      return std::string(std::istreambuf_iterator<char>(in), {});
    };
    gen_csv.push_back(slurp(fs::path(cfg.output_dir) / "generator_metrics.csv"));
    cls_csv.push_back(slurp(fs::path(cfg.output_dir) / "classifier_metrics.csv"));
  }
  c.expect(!gen_csv[0].empty() && gen_csv[0] == gen_csv[1], "generator metrics differ");
  c.expect(!cls_csv[0].empty() && cls_csv[0] == cls_csv[1], "classifier metrics differ");
  c.note("generator and classifier CSVs byte-identical");
  return c.outcome();
}

}  // namespace

int main(int argc, char** argv) {
  torch::set_num_threads(1);
  struct Criterion {
    std::string name;
    std::function<Outcome()> run;
    double budget_seconds;
  };
  const std::vector<Criterion> criteria{
      {"mixing identities", criterion_mixing, 1},
      {"loss oracles and gradients", criterion_losses, 30},
      {"laplacian pyramid", criterion_pyramid, 1},
      {"segmentation", criterion_segmentation, 60},
      {"mask statistics", criterion_masks, 30},
      {"fid", criterion_fid, 10},
      {"schedules", criterion_schedules, 1},
      {"batch replacement", criterion_replacement, 10},
      {"overfit one sample", criterion_overfit, 120},
      {"directional end-to-end", criterion_end_to_end, 900},
      {"determinism", criterion_determinism, 300},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));

  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(number)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criteria[i].run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (outcome.pass && seconds > criteria[i].budget_seconds) {
      outcome = {false, "took " + fmt(seconds, 3) + "s, budget " + fmt(criteria[i].budget_seconds) +
                            "s | " + outcome.detail};
    }
    std::printf("criterion %2d %-28s %s (%.1fs) %s\n", number, criteria[i].name.c_str(),
                outcome.pass ? "PASS" : "FAIL", seconds, outcome.detail.c_str());
    std::fflush(stdout);
    failures += outcome.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
