#include <doctest.h>
#include <torch/torch.h>

#include <fstream>

#include "chimeramix/checkpoint.hpp"
#include "chimeramix/classifier.hpp"
#include "chimeramix/classifier_trainer.hpp"
#include "chimeramix/errors.hpp"
#include "chimeramix/generator_trainer.hpp"
#include "chimeramix/losses.hpp"
#include "chimeramix/masks.hpp"
#include "chimeramix/segmentation_cache.hpp"
#include "chimeramix/synthetic.hpp"
#include "chimeramix/tensor_ops.hpp"
#include "test_util.hpp"

using namespace chimeramix;
namespace fs = std::filesystem;

namespace {

GeneratorConfig small_generator(int64_t side) {
  GeneratorConfig g;
  g.n_res_blocks = 2;
  g.mix_after_block = 1;
  g.base_channels = 4;
  g.input_height = side;
  g.input_width = side;
  return g;
}

DiscriminatorConfig small_discriminator() {
  DiscriminatorConfig d;
  d.block_channels = {4, 8};
  return d;
}

std::vector<unsigned char> file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int64_t conv_params(int64_t in, int64_t out, int64_t k) { return in * out * k * k + out; }

std::vector<torch::Tensor> snapshot(const torch::nn::Module& m) {
  std::vector<torch::Tensor> out;
  for (const auto& p : m.parameters()) out.push_back(p.detach().clone());
  return out;
}

bool unchanged(const torch::nn::Module& m, const std::vector<torch::Tensor>& before) {
  const auto now = m.parameters();
  for (size_t i = 0; i < now.size(); ++i) {
    if (!torch::equal(now[i], before[i])) return false;
  }
  return true;
}

}  // namespace

// ---- masks -------------------------------------------------------------------------

TEST_CASE("grid mask sizes") {
  std::mt19937_64 rng(4);
  const auto g1 = sample_grid_mask(1, 16, 16, rng);
  CHECK((g1.all_one() || g1.all_zero()));
  CHECK(g1.source == MaskSource::kGrid);
  CHECK_THROWS_AS(sample_grid_mask(17, 16, 16, rng), InvalidArgument);
  CHECK(sample_grid_mask(4, 16, 16, rng, 1.0).all_one());
  CHECK(sample_grid_mask(4, 16, 16, rng, 0.0).all_zero());
}

TEST_CASE("constant masks and complement") {
  const auto one = constant_mask(1, 4, 4);
  const auto zero = constant_mask(0, 4, 4);
  CHECK(one.all_one());
  CHECK(zero.all_zero());
  for (size_t i = 0; i < one.values.size(); ++i) CHECK(one.values[i] + zero.values[i] == 1);
  CHECK(zero.complement().values == one.values);
  CHECK_THROWS_AS(constant_mask(2, 4, 4), InvalidArgument);
}

TEST_CASE("segmentation masks") {
  SegmentationMap single{8, 8, std::vector<int32_t>(64, 0), 1};
  std::mt19937_64 rng(0);
  CHECK(sample_seg_mask(single, 4, 4, rng).all_one());

  // Region of one pixel in a 2x2 cell: a quarter of the area, below the threshold.
  SegmentationMap speck{8, 8, std::vector<int32_t>(64, 0), 2};
  speck.labels[0] = 1;
  std::vector<uint8_t> selected{0, 1};
  const auto m = downsample_region_mask(speck, selected, 4, 4);
  CHECK(m.all_zero());
  CHECK(m.source == MaskSource::kSegmentation);

  // Exactly half of a cell goes to 1.
  SegmentationMap half{2, 2, {1, 1, 0, 0}, 2};
  CHECK(downsample_region_mask(half, selected, 1, 1).all_one());
}

TEST_CASE("nearest mask upsampling") {
  MixMask m{2, 2, {1, 0, 0, 1}, MaskSource::kGrid};
  const auto up = upsample_mask_nearest(m, 4, 4);
  const std::vector<float> expected{1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 1, 1, 0, 0, 1, 1};
  CHECK(up == expected);
}

TEST_CASE("segmentation cache round trip and parameter check") {
  test::TempDir dir;
  const auto ds = make_structured_dataset(2, 16, 3);
  FelzParams params;
  params.scale = 30.0;
  params.min_size = 8;
  const auto first = segment_dataset(ds, params, dir / "seg.cache");
  const auto bytes = file_bytes(dir / "seg.cache");
  const auto second = segment_dataset(ds, params, dir / "seg.cache");
  CHECK(file_bytes(dir / "seg.cache") == bytes);
  REQUIRE(first.size() == second.size());
  for (size_t i = 0; i < first.size(); ++i) CHECK(first[i].labels == second[i].labels);

  FelzParams other = params;
  other.scale = 31.0;
  CHECK_THROWS_AS(SegmentationCache::load(dir / "seg.cache", other), FormatError);
  std::ofstream(dir / "junk.cache") << "not a cache";
  CHECK_THROWS_AS(SegmentationCache::load(dir / "junk.cache", params), FormatError);
}

TEST_CASE("felzenszwalb parameter validation") {
  FelzParams p;
  p.scale = 0.0;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  p = {};
  p.min_size = 0;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  p = {};
  p.sigma = -1.0;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
}

// ---- models ------------------------------------------------------------------------

TEST_CASE("generator shapes") {
  GeneratorConfig cfg;
  Generator g(cfg);
  torch::NoGradGuard no_grad;
  const auto x = torch::rand({2, 3, 64, 64}) * 2 - 1;
  const auto f = g->encode(x);
  CHECK(f.sizes() == torch::IntArrayRef({2, 256, 16, 16}));
  CHECK(torch::equal(f, g->encode(x)));
  const auto y = g->decode(f);
  CHECK(y.sizes() == x.sizes());
  CHECK(y.abs().max().item<float>() <= 1.0f);

  CHECK_THROWS(g->encode(torch::zeros({1, 3, 62, 64})));
}

TEST_CASE("generator parameter count matches the layer arithmetic") {
  GeneratorConfig cfg;
  Generator g(cfg);
  const int64_t b = cfg.base_channels;
  const int64_t expected = conv_params(3, b, 7) + conv_params(b, 2 * b, 3) +
                           conv_params(2 * b, 4 * b, 3) +
                           cfg.n_res_blocks * 2 * conv_params(4 * b, 4 * b, 3) +
                           conv_params(4 * b, 2 * b, 3) + conv_params(2 * b, b, 3) +
                           conv_params(b, 3, 7);
  CHECK(parameter_count(*g) == expected);
  CHECK(parameter_count(*g) == 5'477'379);
}

TEST_CASE("generator mixing identities") {
  torch::manual_seed(2);
  Generator g(small_generator(16));
  torch::NoGradGuard no_grad;
  const auto x1 = torch::rand({2, 3, 16, 16}) * 2 - 1;
  const auto x2 = torch::rand({2, 3, 16, 16}) * 2 - 1;
  const auto m = torch::randint(0, 2, {2, 1, 4, 4}).to(torch::kFloat32);
  CHECK(torch::allclose(g->generate(x1, x1, m), g->decode(g->encode(x1)), 0.0, 1e-6));
  CHECK(torch::equal(g->generate(x1, x2, m), g->generate(x2, x1, 1.0 - m)));
  const auto checker = torch::tensor({1.0f, 0.0f, 0.0f, 1.0f}).reshape({1, 1, 2, 2});
  const auto e1 = torch::full({1, 2, 2, 2}, 3.0f);
  const auto e2 = torch::full({1, 2, 2, 2}, -5.0f);
  const auto mixed = mix_features(e1, e2, checker);
  CHECK(mixed[0][1][0][0].item<float>() == 3.0f);
  CHECK(mixed[0][0][0][1].item<float>() == -5.0f);
  CHECK(mixed[0][1][1][0].item<float>() == -5.0f);
  CHECK(mixed[0][0][1][1].item<float>() == 3.0f);
  CHECK_THROWS(mix_features(e1, e2, torch::ones({1, 1, 3, 3})));
}

TEST_CASE("discriminator output size and range") {
  torch::manual_seed(0);
  DiscriminatorConfig cfg;
  cfg.block_channels = {4, 8, 8, 8};
  Discriminator d(cfg);
  torch::NoGradGuard no_grad;
  const auto x = torch::rand({3, 3, 20, 20}) * 2 - 1;
  const auto s = d->forward(x);
  CHECK(s.sizes() == torch::IntArrayRef({3, 1, 8, 8}));
  CHECK(cfg.output_size(20) == 20 - 4 * 3);
  CHECK(s.min().item<float>() > 0.0f);
  CHECK(s.max().item<float>() < 1.0f);
  const auto perm = torch::tensor({2, 0, 1});
  CHECK(torch::allclose(d->forward(x.index_select(0, perm)), s.index_select(0, perm), 0.0, 1e-6));
  CHECK_THROWS(d->forward(torch::zeros({1, 3, 12, 12})));
}

TEST_CASE("generator checkpoint round trip is byte-identical") {
  test::TempDir dir;
  torch::manual_seed(1);
  auto bundle = GeneratorBundle::create(small_generator(16), small_discriminator());
  bundle.save(dir / "a.ckpt");
  const auto loaded = GeneratorBundle::load(dir / "a.ckpt");
  loaded.save(dir / "b.ckpt");
  CHECK(file_bytes(dir / "a.ckpt") == file_bytes(dir / "b.ckpt"));

  auto other = small_generator(16);
  other.base_channels = 8;
  test::check_throws_with<ConfigError>(
      [&] { GeneratorBundle::load(dir / "a.ckpt", other, small_discriminator()); },
      "base_channels");
}

TEST_CASE("classifier shapes, checkpoint and parameter counts") {
  test::TempDir dir;
  ClassifierConfig cfg;
  cfg.arch = ClassifierArch::kTinyResNet;
  cfg.num_classes = 3;
  cfg.tiny_width = 4;
  Classifier c(cfg);
  CHECK(c->forward(torch::zeros({2, 3, 16, 16})).sizes() == torch::IntArrayRef({2, 3}));
  save_classifier(c, dir / "a.ckpt");
  save_classifier(load_classifier(dir / "a.ckpt"), dir / "b.ckpt");
  CHECK(file_bytes(dir / "a.ckpt") == file_bytes(dir / "b.ckpt"));

  ClassifierConfig r50;
  r50.arch = ClassifierArch::kResNet50;
  r50.num_classes = 10;
  CHECK(parameter_count(*Classifier(r50)) == 23'528'522);

  ClassifierConfig wrn;
  wrn.num_classes = 10;
  Classifier w(wrn);
  CHECK(w->forward(torch::zeros({1, 3, 32, 32})).sizes() == torch::IntArrayRef({1, 10}));
}

// ---- losses ------------------------------------------------------------------------

TEST_CASE("reconstruction loss examples") {
  const auto x = torch::rand({1, 3, 4, 4}, torch::kFloat64);
  CHECK(reconstruction_loss(x, x, x, x).item<double>() == 0.0);
  auto x_hat = x.clone();
  x_hat[0][1][2][3] += 0.3;
  CHECK(reconstruction_loss(x_hat, x, x, x).item<double>() == doctest::Approx(0.09 / 48.0).epsilon(1e-12));
  CHECK(reconstruction_loss(x, x, x_hat, x).item<double>() ==
        reconstruction_loss(x_hat, x, x, x).item<double>());
}

TEST_CASE("LSGAN and composite loss examples") {
  const auto ones = torch::ones({2, 1, 3, 3});
  const auto zeros = torch::zeros({2, 1, 3, 3});
  const auto half = torch::full({2, 1, 3, 3}, 0.5);
  CHECK(lsgan_d_loss(ones, zeros).item<double>() == 0.0);
  CHECK(lsgan_d_loss(half, half).item<double>() == doctest::Approx(0.5));
  CHECK(lsgan_g_loss(ones).item<double>() == 0.0);
  CHECK(lsgan_g_loss(zeros).item<double>() == 1.0);
  CHECK(lsgan_g_loss(half).item<double>() == doctest::Approx(0.25));

  GeneratorLossParts parts{torch::tensor(0.001, torch::kFloat64), torch::tensor(0.5, torch::kFloat64),
                           torch::tensor(0.25, torch::kFloat64)};
  CHECK(generator_total_loss(parts, {}).item<double>() == doctest::Approx(1.75).epsilon(1e-12));
  GeneratorLossParts zero{torch::zeros({}), torch::zeros({}), torch::zeros({})};
  CHECK(generator_total_loss(zero, {}).item<double>() == 0.0);

  const auto rec = torch::tensor(0.2, torch::dtype(torch::kFloat64).requires_grad(true));
  LossWeights w;
  w.alpha_rec = 0.0;
  generator_total_loss({rec, torch::tensor(0.1, torch::kFloat64), torch::tensor(0.1, torch::kFloat64)}, w)
      .backward();
  CHECK(rec.grad().item<double>() == 0.0);
}

TEST_CASE("perceptual loss behaviour") {
  torch::manual_seed(3);
  const auto x = torch::rand({2, 3, 16, 16}, torch::kFloat64);
  const auto y = torch::rand({2, 3, 16, 16}, torch::kFloat64);
  CHECK(perceptual_loss(x, x).item<double>() == 0.0);
  CHECK(perceptual_loss(x, y).item<double>() == doctest::Approx(perceptual_loss(y, x).item<double>()).epsilon(1e-12));

  // A constant offset has no band-pass content, so only the low-pass term sees it.
  PerceptualOptions no_low;
  no_low.include_lowpass = false;
  CHECK(perceptual_loss(x + 0.1, x, no_low).item<double>() < 1e-12);
  CHECK(perceptual_loss(x + 0.1, x).item<double>() == doctest::Approx(std::pow(4.0, 3) * 0.1).epsilon(1e-9));

  double previous = perceptual_loss(y, x).item<double>();
  for (int i = 1; i <= 10; ++i) {
    const double t = i / 10.0;
    const double now = perceptual_loss(y + t * (x - y), x).item<double>();
    CHECK(now <= previous + 1e-12);
    previous = now;
  }
}

TEST_CASE("pyramid on a 4x4 ramp against a hand-computed first band") {
  auto ramp = torch::arange(16, torch::kFloat64).reshape({1, 1, 4, 4});
  const auto p = build_laplacian_pyramid(ramp, 2);
  REQUIRE(p.level_count() == 2);
  CHECK(p.bands[0].sizes() == torch::IntArrayRef({1, 1, 4, 4}));
  CHECK(p.bands[1].sizes() == torch::IntArrayRef({1, 1, 2, 2}));
  CHECK(p.lowpass.sizes() == torch::IntArrayRef({1, 1, 1, 1}));
  // Blur of 0 1 2 3 with replicate borders keeps 6/16 at index 0 and 31/16 at index 2; the
  // ramp is col + 4 * row, so the blurred image is b(col) + 4 * b(row).
  const double b0 = 6.0 / 16, b2 = 31.0 / 16;
  const double g00 = b0 + 4 * b0, g02 = b2 + 4 * b0, g20 = b0 + 4 * b2, g22 = b2 + 4 * b2;
  const auto down = pyramid_downsample(ramp);
  CHECK(down[0][0][0][0].item<double>() == doctest::Approx(g00).epsilon(1e-12));
  CHECK(down[0][0][0][1].item<double>() == doctest::Approx(g02).epsilon(1e-12));
  CHECK(down[0][0][1][0].item<double>() == doctest::Approx(g20).epsilon(1e-12));
  CHECK(down[0][0][1][1].item<double>() == doctest::Approx(g22).epsilon(1e-12));
  // Bilinear 2 -> 4 with half-pixel centers: output 0 sits on source 0, output 1 at 0.25.
  const double up01 = 0.75 * g00 + 0.25 * g02;
  CHECK(p.bands[0][0][0][0][0].item<double>() == doctest::Approx(0.0 - g00).epsilon(1e-12));
  CHECK(p.bands[0][0][0][0][1].item<double>() == doctest::Approx(1.0 - up01).epsilon(1e-12));
  CHECK(torch::allclose(p.reconstruct(), ramp, 0.0, 1e-12));
  CHECK_THROWS(build_laplacian_pyramid(ramp, 3));
}

// ---- training ----------------------------------------------------------------------

TEST_CASE("iterations per epoch") {
  CHECK(iterations_per_epoch(50, 10, 64) == 8);
  CHECK(iterations_per_epoch(64, 1, 64) == 1);
  CHECK(iterations_per_epoch(65, 1, 64) == 2);
}

TEST_CASE("generator step leaves the discriminator untouched and vice versa") {
  torch::manual_seed(5);
  GenTrainConfig cfg;
  cfg.batch_size = 2;
  GeneratorTrainer trainer(GeneratorBundle::create(small_generator(16), small_discriminator()), cfg);
  GeneratorTrainer::Batch batch{torch::rand({2, 3, 16, 16}) * 2 - 1, torch::rand({2, 3, 16, 16}) * 2 - 1,
                                torch::randint(0, 2, {2, 1, 4, 4}).to(torch::kFloat32)};
  auto& b = trainer.bundle();

  auto d_before = snapshot(*b.discriminator);
  auto g_before = snapshot(*b.generator);
  auto out = trainer.forward(batch);
  trainer.discriminator_step(batch, out);
  CHECK(unchanged(*b.generator, g_before));
  CHECK_FALSE(unchanged(*b.discriminator, d_before));

  d_before = snapshot(*b.discriminator);
  trainer.generator_step(batch, out);
  CHECK(unchanged(*b.discriminator, d_before));
  CHECK_FALSE(unchanged(*b.generator, g_before));
  for (const auto& p : b.discriminator->parameters()) CHECK(p.requires_grad());
}

namespace {

/// Returns the first parent and remembers the second.
class RecordingMixer final : public ChimeraMixer {
 public:
  torch::Tensor mix(const torch::Tensor& x1, const torch::Tensor& x2,
                    std::span<const MixMask>) override {
    seconds.push_back(x2.clone());
    return x1.clone();
  }
  std::string name() const override { return "recording"; }
  std::vector<torch::Tensor> seconds;
};

}  // namespace

TEST_CASE("augment_batch pairs within the anchor's class") {
  const auto ds = make_structured_dataset(4, 8, 6);
  RecordingMixer mixer;
  GridMaskSampler masks(2, 2, 2);
  Augmenter aug{&mixer, &masks, 1.0, ReplacementMode::kWholeBatch};
  std::mt19937_64 rng(8);
  const auto all = dataset_to_tensor(ds);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int64_t> idx;
    for (int i = 0; i < 5; ++i) idx.push_back(uniform_index(rng, ds.size()));
    const auto images = images_to_tensor(ds, idx);
    const auto out = augment_batch(images, idx, ds, aug, rng);
    CHECK(out.replaced == 5);
    const auto& x2 = mixer.seconds.back();
    for (int i = 0; i < 5; ++i) {
      int64_t match = -1;
      for (int64_t j = 0; j < ds.size(); ++j) {
        if (torch::equal(x2[i], all[j])) match = j;
      }
      REQUIRE(match >= 0);
      CHECK(ds.label(match) == ds.label(idx[static_cast<size_t>(i)]));
    }
  }

  Augmenter never{&mixer, &masks, 0.0, ReplacementMode::kWholeBatch};
  const std::vector<int64_t> idx{0, 1};
  const auto images = images_to_tensor(ds, idx);
  const auto out = augment_batch(images, idx, ds, never, rng);
  CHECK(out.replaced == 0);
  CHECK(torch::equal(out.images, images));
}

TEST_CASE("replace_prob = 0 reproduces the baseline classifier run exactly") {
  const auto ds = make_structured_dataset(3, 8, 2);
  ClassifierConfig ccfg;
  ccfg.arch = ClassifierArch::kTinyResNet;
  ccfg.num_classes = 3;
  ccfg.tiny_width = 4;
  ClsTrainConfig cfg;
  cfg.epochs = 2;
  cfg.repetition_base = 6;
  cfg.batch_size = 4;

  const auto base = train_classifier(ds, ccfg, cfg, {1, 2});
  PixelMixer mixer;
  GridMaskSampler masks(2, 2, 2);
  ClsTrainOptions opts;
  opts.mixer = &mixer;
  opts.masks = &masks;
  cfg.replace_prob = 0.0;
  const auto zero = train_classifier(ds, ccfg, cfg, {1, 2}, opts);

  REQUIRE(base.epochs.size() == zero.epochs.size());
  for (size_t e = 0; e < base.epochs.size(); ++e) {
    CHECK(base.epochs[e].loss == zero.epochs[e].loss);
    CHECK(base.epochs[e].train_acc == zero.epochs[e].train_acc);
    CHECK(zero.epochs[e].replaced_batches == 0);
  }
  const auto pa = base.model->parameters();
  const auto pb = zero.model->parameters();
  for (size_t i = 0; i < pa.size(); ++i) CHECK(torch::equal(pa[i], pb[i]));
}
