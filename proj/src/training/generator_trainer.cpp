#include "chimeramix/generator_trainer.hpp"

#include <cmath>

#include "chimeramix/csv.hpp"
#include "chimeramix/errors.hpp"
#include "chimeramix/schedules.hpp"
#include "chimeramix/tensor_ops.hpp"

namespace chimeramix {

void GenTrainConfig::validate() const {
  if (epochs < 1) throw InvalidArgument("generator epochs must be >= 1");
  if (!(lr0 > 0.0)) throw InvalidArgument("generator lr0 must be > 0");
  if (batch_size < 1) throw InvalidArgument("generator batch size must be >= 1");
  if (upsample_factor < 1) throw InvalidArgument("generator upsample factor must be >= 1");
  if (repetition_base < 1) throw InvalidArgument("generator repetition base must be >= 1");
  if (weight_decay < 0.0) throw InvalidArgument("generator weight decay must be >= 0");
  weights.validate();
}

namespace {

std::unique_ptr<torch::optim::Optimizer> make_adam(std::vector<torch::Tensor> params,
                                                   const GenTrainConfig& c) {
  const auto betas = std::make_tuple(c.beta1, c.beta2);
  if (c.decoupled_weight_decay) {
    return std::make_unique<torch::optim::AdamW>(
        std::move(params), torch::optim::AdamWOptions(c.lr0).betas(betas).weight_decay(
                               c.weight_decay));
  }
  return std::make_unique<torch::optim::Adam>(
      std::move(params),
      torch::optim::AdamOptions(c.lr0).betas(betas).weight_decay(c.weight_decay));
}

void check_finite(double value, const char* what, int64_t step) {
  if (!std::isfinite(value)) {
    throw DivergenceError(std::string(what) + " became non-finite at step " +
                          std::to_string(step));
  }
}

}  // namespace

GeneratorTrainer::GeneratorTrainer(GeneratorBundle bundle, const GenTrainConfig& config)
    : bundle_(std::move(bundle)), config_(config) {
  g_opt_ = make_adam(bundle_.generator->parameters(), config_);
  d_opt_ = make_adam(bundle_.discriminator->parameters(), config_);
}

void GeneratorTrainer::set_learning_rate(double lr) {
  for (auto* opt : {g_opt_.get(), d_opt_.get()}) {
    for (auto& group : opt->param_groups()) group.options().set_lr(lr);
  }
}

GeneratorTrainer::Outputs GeneratorTrainer::forward(const Batch& batch) {
  auto& g = bundle_.generator;
  const auto features = g->encode(torch::cat({batch.x1, batch.x2}, 0)).chunk(2, 0);
  const auto& e1 = features[0];
  const auto& e2 = features[1];
  const auto ones = torch::ones_like(batch.masks);
  const auto zeros = torch::zeros_like(batch.masks);
  const auto decoded = g->decode(torch::cat({mix_features(e1, e2, batch.masks),
                                             mix_features(e1, e2, ones),
                                             mix_features(e1, e2, zeros)},
                                            0))
                           .chunk(3, 0);
  return {decoded[0], decoded[1], decoded[2]};
}

double GeneratorTrainer::discriminator_step(const Batch& batch, const Outputs& outputs) {
  auto& d = bundle_.discriminator;
  for (auto& p : d->parameters()) p.set_requires_grad(true);
  d_opt_->zero_grad();
  const auto real = d->forward(torch::cat({batch.x1, batch.x2}, 0));
  const auto fake = d->forward(outputs.mixed.detach());
  const auto loss = lsgan_d_loss(real, fake);
  loss.backward();
  d_opt_->step();
  return loss.item<double>();
}

GenStepMetrics GeneratorTrainer::generator_step(const Batch& batch, const Outputs& outputs) {
  auto& d = bundle_.discriminator;
  for (auto& p : d->parameters()) p.set_requires_grad(false);
  g_opt_->zero_grad();
  GeneratorLossParts parts;
  parts.reconstruction =
      reconstruction_loss(outputs.x1_hat, batch.x1, outputs.x2_hat, batch.x2);
  parts.perceptual = perceptual_loss(outputs.x1_hat, batch.x1, config_.perceptual) +
                     perceptual_loss(outputs.x2_hat, batch.x2, config_.perceptual);
  parts.adversarial = lsgan_g_loss(d->forward(outputs.mixed));
  const auto total = generator_total_loss(parts, config_.weights);
  total.backward();
  g_opt_->step();
  for (auto& p : d->parameters()) p.set_requires_grad(true);

  GenStepMetrics m;
  m.l_rec = parts.reconstruction.item<double>();
  m.l_per = parts.perceptual.item<double>();
  m.l_gdisc = parts.adversarial.item<double>();
  return m;
}

GenStepMetrics GeneratorTrainer::step(const Batch& batch) {
  const auto outputs = forward(batch);
  const double l_d = discriminator_step(batch, outputs);
  auto m = generator_step(batch, outputs);
  m.l_ddisc = l_d;
  return m;
}

GeneratorConfig generator_config_for(const LabeledImageDataset& dataset,
                                     const GenTrainConfig& config, GeneratorConfig base) {
  const int64_t factor = config.pre_upsample ? config.upsample_factor : 1;
  base.input_height = dataset.shape().height * factor;
  base.input_width = dataset.shape().width * factor;
  base.channels = dataset.shape().channels;
  return base;
}

int64_t iterations_per_epoch(int64_t dataset_size, int64_t repetitions, int64_t batch) {
  return (dataset_size * repetitions + batch - 1) / batch;
}

GenTrainResult train_generator(const LabeledImageDataset& dataset,
                               const GeneratorConfig& generator_config,
                               const DiscriminatorConfig& discriminator_config,
                               const GenTrainConfig& config, const TrainingSeeds& seeds,
                               const GenTrainOptions& options) {
  config.validate();
  if (dataset.size() < 1) throw InvalidArgument("train_generator: empty dataset");
  const auto expected = generator_config_for(dataset, config, generator_config);
  if (expected.input_height != generator_config.input_height ||
      expected.input_width != generator_config.input_width ||
      expected.channels != generator_config.channels) {
    throw InvalidArgument("generator input " + std::to_string(generator_config.input_height) +
                          "x" + std::to_string(generator_config.input_width) +
                          " does not match the dataset after pre-upsampling (" +
                          std::to_string(expected.input_height) + "x" +
                          std::to_string(expected.input_width) + ")");
  }

  torch::manual_seed(seeds.init);
  GeneratorTrainer trainer(GeneratorBundle::create(generator_config, discriminator_config),
                           config);
  std::mt19937_64 rng(seeds.train);

  std::unique_ptr<MaskSampler> owned_masks;
  const MaskSampler* masks = options.masks;
  if (masks == nullptr) {
    owned_masks = make_mask_sampler(config.masks, dataset, generator_config.feature_height(),
                                    generator_config.feature_width());
    masks = owned_masks.get();
  }

  if (options.output_dir) std::filesystem::create_directories(*options.output_dir);

  const int64_t spc = std::max<int64_t>(1, dataset.size() / dataset.class_count());
  const int64_t repetitions = repetition_factor(spc, config.repetition_base);
  const int64_t h = generator_config.input_height;
  const int64_t w = generator_config.input_width;

  GenTrainResult result{trainer.bundle(), {}, 0};
  bool stop = false;
  for (int64_t epoch = 0; epoch < config.epochs && !stop; ++epoch) {
    const double lr = step_lr(epoch, config.lr0, config.milestones, config.lr_factor);
    trainer.set_learning_rate(lr);
    const auto order = repeated_epoch_order(dataset.size(), repetitions, rng);

    GenEpochMetrics row;
    row.epoch = epoch;
    row.lr = lr;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(config.batch_size)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(config.batch_size));
      const std::span<const int64_t> anchors(order.data() + start, end - start);
      const auto pairs = pair_with_same_class(dataset, anchors, rng);
      std::vector<MixMask> batch_masks;
      batch_masks.reserve(anchors.size());
      for (const int64_t a : pairs.first) {
        batch_masks.push_back(masks->sample(a, rng));
        if (batch_masks.back().all_zero() || batch_masks.back().all_one()) ++row.degenerate_masks;
      }
      GeneratorTrainer::Batch batch{
          to_model_range(resize_bilinear(images_to_tensor(dataset, pairs.first), h, w)),
          to_model_range(resize_bilinear(images_to_tensor(dataset, pairs.second), h, w)),
          masks_to_tensor(batch_masks)};

      auto m = trainer.step(batch);
      m.step = result.steps++;
      m.epoch = epoch;
      check_finite(m.l_rec, "reconstruction loss", m.step);
      check_finite(m.l_per, "perceptual loss", m.step);
      check_finite(m.l_gdisc, "generator adversarial loss", m.step);
      check_finite(m.l_ddisc, "discriminator loss", m.step);
      if (options.on_step) options.on_step(m);

      row.l_rec += m.l_rec;
      row.l_per += m.l_per;
      row.l_gdisc += m.l_gdisc;
      row.l_ddisc += m.l_ddisc;
      ++row.iterations;
      if (config.max_steps > 0 && result.steps >= config.max_steps) {
        stop = true;
        break;
      }
    }
    const auto n = static_cast<double>(row.iterations);
    row.l_rec /= n;
    row.l_per /= n;
    row.l_gdisc /= n;
    row.l_ddisc /= n;
    result.epochs.push_back(row);

    if (options.output_dir && config.checkpoint_every > 0 &&
        (epoch + 1) % config.checkpoint_every == 0) {
      trainer.bundle().save(*options.output_dir /
                            ("generator_epoch_" + std::to_string(epoch + 1) + ".ckpt"));
    }
  }
  result.bundle = trainer.bundle();
  if (options.output_dir) {
    result.bundle.save(*options.output_dir / "generator.ckpt");
    write_generator_metrics_csv(result.epochs, *options.output_dir / "generator_metrics.csv");
  }
  return result;
}

void write_generator_metrics_csv(const std::vector<GenEpochMetrics>& rows,
                                 const std::filesystem::path& path) {
  CsvWriter csv(path, {"epoch", "lr", "l_rec", "l_per", "l_gdisc", "l_ddisc", "iterations",
                       "degenerate_masks"});
  for (const auto& r : rows) {
    csv.write_row({std::to_string(r.epoch), format_number(r.lr), format_number(r.l_rec),
                   format_number(r.l_per), format_number(r.l_gdisc), format_number(r.l_ddisc),
                   std::to_string(r.iterations), std::to_string(r.degenerate_masks)});
  }
}

}  // namespace chimeramix
