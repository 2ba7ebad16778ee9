#include "chimeramix/classifier_trainer.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "chimeramix/csv.hpp"
#include "chimeramix/errors.hpp"
#include "chimeramix/schedules.hpp"
#include "chimeramix/tensor_ops.hpp"

namespace chimeramix {

void ClsTrainConfig::validate() const {
  if (epochs < 1) throw InvalidArgument("classifier epochs must be >= 1");
  if (batch_size < 1) throw InvalidArgument("classifier batch size must be >= 1");
  if (!(lr0 > 0.0)) throw InvalidArgument("classifier lr0 must be > 0");
  if (weight_decay < 0.0) throw InvalidArgument("classifier weight decay must be >= 0");
  if (momentum < 0.0 || momentum >= 1.0) throw InvalidArgument("momentum must lie in [0, 1)");
  if (repetition_base < 1) throw InvalidArgument("classifier repetition base must be >= 1");
  if (replace_prob < 0.0 || replace_prob > 1.0) {
    throw InvalidArgument("replace probability must lie in [0, 1]");
  }
  if (crop_padding < 0) throw InvalidArgument("crop padding must be >= 0");
  if (eval_every < 1) throw InvalidArgument("eval_every must be >= 1");
}

ClsTrainConfig ClsTrainConfig::small_image() { return ClsTrainConfig{}; }

ClsTrainConfig ClsTrainConfig::large_image() {
  ClsTrainConfig c;
  c.batch_size = 16;
  c.lr0 = 0.0074;
  c.weight_decay = 0.00041;
  c.repetition_base = 120;
  return c;
}

namespace {

std::mt19937_64 derived_stream(uint64_t seed, uint32_t stream) {
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32), stream};
  return std::mt19937_64(seq);
}

torch::Tensor base_augment(const torch::Tensor& images, const ClsTrainConfig& config,
                           std::mt19937_64& rng) {
  if (!config.flip && config.crop_padding == 0) return images;
  auto out = images.clone();
  const int64_t h = images.size(2);
  const int64_t w = images.size(3);
  const int64_t pad = config.crop_padding;
  const auto padded =
      pad > 0 ? torch::constant_pad_nd(images, {pad, pad, pad, pad}, 0.0) : images;
  for (int64_t i = 0; i < images.size(0); ++i) {
    auto img = images[i];
    if (pad > 0) {
      const int64_t dy = uniform_index(rng, 2 * pad + 1);
      const int64_t dx = uniform_index(rng, 2 * pad + 1);
      img = padded[i].slice(1, dy, dy + h).slice(2, dx, dx + w);
    }
    if (config.flip && uniform_unit(rng) < 0.5) img = img.flip({2});
    out[i].copy_(img);
  }
  return out;
}

}  // namespace

ClsTrainResult train_classifier(const LabeledImageDataset& dataset,
                                const ClassifierConfig& model_config,
                                const ClsTrainConfig& config, const TrainingSeeds& seeds,
                                const ClsTrainOptions& options) {
  config.validate();
  if (model_config.num_classes != dataset.class_count()) {
    throw InvalidArgument("classifier has " + std::to_string(model_config.num_classes) +
                          " classes but the dataset has " +
                          std::to_string(dataset.class_count()));
  }
  if (model_config.channels != dataset.shape().channels) {
    throw InvalidArgument("classifier channel count does not match the dataset");
  }
  if (options.mixer != nullptr && options.masks == nullptr) {
    throw InvalidArgument("chimera augmentation needs a mask sampler");
  }

  torch::manual_seed(seeds.init);
  ClsTrainResult result;
  result.model = Classifier(model_config);
  auto& model = result.model;
  torch::optim::SGD optimizer(model->parameters(), torch::optim::SGDOptions(config.lr0)
                                                       .momentum(config.momentum)
                                                       .weight_decay(config.weight_decay));

  std::mt19937_64 order_rng = derived_stream(seeds.train, 0);
  std::mt19937_64 chimera_rng = derived_stream(seeds.train, 1);
  std::mt19937_64 base_rng = derived_stream(seeds.train, 2);

  Augmenter augmenter{options.mixer, options.masks, config.replace_prob, config.replacement};
  const int64_t spc = std::max<int64_t>(1, dataset.size() / dataset.class_count());
  const int64_t repetitions = repetition_factor(spc, config.repetition_base);
  if (options.output_dir) std::filesystem::create_directories(*options.output_dir);

  int64_t steps = 0;
  bool stop = false;
  for (int64_t epoch = 0; epoch < config.epochs && !stop; ++epoch) {
    const double lr = cosine_lr(epoch, config.epochs, config.lr0);
    for (auto& group : optimizer.param_groups()) group.options().set_lr(lr);
    const auto order = repeated_epoch_order(dataset.size(), repetitions, order_rng);

    ClsEpochMetrics row;
    row.epoch = epoch;
    row.lr = lr;
    int64_t correct = 0;
    int64_t seen = 0;
    model->train();
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(config.batch_size)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(config.batch_size));
      const std::span<const int64_t> anchors(order.data() + start, end - start);
      auto images = images_to_tensor(dataset, anchors);
      if (options.mixer != nullptr) {
        const auto aug = augment_batch(images, anchors, dataset, augmenter, chimera_rng);
        images = aug.images;
        if (aug.replaced > 0) ++row.replaced_batches;
        row.degenerate_masks += aug.degenerate;
      }
      images = base_augment(images, config, base_rng);
      const auto labels = labels_to_tensor(dataset, anchors);

      optimizer.zero_grad();
      const auto logits = model->forward(to_model_range(images));
      const auto loss = torch::nn::functional::cross_entropy(logits, labels);
      const double loss_value = loss.item<double>();
      if (!std::isfinite(loss_value)) {
        throw DivergenceError("classifier loss became non-finite at step " +
                              std::to_string(steps));
      }
      loss.backward();
      optimizer.step();

      row.loss += loss_value;
      correct += logits.argmax(1).eq(labels).sum().item<int64_t>();
      seen += static_cast<int64_t>(anchors.size());
      ++row.iterations;
      ++steps;
      if (config.max_steps > 0 && steps >= config.max_steps) {
        stop = true;
        break;
      }
    }
    row.loss /= static_cast<double>(row.iterations);
    row.train_acc = static_cast<double>(correct) / static_cast<double>(seen);

    const bool last = stop || epoch + 1 == config.epochs;
    if (options.test_set != nullptr && (last || (epoch + 1) % config.eval_every == 0)) {
      row.test_acc = evaluate_accuracy(model, *options.test_set);
      if (!result.best_accuracy || *row.test_acc > *result.best_accuracy) {
        result.best_accuracy = row.test_acc;
        result.best_epoch = epoch;
      }
      if (last) result.final_accuracy = row.test_acc;
    }
    result.epochs.push_back(row);
    if (options.on_epoch) options.on_epoch(row);
  }

  if (options.output_dir) {
    save_classifier(model, *options.output_dir / "classifier.ckpt");
    write_classifier_metrics_csv(result.epochs, *options.output_dir / "classifier_metrics.csv");
  }
  return result;
}

double evaluate_accuracy(const std::function<torch::Tensor(const torch::Tensor&)>& predict,
                         const LabeledImageDataset& test_set, int64_t num_classes,
                         int64_t batch_size) {
  if (test_set.class_count() != num_classes) {
    throw InvalidArgument("class count mismatch: classifier predicts " +
                          std::to_string(num_classes) + " classes, test set has " +
                          std::to_string(test_set.class_count()));
  }
  torch::NoGradGuard no_grad;
  int64_t correct = 0;
  for (int64_t start = 0; start < test_set.size(); start += batch_size) {
    const int64_t end = std::min(test_set.size(), start + batch_size);
    std::vector<int64_t> idx(static_cast<size_t>(end - start));
    std::iota(idx.begin(), idx.end(), start);
    const auto logits = predict(images_to_tensor(test_set, idx));
    if (logits.dim() != 2 || logits.size(1) != num_classes) {
      throw InvalidArgument("predictor returned logits of the wrong shape");
    }
    correct += logits.argmax(1).eq(labels_to_tensor(test_set, idx)).sum().item<int64_t>();
  }
  return static_cast<double>(correct) / static_cast<double>(test_set.size());
}

double evaluate_accuracy(Classifier& model, const LabeledImageDataset& test_set,
                         int64_t batch_size) {
  const bool was_training = model->is_training();
  model->eval();
  const double acc = evaluate_accuracy(
      [&](const torch::Tensor& x) { return model->forward(to_model_range(x)); }, test_set,
      model->config().num_classes, batch_size);
  model->train(was_training);
  return acc;
}

void write_classifier_metrics_csv(const std::vector<ClsEpochMetrics>& rows,
                                  const std::filesystem::path& path) {
  CsvWriter csv(path, {"epoch", "lr", "loss", "train_acc", "acc", "iterations",
                       "replaced_batches", "degenerate_masks"});
  for (const auto& r : rows) {
    csv.write_row({std::to_string(r.epoch), format_number(r.lr), format_number(r.loss),
                   format_number(r.train_acc), r.test_acc ? format_number(*r.test_acc) : "",
                   std::to_string(r.iterations), std::to_string(r.replaced_batches),
                   std::to_string(r.degenerate_masks)});
  }
}

}  // namespace chimeramix
