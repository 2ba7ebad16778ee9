#include "chimeramix/run_config.hpp"

#include <fstream>
#include <functional>
#include <set>

#include "chimeramix/errors.hpp"

namespace chimeramix {

namespace {

Json felz_to_json(const FelzParams& p) {
  return Json{{"scale", p.scale},
              {"min_size", p.min_size},
              {"sigma", p.sigma},
              {"connectivity", static_cast<int64_t>(p.connectivity)}};
}

FelzParams felz_from_json(const JsonReader& r) {
  FelzParams p;
  p.scale = r.get<double>("scale");
  p.min_size = r.get<int64_t>("min_size");
  p.sigma = r.get<double>("sigma");
  const auto conn = r.get<int64_t>("connectivity");
  if (conn != 4 && conn != 8) throw ConfigError(r.join("connectivity") + ": must be 4 or 8");
  p.connectivity = conn == 4 ? Connectivity::kFour : Connectivity::kEight;
  r.reject_unknown();
  return p;
}

Json masks_to_json(const MaskConfig& m) {
  return Json{{"kind", to_string(m.kind)},
              {"grid_size", m.grid_size},
              {"grid_probability", m.grid_probability},
              {"per_region", m.per_region},
              {"felzenszwalb", felz_to_json(m.felzenszwalb)}};
}

MaskConfig masks_from_json(const JsonReader& r) {
  MaskConfig m;
  try {
    m.kind = parse_mask_kind(r.get<std::string>("kind"));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(r.join("kind") + ": " + e.what());
  }
  m.grid_size = r.get<int64_t>("grid_size");
  m.grid_probability = r.get<double>("grid_probability");
  m.per_region = r.get<bool>("per_region");
  m.felzenszwalb = felz_from_json(r.child("felzenszwalb"));
  r.reject_unknown();
  return m;
}

Json losses_to_json(const LossWeights& w, const PerceptualOptions& p) {
  return Json{{"alpha_rec", w.alpha_rec},
              {"alpha_per", w.alpha_per},
              {"alpha_disc", w.alpha_disc},
              {"perceptual_levels", p.level_count},
              {"perceptual_lowpass", p.include_lowpass}};
}

void losses_from_json(const JsonReader& r, LossWeights& w, PerceptualOptions& p) {
  w.alpha_rec = r.get<double>("alpha_rec");
  w.alpha_per = r.get<double>("alpha_per");
  w.alpha_disc = r.get<double>("alpha_disc");
  p.level_count = r.get<int64_t>("perceptual_levels");
  p.include_lowpass = r.get<bool>("perceptual_lowpass");
  r.reject_unknown();
}

Json gen_train_to_json(const GenTrainConfig& c) {
  return Json{{"epochs", c.epochs},
              {"lr0", c.lr0},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"weight_decay", c.weight_decay},
              {"decoupled_weight_decay", c.decoupled_weight_decay},
              {"milestones", c.milestones},
              {"lr_factor", c.lr_factor},
              {"batch_size", c.batch_size},
              {"pre_upsample", c.pre_upsample},
              {"upsample_factor", c.upsample_factor},
              {"repetition_base", c.repetition_base},
              {"checkpoint_every", c.checkpoint_every},
              {"max_steps", c.max_steps}};
}

void gen_train_from_json(const JsonReader& r, GenTrainConfig& c) {
  c.epochs = r.get<int64_t>("epochs");
  c.lr0 = r.get<double>("lr0");
  c.beta1 = r.get<double>("beta1");
  c.beta2 = r.get<double>("beta2");
  c.weight_decay = r.get<double>("weight_decay");
  c.decoupled_weight_decay = r.get<bool>("decoupled_weight_decay");
  c.milestones = r.get<std::vector<int64_t>>("milestones");
  c.lr_factor = r.get<double>("lr_factor");
  c.batch_size = r.get<int64_t>("batch_size");
  c.pre_upsample = r.get<bool>("pre_upsample");
  c.upsample_factor = r.get<int64_t>("upsample_factor");
  c.repetition_base = r.get<int64_t>("repetition_base");
  c.checkpoint_every = r.get<int64_t>("checkpoint_every");
  c.max_steps = r.get<int64_t>("max_steps");
  r.reject_unknown();
}

std::string replacement_name(ReplacementMode m) {
  return m == ReplacementMode::kWholeBatch ? "whole_batch" : "per_sample";
}

Json cls_train_to_json(const ClsTrainConfig& c) {
  return Json{{"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"lr0", c.lr0},
              {"weight_decay", c.weight_decay},
              {"momentum", c.momentum},
              {"repetition_base", c.repetition_base},
              {"replace_prob", c.replace_prob},
              {"replacement", replacement_name(c.replacement)},
              {"flip", c.flip},
              {"crop_padding", c.crop_padding},
              {"eval_every", c.eval_every},
              {"max_steps", c.max_steps}};
}

ClsTrainConfig cls_train_from_json(const JsonReader& r) {
  ClsTrainConfig c;
  c.epochs = r.get<int64_t>("epochs");
  c.batch_size = r.get<int64_t>("batch_size");
  c.lr0 = r.get<double>("lr0");
  c.weight_decay = r.get<double>("weight_decay");
  c.momentum = r.get<double>("momentum");
  c.repetition_base = r.get<int64_t>("repetition_base");
  c.replace_prob = r.get<double>("replace_prob");
  const auto mode = r.get<std::string>("replacement");
  if (mode == "whole_batch") {
    c.replacement = ReplacementMode::kWholeBatch;
  } else if (mode == "per_sample") {
    c.replacement = ReplacementMode::kPerSample;
  } else {
    throw ConfigError(r.join("replacement") + ": expected whole_batch or per_sample");
  }
  c.flip = r.get<bool>("flip");
  c.crop_padding = r.get<int64_t>("crop_padding");
  c.eval_every = r.get<int64_t>("eval_every");
  c.max_steps = r.get<int64_t>("max_steps");
  r.reject_unknown();
  return c;
}

Json dataset_to_json(const DatasetSpec& d) {
  return Json{{"format", d.format},
              {"path", d.path},
              {"test_path", d.test_path},
              {"samples_per_class", d.samples_per_class},
              {"synthetic_kind", d.synthetic_kind},
              {"synthetic_side", d.synthetic_side},
              {"synthetic_per_class", d.synthetic_per_class},
              {"synthetic_test_per_class", d.synthetic_test_per_class},
              {"synthetic_seed", d.synthetic_seed}};
}

DatasetSpec dataset_from_json(const JsonReader& r) {
  DatasetSpec d;
  d.format = r.get<std::string>("format");
  d.path = r.get<std::string>("path");
  d.test_path = r.get<std::string>("test_path");
  d.samples_per_class = r.get<int64_t>("samples_per_class");
  d.synthetic_kind = r.get<std::string>("synthetic_kind");
  d.synthetic_side = r.get<int64_t>("synthetic_side");
  d.synthetic_per_class = r.get<int64_t>("synthetic_per_class");
  d.synthetic_test_per_class = r.get<int64_t>("synthetic_test_per_class");
  d.synthetic_seed = r.get<uint64_t>("synthetic_seed");
  r.reject_unknown();
  return d;
}

Json eval_to_json(const EvalConfig& e) {
  return Json{{"extractor", e.extractor},           {"extractor_path", e.extractor_path},
              {"extractor_side", e.extractor_side}, {"extractor_dim", e.extractor_dim},
              {"extractor_seed", e.extractor_seed}, {"fid_samples", e.fid_samples}};
}

EvalConfig eval_from_json(const JsonReader& r) {
  EvalConfig e;
  e.extractor = r.get<std::string>("extractor");
  e.extractor_path = r.get<std::string>("extractor_path");
  e.extractor_side = r.get<int64_t>("extractor_side");
  e.extractor_dim = r.get<int64_t>("extractor_dim");
  e.extractor_seed = r.get<uint64_t>("extractor_seed");
  e.fid_samples = r.get<int64_t>("fid_samples");
  r.reject_unknown();
  return e;
}

Json generator_section(const GeneratorConfig& g) {
  auto j = g.to_json();
  // the input size follows from the dataset and the pre-upsampling factor
  j.erase("input_height");
  j.erase("input_width");
  j.erase("channels");
  return j;
}

void require(const Json& doc, const std::string& section, const std::string& key) {
  const Json* node = &doc;
  std::string path;
  for (const auto& part : {section, key}) {
    if (part.empty()) continue;
    path = path.empty() ? part : path + "." + part;
    if (!node->is_object() || !node->contains(part)) {
      throw ConfigError(path + ": missing required key");
    }
    node = &node->at(part);
  }
}

void wrap_invalid(const std::string& where, const std::function<void()>& check) {
  try {
    check();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

}  // namespace

std::vector<std::string> preset_names() { return {"cifair-small", "stl-large", "tiny-ci"}; }

RunConfig preset_config(const std::string& name) {
  RunConfig c;
  c.preset = name;
  if (name == "cifair-small") {
    c.dataset.format = "cifar-binary";
    c.dataset.samples_per_class = 5;
    return c;
  }
  if (name == "stl-large") {
    c.dataset.format = "image-folder";
    c.dataset.samples_per_class = 5;
    c.gen_train.batch_size = 8;
    c.gen_train.pre_upsample = false;
    c.gen_train.repetition_base = 120;
    c.classifier.arch = ClassifierArch::kResNet50;
    c.cls_train = ClsTrainConfig::large_image();
    c.eval.extractor_side = 96;
    return c;
  }
  if (name == "tiny-ci") {
    c.dataset.format = "synthetic";
    c.dataset.synthetic_kind = "two-class";
    c.dataset.synthetic_side = 16;
    c.dataset.synthetic_per_class = 5;
    c.dataset.synthetic_test_per_class = 10;
    c.dataset.samples_per_class = 0;
    c.generator.n_res_blocks = 2;
    c.generator.mix_after_block = 1;
    c.generator.base_channels = 8;
    c.discriminator.block_channels = {8, 16};
    c.gen_train.epochs = 4;
    c.gen_train.milestones = {2, 3};
    c.gen_train.batch_size = 8;
    c.gen_train.repetition_base = 10;
    c.gen_train.lr0 = 1e-3;
    c.gen_train.weight_decay = 0.0;
    c.gen_train.masks.grid_size = 4;
    c.gen_train.masks.felzenszwalb.scale = 20.0;
    c.gen_train.masks.felzenszwalb.min_size = 10;
    c.classifier.arch = ClassifierArch::kTinyResNet;
    c.classifier.num_classes = 2;
    c.classifier.tiny_width = 8;
    c.cls_train.epochs = 4;
    c.cls_train.repetition_base = 10;
    c.eval.fid_samples = 32;
    c.eval.extractor_dim = 16;
    c.eval.extractor_side = 16;
    return c;
  }
  throw ConfigError("preset: unknown preset '" + name +
                    "' (expected cifair-small, stl-large or tiny-ci)");
}

Json RunConfig::to_json() const {
  Json doc{{"dataset", dataset_to_json(dataset)},
           {"generator", generator_section(generator)},
           {"discriminator", discriminator.to_json()},
           {"generator_training", gen_train_to_json(gen_train)},
           {"masks", masks_to_json(gen_train.masks)},
           {"losses", losses_to_json(gen_train.weights, gen_train.perceptual)},
           {"classifier", classifier.to_json()},
           {"classifier_training", cls_train_to_json(cls_train)},
           {"eval", eval_to_json(eval)},
           {"output_dir", output_dir},
           {"seeds", Json{{"split", seeds.split}, {"init", seeds.init}, {"train", seeds.train}}}};
  if (!preset.empty()) doc["preset"] = preset;
  return doc;
}

RunConfig RunConfig::from_json(const Json& doc) {
  if (!doc.is_object()) throw ConfigError("<root>: expected an object");
  require(doc, "dataset", "");
  require(doc, "dataset", "format");
  require(doc, "output_dir", "");

  RunConfig base;
  if (doc.contains("preset")) {
    if (!doc.at("preset").is_string()) throw ConfigError("preset: wrong type");
    base = preset_config(doc.at("preset").get<std::string>());
  }
  Json merged = base.to_json();
  merged.merge_patch(doc);

  const JsonReader root(merged, "");
  RunConfig c;
  c.preset = root.get_or<std::string>("preset", "");
  c.dataset = dataset_from_json(root.child("dataset"));
  {
    const auto g = root.child("generator");
    wrap_invalid("generator", [&] { c.generator = GeneratorConfig::from_json(g); });
  }
  {
    const auto d = root.child("discriminator");
    wrap_invalid("discriminator", [&] { c.discriminator = DiscriminatorConfig::from_json(d); });
  }
  gen_train_from_json(root.child("generator_training"), c.gen_train);
  c.gen_train.masks = masks_from_json(root.child("masks"));
  losses_from_json(root.child("losses"), c.gen_train.weights, c.gen_train.perceptual);
  {
    const auto cls = root.child("classifier");
    wrap_invalid("classifier", [&] { c.classifier = ClassifierConfig::from_json(cls); });
  }
  c.cls_train = cls_train_from_json(root.child("classifier_training"));
  c.eval = eval_from_json(root.child("eval"));
  c.output_dir = root.get<std::string>("output_dir");
  const auto seeds = root.child("seeds");
  c.seeds.split = seeds.get<uint64_t>("split");
  c.seeds.init = seeds.get<uint64_t>("init");
  c.seeds.train = seeds.get<uint64_t>("train");
  seeds.reject_unknown();
  root.reject_unknown();
  return c;
}

void RunConfig::validate() const {
  static const std::set<std::string> formats{"cifar-binary", "image-folder", "synthetic"};
  if (!formats.count(dataset.format)) {
    throw ConfigError("dataset.format: expected cifar-binary, image-folder or synthetic, found '" +
                      dataset.format + "'");
  }
  if (dataset.format == "synthetic") {
    static const std::set<std::string> kinds{"structured", "flat-color", "two-class"};
    if (!kinds.count(dataset.synthetic_kind)) {
      throw ConfigError("dataset.synthetic_kind: expected structured, flat-color or two-class");
    }
    if (dataset.synthetic_per_class < 1) {
      throw ConfigError("dataset.synthetic_per_class: must be >= 1");
    }
  } else {
    if (dataset.path.empty()) throw ConfigError("dataset.path: missing required key");
    if (!std::filesystem::exists(dataset.path)) {
      throw ConfigError("dataset.path: '" + dataset.path + "' does not exist");
    }
  }
  if (!dataset.test_path.empty() && !std::filesystem::exists(dataset.test_path)) {
    throw ConfigError("dataset.test_path: '" + dataset.test_path + "' does not exist");
  }
  if (dataset.samples_per_class < 0) {
    throw ConfigError("dataset.samples_per_class: must be >= 0");
  }
  if (output_dir.empty()) throw ConfigError("output_dir: must not be empty");
  wrap_invalid("discriminator", [&] { discriminator.validate(); });
  wrap_invalid("generator_training", [&] { gen_train.validate(); });
  wrap_invalid("masks.felzenszwalb", [&] { gen_train.masks.felzenszwalb.validate(); });
  if (gen_train.masks.grid_size < 1) throw ConfigError("masks.grid_size: must be >= 1");
  if (gen_train.masks.grid_probability < 0.0 || gen_train.masks.grid_probability > 1.0) {
    throw ConfigError("masks.grid_probability: must lie in [0, 1]");
  }
  wrap_invalid("classifier", [&] { classifier.validate(); });
  wrap_invalid("classifier_training", [&] { cls_train.validate(); });
  if (eval.extractor != "random-projection" && eval.extractor != "torchscript") {
    throw ConfigError("eval.extractor: expected random-projection or torchscript");
  }
  if (eval.extractor == "torchscript" && !std::filesystem::exists(eval.extractor_path)) {
    throw ConfigError("eval.extractor_path: '" + eval.extractor_path + "' does not exist");
  }
  if (eval.fid_samples < 2) throw ConfigError("eval.fid_samples: must be >= 2");
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
  return from_json(doc);
}

void RunConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << to_json().dump(2) << '\n';
}

}  // namespace chimeramix
