#include "eiqa/train.hpp"

#include <chrono>
#include <cmath>

#include "json.hpp"

#include "eiqa/errors.hpp"
#include "eiqa/rng.hpp"

namespace eiqa {

using nn::Matrix;

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::no_preference: return "no_preference";
    case Variant::preference_concat: return "preference_concat";
    case Variant::cls_preference: return "cls_preference";
    case Variant::joint: return "joint";
    case Variant::two_stage_no_freeze: return "two_stage_no_freeze";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : {Variant::full, Variant::no_preference, Variant::preference_concat, Variant::cls_preference,
                    Variant::joint, Variant::two_stage_no_freeze})
    if (to_string(v) == name) return v;
  throw InvalidArgument("unknown variant: " + std::string(name));
}

bool uses_pretraining(Variant v) { return v != Variant::no_preference && v != Variant::joint; }

void validate(const TrainConfig& cfg, int image_size) {
  if (!(cfg.lr > 0.0)) throw InvalidArgument("lr must be positive");
  if (cfg.batch_size < 4) throw InvalidArgument("batch_size must be >= 4");
  if (cfg.epochs_stage1 < 0 || cfg.epochs_stage2 < 0) throw InvalidArgument("epoch counts must be non-negative");
  if (cfg.crop_size < 8 || cfg.crop_size > image_size)
    throw InvalidArgument("crop_size must be in [8, " + std::to_string(image_size) + "]");
  if (!(cfg.temperature > 0.0)) throw InvalidArgument("temperature must be positive");
  if (!(cfg.huber_delta > 0.0)) throw InvalidArgument("huber_delta must be positive");
  if (cfg.plcc_weight < 0.0) throw InvalidArgument("plcc_weight must be non-negative");
  if (cfg.widths.empty()) throw InvalidArgument("widths must not be empty");
}

ModelConfig model_config_for(const TrainConfig& cfg, const Manifest& manifest) {
  ModelConfig mc;
  mc.image_size = manifest.image_size;
  mc.input_size = cfg.crop_size;
  mc.preference_dim = cfg.preference_dim;
  mc.quality_dim = cfg.quality_dim;
  mc.preference_widths = cfg.widths;
  mc.quality_widths = cfg.widths;
  mc.projection_hidden = cfg.widths.back();
  mc.regressor_hidden = 64;
  mc.seed = cfg.seed;
  switch (cfg.variant) {
    case Variant::no_preference: mc.fusion = Fusion::none; break;
    case Variant::preference_concat: mc.fusion = Fusion::concat; break;
    default: mc.fusion = Fusion::debias; break;
  }
  if (cfg.variant == Variant::cls_preference) {
    const auto algos = algo_ids(manifest);
    mc.classifier_classes = algos.back() + 1;
  }
  return mc;
}

Image augment(const Image& image, const TrainConfig& cfg, Rng& rng) {
  const int top = uniform_int(rng, 0, image.height() - cfg.crop_size);
  const int left = uniform_int(rng, 0, image.width() - cfg.crop_size);
  Image out = crop(image, top, left, cfg.crop_size);
  if (cfg.augment_rotation) out = rotate90(out, uniform_int(rng, 0, 3));
  if (cfg.augment_flip && uniform_int(rng, 0, 1) == 1) out = flip_horizontal(out);
  return out;
}

namespace {

constexpr std::uint64_t kStage1Stream = 1, kStage2Stream = 2, kJointStream = 3;

class Adam {
 public:
  Adam(const ModelState& state, const TrainConfig& cfg) : cfg_(cfg) {
    for_each_parameter(state, [&](const std::string&, Component, std::span<const double> p) {
      first_.emplace_back(p.size(), 0.0);
      second_.emplace_back(p.size(), 0.0);
    });
  }

  void step(ModelState& state, const ModelState& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.adam_beta1, t_), c2 = 1.0 - std::pow(cfg_.adam_beta2, t_);
    std::vector<std::span<const double>> grads;
    for_each_parameter(grad, [&](const std::string&, Component, std::span<const double> g) { grads.push_back(g); });
    std::size_t slot = 0;
    for_each_parameter(state, [&](const std::string&, Component c, std::span<double> p) {
      const std::size_t i = slot++;
      if (state.is_frozen(c)) return;
      auto& m = first_[i];
      auto& v = second_[i];
      const auto g = grads[i];
      for (std::size_t k = 0; k < p.size(); ++k) {
        m[k] = cfg_.adam_beta1 * m[k] + (1.0 - cfg_.adam_beta1) * g[k];
        v[k] = cfg_.adam_beta2 * v[k] + (1.0 - cfg_.adam_beta2) * g[k] * g[k];
        p[k] -= cfg_.lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg_.adam_epsilon);
      }
    });
  }

 private:
  const TrainConfig& cfg_;
  std::vector<std::vector<double>> first_, second_;
  int t_ = 0;
};

struct BatchInputs {
  Matrix pixels;
  std::vector<int> labels;
  std::vector<double> targets;
};

BatchInputs gather(const Dataset& data, const Batch& batch, const ModelState& state, const TrainConfig& cfg,
                   std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Image> views;
  views.reserve(batch.size());
  BatchInputs in;
  for (std::size_t idx : batch.indices) {
    views.push_back(augment(data.image(idx), cfg, rng));
    const auto& r = data.manifest().records[idx];
    in.labels.push_back(r.algo_id);
    in.targets.push_back(normalize_mos(r.mos, state));
  }
  in.pixels = pack_images(views, cfg.crop_size);
  return in;
}

SamplerConfig sampler_for(const TrainConfig& cfg, SamplingStrategy strategy, std::uint64_t stream) {
  return SamplerConfig{cfg.batch_size, cfg.scenes_per_batch, cfg.algos_per_scene, derive_seed(cfg.seed, stream),
                       strategy};
}

void check_finite(double loss, int epoch, std::string_view what) {
  if (!std::isfinite(loss)) throw NumericalError(epoch, std::string(what) + " loss is not finite at epoch " + std::to_string(epoch));
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void set_mos_range(ModelState& state, const Dataset& data, const SplitPlan& split) {
  if (split.train_indices.empty()) throw InvalidArgument("empty training split");
  double lo = 100.0, hi = 0.0;
  for (std::size_t idx : split.train_indices) {
    lo = std::min(lo, data.manifest().records.at(idx).mos);
    hi = std::max(hi, data.manifest().records.at(idx).mos);
  }
  state.mos_min = lo;
  state.mos_max = hi > lo ? hi : lo + 1.0;
}

void tag_provenance(ModelState& state, const TrainConfig& cfg, const SplitPlan& split) {
  state.tags["variant"] = std::string(to_string(cfg.variant));
  state.tags["protocol"] = std::string(to_string(split.protocol));
  state.tags["split_seed"] = std::to_string(split.seed);
  state.tags["train_seed"] = std::to_string(cfg.seed);
  if (split.fold_id >= 0) state.tags["fold"] = std::to_string(split.fold_id);
}

}  // namespace

std::string to_jsonl(const TrainLog& log, bool with_timing) {
  std::string out;
  for (const auto& e : log.epochs) {
    nlohmann::json j{{"stage", e.stage},   {"epoch", e.epoch}, {"loss", e.loss},       {"metric", e.metric},
                     {"huber", e.huber},   {"plcc", e.plcc},   {"batches", e.batches}, {"seconds", with_timing ? e.seconds : 0.0}};
    out += j.dump() + '\n';
  }
  nlohmann::json summary{{"summary", true}, {"variant", log.variant}, {"seed", log.seed},
                         {"wall_seconds", with_timing ? log.wall_seconds : 0.0}};
  if (log.final_report)
    summary["report"] = {{"srcc", log.final_report->srcc}, {"plcc", log.final_report->plcc},
                         {"krcc", log.final_report->krcc}, {"n", log.final_report->n}};
  out += summary.dump() + '\n';
  return out;
}

TrainResult pretrain_preference(const Dataset& data, const SplitPlan& split, const TrainConfig& cfg) {
  const Manifest& m = data.manifest();
  validate(cfg, m.image_size);
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult result{init_model(model_config_for(cfg, m)), {}};
  result.log.seed = cfg.seed;
  result.log.variant = std::string(to_string(cfg.variant));
  ModelState& state = result.state;
  tag_provenance(state, cfg, split);
  if (!uses_pretraining(cfg.variant)) return result;

  const SamplerConfig sampler = sampler_for(cfg, cfg.stage1_sampler, kStage1Stream);
  try {
    check_sampler_feasible(m, split.train_indices, sampler);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("stage-1 sampler infeasible: ") + e.what());
  }
  for (Component c : kComponents) state.set_frozen(c, c != Component::preference);
  const bool classification = cfg.variant == Variant::cls_preference;

  Adam adam(state, cfg);
  for (int epoch = 0; epoch < cfg.epochs_stage1; ++epoch) {
    const auto te = std::chrono::steady_clock::now();
    EpochRecord rec{1, epoch + 1};
    const auto batches = epoch_batches(m, split.train_indices, sampler, static_cast<std::uint64_t>(epoch));
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const BatchInputs in = gather(data, batches[b], state, cfg,
                                    derive_seed(derive_seed(cfg.seed, kStage1Stream), (static_cast<std::uint64_t>(epoch) << 20) | b));
      PreferenceTape tape;
      const PreferenceOutput out = preference_forward_batch(state, in.pixels, static_cast<int>(batches[b].size()), &tape);
      ModelState grad = zeros_like(state);
      if (classification) {
        const LossResult ce = cross_entropy_loss(out.logits, in.labels);
        check_finite(ce.value, epoch + 1, "cross-entropy");
        const Matrix zero = Matrix::Zero(out.embedding.rows(), out.embedding.cols());
        preference_backward(state, grad, tape, zero, &ce.grad);
        rec.metric += ce.value;
      } else {
        const LossResult sc = supcon_loss(out.embedding, in.labels, cfg.temperature);
        check_finite(sc.value, epoch + 1, "supervised contrastive");
        preference_backward(state, grad, tape, sc.grad);
        rec.metric += sc.value;
      }
      adam.step(state, grad);
      ++rec.batches;
    }
    if (rec.batches > 0) rec.metric /= rec.batches;
    rec.loss = rec.metric;
    rec.seconds = seconds_since(te);
    result.log.epochs.push_back(rec);
  }
  state.tags["stage1"] = "done";
  result.log.wall_seconds = seconds_since(t0);
  return result;
}

TrainResult train_quality(const Dataset& data, const SplitPlan& split, const ModelState* pretrained,
                          const TrainConfig& cfg) {
  const Manifest& m = data.manifest();
  validate(cfg, m.image_size);
  const auto t0 = std::chrono::steady_clock::now();
  const ModelConfig expected = model_config_for(cfg, m);
  TrainResult result;
  if (uses_pretraining(cfg.variant)) {
    if (!pretrained || !pretrained->tags.count("stage1"))
      throw ConfigError("variant " + std::string(to_string(cfg.variant)) + " requires a pretrained preference encoder");
    if (!(pretrained->config == expected))
      throw ConfigError("pretrained checkpoint architecture does not match the stage-2 configuration");
    result.state = *pretrained;
  } else {
    result.state = pretrained ? *pretrained : init_model(expected);
  }
  ModelState& state = result.state;
  result.log.seed = cfg.seed;
  result.log.variant = std::string(to_string(cfg.variant));
  tag_provenance(state, cfg, split);
  set_mos_range(state, data, split);

  state.set_frozen(Component::preference, cfg.variant != Variant::two_stage_no_freeze);
  state.set_frozen(Component::quality, false);
  state.set_frozen(Component::bias, false);
  state.set_frozen(Component::regressor, false);

  const SamplerConfig sampler = sampler_for(cfg, cfg.stage2_sampler, kStage2Stream);
  try {
    check_sampler_feasible(m, split.train_indices, sampler);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("stage-2 sampler infeasible: ") + e.what());
  }

  Adam adam(state, cfg);
  for (int epoch = 0; epoch < cfg.epochs_stage2; ++epoch) {
    const auto te = std::chrono::steady_clock::now();
    EpochRecord rec{2, epoch + 1};
    const auto batches = epoch_batches(m, split.train_indices, sampler, static_cast<std::uint64_t>(epoch));
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const BatchInputs in = gather(data, batches[b], state, cfg,
                                    derive_seed(derive_seed(cfg.seed, kStage2Stream), (static_cast<std::uint64_t>(epoch) << 20) | b));
      PipelineTape tape;
      const PipelineOutput out = pipeline_forward(state, in.pixels, static_cast<int>(batches[b].size()), &tape);
      const std::vector<double> pred(out.prediction.data(), out.prediction.data() + out.prediction.size());
      const MosLossResult loss = mos_loss(pred, in.targets, cfg.huber_delta, cfg.plcc_weight);
      check_finite(loss.value, epoch + 1, "MOS");
      ModelState grad = zeros_like(state);
      pipeline_backward(state, grad, tape, loss.grad);
      adam.step(state, grad);
      rec.loss += loss.value;
      rec.huber += loss.huber;
      rec.plcc += loss.plcc;
      ++rec.batches;
    }
    if (rec.batches > 0) {
      rec.loss /= rec.batches;
      rec.huber /= rec.batches;
      rec.plcc /= rec.batches;
    }
    rec.seconds = seconds_since(te);
    result.log.epochs.push_back(rec);
  }
  state.tags["stage2"] = "done";
  result.log.wall_seconds = seconds_since(t0);
  return result;
}

TrainResult train_joint(const Dataset& data, const SplitPlan& split, const TrainConfig& cfg) {
  const Manifest& m = data.manifest();
  validate(cfg, m.image_size);
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult result{init_model(model_config_for(cfg, m)), {}};
  ModelState& state = result.state;
  result.log.seed = cfg.seed;
  result.log.variant = std::string(to_string(cfg.variant));
  tag_provenance(state, cfg, split);
  set_mos_range(state, data, split);

  const SamplerConfig sampler = sampler_for(cfg, cfg.stage1_sampler, kJointStream);
  try {
    check_sampler_feasible(m, split.train_indices, sampler);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("joint sampler infeasible: ") + e.what());
  }

  Adam adam(state, cfg);
  const int epochs = cfg.epochs_stage1 + cfg.epochs_stage2;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const auto te = std::chrono::steady_clock::now();
    EpochRecord rec{0, epoch + 1};
    const auto batches = epoch_batches(m, split.train_indices, sampler, static_cast<std::uint64_t>(epoch));
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const BatchInputs in = gather(data, batches[b], state, cfg,
                                    derive_seed(derive_seed(cfg.seed, kJointStream), (static_cast<std::uint64_t>(epoch) << 20) | b));
      PipelineTape tape;
      const PipelineOutput out = pipeline_forward(state, in.pixels, static_cast<int>(batches[b].size()), &tape);
      const std::vector<double> pred(out.prediction.data(), out.prediction.data() + out.prediction.size());
      const MosLossResult mos = mos_loss(pred, in.targets, cfg.huber_delta, cfg.plcc_weight);
      const LossResult sc = supcon_loss(out.embedding, in.labels, cfg.temperature);
      check_finite(mos.value + sc.value, epoch + 1, "joint");
      ModelState grad = zeros_like(state);
      pipeline_backward(state, grad, tape, mos.grad, &sc.grad);
      adam.step(state, grad);
      rec.loss += mos.value + sc.value;
      rec.metric += sc.value;
      rec.huber += mos.huber;
      rec.plcc += mos.plcc;
      ++rec.batches;
    }
    if (rec.batches > 0) {
      rec.loss /= rec.batches;
      rec.metric /= rec.batches;
      rec.huber /= rec.batches;
      rec.plcc /= rec.batches;
    }
    rec.seconds = seconds_since(te);
    result.log.epochs.push_back(rec);
  }
  state.tags["stage2"] = "done";
  result.log.wall_seconds = seconds_since(t0);
  return result;
}

VariantResult run_variant(const Dataset& data, const SplitPlan& split, const TrainConfig& cfg) {
  VariantResult out;
  TrainResult trained;
  if (cfg.variant == Variant::joint) {
    trained = train_joint(data, split, cfg);
  } else {
    TrainResult stage1 = pretrain_preference(data, split, cfg);
    const ModelState* pretrained = uses_pretraining(cfg.variant) ? &stage1.state : nullptr;
    trained = train_quality(data, split, pretrained, cfg);
    trained.log.epochs.insert(trained.log.epochs.begin(), stage1.log.epochs.begin(), stage1.log.epochs.end());
    trained.log.wall_seconds += stage1.log.wall_seconds;
  }
  out.state = std::move(trained.state);
  out.log = std::move(trained.log);
  out.evaluation = evaluate(out.state, data, split);
  out.log.final_report = out.evaluation.report;
  return out;
}

}  // namespace eiqa
