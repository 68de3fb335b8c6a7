#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "eiqa/evalproto.hpp"
#include "eiqa/losses.hpp"
#include "eiqa/manifest.hpp"
#include "eiqa/models.hpp"
#include "eiqa/sampler.hpp"

namespace eiqa {

enum class Variant { full, no_preference, preference_concat, cls_preference, joint, two_stage_no_freeze };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view name);
// Whether the variant runs a separate preference pretraining stage.
bool uses_pretraining(Variant v);

struct TrainConfig {
  double lr = 1e-4;
  int batch_size = 32;
  int epochs_stage1 = 15;
  int epochs_stage2 = 15;
  int crop_size = 48;
  bool augment_rotation = true;
  bool augment_flip = true;
  std::uint64_t seed = 0;
  Variant variant = Variant::full;
  SamplingStrategy stage1_sampler = SamplingStrategy::content_controlled;
  SamplingStrategy stage2_sampler = SamplingStrategy::random;
  int scenes_per_batch = 8;
  int algos_per_scene = 4;
  double temperature = kDefaultTemperature;
  double huber_delta = kDefaultHuberDelta;
  double plcc_weight = kDefaultPlccWeight;
  int preference_dim = 64;
  int quality_dim = 128;
  std::vector<int> widths{8, 16, 32, 64};
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
};

// Throws InvalidArgument on out-of-range values.
void validate(const TrainConfig& cfg, int image_size);

struct EpochRecord {
  int stage = 1;  // 1 preference, 2 quality, 0 joint
  int epoch = 0;
  double loss = 0.0;       // mean total objective over the epoch's batches
  double metric = 0.0;     // supervised contrastive (or cross-entropy) part
  double huber = 0.0;
  double plcc = 0.0;
  int batches = 0;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  std::string variant;
  std::optional<EvalReport> final_report;
};

// One JSON object per line: epoch records, then a summary line.
// With `with_timing=false` every wall-clock field is written as 0.
std::string to_jsonl(const TrainLog& log, bool with_timing = true);

struct TrainResult {
  ModelState state;
  TrainLog log;
};

// Model architecture implied by a config and dataset (fusion from variant).
ModelConfig model_config_for(const TrainConfig& cfg, const Manifest& manifest);

// Stage 1: trains only the preference encoder (backbone + projection head)
// with the supervised contrastive loss, or cross-entropy for cls_preference.
// Sampler feasibility is checked before any step (ConfigError).
TrainResult pretrain_preference(const Dataset& data, const SplitPlan& split, const TrainConfig& cfg);

// Stage 2: optimises the MOS loss for the quality encoder, bias predictor
// and regressor. The preference encoder is frozen except for
// two_stage_no_freeze. `pretrained` is required for variants that read the
// preference embedding.
TrainResult train_quality(const Dataset& data, const SplitPlan& split, const ModelState* pretrained,
                          const TrainConfig& cfg);

// All modules from scratch, MOS loss + supervised contrastive loss each step.
TrainResult train_joint(const Dataset& data, const SplitPlan& split, const TrainConfig& cfg);

struct VariantResult {
  ModelState state;
  TrainLog log;
  Evaluation evaluation;
};

// Full pipeline for one variant: stage 1 (when used), stage 2, evaluation
// on the split's test records.
VariantResult run_variant(const Dataset& data, const SplitPlan& split, const TrainConfig& cfg);

// Training-mode view: random crop, quarter-turn rotation, horizontal flip.
Image augment(const Image& image, const TrainConfig& cfg, Rng& rng);

}  // namespace eiqa
