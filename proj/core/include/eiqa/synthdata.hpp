#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "eiqa/image.hpp"
#include "eiqa/manifest.hpp"

namespace eiqa {

// A simulated low-light capture. `seed` also drives the sensor-noise field
// that every enhancement of this scene shares.
struct RawScene {
  int scene_id = 0;
  int env_id = 0;
  std::uint64_t seed = 0;
  Image pixels;
};

inline constexpr int kMinSceneSize = 16;
inline constexpr double kMinSceneLuma = 0.02;
inline constexpr double kMaxSceneLuma = 0.25;

// Procedural scene: colour gradient field, geometric shapes, and a
// multiplicative value-noise texture, then exposed down into the low-light
// band [kMinSceneLuma, kMaxSceneLuma].
RawScene generate_scene(std::uint64_t seed, int size, int env_id, int scene_id = 0);

// Style parameters of a synthetic enhancer. Tints are luminance-neutral and
// saturation acts around luma, so neither moves the luma channel that
// synth_mos() reads.
struct StyleParams {
  double gamma = 1.0;
  // Tone-curve outputs at inputs 0.25, 0.5, 0.75 (end points fixed at 0 and 1).
  std::array<double, 3> tone_knots{0.25, 0.5, 0.75};
  std::array<double, 3> tint{0.0, 0.0, 0.0};
  double saturation = 1.0;
  double sharpen = 0.0;
  double noise_sigma = 0.0;
};

struct EnhancementOperator {
  int algo_id = 0;
  StyleParams style;
};

inline constexpr double kOperatorMinMargin = 0.03;

// K operators with evenly spread, independently permuted parameters. Any two
// operators differ by at least kOperatorMinMargin in tint and in saturation.
std::vector<EnhancementOperator> make_operator_bank(int k_algorithms, std::uint64_t seed);

// Number of style parameters in which two operators differ by >= margin.
int count_distinct_params(const StyleParams& a, const StyleParams& b, double margin);

// gamma -> tone curve -> tint -> saturation -> sharpening -> noise -> clip.
// Stages whose parameters are the identity are skipped exactly.
Image apply_enhancement(const RawScene& raw, const EnhancementOperator& op);

// Quality factors read from the luma channel only.
struct QualityFactors {
  double mean_luma = 0.0;
  double clip_fraction = 0.0;
  double noise_sigma = 0.0;
  double local_contrast = 0.0;
};

QualityFactors measure_quality(const Image& enhanced);

// MOS = 100 * clamp(1 - 0.40*Pb - 0.30*Pc - 0.15*Pn - 0.15*Pk, 0, 1) with
//   Pb = min(1, max(0, 0.40 - L, L - 0.60) / 0.30)   brightness outside [0.40, 0.60]
//   Pc = clip fraction (luma <= 0.01 or >= 0.99)
//   Pn = min(1, sigma_n / 0.05)                      Immerkaer noise estimate
//   Pk = max(0, 1 - c / 0.04)                        c = mean std over 16x16 blocks
double mos_from_factors(const QualityFactors& f);
double synth_mos(const RawScene& raw, const Image& enhanced);

struct DatasetConfig {
  int n_scenes = 100;
  int k_algorithms = 10;
  int size = 64;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
};

// Seed of scene `scene_id` in a dataset generated with `dataset_seed`.
std::uint64_t scene_seed(std::uint64_t dataset_seed, int scene_id);

// Writes <out_dir>/images/*.ppm and <out_dir>/manifest.tsv.
Manifest build_dataset(const DatasetConfig& config);

inline int env_for_scene(int scene_id) { return scene_id / 10; }

}  // namespace eiqa
