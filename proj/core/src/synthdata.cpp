#include "eiqa/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <system_error>

#include "eiqa/errors.hpp"
#include "eiqa/rng.hpp"

namespace eiqa {

namespace {

constexpr std::uint64_t kSceneStream = 0x5343454E45ULL;  // "SCENE"
constexpr std::uint64_t kOperatorStream = 0x4F50ULL;     // "OP"
constexpr std::uint64_t kNoiseStream = 0x4E4F495345ULL;  // "NOISE"

using Vec3 = std::array<double, 3>;

constexpr double kSceneChroma = 0.06;

// Operator parameter ranges. Quality-relevant parameters (gamma, tone,
// noise, sharpening) spread narrowly so algorithms reach similar quality;
// tint and saturation carry the style.
constexpr double kGammaLo = 0.45, kGammaHi = 0.58;
constexpr double kToneSpread = 0.05;
constexpr double kSaturationLo = 0.5, kSaturationHi = 1.6;
constexpr double kNoiseHi = 0.015;
constexpr double kSharpenHi = 0.4;
constexpr double kTintRadius = 0.10;

Vec3 random_colour(Rng& rng, double lo, double hi) {
  // Grey level plus a bounded chroma offset, so scene casts stay comparable
  // to (but independent of) operator tints.
  const double grey = uniform(rng, lo, hi);
  Vec3 c{};
  for (double& v : c) v = std::clamp(grey + uniform(rng, -kSceneChroma, kSceneChroma), 0.0, 1.0);
  return c;
}

void normalise(Vec3& v) {
  const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  for (double& x : v) x /= n;
}

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

double tone_map(double x, const std::array<double, 3>& knots) {
  static constexpr std::array<double, 5> kIn{0.0, 0.25, 0.5, 0.75, 1.0};
  const std::array<double, 5> out{0.0, knots[0], knots[1], knots[2], 1.0};
  if (x <= 0.0) return x * (out[1] / kIn[1]);
  if (x >= 1.0) return 1.0 + (x - 1.0) * ((1.0 - out[3]) / 0.25);
  const int seg = std::min(3, static_cast<int>(x / 0.25));
  const double t = (x - kIn[seg]) / 0.25;
  return out[seg] + t * (out[seg + 1] - out[seg]);
}

Image box_blur3(const Image& img) {
  const int h = img.height(), w = img.width();
  Image out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx)
            s += img.at(std::clamp(y + dy, 0, h - 1), std::clamp(x + dx, 0, w - 1), c);
        out.at(y, x, c) = s / 9.0;
      }
  return out;
}

}  // namespace

RawScene generate_scene(std::uint64_t seed, int size, int env_id, int scene_id) {
  if (size < kMinSceneSize)
    throw InvalidArgument("scene size must be >= " + std::to_string(kMinSceneSize) + ", got " + std::to_string(size));
  Rng rng(seed);
  Image img(size, size);
  const double span = static_cast<double>(size - 1);

  // Gradient field.
  const Vec3 a = random_colour(rng, 0.2, 0.9);
  const Vec3 b = random_colour(rng, 0.2, 0.9);
  const double theta = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double ct = std::cos(theta), st = std::sin(theta);
  const double reach = std::abs(ct) + std::abs(st);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double t = std::clamp(((x / span - 0.5) * ct + (y / span - 0.5) * st) / reach + 0.5, 0.0, 1.0);
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = a[c] + t * (b[c] - a[c]);
    }

  // Geometric shapes.
  const int n_shapes = uniform_int(rng, 3, 6);
  for (int s = 0; s < n_shapes; ++s) {
    const bool circle = uniform_int(rng, 0, 1) == 0;
    const Vec3 colour = random_colour(rng, 0.05, 1.0);
    const double alpha = uniform(rng, 0.6, 1.0);
    const double cx = uniform(rng, 0.0, span), cy = uniform(rng, 0.0, span);
    const double rx = uniform(rng, 0.08, 0.3) * size, ry = uniform(rng, 0.08, 0.3) * size;
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const double dx = (x - cx) / rx, dy = (y - cy) / ry;
        const bool inside = circle ? (dx * dx + dy * dy <= 1.0) : (std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0);
        if (!inside) continue;
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = (1.0 - alpha) * img.at(y, x, c) + alpha * colour[c];
      }
  }

  // Multiplicative value-noise texture (coarse lattice) plus fine grain.
  constexpr int kCells = 8;
  std::vector<double> lattice((kCells + 1) * (kCells + 1));
  for (double& v : lattice) v = uniform(rng, 0.7, 1.3);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double gx = x / span * kCells, gy = y / span * kCells;
      const int ix = std::min(kCells - 1, static_cast<int>(gx)), iy = std::min(kCells - 1, static_cast<int>(gy));
      const double fx = gx - ix, fy = gy - iy;
      auto at = [&](int i, int j) { return lattice[j * (kCells + 1) + i]; };
      const double v = (1 - fx) * (1 - fy) * at(ix, iy) + fx * (1 - fy) * at(ix + 1, iy) +
                       (1 - fx) * fy * at(ix, iy + 1) + fx * fy * at(ix + 1, iy + 1);
      const double grain = uniform(rng, 0.97, 1.03);
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = std::clamp(img.at(y, x, c) * v * grain, 0.0, 1.0);
    }

  // Expose down into the low-light band.
  const double target = uniform(rng, 0.04, 0.20);
  for (int iter = 0; iter < 8; ++iter) {
    const double current = img.mean_luma();
    if (current <= 0.0) break;
    const double scale = target / current;
    for (double& v : img.data()) v = std::clamp(v * scale, 0.0, 1.0);
    if (std::abs(img.mean_luma() - target) < 1e-4) break;
  }
  const double lum = img.mean_luma();
  if (lum < kMinSceneLuma || lum > kMaxSceneLuma) {
    // Degenerate draws (e.g. all-black shapes) are lifted uniformly into band.
    for (double& v : img.data()) v = std::clamp(v + (target - lum), 0.0, 1.0);
  }
  return RawScene{scene_id, env_id, seed, std::move(img)};
}

std::vector<EnhancementOperator> make_operator_bank(int k_algorithms, std::uint64_t seed) {
  if (k_algorithms < 1 || k_algorithms > 32) throw InvalidArgument("operator count must be in [1, 32]");
  Rng rng(derive_seed(seed, kOperatorStream));
  const int k = k_algorithms;
  auto permutation = [&] {
    std::vector<int> p(k);
    std::iota(p.begin(), p.end(), 0);
    std::shuffle(p.begin(), p.end(), rng);
    return p;
  };
  const auto p_gamma = permutation(), p_sat = permutation(), p_noise = permutation(), p_sharp = permutation(),
             p_tone = permutation();
  const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);

  // Orthonormal basis of the luminance-neutral plane.
  const Vec3 w{kLumaWeights[0], kLumaWeights[1], kLumaWeights[2]};
  Vec3 u1 = cross(w, Vec3{0.0, 0.0, 1.0});
  normalise(u1);
  Vec3 u2 = cross(w, u1);
  normalise(u2);
  const double radius = k > 1 ? std::max(kTintRadius, 0.02 / std::sin(std::numbers::pi / k)) : kTintRadius;

  auto spread = [k](int rank, double lo, double hi) { return k > 1 ? lo + (hi - lo) * rank / (k - 1) : 0.5 * (lo + hi); };
  std::vector<EnhancementOperator> ops(k);
  for (int i = 0; i < k; ++i) {
    StyleParams& s = ops[i].style;
    ops[i].algo_id = i;
    s.gamma = spread(p_gamma[i], kGammaLo, kGammaHi);
    const double tone = spread(p_tone[i], -kToneSpread, kToneSpread);
    s.tone_knots = {0.25 - tone, 0.5, 0.75 + tone};
    const double angle = phase + 2.0 * std::numbers::pi * i / k;
    for (int c = 0; c < 3; ++c) s.tint[c] = radius * (std::cos(angle) * u1[c] + std::sin(angle) * u2[c]);
    s.saturation = spread(p_sat[i], kSaturationLo, kSaturationHi);
    s.noise_sigma = spread(p_noise[i], 0.0, kNoiseHi);
    s.sharpen = spread(p_sharp[i], 0.0, kSharpenHi);
  }
  return ops;
}

int count_distinct_params(const StyleParams& a, const StyleParams& b, double margin) {
  double tone = 0.0, tint = 0.0;
  for (int i = 0; i < 3; ++i) {
    tone = std::max(tone, std::abs(a.tone_knots[i] - b.tone_knots[i]));
    tint += (a.tint[i] - b.tint[i]) * (a.tint[i] - b.tint[i]);
  }
  const std::array<double, 6> diffs{std::abs(a.gamma - b.gamma), tone, std::sqrt(tint),
                                    std::abs(a.saturation - b.saturation), std::abs(a.sharpen - b.sharpen),
                                    std::abs(a.noise_sigma - b.noise_sigma)};
  return static_cast<int>(std::count_if(diffs.begin(), diffs.end(), [margin](double d) { return d >= margin; }));
}

Image apply_enhancement(const RawScene& raw, const EnhancementOperator& op) {
  const StyleParams& s = op.style;
  Image x = raw.pixels;
  auto& d = x.data();

  if (s.gamma != 1.0)
    for (double& v : d) v = std::pow(std::max(v, 0.0), s.gamma);

  if (s.tone_knots != std::array<double, 3>{0.25, 0.5, 0.75})
    for (double& v : d) v = tone_map(v, s.tone_knots);

  if (s.tint != std::array<double, 3>{0.0, 0.0, 0.0})
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s.tint[i % 3];

  if (s.saturation != 1.0)
    for (std::size_t p = 0; p < d.size(); p += 3) {
      const double y = kLumaWeights[0] * d[p] + kLumaWeights[1] * d[p + 1] + kLumaWeights[2] * d[p + 2];
      for (int c = 0; c < 3; ++c) d[p + c] = y + s.saturation * (d[p + c] - y);
    }

  if (s.sharpen != 0.0) {
    const Image blurred = box_blur3(x);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s.sharpen * (d[i] - blurred.data()[i]);
  }

  if (s.noise_sigma != 0.0) {
    Rng rng(derive_seed(raw.seed, kNoiseStream));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : d) v += s.noise_sigma * normal(rng);
  }

  for (double& v : d) v = std::clamp(v, 0.0, 1.0);
  return x;
}

QualityFactors measure_quality(const Image& img) {
  const int h = img.height(), w = img.width();
  if (h < 3 || w < 3) throw InvalidArgument("image too small for quality measurement");
  std::vector<double> luma(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) luma[static_cast<std::size_t>(y) * w + x] = img.luma(y, x);
  auto at = [&](int y, int x) { return luma[static_cast<std::size_t>(y) * w + x]; };

  QualityFactors f;
  std::size_t clipped = 0;
  for (double v : luma) {
    f.mean_luma += v;
    if (v <= 0.01 || v >= 0.99) ++clipped;
  }
  f.mean_luma /= static_cast<double>(luma.size());
  f.clip_fraction = static_cast<double>(clipped) / static_cast<double>(luma.size());

  // Immerkaer fast noise variance estimation.
  double acc = 0.0;
  for (int y = 1; y < h - 1; ++y)
    for (int x = 1; x < w - 1; ++x) {
      const double r = at(y - 1, x - 1) - 2 * at(y - 1, x) + at(y - 1, x + 1) - 2 * at(y, x - 1) + 4 * at(y, x) -
                       2 * at(y, x + 1) + at(y + 1, x - 1) - 2 * at(y + 1, x) + at(y + 1, x + 1);
      acc += std::abs(r);
    }
  f.noise_sigma = std::sqrt(std::numbers::pi / 2.0) * acc / (6.0 * (w - 2) * (h - 2));

  constexpr int kBlock = 16;
  const int by = std::max(1, h / kBlock), bx = std::max(1, w / kBlock);
  const int bh = std::min(kBlock, h), bw = std::min(kBlock, w);
  double contrast = 0.0;
  for (int j = 0; j < by; ++j)
    for (int i = 0; i < bx; ++i) {
      double sum = 0.0, sq = 0.0;
      for (int y = j * bh; y < (j + 1) * bh; ++y)
        for (int x = i * bw; x < (i + 1) * bw; ++x) {
          sum += at(y, x);
          sq += at(y, x) * at(y, x);
        }
      const double n = static_cast<double>(bh) * bw;
      const double mean = sum / n;
      contrast += std::sqrt(std::max(0.0, sq / n - mean * mean));
    }
  f.local_contrast = contrast / (static_cast<double>(by) * bx);
  return f;
}

double mos_from_factors(const QualityFactors& f) {
  const double off_band = std::max({0.0, 0.40 - f.mean_luma, f.mean_luma - 0.60});
  const double p_bright = std::min(1.0, off_band / 0.30);
  const double p_clip = f.clip_fraction;
  const double p_noise = std::min(1.0, f.noise_sigma / 0.05);
  const double p_contrast = std::max(0.0, 1.0 - f.local_contrast / 0.04);
  const double score = 1.0 - 0.40 * p_bright - 0.30 * p_clip - 0.15 * p_noise - 0.15 * p_contrast;
  return 100.0 * std::clamp(score, 0.0, 1.0);
}

double synth_mos(const RawScene& raw, const Image& enhanced) {
  if (!raw.pixels.same_shape(enhanced)) throw InvalidArgument("raw and enhanced image shapes differ");
  return mos_from_factors(measure_quality(enhanced));
}

std::uint64_t scene_seed(std::uint64_t dataset_seed, int scene_id) {
  return derive_seed(derive_seed(dataset_seed, kSceneStream), static_cast<std::uint64_t>(scene_id));
}

Manifest build_dataset(const DatasetConfig& config) {
  if (config.n_scenes < 10) throw InvalidArgument("n_scenes must be >= 10");
  if (config.k_algorithms < 4) throw InvalidArgument("k_algorithms must be >= 4");
  if (config.size < kMinSceneSize) throw InvalidArgument("size must be >= 16");
  if (config.out_dir.empty()) throw InvalidArgument("out_dir must be set");

  const auto image_dir = config.out_dir / "images";
  std::error_code ec;
  std::filesystem::create_directories(image_dir, ec);
  if (ec) throw IoError("cannot create " + image_dir.string() + ": " + ec.message());

  const auto ops = make_operator_bank(config.k_algorithms, config.seed);

  Manifest m;
  m.k_algorithms = config.k_algorithms;
  m.generation_seed = config.seed;
  m.image_size = config.size;
  m.records.reserve(static_cast<std::size_t>(config.n_scenes) * config.k_algorithms);
  char name[64];
  char mos_text[32];
  for (int s = 0; s < config.n_scenes; ++s) {
    const RawScene scene = generate_scene(scene_seed(config.seed, s), config.size,
                                          env_for_scene(s), s);
    for (const auto& op : ops) {
      const Image enhanced = quantize16(apply_enhancement(scene, op));
      std::snprintf(name, sizeof(name), "images/s%05d_a%02d.ppm", s, op.algo_id);
      write_ppm16(enhanced, config.out_dir / name);
      std::snprintf(mos_text, sizeof(mos_text), "%.4f", synth_mos(scene, enhanced));
      m.records.push_back(SampleRecord{s, scene.env_id, op.algo_id, name, std::stod(mos_text)});
    }
  }
  save_manifest(m, config.out_dir / kManifestFileName);
  return m;
}

}  // namespace eiqa
