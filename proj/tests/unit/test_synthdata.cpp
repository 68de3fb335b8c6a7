#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include <Eigen/Dense>

#include "eiqa/errors.hpp"
#include "eiqa/synthdata.hpp"
#include "test_dirs.hpp"

using namespace eiqa;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

EnhancementOperator identity_operator() { return EnhancementOperator{}; }

}  // namespace

TEST_CASE("scene invariants") {
  const RawScene s = generate_scene(0, 64, 0);
  CHECK(s.pixels.height() == 64);
  CHECK(s.pixels.width() == 64);
  for (double v : s.pixels.data()) {
    REQUIRE(v >= 0.0);
    REQUIRE(v <= 1.0);
  }
  CHECK(s.pixels.mean_luma() >= 0.02);
  CHECK(s.pixels.mean_luma() <= 0.25);
  for (std::uint64_t seed = 1; seed < 40; ++seed) {
    const double l = generate_scene(seed, 32, 0).pixels.mean_luma();
    CHECK(l >= kMinSceneLuma);
    CHECK(l <= kMaxSceneLuma);
  }
}

TEST_CASE("scene determinism and seed sensitivity") {
  CHECK(generate_scene(0, 64, 0).pixels == generate_scene(0, 64, 0).pixels);
  const auto a = generate_scene(0, 64, 0).pixels.data(), b = generate_scene(1, 64, 0).pixels.data();
  std::size_t differing = 0;
  for (std::size_t i = 0; i < a.size(); i += 3) {
    bool differs = false;
    for (int c = 0; c < 3; ++c) differs |= std::abs(a[i + c] - b[i + c]) > 0.01;
    differing += differs;
  }
  CHECK(static_cast<double>(differing) / (a.size() / 3) >= 0.10);
}

TEST_CASE("scene size validation") {
  CHECK_THROWS_AS(generate_scene(0, 15, 0), InvalidArgument);
  CHECK_NOTHROW(generate_scene(0, 16, 0));
}

TEST_CASE("identity operator is exact") {
  const RawScene s = generate_scene(4, 48, 0);
  CHECK(apply_enhancement(s, identity_operator()) == s.pixels);
}

TEST_CASE("gamma 0.5 maps 0.04 to 0.2") {
  RawScene s{0, 0, 9, Image(16, 16, 0.04)};
  EnhancementOperator op;
  op.style.gamma = 0.5;
  const Image out = apply_enhancement(s, op);
  for (double v : out.data()) CHECK(v == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("operators keep shape and range") {
  const RawScene s = generate_scene(5, 32, 0);
  for (const auto& op : make_operator_bank(10, 3)) {
    const Image out = apply_enhancement(s, op);
    CHECK(out.same_shape(s.pixels));
    for (double v : out.data()) {
      REQUIRE(v >= 0.0);
      REQUIRE(v <= 1.0);
    }
  }
}

TEST_CASE("operator bank margins") {
  for (int k : {4, 10, 16}) {
    const auto ops = make_operator_bank(k, 17);
    REQUIRE(static_cast<int>(ops.size()) == k);
    for (int i = 0; i < k; ++i)
      for (int j = i + 1; j < k; ++j) {
        CHECK(count_distinct_params(ops[i].style, ops[j].style, kOperatorMinMargin) >= 2);
        double tint = 0;
        for (int c = 0; c < 3; ++c) tint += std::pow(ops[i].style.tint[c] - ops[j].style.tint[c], 2);
        CHECK(std::sqrt(tint) >= kOperatorMinMargin);
        CHECK(std::abs(ops[i].style.saturation - ops[j].style.saturation) >= kOperatorMinMargin);
      }
  }
}

TEST_CASE("tints are luminance neutral") {
  for (const auto& op : make_operator_bank(10, 2)) {
    double l = 0;
    for (int c = 0; c < 3; ++c) l += kLumaWeights[c] * op.style.tint[c];
    CHECK(std::abs(l) < 1e-12);
  }
}

TEST_CASE("distinct operators change colour") {
  const RawScene s = generate_scene(8, 32, 0);
  const auto ops = make_operator_bank(10, 0);
  const Image a = apply_enhancement(s, ops[0]), b = apply_enhancement(s, ops[1]);
  double diff = 0;
  for (std::size_t i = 0; i < a.data().size(); ++i) diff += std::abs(a.data()[i] - b.data()[i]);
  CHECK(diff > 0.0);
}

TEST_CASE("mos closed form anchors") {
  // Black: every pixel clipped, brightness fully off band, no contrast.
  CHECK(synth_mos(RawScene{0, 0, 0, Image(32, 32, 0.0)}, Image(32, 32, 0.0)) <= 20.0);
  CHECK(mos_from_factors(measure_quality(Image(32, 32, 0.0))) == doctest::Approx(15.0));
  // Horizontal ramp 0.2..0.8: mean 0.5, nothing clipped, zero second differences, block std > 0.04.
  Image ramp(64, 64);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      for (int c = 0; c < 3; ++c) ramp.at(y, x, c) = 0.2 + 0.6 * x / 63.0;
  const QualityFactors f = measure_quality(ramp);
  CHECK(f.clip_fraction == 0.0);
  CHECK(f.noise_sigma < 1e-12);
  CHECK(f.local_contrast > 0.04);
  CHECK(synth_mos(RawScene{0, 0, 0, ramp}, ramp) == doctest::Approx(100.0).epsilon(1e-12));
}

TEST_CASE("mos ignores opposite tints") {
  Image base(32, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      for (int c = 0; c < 3; ++c) base.at(y, x, c) = 0.3 + 0.3 * ((x + y) % 7) / 6.0;
  // Red/green offsets of +-0.1 with blue compensating so luma is unchanged.
  const double blue = -(0.299 * 0.1 - 0.587 * 0.1) / 0.114;
  Image red = base, green = base;
  for (std::size_t p = 0; p < base.data().size(); p += 3) {
    red.data()[p] += 0.1;
    red.data()[p + 1] -= 0.1;
    red.data()[p + 2] += blue;
    green.data()[p] -= 0.1;
    green.data()[p + 1] += 0.1;
    green.data()[p + 2] -= blue;
  }
  const RawScene raw{0, 0, 0, base};
  CHECK(std::abs(synth_mos(raw, red) - synth_mos(raw, green)) < 1e-6);
}

TEST_CASE("mos equalised operators differ only in style") {
  const auto ops = make_operator_bank(10, 6);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const RawScene s = generate_scene(seed, 48, 0);
    EnhancementOperator a = ops[0], b = ops[0];
    b.style.tint = ops[3].style.tint;
    b.style.saturation = ops[3].style.saturation;
    // Scale tints and saturation so no channel clips.
    a.style.saturation = 1.0;
    b.style.saturation = 1.1;
    for (double& t : a.style.tint) t *= 0.2;
    for (double& t : b.style.tint) t *= 0.2;
    a.style.noise_sigma = b.style.noise_sigma = 0.0;
    a.style.sharpen = b.style.sharpen = 0.0;
    const Image ia = apply_enhancement(s, a), ib = apply_enhancement(s, b);
    bool clipped = false;
    for (double v : ia.data()) clipped |= v <= 0.0 || v >= 1.0;
    for (double v : ib.data()) clipped |= v <= 0.0 || v >= 1.0;
    if (clipped) continue;
    CHECK(std::abs(synth_mos(s, ia) - synth_mos(s, ib)) < 1e-6);
  }
}

TEST_CASE("mos shape mismatch") {
  CHECK_THROWS_AS(synth_mos(RawScene{0, 0, 0, Image(32, 32)}, Image(16, 16)), InvalidArgument);
}

TEST_CASE("build dataset counts and determinism") {
  const auto dir = test_dir("synth_small");
  const Manifest m = build_dataset({10, 4, 16, 3, dir / "a"});
  CHECK(m.records.size() == 40);
  CHECK(algo_ids(m).size() == 4);
  CHECK(scene_ids(m).size() == 10);
  build_dataset({10, 4, 16, 3, dir / "b"});
  CHECK(slurp(dir / "a" / kManifestFileName) == slurp(dir / "b" / kManifestFileName));
  CHECK(slurp(dir / "a" / "images/s00007_a02.ppm") == slurp(dir / "b" / "images/s00007_a02.ppm"));
  for (const auto& r : m.records) {
    CHECK(r.mos >= 0.0);
    CHECK(r.mos <= 100.0);
    CHECK(r.env_id == r.scene_id / 10);
  }
}

TEST_CASE("stored images reproduce the scored pixels") {
  const auto dir = test_dir("synth_reload");
  const Manifest m = build_dataset({10, 4, 16, 8, dir});
  const Dataset d = Dataset::load(dir);
  CHECK(d.manifest() == m);
  const auto ops = make_operator_bank(4, 8);
  const RawScene s = generate_scene(scene_seed(8, 3), 16, 0, 3);
  const Image expected = quantize16(apply_enhancement(s, ops[2]));
  for (std::size_t i = 0; i < m.records.size(); ++i)
    if (m.records[i].scene_id == 3 && m.records[i].algo_id == 2) CHECK(d.image(i) == expected);
}

TEST_CASE("full-scale record count") {
  // Generation at 16 px keeps this fast; the count depends only on n and K.
  const auto dir = test_dir("synth_290");
  const Manifest m = build_dataset({290, 10, 16, 0, dir});
  CHECK(m.records.size() == 2900);
  CHECK(env_ids(m).size() == 29);
}

TEST_CASE("build dataset validation") {
  const auto dir = test_dir("synth_invalid");
  CHECK_THROWS_AS(build_dataset({9, 4, 16, 0, dir}), InvalidArgument);
  CHECK_THROWS_AS(build_dataset({10, 3, 16, 0, dir}), InvalidArgument);
  CHECK_THROWS_AS(build_dataset({10, 4, 8, 0, dir}), InvalidArgument);
}

TEST_CASE("channel statistics identify the operator") {
  // Multinomial logistic probe on standardized per-channel mean and std, 50
  // scenes to fit and 50 held-out scenes to score.
  constexpr int kScenes = 50, kAlgos = 10, kFeatures = 6;
  const auto ops = make_operator_bank(kAlgos, 21);
  auto features = [&](std::uint64_t seed) {
    const RawScene s = generate_scene(seed, 32, 0);
    std::vector<Eigen::VectorXd> rows;
    for (const auto& op : ops) {
      const Image img = apply_enhancement(s, op);
      Eigen::VectorXd f = Eigen::VectorXd::Zero(kFeatures);
      const double n = static_cast<double>(img.pixel_count());
      for (std::size_t p = 0; p < img.data().size(); p += 3)
        for (int c = 0; c < 3; ++c) {
          f[c] += img.data()[p + c] / n;
          f[3 + c] += img.data()[p + c] * img.data()[p + c] / n;
        }
      for (int c = 0; c < 3; ++c) f[3 + c] = std::sqrt(std::max(0.0, f[3 + c] - f[c] * f[c]));
      rows.push_back(f);
    }
    return rows;
  };
  Eigen::MatrixXd x(kScenes * kAlgos, kFeatures);
  std::vector<int> label(kScenes * kAlgos);
  for (int s = 0; s < kScenes; ++s) {
    const auto rows = features(scene_seed(21, s));
    for (int a = 0; a < kAlgos; ++a) {
      x.row(s * kAlgos + a) = rows[a].transpose();
      label[s * kAlgos + a] = a;
    }
  }
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::RowVectorXd stdev = ((x.rowwise() - mean).array().square().colwise().mean()).sqrt();
  auto standardize = [&](const Eigen::VectorXd& f) {
    Eigen::VectorXd z(kFeatures + 1);
    z.head(kFeatures) = (f.transpose() - mean).cwiseQuotient(stdev).transpose();
    z[kFeatures] = 1.0;
    return z;
  };
  Eigen::MatrixXd z(x.rows(), kFeatures + 1);
  for (Eigen::Index i = 0; i < x.rows(); ++i) z.row(i) = standardize(x.row(i).transpose()).transpose();

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(kFeatures + 1, kAlgos);
  for (int it = 0; it < 3000; ++it) {
    Eigen::MatrixXd p = z * w;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      p.row(i) = (p.row(i).array() - p.row(i).maxCoeff()).exp();
      p.row(i) /= p.row(i).sum();
      p(i, label[i]) -= 1.0;
    }
    w -= 0.5 * (z.transpose() * p / static_cast<double>(z.rows()) + 1e-4 * w);
  }
  int correct = 0;
  for (int s = 0; s < kScenes; ++s) {
    const auto rows = features(scene_seed(21, 1000 + s));
    for (int a = 0; a < kAlgos; ++a) {
      Eigen::Index best;
      (standardize(rows[a]).transpose() * w).maxCoeff(&best);
      correct += best == a;
    }
  }
  const double accuracy = static_cast<double>(correct) / (kScenes * kAlgos);
  MESSAGE("held-out probe accuracy " << accuracy);
  CHECK(accuracy > 0.9);
}
