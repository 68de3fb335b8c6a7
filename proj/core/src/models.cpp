#include "eiqa/models.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "eiqa/errors.hpp"
#include "eiqa/rng.hpp"

namespace eiqa {

using nn::Matrix;
using nn::Vector;

std::string_view to_string(Fusion f) {
  switch (f) {
    case Fusion::debias: return "debias";
    case Fusion::none: return "none";
    case Fusion::concat: return "concat";
  }
  return "unknown";
}

Fusion parse_fusion(std::string_view name) {
  if (name == "debias") return Fusion::debias;
  if (name == "none") return Fusion::none;
  if (name == "concat") return Fusion::concat;
  throw InvalidArgument("unknown fusion mode: " + std::string(name));
}

std::string_view to_string(Component c) {
  switch (c) {
    case Component::preference: return "preference";
    case Component::quality: return "quality";
    case Component::bias: return "bias";
    case Component::regressor: return "regressor";
  }
  return "unknown";
}

ModelState init_model(const ModelConfig& config) {
  if (config.input_size < 4 || config.input_size > config.image_size)
    throw InvalidArgument("input_size must be in [4, image_size]");
  if (config.preference_dim < 1 || config.quality_dim < 1) throw InvalidArgument("feature dimensions must be positive");
  ModelState s;
  s.config = config;
  Rng rng(derive_seed(config.seed, 0x4D4F44454CULL));  // "MODEL"
  s.preference.backbone = nn::make_backbone(3, config.preference_widths, rng);
  const int pref_features = config.preference_widths.back();
  s.preference.projection = nn::make_mlp(pref_features, config.projection_hidden, config.preference_dim, rng);
  if (config.classifier_classes > 0)
    s.preference.classifier =
        nn::make_dense(config.preference_dim, config.classifier_classes, std::sqrt(1.0 / config.preference_dim), rng);
  s.quality.backbone = nn::make_backbone(3, config.quality_widths, rng);
  const int quality_features = config.quality_widths.back();
  s.quality.head = nn::make_dense(quality_features, config.quality_dim, std::sqrt(1.0 / quality_features), rng);
  s.bias = nn::make_mlp(config.preference_dim, config.bias_hidden(), config.quality_dim, rng);
  s.regressor = nn::make_mlp(config.regressor_input(), config.regressor_hidden, 1, rng);
  return s;
}

ModelState zeros_like(const ModelState& state) {
  ModelState z = state;
  for_each_parameter(z, [](const std::string&, Component, std::span<double> p) { std::fill(p.begin(), p.end(), 0.0); });
  return z;
}

std::size_t parameter_count(const ModelState& state, Component c) {
  std::size_t n = 0;
  for_each_parameter(state, [&](const std::string&, Component comp, std::span<const double> p) {
    if (comp == c) n += p.size();
  });
  return n;
}

std::uint64_t parameter_checksum(const ModelState& state, Component c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for_each_parameter(state, [&](const std::string&, Component comp, std::span<const double> p) {
    if (comp != c) return;
    const auto* bytes = reinterpret_cast<const unsigned char*>(p.data());
    for (std::size_t i = 0; i < p.size_bytes(); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  });
  return h;
}

Matrix pack_images(std::span<const Image> images, int expected_size) {
  if (images.empty()) throw InvalidArgument("empty image batch");
  const Eigen::Index hw = static_cast<Eigen::Index>(expected_size) * expected_size;
  Matrix x(3, static_cast<Eigen::Index>(images.size()) * hw);
  for (std::size_t n = 0; n < images.size(); ++n) {
    const Image& img = images[n];
    if (img.height() != expected_size || img.width() != expected_size)
      throw InvalidArgument("image is " + std::to_string(img.height()) + "x" + std::to_string(img.width()) +
                            ", model expects " + std::to_string(expected_size) + "x" + std::to_string(expected_size));
    const double* src = img.data().data();
    double* dst = x.data() + static_cast<Eigen::Index>(n) * hw * 3;
    for (Eigen::Index i = 0; i < hw * 3; ++i) dst[i] = src[i] - 0.5;
  }
  return x;
}

namespace {

nn::FeatureGeometry input_geometry(const ModelState& s, int batch) {
  return {batch, s.config.input_size, s.config.input_size};
}

}  // namespace

PreferenceOutput preference_forward_batch(const ModelState& s, const Matrix& input, int batch, PreferenceTape* tape) {
  PreferenceOutput out;
  Matrix features = nn::backbone_forward(s.preference.backbone, input, input_geometry(s, batch),
                                         tape ? &tape->backbone : nullptr);
  Matrix z = nn::mlp_forward(s.preference.projection, features, tape ? &tape->projection : nullptr);
  out.embedding = nn::l2_normalize(z);
  if (s.preference.classifier.weight.size() > 0) out.logits = nn::dense_forward(s.preference.classifier, z);
  if (tape) {
    tape->features = std::move(features);
    tape->projected = std::move(z);
    tape->embedding = out.embedding;
  }
  return out;
}

void preference_backward(const ModelState& s, ModelState& grad, const PreferenceTape& tape, const Matrix& d_embedding,
                         const Matrix* d_logits) {
  Matrix dz = nn::l2_normalize_backward(tape.projected, tape.embedding, d_embedding);
  if (d_logits) dz += nn::dense_backward(s.preference.classifier, grad.preference.classifier, tape.projected, *d_logits);
  const Matrix dfeat = nn::mlp_backward(s.preference.projection, grad.preference.projection, tape.projection, dz);
  nn::backbone_backward(s.preference.backbone, grad.preference.backbone, tape.backbone, dfeat);
}

PipelineOutput pipeline_forward(const ModelState& s, const Matrix& input, int batch, PipelineTape* tape) {
  PipelineOutput out;
  if (s.config.fusion != Fusion::none)
    out.embedding = preference_forward_batch(s, input, batch, tape ? &tape->preference : nullptr).embedding;

  Matrix features = nn::backbone_forward(s.quality.backbone, input, input_geometry(s, batch),
                                         tape ? &tape->quality_backbone : nullptr);
  Matrix q_raw = nn::dense_forward(s.quality.head, features);

  Matrix regressor_input;
  switch (s.config.fusion) {
    case Fusion::debias:
      regressor_input = q_raw - nn::mlp_forward(s.bias, out.embedding, tape ? &tape->bias : nullptr);
      break;
    case Fusion::none:
      regressor_input = q_raw;
      break;
    case Fusion::concat:
      regressor_input.resize(q_raw.rows() + out.embedding.rows(), batch);
      regressor_input << q_raw, out.embedding;
      break;
  }
  out.prediction = nn::mlp_forward(s.regressor, regressor_input, tape ? &tape->regressor : nullptr);
  if (tape) {
    tape->quality_features = std::move(features);
    tape->q_raw = std::move(q_raw);
  }
  return out;
}

void pipeline_backward(const ModelState& s, ModelState& grad, const PipelineTape& tape, const Matrix& d_prediction,
                       const Matrix* d_embedding) {
  const Matrix dq = nn::mlp_backward(s.regressor, grad.regressor, tape.regressor, d_prediction);
  const Eigen::Index d_quality = s.config.quality_dim;
  Matrix dq_raw;
  Matrix de;
  switch (s.config.fusion) {
    case Fusion::debias:
      dq_raw = dq;
      de = nn::mlp_backward(s.bias, grad.bias, tape.bias, -dq);
      break;
    case Fusion::none:
      dq_raw = dq;
      break;
    case Fusion::concat:
      dq_raw = dq.topRows(d_quality);
      de = dq.bottomRows(dq.rows() - d_quality);
      break;
  }
  if (d_embedding && s.config.fusion != Fusion::none) {
    if (de.size() == 0) de = Matrix::Zero(d_embedding->rows(), d_embedding->cols());
    de += *d_embedding;
  }
  if (!s.is_frozen(Component::preference) && de.size() > 0) preference_backward(s, grad, tape.preference, de);
  if (!s.is_frozen(Component::quality)) {
    const Matrix dfeat = nn::dense_backward(s.quality.head, grad.quality.head, tape.quality_features, dq_raw);
    nn::backbone_backward(s.quality.backbone, grad.quality.backbone, tape.quality_backbone, dfeat);
  }
}

PreferenceEmbedding preference_forward(const Image& image, const ModelState& s) {
  const Matrix x = pack_images(std::span(&image, 1), s.config.input_size);
  return {preference_forward_batch(s, x, 1, nullptr).embedding.col(0)};
}

QualityFeature quality_forward(const Image& image, const ModelState& s) {
  const Matrix x = pack_images(std::span(&image, 1), s.config.input_size);
  const Matrix features = nn::backbone_forward(s.quality.backbone, x, input_geometry(s, 1), nullptr);
  return {nn::dense_forward(s.quality.head, features).col(0)};
}

BiasVector bias_predict(const PreferenceEmbedding& e, const ModelState& s) {
  if (e.values.size() != s.config.preference_dim) throw InvalidArgument("embedding length differs from d");
  return {nn::mlp_forward(s.bias, e.values, nullptr).col(0)};
}

DebiasedFeature debias(const QualityFeature& q_raw, const BiasVector& b) {
  if (q_raw.values.size() != b.values.size())
    throw InvalidArgument("quality feature and bias vector lengths differ: " + std::to_string(q_raw.values.size()) +
                          " vs " + std::to_string(b.values.size()));
  return {q_raw.values - b.values};
}

double regress(const DebiasedFeature& q, const ModelState& s) {
  if (q.values.size() != s.config.regressor_input()) throw InvalidArgument("regressor input length mismatch");
  return nn::mlp_forward(s.regressor, q.values, nullptr)(0, 0);
}

double predict(const Image& image, const ModelState& s) {
  const QualityFeature q_raw = quality_forward(image, s);
  switch (s.config.fusion) {
    case Fusion::debias:
      return regress(debias(q_raw, bias_predict(preference_forward(image, s), s)), s);
    case Fusion::none:
      return regress(DebiasedFeature{q_raw.values}, s);
    case Fusion::concat: {
      const PreferenceEmbedding e = preference_forward(image, s);
      nn::Vector joined(q_raw.values.size() + e.values.size());
      joined << q_raw.values, e.values;
      return regress(DebiasedFeature{std::move(joined)}, s);
    }
  }
  throw InvalidArgument("unknown fusion mode");
}

double normalize_mos(double mos, const ModelState& s) {
  const double span = s.mos_max - s.mos_min;
  return span > 0.0 ? (mos - s.mos_min) / span : 0.0;
}

double denormalize_mos(double value, const ModelState& s) { return s.mos_min + value * (s.mos_max - s.mos_min); }

// ---- checkpoints ----------------------------------------------------------

namespace {

constexpr std::string_view kCheckpointMagic = "#eiqa-checkpoint v1";

nlohmann::json config_to_json(const ModelState& s) {
  const ModelConfig& c = s.config;
  nlohmann::json j;
  j["image_size"] = c.image_size;
  j["input_size"] = c.input_size;
  j["preference_dim"] = c.preference_dim;
  j["quality_dim"] = c.quality_dim;
  j["preference_widths"] = c.preference_widths;
  j["quality_widths"] = c.quality_widths;
  j["projection_hidden"] = c.projection_hidden;
  j["regressor_hidden"] = c.regressor_hidden;
  j["classifier_classes"] = c.classifier_classes;
  j["fusion"] = std::string(to_string(c.fusion));
  j["seed"] = c.seed;
  j["frozen"] = s.frozen;
  j["mos_min"] = s.mos_min;
  j["mos_max"] = s.mos_max;
  j["tags"] = s.tags;
  return j;
}

ModelState state_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.image_size = j.at("image_size");
  c.input_size = j.at("input_size");
  c.preference_dim = j.at("preference_dim");
  c.quality_dim = j.at("quality_dim");
  c.preference_widths = j.at("preference_widths").get<std::vector<int>>();
  c.quality_widths = j.at("quality_widths").get<std::vector<int>>();
  c.projection_hidden = j.at("projection_hidden");
  c.regressor_hidden = j.at("regressor_hidden");
  c.classifier_classes = j.at("classifier_classes");
  c.fusion = parse_fusion(j.at("fusion").get<std::string>());
  c.seed = j.at("seed");
  ModelState s = init_model(c);
  s.frozen = j.at("frozen").get<std::array<bool, 4>>();
  s.mos_min = j.at("mos_min");
  s.mos_max = j.at("mos_max");
  s.tags = j.at("tags").get<std::map<std::string, std::string>>();
  return s;
}

}  // namespace

void save_checkpoint(const ModelState& state, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os << kCheckpointMagic << '\n' << config_to_json(state).dump() << '\n';
  for_each_parameter(state, [&](const std::string& name, Component, std::span<const double> p) {
    os << name << ' ' << p.size() << '\n';
    os.write(reinterpret_cast<const char*>(p.data()), static_cast<std::streamsize>(p.size_bytes()));
    os << '\n';
  });
  os << "end\n";
  if (!os) throw IoError("write failed: " + path.string());
}

ModelState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != kCheckpointMagic) throw ParseError(1, "not an eiqa checkpoint: " + path.string());
  if (!std::getline(is, line)) throw ParseError(2, "missing config block");
  ModelState s;
  try {
    s = state_from_json(nlohmann::json::parse(line));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(2, std::string("bad config block: ") + e.what());
  }
  for_each_parameter(s, [&](const std::string& name, Component, std::span<double> p) {
    std::string header;
    if (!std::getline(is, header)) throw ConfigError("checkpoint truncated before " + name);
    std::istringstream hs(header);
    std::string stored;
    std::size_t count = 0;
    hs >> stored >> count;
    if (stored != name || count != p.size())
      throw ConfigError("checkpoint tensor '" + stored + "' (" + std::to_string(count) + ") does not match config '" +
                        name + "' (" + std::to_string(p.size()) + ")");
    is.read(reinterpret_cast<char*>(p.data()), static_cast<std::streamsize>(p.size_bytes()));
    is.get();
    if (!is) throw IoError("checkpoint truncated in " + name);
  });
  if (!std::getline(is, line) || line != "end") throw ConfigError("checkpoint has unexpected trailing tensors");
  return s;
}

ModelState load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected) {
  ModelState s = load_checkpoint(path);
  const ModelConfig& c = s.config;
  auto mismatch = [&](const char* what, int got, int want) {
    throw ConfigError(std::string("checkpoint ") + what + "=" + std::to_string(got) + " but " + std::to_string(want) +
                      " was requested");
  };
  if (c.preference_dim != expected.preference_dim) mismatch("d", c.preference_dim, expected.preference_dim);
  if (c.quality_dim != expected.quality_dim) mismatch("D", c.quality_dim, expected.quality_dim);
  if (c.image_size != expected.image_size) mismatch("image_size", c.image_size, expected.image_size);
  return s;
}

void check_compatible(const ModelState& state, int manifest_image_size) {
  if (state.config.image_size != manifest_image_size)
    throw ConfigError("checkpoint trained on " + std::to_string(state.config.image_size) +
                      "px images but the manifest has " + std::to_string(manifest_image_size) + "px images");
}

}  // namespace eiqa
