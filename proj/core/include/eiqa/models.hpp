#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eiqa/image.hpp"
#include "eiqa/nn.hpp"

namespace eiqa {

// How the preference embedding reaches the regressor.
enum class Fusion {
  debias,  // q = q_raw - g(e)
  none,    // q = q_raw, preference branch unused
  concat,  // regressor reads [q_raw; e]
};

std::string_view to_string(Fusion f);
Fusion parse_fusion(std::string_view name);

struct ModelConfig {
  int image_size = 64;  // dataset resolution
  int input_size = 48;  // encoder input (training crop) resolution
  int preference_dim = 64;
  int quality_dim = 128;
  std::vector<int> preference_widths{8, 16, 32, 64};
  std::vector<int> quality_widths{8, 16, 32, 64};
  int projection_hidden = 64;
  int regressor_hidden = 64;
  int classifier_classes = 0;  // > 0 adds an algorithm-classification head
  Fusion fusion = Fusion::debias;
  std::uint64_t seed = 0;

  int bias_hidden() const { return std::max(preference_dim, quality_dim); }
  int regressor_input() const { return fusion == Fusion::concat ? quality_dim + preference_dim : quality_dim; }
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct PreferenceEncoder {
  nn::ConvBackbone backbone;
  nn::Mlp projection;
  nn::Dense classifier;  // empty unless classifier_classes > 0
};

struct QualityEncoder {
  nn::ConvBackbone backbone;
  nn::Dense head;
};

enum class Component { preference, quality, bias, regressor };
inline constexpr std::array<Component, 4> kComponents{Component::preference, Component::quality, Component::bias,
                                                      Component::regressor};
std::string_view to_string(Component c);

struct ModelState {
  ModelConfig config;
  PreferenceEncoder preference;
  QualityEncoder quality;
  nn::Mlp bias;
  nn::Mlp regressor;
  std::array<bool, 4> frozen{false, false, false, false};
  // Train-split min-max used to map MOS into [0,1] and back.
  double mos_min = 0.0;
  double mos_max = 100.0;
  // Free-form provenance (split protocol, seeds, variant) carried in checkpoints.
  std::map<std::string, std::string> tags;

  bool is_frozen(Component c) const { return frozen[static_cast<std::size_t>(c)]; }
  void set_frozen(Component c, bool value) { frozen[static_cast<std::size_t>(c)] = value; }
};

// Seeded fan-in scaled initialisation.
ModelState init_model(const ModelConfig& config);
// Same architecture, every parameter zero; used as a gradient accumulator.
ModelState zeros_like(const ModelState& state);

// Visits every parameter tensor as a flat span, in a fixed order.
template <typename State, typename Fn>
void for_each_parameter(State& state, Fn&& fn) {
  auto visit = [&](const std::string& name, Component c, auto& tensor) {
    fn(name, c, std::span(tensor.data(), static_cast<std::size_t>(tensor.size())));
  };
  auto dense = [&](const std::string& name, Component c, auto& layer) {
    visit(name + ".weight", c, layer.weight);
    visit(name + ".bias", c, layer.bias);
  };
  auto backbone = [&](const std::string& name, Component c, auto& net) {
    for (std::size_t i = 0; i < net.blocks.size(); ++i) {
      visit(name + ".conv" + std::to_string(i) + ".weight", c, net.blocks[i].weight);
      visit(name + ".conv" + std::to_string(i) + ".bias", c, net.blocks[i].bias);
    }
  };
  backbone("preference.backbone", Component::preference, state.preference.backbone);
  dense("preference.projection.0", Component::preference, state.preference.projection.first);
  dense("preference.projection.1", Component::preference, state.preference.projection.second);
  if (state.preference.classifier.weight.size() > 0)
    dense("preference.classifier", Component::preference, state.preference.classifier);
  backbone("quality.backbone", Component::quality, state.quality.backbone);
  dense("quality.head", Component::quality, state.quality.head);
  dense("bias.0", Component::bias, state.bias.first);
  dense("bias.1", Component::bias, state.bias.second);
  dense("regressor.0", Component::regressor, state.regressor.first);
  dense("regressor.1", Component::regressor, state.regressor.second);
}

std::size_t parameter_count(const ModelState& state, Component c);
// FNV-1a over the raw bytes of a component's parameters.
std::uint64_t parameter_checksum(const ModelState& state, Component c);

// ---- single-image surface -------------------------------------------------

struct PreferenceEmbedding {
  nn::Vector values;  // unit norm, length d
};
struct QualityFeature {
  nn::Vector values;  // length D
};
struct BiasVector {
  nn::Vector values;  // length D
};
struct DebiasedFeature {
  nn::Vector values;  // length D
};

PreferenceEmbedding preference_forward(const Image& image, const ModelState& state);
QualityFeature quality_forward(const Image& image, const ModelState& state);
BiasVector bias_predict(const PreferenceEmbedding& e, const ModelState& state);
DebiasedFeature debias(const QualityFeature& q_raw, const BiasVector& b);
// Normalised MOS space.
double regress(const DebiasedFeature& q, const ModelState& state);

// No-reference inference: the enhanced image is the only input. Returns a
// prediction in normalised MOS space; see denormalize_mos().
double predict(const Image& image, const ModelState& state);

double normalize_mos(double mos, const ModelState& state);
double denormalize_mos(double value, const ModelState& state);

// ---- batched training surface ---------------------------------------------

// Packs same-sized images into a (3, N*H*W) matrix centred at zero.
nn::Matrix pack_images(std::span<const Image> images, int expected_size);

struct PreferenceTape {
  nn::BackboneTape backbone;
  nn::Matrix features;
  nn::MlpTape projection;
  nn::Matrix projected;  // pre-normalisation z
  nn::Matrix embedding;  // e = z / ||z||
};

struct PreferenceOutput {
  nn::Matrix embedding;  // (d, N)
  nn::Matrix logits;     // (K, N) when a classifier head exists
};

PreferenceOutput preference_forward_batch(const ModelState& state, const nn::Matrix& input, int batch,
                                          PreferenceTape* tape);
void preference_backward(const ModelState& state, ModelState& grad, const PreferenceTape& tape,
                         const nn::Matrix& d_embedding, const nn::Matrix* d_logits = nullptr);

struct PipelineTape {
  PreferenceTape preference;
  nn::BackboneTape quality_backbone;
  nn::Matrix quality_features;
  nn::Matrix q_raw;
  nn::MlpTape bias;
  nn::MlpTape regressor;
};

struct PipelineOutput {
  nn::Matrix prediction;  // (1, N), normalised MOS space
  nn::Matrix embedding;   // (d, N); empty when fusion == none
};

PipelineOutput pipeline_forward(const ModelState& state, const nn::Matrix& input, int batch, PipelineTape* tape);
// Back-propagates d(loss)/d(prediction). The preference encoder receives
// gradient only when it is not frozen; `d_embedding` adds an extra
// gradient on e (joint objectives).
void pipeline_backward(const ModelState& state, ModelState& grad, const PipelineTape& tape,
                       const nn::Matrix& d_prediction, const nn::Matrix* d_embedding = nullptr);

// ---- checkpoints ----------------------------------------------------------

void save_checkpoint(const ModelState& state, const std::filesystem::path& path);
ModelState load_checkpoint(const std::filesystem::path& path);
// As above, and ConfigError unless d, D and image size match `expected`.
ModelState load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected);
// ConfigError unless the checkpoint was trained for this image resolution.
void check_compatible(const ModelState& state, int manifest_image_size);

}  // namespace eiqa
