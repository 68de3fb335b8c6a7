#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eiqa/manifest.hpp"

namespace eiqa {

enum class SamplingStrategy { random, algo_balanced, content_controlled };

std::string_view to_string(SamplingStrategy s);
SamplingStrategy parse_sampling_strategy(std::string_view name);

struct SamplerConfig {
  int batch_size = 32;
  int scenes_per_batch = 8;
  int algos_per_scene = 4;
  std::uint64_t seed = 0;
  SamplingStrategy strategy = SamplingStrategy::content_controlled;
};

struct Batch {
  std::vector<std::size_t> indices;  // into manifest.records
  std::size_t size() const noexcept { return indices.size(); }
};

// Plans one epoch over `pool` (indices into manifest.records). Every index
// is emitted at most once and the trailing partial batch is dropped.
//   random:             shuffle, fixed-size chunks
//   algo_balanced:      each batch holds floor(B/K) or ceil(B/K) per algorithm
//   content_controlled: scenes_per_batch groups of algos_per_scene records,
//                       each group one scene under distinct algorithms; group
//                       algorithm windows rotate through a per-epoch
//                       permutation so algorithms recur across groups.
// Throws InvalidArgument for infeasible configurations.
std::vector<Batch> epoch_batches(const Manifest& manifest, std::span<const std::size_t> pool,
                                 const SamplerConfig& cfg, std::uint64_t epoch = 0);
std::vector<Batch> epoch_batches(const Manifest& manifest, const SamplerConfig& cfg, std::uint64_t epoch = 0);

// Checks cfg against the pool before any batch is planned.
void check_sampler_feasible(const Manifest& manifest, std::span<const std::size_t> pool, const SamplerConfig& cfg);

struct BatchDiagnostics {
  int distinct_scenes = 0;
  int distinct_algos = 0;
  // Same scene, different algorithm: the hard negatives.
  long same_scene_cross_algo_pairs = 0;
  std::vector<int> positive_set_sizes;  // |P(i)| per batch position
  int empty_positive_count = 0;
  // content_controlled only: every group of algos_per_scene consecutive
  // entries is one scene under distinct algorithms.
  bool group_structure_ok = true;
};

BatchDiagnostics verify_batch(const Batch& batch, const Manifest& manifest, const SamplerConfig& cfg);

}  // namespace eiqa
