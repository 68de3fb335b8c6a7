#include "eiqa/sampler.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <numeric>
#include <set>

#include "eiqa/errors.hpp"
#include "eiqa/rng.hpp"

namespace eiqa {

std::string_view to_string(SamplingStrategy s) {
  switch (s) {
    case SamplingStrategy::random: return "random";
    case SamplingStrategy::algo_balanced: return "algo_balanced";
    case SamplingStrategy::content_controlled: return "content_controlled";
  }
  return "unknown";
}

SamplingStrategy parse_sampling_strategy(std::string_view name) {
  if (name == "random") return SamplingStrategy::random;
  if (name == "algo_balanced") return SamplingStrategy::algo_balanced;
  if (name == "content_controlled") return SamplingStrategy::content_controlled;
  throw InvalidArgument("unknown sampling strategy: " + std::string(name));
}

namespace {

std::map<int, std::vector<std::size_t>> group_by(const Manifest& m, std::span<const std::size_t> pool, bool by_scene) {
  std::map<int, std::vector<std::size_t>> out;
  for (std::size_t idx : pool) {
    const auto& r = m.records.at(idx);
    out[by_scene ? r.scene_id : r.algo_id].push_back(idx);
  }
  return out;
}

std::vector<Batch> random_batches(std::span<const std::size_t> pool, int batch_size, Rng& rng) {
  std::vector<std::size_t> order(pool.begin(), pool.end());
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Batch> batches;
  for (std::size_t start = 0; start + batch_size <= order.size(); start += batch_size)
    batches.push_back(Batch{{order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(start + batch_size)}});
  return batches;
}

std::vector<Batch> balanced_batches(const Manifest& m, std::span<const std::size_t> pool, int batch_size, Rng& rng) {
  auto by_algo = group_by(m, pool, false);
  std::vector<std::deque<std::size_t>> queues;
  for (auto& [algo, idx] : by_algo) {
    std::shuffle(idx.begin(), idx.end(), rng);
    queues.emplace_back(idx.begin(), idx.end());
  }
  const int k = static_cast<int>(queues.size());
  const int base = batch_size / k, extra = batch_size % k;
  std::vector<int> priority(k);
  std::iota(priority.begin(), priority.end(), 0);
  std::shuffle(priority.begin(), priority.end(), rng);

  std::vector<Batch> batches;
  for (int b = 0;; ++b) {
    std::vector<int> classes(k);
    std::iota(classes.begin(), classes.end(), 0);
    // Classes with the most remaining records take the extra slots; ties
    // rotate with the batch counter.
    std::stable_sort(classes.begin(), classes.end(), [&](int x, int y) {
      if (queues[x].size() != queues[y].size()) return queues[x].size() > queues[y].size();
      return (priority[x] + b) % k < (priority[y] + b) % k;
    });
    bool feasible = true;
    for (int i = 0; i < k; ++i) {
      const std::size_t need = static_cast<std::size_t>(base + (i < extra ? 1 : 0));
      if (queues[classes[i]].size() < need) feasible = false;
    }
    if (!feasible) break;
    Batch batch;
    for (int i = 0; i < k; ++i)
      for (int t = 0; t < base + (i < extra ? 1 : 0); ++t) {
        batch.indices.push_back(queues[classes[i]].front());
        queues[classes[i]].pop_front();
      }
    std::shuffle(batch.indices.begin(), batch.indices.end(), rng);
    batches.push_back(std::move(batch));
  }
  return batches;
}

struct SceneGroup {
  int scene_id;
  std::vector<std::size_t> indices;
};

std::vector<Batch> content_batches(const Manifest& m, std::span<const std::size_t> pool, const SamplerConfig& cfg,
                                   Rng& rng) {
  const int per_scene = cfg.algos_per_scene;
  auto by_scene = group_by(m, pool, true);

  std::vector<int> algos;
  for (std::size_t idx : pool) algos.push_back(m.records[idx].algo_id);
  std::sort(algos.begin(), algos.end());
  algos.erase(std::unique(algos.begin(), algos.end()), algos.end());
  std::shuffle(algos.begin(), algos.end(), rng);
  std::map<int, int> rank;
  for (int i = 0; i < static_cast<int>(algos.size()); ++i) rank[algos[i]] = i;

  std::vector<int> scene_order;
  for (const auto& [scene, idx] : by_scene) scene_order.push_back(scene);
  std::shuffle(scene_order.begin(), scene_order.end(), rng);

  // rounds[r] holds the r-th group of every scene, in scene order.
  std::vector<std::vector<SceneGroup>> rounds;
  for (std::size_t p = 0; p < scene_order.size(); ++p) {
    auto records = by_scene[scene_order[p]];
    std::sort(records.begin(), records.end(), [&](std::size_t a, std::size_t b) {
      return rank[m.records[a].algo_id] < rank[m.records[b].algo_id];
    });
    const std::size_t available = records.size();
    const std::size_t offset = (p * per_scene) % available;
    const std::size_t n_groups = available / per_scene;
    if (rounds.size() < n_groups) rounds.resize(n_groups);
    for (std::size_t r = 0; r < n_groups; ++r) {
      SceneGroup g{scene_order[p], {}};
      for (int j = 0; j < per_scene; ++j) g.indices.push_back(records[(offset + r * per_scene + j) % available]);
      rounds[r].push_back(std::move(g));
    }
  }

  std::deque<SceneGroup> pending;
  for (auto& round : rounds)
    for (auto& g : round) pending.push_back(std::move(g));

  std::vector<Batch> batches;
  while (true) {
    Batch batch;
    std::set<int> scenes;
    for (auto it = pending.begin(); it != pending.end() && static_cast<int>(scenes.size()) < cfg.scenes_per_batch;) {
      if (scenes.insert(it->scene_id).second) {
        batch.indices.insert(batch.indices.end(), it->indices.begin(), it->indices.end());
        it = pending.erase(it);
      } else {
        ++it;
      }
    }
    if (static_cast<int>(scenes.size()) < cfg.scenes_per_batch) break;
    batches.push_back(std::move(batch));
  }
  return batches;
}

}  // namespace

void check_sampler_feasible(const Manifest& manifest, std::span<const std::size_t> pool, const SamplerConfig& cfg) {
  if (cfg.batch_size < 2) throw InvalidArgument("batch_size must be >= 2");
  if (pool.size() < static_cast<std::size_t>(cfg.batch_size))
    throw InvalidArgument("pool of " + std::to_string(pool.size()) + " records cannot fill a batch of " +
                          std::to_string(cfg.batch_size));
  for (std::size_t idx : pool)
    if (idx >= manifest.records.size()) throw InvalidArgument("pool index out of range");
  if (cfg.strategy != SamplingStrategy::content_controlled) return;

  if (cfg.algos_per_scene < 2) throw InvalidArgument("algos_per_scene must be >= 2 to form hard negatives");
  if (cfg.scenes_per_batch < 1) throw InvalidArgument("scenes_per_batch must be >= 1");
  if (cfg.scenes_per_batch * cfg.algos_per_scene != cfg.batch_size)
    throw InvalidArgument("content_controlled requires scenes_per_batch * algos_per_scene == batch_size (" +
                          std::to_string(cfg.scenes_per_batch) + " * " + std::to_string(cfg.algos_per_scene) +
                          " != " + std::to_string(cfg.batch_size) + ")");
  const auto by_scene = group_by(manifest, pool, true);
  if (static_cast<int>(by_scene.size()) < cfg.scenes_per_batch)
    throw InvalidArgument("only " + std::to_string(by_scene.size()) + " scenes available, need " +
                          std::to_string(cfg.scenes_per_batch) + " per batch");
  for (const auto& [scene, idx] : by_scene)
    if (static_cast<int>(idx.size()) < cfg.algos_per_scene)
      throw InvalidArgument("scene " + std::to_string(scene) + " has " + std::to_string(idx.size()) +
                            " enhanced versions, need algos_per_scene=" + std::to_string(cfg.algos_per_scene));
}

std::vector<Batch> epoch_batches(const Manifest& manifest, std::span<const std::size_t> pool, const SamplerConfig& cfg,
                                 std::uint64_t epoch) {
  check_sampler_feasible(manifest, pool, cfg);
  Rng rng(derive_seed(cfg.seed, epoch));
  switch (cfg.strategy) {
    case SamplingStrategy::random: return random_batches(pool, cfg.batch_size, rng);
    case SamplingStrategy::algo_balanced: return balanced_batches(manifest, pool, cfg.batch_size, rng);
    case SamplingStrategy::content_controlled: return content_batches(manifest, pool, cfg, rng);
  }
  throw InvalidArgument("unknown sampling strategy");
}

std::vector<Batch> epoch_batches(const Manifest& manifest, const SamplerConfig& cfg, std::uint64_t epoch) {
  std::vector<std::size_t> all(manifest.records.size());
  std::iota(all.begin(), all.end(), 0);
  return epoch_batches(manifest, all, cfg, epoch);
}

BatchDiagnostics verify_batch(const Batch& batch, const Manifest& manifest, const SamplerConfig& cfg) {
  BatchDiagnostics d;
  std::set<int> scenes, algos;
  const auto& idx = batch.indices;
  for (std::size_t i : idx) {
    scenes.insert(manifest.records[i].scene_id);
    algos.insert(manifest.records[i].algo_id);
  }
  d.distinct_scenes = static_cast<int>(scenes.size());
  d.distinct_algos = static_cast<int>(algos.size());
  for (std::size_t a = 0; a < idx.size(); ++a) {
    int positives = 0;
    for (std::size_t b = 0; b < idx.size(); ++b) {
      if (a == b) continue;
      const auto& ra = manifest.records[idx[a]];
      const auto& rb = manifest.records[idx[b]];
      if (ra.algo_id == rb.algo_id) ++positives;
      if (b > a && ra.scene_id == rb.scene_id && ra.algo_id != rb.algo_id) ++d.same_scene_cross_algo_pairs;
    }
    d.positive_set_sizes.push_back(positives);
    if (positives == 0) ++d.empty_positive_count;
  }
  if (cfg.strategy == SamplingStrategy::content_controlled) {
    const std::size_t g = static_cast<std::size_t>(cfg.algos_per_scene);
    if (g == 0 || idx.size() % g != 0) {
      d.group_structure_ok = false;
    } else {
      std::set<int> group_scenes_seen;
      for (std::size_t start = 0; start < idx.size(); start += g) {
        std::set<int> gs, ga;
        for (std::size_t t = start; t < start + g; ++t) {
          gs.insert(manifest.records[idx[t]].scene_id);
          ga.insert(manifest.records[idx[t]].algo_id);
        }
        if (gs.size() != 1 || ga.size() != g || !group_scenes_seen.insert(*gs.begin()).second)
          d.group_structure_ok = false;
      }
    }
  }
  return d;
}

}  // namespace eiqa
