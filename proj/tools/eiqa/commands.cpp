#include "commands.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "eiqa/errors.hpp"
#include "eiqa/models.hpp"

namespace eiqa::cli {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  os << text;
  if (!os) throw IoError("cannot write " + path.string());
}

Dataset load_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / kManifestFileName))
    throw IoError("no dataset manifest at " + (dir / kManifestFileName).string());
  return Dataset::load(dir);
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) h = (h ^ c) * 1099511628211ull;
  return h;
}

namespace {

std::filesystem::path require_file(const std::filesystem::path& path, const char* what) {
  if (!std::filesystem::exists(path)) throw IoError(std::string(what) + " not found: " + path.string());
  return path;
}

void save_training(const RunContext& ctx, const ModelState& state, const TrainLog& log,
                   const std::filesystem::path& checkpoint, const std::filesystem::path& log_path) {
  std::filesystem::create_directories((ctx.out / checkpoint).parent_path());
  save_checkpoint(state, ctx.out / checkpoint);
  write_text(ctx.out / log_path, to_jsonl(log, !ctx.strict_determinism));
}

void print_last_epoch(const TrainLog& log) {
  if (log.epochs.empty()) {
    std::cout << "no epochs run\n";
    return;
  }
  const auto& e = log.epochs.back();
  std::printf("stage %d epoch %d: loss %.6f over %d batches\n", e.stage, e.epoch, e.loss, e.batches);
}

bool same_split(const SplitOptions& a, const SplitOptions& b) {
  if (a.protocol != b.protocol || a.split_seed != b.split_seed) return false;
  switch (parse_protocol(a.protocol)) {
    case Protocol::standard: return a.test_fraction == b.test_fraction;
    case Protocol::algo_disjoint: return a.train_algos == b.train_algos;
    case Protocol::kfold_env: return a.folds == b.folds && a.fold == b.fold;
  }
  return false;
}

}  // namespace

int cmd_gen_data(const RunContext& ctx, DatasetConfig config) {
  config.out_dir = ctx.out;
  const Manifest m = build_dataset(config);
  const std::string text = format_manifest(m);
  std::printf("%zu images, %zu scenes, %zu algorithms, %zu environments\n", m.records.size(), scene_ids(m).size(),
              algo_ids(m).size(), env_ids(m).size());
  std::printf("manifest %s fnv1a %016llx\n", (ctx.out / kManifestFileName).string().c_str(),
              static_cast<unsigned long long>(fnv1a(text)));
  write_run_manifest(ctx, {{config.seed}, {kManifestFileName, "images"}});
  return kExitOk;
}

int cmd_pretrain(const RunContext& ctx, const std::filesystem::path& data, const TrainOptions& train,
                 const SplitOptions& split) {
  const TrainConfig cfg = train.resolve();
  if (!uses_pretraining(cfg.variant))
    throw ConfigError("variant " + std::string(to_string(cfg.variant)) + " has no pretraining stage");
  const Dataset dataset = load_dataset(data);
  const SplitPlan plan = make_plan(dataset.manifest(), split, cfg.seed);
  TrainResult result = pretrain_preference(dataset, plan, cfg);
  tag_split(result.state, split, cfg.seed);
  save_training(ctx, result.state, result.log, layout::kPretrainCheckpoint, layout::kPretrainLog);
  print_last_epoch(result.log);
  write_run_manifest(ctx, {{cfg.seed, plan.seed}, {layout::kPretrainCheckpoint, layout::kPretrainLog}});
  return kExitOk;
}

int cmd_train(const RunContext& ctx, const std::filesystem::path& data, const TrainOptions& train,
              const SplitOptions& split, std::optional<std::filesystem::path> pretrained) {
  const TrainConfig cfg = train.resolve();
  const Dataset dataset = load_dataset(data);
  const SplitPlan plan = make_plan(dataset.manifest(), split, cfg.seed);

  TrainResult result;
  if (cfg.variant == Variant::joint) {
    result = train_joint(dataset, plan, cfg);
  } else if (!uses_pretraining(cfg.variant)) {
    result = train_quality(dataset, plan, nullptr, cfg);
  } else {
    const auto path = require_file(pretrained.value_or(ctx.out / layout::kPretrainCheckpoint), "pretrained checkpoint");
    const ModelState pre = load_checkpoint(path, model_config_for(cfg, dataset.manifest()));
    SplitOptions wanted = split;
    wanted.split_seed = split.split_seed.value_or(cfg.seed);
    if (!same_split(split_from_tags(pre), wanted))
      throw ConfigError("pretrained checkpoint " + path.string() + " was trained on a different split");
    result = train_quality(dataset, plan, &pre, cfg);
  }
  tag_split(result.state, split, cfg.seed);
  save_training(ctx, result.state, result.log, layout::kModelCheckpoint, layout::kTrainLog);
  print_last_epoch(result.log);
  write_run_manifest(ctx, {{cfg.seed, plan.seed}, {layout::kModelCheckpoint, layout::kTrainLog}});
  return kExitOk;
}

int cmd_eval(const RunContext& ctx, const std::filesystem::path& data, std::optional<std::filesystem::path> checkpoint,
             const SplitOverrides& overrides) {
  const auto path = require_file(checkpoint.value_or(ctx.out / layout::kModelCheckpoint), "checkpoint");
  const Dataset dataset = load_dataset(data);
  const ModelState state = load_checkpoint(path);
  check_compatible(state, dataset.manifest().image_size);

  SplitOptions base;
  if (state.tags.count("test_fraction")) {
    base = split_from_tags(state);
  } else if (!overrides.protocol) {
    throw ConfigError("checkpoint " + path.string() + " records no split; pass --protocol and related flags");
  }
  const SplitOptions split = apply(base, overrides);
  const SplitPlan plan = make_plan(dataset.manifest(), split, split.split_seed.value_or(0));
  const Evaluation ev = evaluate(state, dataset, plan);

  const auto variant = state.tags.count("variant") ? state.tags.at("variant") : std::string("model");
  const std::string table = format_eval_table({{variant, ev.report}});
  write_text(ctx.out / layout::kEvalReport, table);

  std::string predictions = "index\tscene_id\talgo_id\tmos\tpredicted\n";
  char line[160];
  for (const auto& p : ev.predictions) {
    const auto& r = dataset.manifest().records[p.index];
    std::snprintf(line, sizeof(line), "%zu\t%d\t%d\t%.4f\t%.6f\n", p.index, r.scene_id, r.algo_id, p.mos, p.predicted);
    predictions += line;
  }
  write_text(ctx.out / layout::kEvalPredictions, predictions);
  std::cout << table;
  write_run_manifest(ctx, {{plan.seed}, {layout::kEvalReport, layout::kEvalPredictions}});
  return kExitOk;
}

}  // namespace eiqa::cli
