#include "options.hpp"

#include <cstdio>
#include <set>

#include "eiqa/errors.hpp"

namespace eiqa::cli {

TrainConfig TrainOptions::resolve() const {
  TrainConfig out = cfg;
  out.variant = parse_variant(variant);
  out.stage1_sampler = parse_sampling_strategy(stage1_sampler);
  out.stage2_sampler = parse_sampling_strategy(stage2_sampler);
  out.augment_rotation = !no_rotation;
  out.augment_flip = !no_flip;
  return out;
}

void add_train_options(CLI::App& app, TrainOptions& o) {
  auto& c = o.cfg;
  app.add_option("--variant", o.variant, "full|no_preference|preference_concat|cls_preference|joint|two_stage_no_freeze");
  app.add_option("--seed", c.seed, "Training seed")->envname("EIQA_SEED");
  app.add_option("--lr", c.lr, "Adam learning rate");
  app.add_option("--batch-size", c.batch_size);
  app.add_option("--epochs1", c.epochs_stage1, "Preference pretraining epochs");
  app.add_option("--epochs2", c.epochs_stage2, "Quality training epochs");
  app.add_option("--crop", c.crop_size, "Training crop size");
  app.add_flag("--no-rotation", o.no_rotation, "Disable quarter-turn rotation augmentation");
  app.add_flag("--no-flip", o.no_flip, "Disable horizontal flip augmentation");
  app.add_option("--stage1-sampler", o.stage1_sampler, "random|algo_balanced|content_controlled");
  app.add_option("--stage2-sampler", o.stage2_sampler, "random|algo_balanced|content_controlled");
  app.add_option("--scenes-per-batch", c.scenes_per_batch);
  app.add_option("--algos-per-scene", c.algos_per_scene);
  app.add_option("--temperature", c.temperature, "Supervised contrastive temperature");
  app.add_option("--huber-delta", c.huber_delta);
  app.add_option("--plcc-weight", c.plcc_weight);
  app.add_option("--preference-dim", c.preference_dim);
  app.add_option("--quality-dim", c.quality_dim);
  app.add_option("--widths", c.widths, "Backbone channel widths, comma separated")->delimiter(',');
}

void add_split_options(CLI::App& app, SplitOptions& o) {
  app.add_option("--protocol", o.protocol, "standard|kfold_env|algo_disjoint");
  app.add_option("--split-seed", o.split_seed, "Split seed (default: --seed)");
  app.add_option("--test-fraction", o.test_fraction, "Scene fraction held out by the standard protocol");
  app.add_option("--train-algos", o.train_algos, "Training algorithms in the algo_disjoint protocol");
  app.add_option("--folds", o.folds, "Number of environment folds for kfold_env");
  app.add_option("--fold", o.fold, "Fold index for kfold_env");
}

void add_split_overrides(CLI::App& app, SplitOverrides& o) {
  app.add_option("--protocol", o.protocol, "Override the checkpoint's split protocol");
  app.add_option("--split-seed", o.split_seed);
  app.add_option("--test-fraction", o.test_fraction);
  app.add_option("--train-algos", o.train_algos);
  app.add_option("--folds", o.folds);
  app.add_option("--fold", o.fold);
}

SplitPlan make_plan(const Manifest& manifest, const SplitOptions& o, std::uint64_t run_seed) {
  const std::uint64_t seed = o.split_seed.value_or(run_seed);
  switch (parse_protocol(o.protocol)) {
    case Protocol::standard: return standard_split(manifest, o.test_fraction, seed);
    case Protocol::algo_disjoint: return algo_disjoint_split(manifest, o.train_algos, seed);
    case Protocol::kfold_env: {
      auto folds = kfold_env_split(manifest, o.folds);
      if (o.fold < 0 || o.fold >= static_cast<int>(folds.size()))
        throw InvalidArgument("fold " + std::to_string(o.fold) + " outside [0," + std::to_string(folds.size()) + ")");
      return folds[static_cast<std::size_t>(o.fold)];
    }
  }
  throw InvalidArgument("unknown protocol");
}

void tag_split(ModelState& state, const SplitOptions& o, std::uint64_t run_seed) {
  char fraction[32];
  std::snprintf(fraction, sizeof(fraction), "%.17g", o.test_fraction);
  state.tags["protocol"] = o.protocol;
  state.tags["split_seed"] = std::to_string(o.split_seed.value_or(run_seed));
  state.tags["test_fraction"] = fraction;
  state.tags["train_algos"] = std::to_string(o.train_algos);
  state.tags["folds"] = std::to_string(o.folds);
  state.tags["fold"] = std::to_string(o.fold);
}

SplitOptions split_from_tags(const ModelState& state) {
  auto tag = [&](const std::string& key) -> const std::string& {
    const auto it = state.tags.find(key);
    if (it == state.tags.end()) throw ConfigError("checkpoint has no '" + key + "' tag; pass the split flags explicitly");
    return it->second;
  };
  SplitOptions o;
  try {
    o.protocol = tag("protocol");
    o.split_seed = std::stoull(tag("split_seed"));
    o.test_fraction = std::stod(tag("test_fraction"));
    o.train_algos = std::stoi(tag("train_algos"));
    o.folds = std::stoi(tag("folds"));
    o.fold = std::stoi(tag("fold"));
  } catch (const std::logic_error&) {
    throw ConfigError("checkpoint split tags are malformed");
  }
  return o;
}

SplitOptions apply(SplitOptions base, const SplitOverrides& o) {
  if (o.protocol) base.protocol = *o.protocol;
  if (o.split_seed) base.split_seed = *o.split_seed;
  if (o.test_fraction) base.test_fraction = *o.test_fraction;
  if (o.train_algos) base.train_algos = *o.train_algos;
  if (o.folds) base.folds = *o.folds;
  if (o.fold) base.fold = *o.fold;
  return base;
}

namespace {

std::string flag_name(const std::string& token) {
  if (token.rfind("--", 0) != 0) return {};
  return token.substr(2, token.find('=') - 2);
}

}  // namespace

std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::size_t sub = args.size();
  for (std::size_t i = 0; i < args.size(); ++i)
    if (!args[i].empty() && args[i][0] != '-') {
      sub = i;
      break;
    }
  std::string file;
  std::set<std::string> given;
  for (std::size_t i = sub; i < args.size(); ++i) {
    const std::string name = flag_name(args[i]);
    if (name.empty()) continue;
    given.insert(name);
    if (name != "config") continue;
    if (const auto eq = args[i].find('='); eq != std::string::npos)
      file = args[i].substr(eq + 1);
    else if (i + 1 < args.size())
      file = args[i + 1];
  }
  if (file.empty() || sub == args.size()) return args;

  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_file(file);
  } catch (const CLI::FileError& e) {
    throw ConfigError(std::string("cannot read config file: ") + e.what());
  }
  std::vector<std::string> inserted;
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    if (!item.parents.empty() && !(item.parents.size() == 1 && (item.parents[0] == args[sub] || item.parents[0] == "default")))
      continue;
    if (item.name == "config") throw ConfigError("config files cannot include other config files");
    if (given.count(item.name)) continue;
    if (item.inputs.empty() || (item.inputs.size() == 1 && item.inputs[0].empty())) continue;
    if (item.inputs.size() == 1) {
      inserted.push_back("--" + item.name + "=" + item.inputs[0]);
    } else {
      inserted.push_back("--" + item.name);
      inserted.insert(inserted.end(), item.inputs.begin(), item.inputs.end());
    }
  }
  std::vector<std::string> out(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(sub + 1));
  out.insert(out.end(), inserted.begin(), inserted.end());
  out.insert(out.end(), args.begin() + static_cast<std::ptrdiff_t>(sub + 1), args.end());
  return out;
}

}  // namespace eiqa::cli
