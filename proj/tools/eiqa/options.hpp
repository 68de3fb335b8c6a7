#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "eiqa/evalproto.hpp"
#include "eiqa/train.hpp"

namespace eiqa::cli {

struct TrainOptions {
  TrainConfig cfg;
  std::string variant = "full";
  std::string stage1_sampler = "content_controlled";
  std::string stage2_sampler = "random";
  bool no_rotation = false;
  bool no_flip = false;

  // Parses the string-valued fields into a TrainConfig.
  TrainConfig resolve() const;
};

void add_train_options(CLI::App& app, TrainOptions& options);

struct SplitOptions {
  std::string protocol = "standard";
  std::optional<std::uint64_t> split_seed;  // defaults to the run seed
  double test_fraction = kDefaultTestFraction;
  int train_algos = 8;
  int folds = 5;
  int fold = 0;
};

void add_split_options(CLI::App& app, SplitOptions& options);
SplitPlan make_plan(const Manifest& manifest, const SplitOptions& options, std::uint64_t run_seed);

// Split settings are stored in checkpoint tags so eval can rebuild the plan.
void tag_split(ModelState& state, const SplitOptions& options, std::uint64_t run_seed);
SplitOptions split_from_tags(const ModelState& state);

// Eval flags that, when present, override the split recorded in the checkpoint.
struct SplitOverrides {
  std::optional<std::string> protocol;
  std::optional<std::uint64_t> split_seed;
  std::optional<double> test_fraction;
  std::optional<int> train_algos;
  std::optional<int> folds;
  std::optional<int> fold;
};

void add_split_overrides(CLI::App& app, SplitOverrides& overrides);
SplitOptions apply(SplitOptions base, const SplitOverrides& overrides);

// Inlines `--config FILE` as `--key=value` arguments placed directly after the
// subcommand name. Keys the user passed explicitly are skipped, so flags win
// over the file. Accepts flat `key = value` lines or a section named after
// the subcommand.
std::vector<std::string> expand_config(const std::vector<std::string>& args);

}  // namespace eiqa::cli
