#include <algorithm>
#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "eiqa/errors.hpp"

using namespace eiqa;
using namespace eiqa::cli;

namespace {

struct Common {
  std::filesystem::path out;
  std::string config;
  bool strict = false;
};

void add_common(CLI::App& sub, Common& c) {
  sub.add_option("--out", c.out, "Output root")->required();
  sub.add_option("--config", c.config, "Flat key = value file; keys are long flag names")->configurable(false);
  sub.add_flag("--strict-determinism", c.strict, "Zero wall-clock fields so reruns are byte-identical");
}

int fail(int code, const std::string& message) {
  std::cerr << "error: " << message << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Preference-guided debiasing for enhanced-image quality assessment"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version_tag());
  app.option_defaults()->always_capture_default();

  Common common;
  DatasetConfig dataset;
  TrainOptions train;
  SplitOptions split;
  SplitOverrides overrides;
  AblateOptions ablate;
  std::filesystem::path data;
  std::optional<std::filesystem::path> pretrained, checkpoint;

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic bias-controlled dataset");
  add_common(*gen, common);
  gen->add_option("--scenes", dataset.n_scenes, "Number of raw scenes (multiple of 10)");
  gen->add_option("--algos", dataset.k_algorithms, "Number of enhancement operators");
  gen->add_option("--size", dataset.size, "Image side length in pixels");
  gen->add_option("--seed", dataset.seed, "Generation seed")->envname("EIQA_SEED");

  auto* pre = app.add_subcommand("pretrain", "Stage 1: learn the preference space");
  add_common(*pre, common);
  pre->add_option("--data", data, "Dataset directory")->required();
  add_train_options(*pre, train);
  add_split_options(*pre, split);

  auto* tr = app.add_subcommand("train", "Stage 2: train the debiased quality branch");
  add_common(*tr, common);
  tr->add_option("--data", data, "Dataset directory")->required();
  tr->add_option("--pretrained", pretrained, "Stage-1 checkpoint (default: <out>/checkpoints/pretrain.ckpt)");
  add_train_options(*tr, train);
  add_split_options(*tr, split);

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on its test split");
  add_common(*ev, common);
  ev->add_option("--data", data, "Dataset directory")->required();
  ev->add_option("--checkpoint", checkpoint, "Checkpoint (default: <out>/checkpoints/model.ckpt)");
  add_split_overrides(*ev, overrides);

  auto* ab = app.add_subcommand("ablate", "Run the variant grid over seeds");
  add_common(*ab, common);
  ab->add_option("--data", data, "Dataset directory")->required();
  ab->add_option("--seeds", ablate.seeds, "Seeds per cell, starting at --seed");
  ab->add_option("--parallel", ablate.parallel, "Worker processes");
  ab->add_option("--axes", ablate.axes, "debiasing,representation,training,sampling")->delimiter(',');
  ab->add_option("--test-fraction", ablate.test_fraction, "Scene fraction held out by the standard protocol");
  ab->add_option("--train-algos", ablate.train_algos, "Training algorithms in the algo_disjoint protocol");
  add_train_options(*ab, train);

  auto* rep = app.add_subcommand("report", "Plot and tabulate eval and ablate artifacts");
  add_common(*rep, common);

  try {
    auto args = expand_config(std::vector<std::string>(argv + 1, argv + argc));
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const ConfigError& e) {
    return fail(kExitUsage, e.what());
  }

  CLI::App* sub = app.get_subcommands().front();
  RunContext ctx;
  ctx.command = sub->get_name();
  ctx.config_snapshot = sub->config_to_str(true, false);
  ctx.out = common.out;
  ctx.strict_determinism = common.strict;

  try {
    if (sub == gen) return cmd_gen_data(ctx, dataset);
    if (sub == pre) return cmd_pretrain(ctx, data, train, split);
    if (sub == tr) return cmd_train(ctx, data, train, split, pretrained);
    if (sub == ev) return cmd_eval(ctx, data, checkpoint, overrides);
    if (sub == ab) return cmd_ablate(ctx, data, train, ablate);
    if (sub == rep) return cmd_report(ctx);
  } catch (const NumericalError& e) {
    return fail(kExitNumerical, "training diverged at epoch " + std::to_string(e.epoch()) + ": " + e.what());
  } catch (const DegenerateInput& e) {
    return fail(kExitNumerical, e.what());
  } catch (const ValidationError& e) {
    std::string message = e.what();
    for (std::size_t i = 0; i < e.items().size() && i < 10; ++i) message += "\n  " + e.items()[i];
    return fail(kExitUsage, message);
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(kExitUsage, e.what());
  } catch (const std::exception& e) {
    return fail(kExitUsage, e.what());
  }
  return kExitUsage;
}
