#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "eiqa/synthdata.hpp"
#include "options.hpp"
#include "run_manifest.hpp"

namespace eiqa::cli {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;

// Fixed layout under --out.
namespace layout {
inline const std::filesystem::path kPretrainCheckpoint = "checkpoints/pretrain.ckpt";
inline const std::filesystem::path kModelCheckpoint = "checkpoints/model.ckpt";
inline const std::filesystem::path kPretrainLog = "logs/pretrain.jsonl";
inline const std::filesystem::path kTrainLog = "logs/train.jsonl";
inline const std::filesystem::path kEvalReport = "eval/report.tsv";
inline const std::filesystem::path kEvalPredictions = "eval/predictions.tsv";
inline const std::filesystem::path kAblateDir = "ablate";
inline const std::filesystem::path kReportDir = "report";
}  // namespace layout

int cmd_gen_data(const RunContext& ctx, DatasetConfig config);
int cmd_pretrain(const RunContext& ctx, const std::filesystem::path& data, const TrainOptions& train,
                 const SplitOptions& split);
int cmd_train(const RunContext& ctx, const std::filesystem::path& data, const TrainOptions& train,
              const SplitOptions& split, std::optional<std::filesystem::path> pretrained);
int cmd_eval(const RunContext& ctx, const std::filesystem::path& data, std::optional<std::filesystem::path> checkpoint,
             const SplitOverrides& overrides);

struct AblateOptions {
  int seeds = 1;
  int parallel = 1;
  std::vector<std::string> axes{"debiasing", "representation", "training", "sampling"};
  double test_fraction = kDefaultTestFraction;
  int train_algos = 8;
};

int cmd_ablate(const RunContext& ctx, const std::filesystem::path& data, const TrainOptions& train,
               const AblateOptions& options);
int cmd_report(const RunContext& ctx);

// Shared helpers.
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);
Dataset load_dataset(const std::filesystem::path& dir);
// FNV-1a, printed so reruns can be compared at a glance.
std::uint64_t fnv1a(const std::string& text);

}  // namespace eiqa::cli
