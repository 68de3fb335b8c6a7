#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "eiqa/manifest.hpp"
#include "eiqa/metrics.hpp"
#include "eiqa/models.hpp"

namespace eiqa {

enum class Protocol { standard, kfold_env, algo_disjoint };

std::string_view to_string(Protocol p);
Protocol parse_protocol(std::string_view name);

struct SplitPlan {
  Protocol protocol = Protocol::standard;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
  int fold_id = -1;                  // kfold_env only
  std::vector<int> train_algorithms;  // algo_disjoint only
  std::vector<int> test_algorithms;
  std::uint64_t seed = 0;
};

inline constexpr double kDefaultTestFraction = 0.2;

// Scene-level random split: every scene lands wholly in train or test.
// round(test_fraction * n_scenes) scenes go to test.
SplitPlan standard_split(const Manifest& m, double test_fraction, std::uint64_t seed);

// Sorted env ids are cut into k contiguous groups (sizes differ by <= 1);
// fold i tests on group i.
std::vector<SplitPlan> kfold_env_split(const Manifest& m, int k);

// A seeded choice of n_train_algos algorithms trains; every record of the
// remaining algorithms is test, regardless of scene.
SplitPlan algo_disjoint_split(const Manifest& m, int n_train_algos, std::uint64_t seed);

// Throws ValidationError if the plan leaks scenes (standard, kfold_env),
// algorithms or environments across the split, or overlaps.
void check_split(const Manifest& m, const SplitPlan& plan);

// Scores an enhanced image on the raw MOS scale. The signature admits the
// image only: no raw scene, no algorithm label.
using Scorer = std::function<double(const Image&)>;

struct Prediction {
  std::size_t index = 0;
  double predicted = 0.0;
  double mos = 0.0;
};

struct Evaluation {
  EvalReport report;
  std::vector<Prediction> predictions;
};

// Runs the scorer over the plan's test records and correlates with MOS.
// Degenerate predictions surface as DegenerateInput.
Evaluation evaluate(const Scorer& scorer, const Dataset& data, const SplitPlan& plan);
// Center-crops to the model input, predicts, and denormalises.
Evaluation evaluate(const ModelState& state, const Dataset& data, const SplitPlan& plan);
Scorer model_scorer(const ModelState& state);

struct DropReport {
  double srcc = 0.0;
  double plcc = 0.0;
  double krcc = 0.0;
};

DropReport drop_report(const EvalReport& standard, const EvalReport& unseen);

// Tab-separated tables. `rows` pairs a method label with its reports.
std::string format_eval_table(const std::vector<std::pair<std::string, EvalReport>>& rows);
std::string format_drop_table(
    const std::vector<std::tuple<std::string, EvalReport, EvalReport>>& rows);  // label, standard, unseen

EvalReport mean_report(const std::vector<EvalReport>& reports);

}  // namespace eiqa
