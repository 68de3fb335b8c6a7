#include "eiqa/evalproto.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <tuple>

#include "eiqa/errors.hpp"
#include "eiqa/rng.hpp"

namespace eiqa {

std::string_view to_string(Protocol p) {
  switch (p) {
    case Protocol::standard: return "standard";
    case Protocol::kfold_env: return "kfold_env";
    case Protocol::algo_disjoint: return "algo_disjoint";
  }
  return "unknown";
}

Protocol parse_protocol(std::string_view name) {
  if (name == "standard") return Protocol::standard;
  if (name == "kfold_env") return Protocol::kfold_env;
  if (name == "algo_disjoint") return Protocol::algo_disjoint;
  throw InvalidArgument("unknown protocol: " + std::string(name));
}

SplitPlan standard_split(const Manifest& m, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw InvalidArgument("test_fraction must be in (0, 1)");
  auto scenes = scene_ids(m);
  Rng rng(derive_seed(seed, 0x535444ULL));  // "STD"
  std::shuffle(scenes.begin(), scenes.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::lround(test_fraction * static_cast<double>(scenes.size())));
  if (n_test == 0 || n_test >= scenes.size()) throw InvalidArgument("test_fraction leaves an empty side");
  const std::set<int> test_scenes(scenes.begin(), scenes.begin() + static_cast<std::ptrdiff_t>(n_test));
  SplitPlan plan;
  plan.protocol = Protocol::standard;
  plan.seed = seed;
  for (std::size_t i = 0; i < m.records.size(); ++i)
    (test_scenes.count(m.records[i].scene_id) ? plan.test_indices : plan.train_indices).push_back(i);
  return plan;
}

std::vector<SplitPlan> kfold_env_split(const Manifest& m, int k) {
  if (k < 2) throw InvalidArgument("k-fold needs k >= 2");
  const auto envs = env_ids(m);
  if (static_cast<int>(envs.size()) < k)
    throw InvalidArgument("only " + std::to_string(envs.size()) + " environments for " + std::to_string(k) + " folds");
  std::map<int, int> fold_of;
  const std::size_t n = envs.size();
  for (int f = 0; f < k; ++f) {
    const std::size_t lo = n * f / k, hi = n * (f + 1) / k;
    for (std::size_t i = lo; i < hi; ++i) fold_of[envs[i]] = f;
  }
  std::vector<SplitPlan> plans(k);
  for (int f = 0; f < k; ++f) {
    plans[f].protocol = Protocol::kfold_env;
    plans[f].fold_id = f;
  }
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    const int fold = fold_of.at(m.records[i].env_id);
    for (int f = 0; f < k; ++f) (f == fold ? plans[f].test_indices : plans[f].train_indices).push_back(i);
  }
  return plans;
}

SplitPlan algo_disjoint_split(const Manifest& m, int n_train_algos, std::uint64_t seed) {
  auto algos = algo_ids(m);
  if (n_train_algos < 1 || n_train_algos >= static_cast<int>(algos.size()))
    throw InvalidArgument("n_train_algos must be in [1, K-1] with K=" + std::to_string(algos.size()));
  Rng rng(derive_seed(seed, 0x414C474FULL));  // "ALGO"
  std::shuffle(algos.begin(), algos.end(), rng);
  SplitPlan plan;
  plan.protocol = Protocol::algo_disjoint;
  plan.seed = seed;
  plan.train_algorithms.assign(algos.begin(), algos.begin() + n_train_algos);
  plan.test_algorithms.assign(algos.begin() + n_train_algos, algos.end());
  std::sort(plan.train_algorithms.begin(), plan.train_algorithms.end());
  std::sort(plan.test_algorithms.begin(), plan.test_algorithms.end());
  const std::set<int> train(plan.train_algorithms.begin(), plan.train_algorithms.end());
  for (std::size_t i = 0; i < m.records.size(); ++i)
    (train.count(m.records[i].algo_id) ? plan.train_indices : plan.test_indices).push_back(i);
  return plan;
}

void check_split(const Manifest& m, const SplitPlan& plan) {
  std::set<std::size_t> train(plan.train_indices.begin(), plan.train_indices.end());
  for (std::size_t i : plan.test_indices) {
    if (i >= m.records.size()) throw ValidationError("test index out of range");
    if (train.count(i)) throw ValidationError("record " + std::to_string(i) + " is in both train and test");
  }
  auto keys = [&](const std::vector<std::size_t>& idx, auto proj) {
    std::set<int> s;
    for (std::size_t i : idx) s.insert(proj(m.records.at(i)));
    return s;
  };
  auto overlap = [](const std::set<int>& a, const std::set<int>& b) {
    return std::any_of(a.begin(), a.end(), [&](int v) { return b.count(v) > 0; });
  };
  auto scene = [](const SampleRecord& r) { return r.scene_id; };
  auto algo = [](const SampleRecord& r) { return r.algo_id; };
  auto env = [](const SampleRecord& r) { return r.env_id; };
  switch (plan.protocol) {
    case Protocol::standard:
      if (overlap(keys(plan.train_indices, scene), keys(plan.test_indices, scene)))
        throw ValidationError("a scene spans train and test");
      break;
    case Protocol::kfold_env:
      if (overlap(keys(plan.train_indices, env), keys(plan.test_indices, env)))
        throw ValidationError("an environment spans train and test");
      if (overlap(keys(plan.train_indices, scene), keys(plan.test_indices, scene)))
        throw ValidationError("a scene spans train and test");
      break;
    case Protocol::algo_disjoint:
      if (overlap(keys(plan.train_indices, algo), keys(plan.test_indices, algo)))
        throw ValidationError("an algorithm spans train and test");
      break;
  }
}

Evaluation evaluate(const Scorer& scorer, const Dataset& data, const SplitPlan& plan) {
  if (plan.test_indices.size() < 2) throw InvalidArgument("evaluation needs at least 2 test records");
  Evaluation out;
  std::vector<double> predicted, mos;
  for (std::size_t idx : plan.test_indices) {
    const double p = scorer(data.image(idx));
    const double y = data.manifest().records.at(idx).mos;
    out.predictions.push_back({idx, p, y});
    predicted.push_back(p);
    mos.push_back(y);
  }
  out.report = correlation_report(predicted, mos);
  return out;
}

Scorer model_scorer(const ModelState& state) {
  return [&state](const Image& image) {
    const Image input = image.height() == state.config.input_size ? image : center_crop(image, state.config.input_size);
    return denormalize_mos(predict(input, state), state);
  };
}

Evaluation evaluate(const ModelState& state, const Dataset& data, const SplitPlan& plan) {
  check_compatible(state, data.manifest().image_size);
  return evaluate(model_scorer(state), data, plan);
}

DropReport drop_report(const EvalReport& standard, const EvalReport& unseen) {
  return {drop(standard.srcc, unseen.srcc), drop(standard.plcc, unseen.plcc), drop(standard.krcc, unseen.krcc)};
}

namespace {
std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}
}  // namespace

std::string format_eval_table(const std::vector<std::pair<std::string, EvalReport>>& rows) {
  std::string out = "Method\tSRCC\tPLCC\tKRCC\tN\n";
  for (const auto& [label, r] : rows)
    out += label + '\t' + fixed4(r.srcc) + '\t' + fixed4(r.plcc) + '\t' + fixed4(r.krcc) + '\t' + std::to_string(r.n) + '\n';
  return out;
}

std::string format_drop_table(const std::vector<std::tuple<std::string, EvalReport, EvalReport>>& rows) {
  std::string out =
      "Method\tSRCC_Standard\tSRCC_Unseen\tSRCC_Drop\tPLCC_Standard\tPLCC_Unseen\tPLCC_Drop\tKRCC_Standard\t"
      "KRCC_Unseen\tKRCC_Drop\n";
  for (const auto& [label, std_r, unseen_r] : rows) {
    const DropReport d = drop_report(std_r, unseen_r);
    out += label + '\t' + fixed4(std_r.srcc) + '\t' + fixed4(unseen_r.srcc) + '\t' + fixed4(d.srcc) + '\t' +
           fixed4(std_r.plcc) + '\t' + fixed4(unseen_r.plcc) + '\t' + fixed4(d.plcc) + '\t' + fixed4(std_r.krcc) +
           '\t' + fixed4(unseen_r.krcc) + '\t' + fixed4(d.krcc) + '\n';
  }
  return out;
}

EvalReport mean_report(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw InvalidArgument("no reports to average");
  EvalReport m;
  for (const auto& r : reports) {
    m.srcc += r.srcc;
    m.plcc += r.plcc;
    m.krcc += r.krcc;
    m.n += r.n;
  }
  const double k = static_cast<double>(reports.size());
  m.srcc /= k;
  m.plcc /= k;
  m.krcc /= k;
  m.n /= reports.size();
  return m;
}

}  // namespace eiqa
