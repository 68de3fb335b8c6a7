#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>

#include "commands.hpp"
#include "eiqa/errors.hpp"
#include "json.hpp"

namespace eiqa::cli {

namespace {

struct Row {
  std::string label;
  Variant variant;
  std::optional<SamplingStrategy> sampler;  // nullopt: the run's --stage1-sampler
};

struct Axis {
  std::string name;
  std::vector<Row> rows;
};

const std::vector<Axis>& all_axes() {
  static const std::vector<Axis> axes{
      {"debiasing",
       {{"full", Variant::full, {}},
        {"preference_concat", Variant::preference_concat, {}},
        {"no_preference", Variant::no_preference, {}}}},
      {"representation",
       {{"full_supcon", Variant::full, {}},
        {"cls_preference", Variant::cls_preference, {}},
        {"no_preference", Variant::no_preference, {}}}},
      {"training",
       {{"full_two_stage_freeze", Variant::full, {}},
        {"two_stage_no_freeze", Variant::two_stage_no_freeze, {}},
        {"joint", Variant::joint, {}},
        {"no_preference", Variant::no_preference, {}}}},
      {"sampling",
       {{"full_content_controlled", Variant::full, SamplingStrategy::content_controlled},
        {"full_algo_balanced", Variant::full, SamplingStrategy::algo_balanced},
        {"full_random", Variant::full, SamplingStrategy::random},
        {"no_preference", Variant::no_preference, {}}}},
  };
  return axes;
}

const std::vector<Row>& drop_rows() {
  static const std::vector<Row> rows{{"full", Variant::full, {}},
                                     {"preference_concat", Variant::preference_concat, {}},
                                     {"no_preference", Variant::no_preference, {}}};
  return rows;
}

struct Cell {
  Variant variant;
  SamplingStrategy sampler;
  Protocol protocol;
  std::uint64_t seed;

  std::string name() const {
    return std::string(to_string(variant)) + "." + std::string(to_string(sampler)) + "." +
           std::string(to_string(protocol)) + ".s" + std::to_string(seed);
  }
};

struct CellResult {
  bool ok = false;
  EvalReport report;
  std::string error;
  int exit_code = 0;
};

Cell make_cell(const Row& row, const TrainConfig& base, Protocol protocol, std::uint64_t seed) {
  SamplingStrategy sampler = row.sampler.value_or(base.stage1_sampler);
  if (!uses_pretraining(row.variant) && row.variant != Variant::joint) sampler = base.stage1_sampler;
  return {row.variant, sampler, protocol, seed};
}

TrainConfig cell_config(const TrainConfig& base, const Cell& c) {
  TrainConfig cfg = base;
  cfg.variant = c.variant;
  cfg.stage1_sampler = c.sampler;
  cfg.seed = c.seed;
  return cfg;
}

SplitPlan cell_plan(const Manifest& m, const Cell& c, const AblateOptions& o) {
  if (c.protocol == Protocol::algo_disjoint) return algo_disjoint_split(m, o.train_algos, c.seed);
  return standard_split(m, o.test_fraction, c.seed);
}

// Everything that determines a cell's result; cached results are reused only
// when this matches.
std::string fingerprint(const TrainConfig& cfg, const Cell& c, const AblateOptions& o, const std::string& manifest) {
  nlohmann::ordered_json j;
  j["cell"] = c.name();
  j["manifest_fnv1a"] = fnv1a(manifest);
  j["lr"] = cfg.lr;
  j["batch_size"] = cfg.batch_size;
  j["epochs"] = {cfg.epochs_stage1, cfg.epochs_stage2};
  j["crop"] = cfg.crop_size;
  j["augment"] = {cfg.augment_rotation, cfg.augment_flip};
  j["stage2_sampler"] = to_string(cfg.stage2_sampler);
  j["groups"] = {cfg.scenes_per_batch, cfg.algos_per_scene};
  j["loss"] = {cfg.temperature, cfg.huber_delta, cfg.plcc_weight};
  j["dims"] = {cfg.preference_dim, cfg.quality_dim};
  j["widths"] = cfg.widths;
  j["split"] = c.protocol == Protocol::algo_disjoint ? nlohmann::ordered_json(o.train_algos)
                                                     : nlohmann::ordered_json(o.test_fraction);
  return j.dump();
}

void write_result(const std::filesystem::path& dir, const std::string& print, const CellResult& r) {
  nlohmann::ordered_json j;
  j["fingerprint"] = print;
  j["status"] = r.ok ? "ok" : "failed";
  if (r.ok) {
    j["srcc"] = r.report.srcc;
    j["plcc"] = r.report.plcc;
    j["krcc"] = r.report.krcc;
    j["n"] = r.report.n;
  } else {
    j["error"] = r.error;
    j["exit_code"] = r.exit_code;
  }
  write_text(dir / "result.json", j.dump(2) + "\n");
}

std::optional<std::pair<std::string, CellResult>> read_result(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "result.json")) return std::nullopt;
  try {
    const auto j = nlohmann::json::parse(read_text(dir / "result.json"));
    CellResult r;
    r.ok = j.at("status") == "ok";
    if (r.ok) {
      r.report.srcc = j.at("srcc");
      r.report.plcc = j.at("plcc");
      r.report.krcc = j.at("krcc");
      r.report.n = j.at("n");
    } else {
      r.error = j.at("error");
      r.exit_code = j.at("exit_code");
    }
    return std::make_pair(j.at("fingerprint").get<std::string>(), r);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

int run_cell(const Dataset& data, const Cell& c, const TrainConfig& cfg, const AblateOptions& o,
             const std::filesystem::path& dir, const std::string& print, bool strict) {
  CellResult r;
  try {
    const VariantResult v = run_variant(data, cell_plan(data.manifest(), c, o), cfg);
    write_text(dir / "log.jsonl", to_jsonl(v.log, !strict));
    r.ok = true;
    r.report = v.evaluation.report;
  } catch (const NumericalError& e) {
    r.error = std::string(e.what()) + " (epoch " + std::to_string(e.epoch()) + ")";
    r.exit_code = kExitNumerical;
  } catch (const DegenerateInput& e) {
    r.error = e.what();
    r.exit_code = kExitNumerical;
  } catch (const std::exception& e) {
    r.error = e.what();
    r.exit_code = kExitUsage;
  }
  write_result(dir, print, r);
  return r.exit_code;
}

std::string row_label(const std::string& label, std::size_t ok, std::size_t total) {
  if (ok == total) return label;
  return label + "*" + std::to_string(total - ok) + "_failed";
}

}  // namespace

int cmd_ablate(const RunContext& ctx, const std::filesystem::path& data_dir, const TrainOptions& train,
               const AblateOptions& o) {
  if (o.seeds < 1) throw InvalidArgument("--seeds must be >= 1");
  if (o.parallel < 1) throw InvalidArgument("--parallel must be >= 1");
  std::vector<const Axis*> axes;
  for (const auto& name : o.axes) {
    const auto it = std::find_if(all_axes().begin(), all_axes().end(), [&](const Axis& a) { return a.name == name; });
    if (it == all_axes().end()) throw InvalidArgument("unknown ablation axis: " + name);
    axes.push_back(&*it);
  }
  const TrainConfig base = train.resolve();
  const Dataset data = load_dataset(data_dir);
  const std::string manifest_text = format_manifest(data.manifest());
  std::vector<std::uint64_t> seeds;
  for (int s = 0; s < o.seeds; ++s) seeds.push_back(base.seed + static_cast<std::uint64_t>(s));

  std::vector<Cell> cells;
  std::set<std::string> seen;
  auto want = [&](const Row& row, Protocol p) {
    for (auto seed : seeds) {
      const Cell c = make_cell(row, base, p, seed);
      if (seen.insert(c.name()).second) cells.push_back(c);
    }
  };
  for (const Axis* axis : axes)
    for (const auto& row : axis->rows) want(row, Protocol::standard);
  for (const auto& row : drop_rows()) {
    want(row, Protocol::standard);
    want(row, Protocol::algo_disjoint);
  }

  const auto root = ctx.out / layout::kAblateDir;
  const auto cell_dir = [&](const Cell& c) { return root / "cells" / c.name(); };
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto cached = read_result(cell_dir(cells[i]));
    const auto print = fingerprint(cell_config(base, cells[i]), cells[i], o, manifest_text);
    if (cached && cached->second.ok && cached->first == print) continue;
    std::filesystem::create_directories(cell_dir(cells[i]));
    todo.push_back(i);
  }
  std::printf("%zu cells, %zu cached, %zu to run\n", cells.size(), cells.size() - todo.size(), todo.size());
  std::fflush(stdout);

  auto run_one = [&](std::size_t i) {
    const Cell& c = cells[i];
    const TrainConfig cfg = cell_config(base, c);
    return run_cell(data, c, cfg, o, cell_dir(c), fingerprint(cfg, c, o, manifest_text), ctx.strict_determinism);
  };
  auto announce = [&](std::size_t done, std::size_t i) {
    const auto r = read_result(cell_dir(cells[i]));
    if (r && r->second.ok)
      std::printf("[%zu/%zu] %s SRCC %.4f\n", done, todo.size(), cells[i].name().c_str(), r->second.report.srcc);
    else
      std::printf("[%zu/%zu] %s FAILED: %s\n", done, todo.size(), cells[i].name().c_str(),
                  r ? r->second.error.c_str() : "no result written");
    std::fflush(stdout);
  };

  if (o.parallel == 1) {
    for (std::size_t k = 0; k < todo.size(); ++k) {
      run_one(todo[k]);
      announce(k + 1, todo[k]);
    }
  } else {
    std::map<pid_t, std::size_t> running;
    std::size_t next = 0, done = 0;
    while (next < todo.size() || !running.empty()) {
      while (next < todo.size() && static_cast<int>(running.size()) < o.parallel) {
        std::fflush(nullptr);
        const pid_t pid = fork();
        if (pid < 0) throw IoError("fork failed");
        if (pid == 0) {
          int code = kExitUsage;
          try {
            code = run_one(todo[next]);
          } catch (...) {
          }
          std::fflush(nullptr);
          _exit(code);
        }
        running[pid] = todo[next++];
      }
      int status = 0;
      const pid_t pid = waitpid(-1, &status, 0);
      if (pid < 0) throw IoError("waitpid failed");
      const std::size_t i = running.at(pid);
      running.erase(pid);
      if (!WIFEXITED(status) && !read_result(cell_dir(cells[i]))) {
        CellResult r;
        r.error = "worker terminated by signal " + std::to_string(WTERMSIG(status));
        r.exit_code = kExitNumerical;
        write_result(cell_dir(cells[i]), fingerprint(cell_config(base, cells[i]), cells[i], o, manifest_text), r);
      }
      announce(++done, i);
    }
  }

  std::map<std::string, CellResult> results;
  std::string failures = "cell\texit_code\terror\n";
  int exit_code = kExitOk;
  for (const auto& c : cells) {
    const auto r = read_result(cell_dir(c));
    CellResult res = r ? r->second : CellResult{false, {}, "no result written", kExitUsage};
    if (!res.ok) {
      failures += c.name() + '\t' + std::to_string(res.exit_code) + '\t' + res.error + '\n';
      exit_code = std::max(exit_code, res.exit_code);
    }
    results[c.name()] = res;
  }

  auto mean_over_seeds = [&](const Row& row, Protocol p, std::size_t& ok) -> std::optional<EvalReport> {
    std::vector<EvalReport> reports;
    for (auto seed : seeds) {
      const auto& r = results.at(make_cell(row, base, p, seed).name());
      if (r.ok) reports.push_back(r.report);
    }
    ok = reports.size();
    if (reports.empty()) return std::nullopt;
    return mean_report(reports);
  };

  std::vector<std::filesystem::path> outputs;
  for (const Axis* axis : axes) {
    std::vector<std::pair<std::string, EvalReport>> rows;
    for (const auto& row : axis->rows) {
      std::size_t ok = 0;
      if (auto r = mean_over_seeds(row, Protocol::standard, ok)) rows.emplace_back(row_label(row.label, ok, seeds.size()), *r);
    }
    const auto rel = layout::kAblateDir / (axis->name + ".tsv");
    const std::string table = format_eval_table(rows);
    write_text(ctx.out / rel, table);
    outputs.push_back(rel);
    std::printf("\n# %s (mean over %zu seed%s)\n%s", axis->name.c_str(), seeds.size(), seeds.size() == 1 ? "" : "s",
                table.c_str());
  }
  std::vector<std::tuple<std::string, EvalReport, EvalReport>> drops;
  for (const auto& row : drop_rows()) {
    std::size_t ok_std = 0, ok_unseen = 0;
    const auto s = mean_over_seeds(row, Protocol::standard, ok_std);
    const auto u = mean_over_seeds(row, Protocol::algo_disjoint, ok_unseen);
    if (s && u) drops.emplace_back(row_label(row.label, std::min(ok_std, ok_unseen), seeds.size()), *s, *u);
  }
  const auto drop_rel = layout::kAblateDir / "drop.tsv";
  const std::string drop_table = format_drop_table(drops);
  write_text(ctx.out / drop_rel, drop_table);
  outputs.push_back(drop_rel);
  std::printf("\n# drop (standard vs algo_disjoint %d/%zu)\n%s", o.train_algos, algo_ids(data.manifest()).size(),
              drop_table.c_str());

  const auto failures_rel = layout::kAblateDir / "failures.tsv";
  if (exit_code != kExitOk) {
    write_text(ctx.out / failures_rel, failures);
    outputs.push_back(failures_rel);
    std::printf("\nsome cells failed; see %s\n", (ctx.out / failures_rel).string().c_str());
  } else {
    std::filesystem::remove(ctx.out / failures_rel);
  }
  for (const auto& c : cells) outputs.push_back(layout::kAblateDir / "cells" / c.name());
  write_run_manifest(ctx, {seeds, outputs});
  return exit_code;
}

}  // namespace eiqa::cli
