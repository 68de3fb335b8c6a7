#include <cmath>

#include "doctest.h"
#include "eiqa/errors.hpp"
#include "eiqa/synthdata.hpp"
#include "eiqa/train.hpp"
#include "test_dirs.hpp"

using namespace eiqa;

namespace {

// 20 scenes x 4 algorithms at 16 px with a small network.
const Dataset& small_dataset() {
  static const Dataset data = [] {
    const auto dir = test_dir("train_data");
    build_dataset({20, 4, 16, 5, dir});
    return Dataset::load(dir);
  }();
  return data;
}

TrainConfig small_config(Variant v) {
  TrainConfig cfg;
  cfg.variant = v;
  cfg.batch_size = 8;
  cfg.scenes_per_batch = 4;
  cfg.algos_per_scene = 2;
  cfg.crop_size = 12;
  cfg.epochs_stage1 = 2;
  cfg.epochs_stage2 = 2;
  cfg.preference_dim = 6;
  cfg.quality_dim = 10;
  cfg.widths = {4, 6};
  cfg.lr = 1e-3;
  cfg.seed = 4;
  return cfg;
}

SplitPlan small_split() { return standard_split(small_dataset().manifest(), 0.25, 1); }

bool same_parameters(const ModelState& a, const ModelState& b) {
  for (Component c : kComponents)
    if (parameter_checksum(a, c) != parameter_checksum(b, c)) return false;
  return true;
}

}  // namespace

TEST_CASE("variant names round trip") {
  for (auto v : {Variant::full, Variant::no_preference, Variant::preference_concat, Variant::cls_preference,
                 Variant::joint, Variant::two_stage_no_freeze})
    CHECK(parse_variant(to_string(v)) == v);
  CHECK_THROWS_AS(parse_variant("bogus"), InvalidArgument);
}

TEST_CASE("config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(validate(cfg, 64));
  cfg.lr = 0;
  CHECK_THROWS_AS(validate(cfg, 64), InvalidArgument);
  cfg = TrainConfig{};
  cfg.batch_size = 3;
  CHECK_THROWS_AS(validate(cfg, 64), InvalidArgument);
  cfg = TrainConfig{};
  cfg.crop_size = 65;
  CHECK_THROWS_AS(validate(cfg, 64), InvalidArgument);
}

TEST_CASE("augmentation keeps crop size and is seeded") {
  TrainConfig cfg;
  cfg.crop_size = 12;
  const Image img = small_dataset().image(0);
  Rng a(3), b(3);
  const Image x = augment(img, cfg, a), y = augment(img, cfg, b);
  CHECK(x.height() == 12);
  CHECK(x == y);
}

TEST_CASE("zero pretraining epochs return the initial state") {
  TrainConfig cfg = small_config(Variant::full);
  cfg.epochs_stage1 = 0;
  const TrainResult r = pretrain_preference(small_dataset(), small_split(), cfg);
  CHECK(r.log.epochs.empty());
  CHECK(same_parameters(r.state, init_model(model_config_for(cfg, small_dataset().manifest()))));
}

TEST_CASE("pretraining updates only the preference encoder") {
  const TrainConfig cfg = small_config(Variant::full);
  const ModelState init = init_model(model_config_for(cfg, small_dataset().manifest()));
  const TrainResult r = pretrain_preference(small_dataset(), small_split(), cfg);
  CHECK(r.log.epochs.size() == 2);
  CHECK(parameter_checksum(r.state, Component::preference) != parameter_checksum(init, Component::preference));
  for (Component c : {Component::quality, Component::bias, Component::regressor})
    CHECK(parameter_checksum(r.state, c) == parameter_checksum(init, c));
  for (const auto& e : r.log.epochs) CHECK(std::isfinite(e.loss));
}

TEST_CASE("pretraining is deterministic") {
  const TrainConfig cfg = small_config(Variant::full);
  const TrainResult a = pretrain_preference(small_dataset(), small_split(), cfg);
  const TrainResult b = pretrain_preference(small_dataset(), small_split(), cfg);
  CHECK(same_parameters(a.state, b.state));
  CHECK(to_jsonl(a.log, false) == to_jsonl(b.log, false));
}

TEST_CASE("infeasible stage-1 sampler is a configuration error") {
  TrainConfig cfg = small_config(Variant::full);
  cfg.algos_per_scene = 8;
  cfg.scenes_per_batch = 1;
  CHECK_THROWS_AS(pretrain_preference(small_dataset(), small_split(), cfg), ConfigError);
}

TEST_CASE("stage two freezes the preference encoder") {
  const TrainConfig cfg = small_config(Variant::full);
  const TrainResult pre = pretrain_preference(small_dataset(), small_split(), cfg);
  const TrainResult r = train_quality(small_dataset(), small_split(), &pre.state, cfg);
  CHECK(parameter_checksum(r.state, Component::preference) == parameter_checksum(pre.state, Component::preference));
  for (Component c : {Component::quality, Component::bias, Component::regressor})
    CHECK(parameter_checksum(r.state, c) != parameter_checksum(pre.state, c));
}

TEST_CASE("two-stage without freezing keeps updating the preference encoder") {
  const TrainConfig cfg = small_config(Variant::two_stage_no_freeze);
  const TrainResult pre = pretrain_preference(small_dataset(), small_split(), cfg);
  const TrainResult r = train_quality(small_dataset(), small_split(), &pre.state, cfg);
  CHECK(parameter_checksum(r.state, Component::preference) != parameter_checksum(pre.state, Component::preference));
}

TEST_CASE("missing pretrained state is a configuration error") {
  CHECK_THROWS_AS(train_quality(small_dataset(), small_split(), nullptr, small_config(Variant::full)), ConfigError);
  const TrainConfig cfg = small_config(Variant::full);
  const ModelState untrained = init_model(model_config_for(cfg, small_dataset().manifest()));
  CHECK_THROWS_AS(train_quality(small_dataset(), small_split(), &untrained, cfg), ConfigError);
}

TEST_CASE("no-preference variant never uses the bias predictor") {
  const TrainConfig cfg = small_config(Variant::no_preference);
  const VariantResult r = run_variant(small_dataset(), small_split(), cfg);
  CHECK(r.state.config.fusion == Fusion::none);
  const ModelState init = init_model(model_config_for(cfg, small_dataset().manifest()));
  CHECK(parameter_checksum(r.state, Component::bias) == parameter_checksum(init, Component::bias));
  CHECK(parameter_checksum(r.state, Component::preference) == parameter_checksum(init, Component::preference));
}

TEST_CASE("concat and classification variants wire their heads") {
  const auto& m = small_dataset().manifest();
  const ModelConfig concat = model_config_for(small_config(Variant::preference_concat), m);
  CHECK(concat.fusion == Fusion::concat);
  CHECK(concat.regressor_input() == 16);
  const ModelConfig cls = model_config_for(small_config(Variant::cls_preference), m);
  CHECK(cls.classifier_classes == 4);
  const VariantResult r = run_variant(small_dataset(), small_split(), small_config(Variant::cls_preference));
  CHECK(r.state.preference.classifier.weight.rows() == 4);
}

TEST_CASE("joint training updates every component from scratch") {
  const TrainConfig cfg = small_config(Variant::joint);
  const TrainResult r = train_joint(small_dataset(), small_split(), cfg);
  const ModelState init = init_model(model_config_for(cfg, small_dataset().manifest()));
  for (Component c : kComponents) CHECK(parameter_checksum(r.state, c) != parameter_checksum(init, c));
  CHECK(r.log.epochs.size() == 4);
  for (const auto& e : r.log.epochs) CHECK(e.stage == 0);
}

TEST_CASE("variant grid emits one report per variant with provenance") {
  for (auto v : {Variant::full, Variant::no_preference, Variant::preference_concat, Variant::cls_preference,
                 Variant::joint, Variant::two_stage_no_freeze}) {
    TrainConfig cfg = small_config(v);
    cfg.epochs_stage1 = cfg.epochs_stage2 = 1;
    const VariantResult r = run_variant(small_dataset(), small_split(), cfg);
    CHECK(r.evaluation.report.n == small_split().test_indices.size());
    CHECK(r.state.tags.at("variant") == std::string(to_string(v)));
    CHECK(r.log.final_report.has_value());
  }
}

TEST_CASE("evaluation of a trained state is repeatable") {
  const VariantResult r = run_variant(small_dataset(), small_split(), small_config(Variant::full));
  const Evaluation again = evaluate(r.state, small_dataset(), small_split());
  CHECK(again.report.srcc == r.evaluation.report.srcc);
  CHECK(again.report.plcc == r.evaluation.report.plcc);
}

TEST_CASE("training log serialisation") {
  TrainLog log;
  log.seed = 3;
  log.variant = "full";
  log.wall_seconds = 1.5;
  log.epochs.push_back({1, 1, 2.0, 2.0, 0, 0, 4, 0.25});
  log.final_report = EvalReport{0.5, 0.6, 0.4, 10};
  const std::string timed = to_jsonl(log, true), untimed = to_jsonl(log, false);
  CHECK(std::count(timed.begin(), timed.end(), '\n') == 2);
  CHECK(timed.find("0.25") != std::string::npos);
  CHECK(untimed.find("0.25") == std::string::npos);
  CHECK(untimed.find("\"srcc\":0.5") != std::string::npos);
}
