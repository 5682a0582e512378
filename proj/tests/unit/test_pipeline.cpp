// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "mmseg/pipeline/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

using namespace mmseg;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

pipeline::ExperimentConfig tiny(const std::string& name) {
    auto c = pipeline::toy_config();
    c.data.phantom = {4, 1, 2, {16, 16, 16}};
    c.pretrain.crop = {16, 16, 16};
    c.distill.crop = c.pretrain.crop;
    c.pretrain.epochs_a = c.pretrain.epochs_b = c.pretrain.epochs_c = 1;
    c.distill.teacher_epochs = 1;
    c.distill.epochs = 1;
    c.output_dir = fs::temp_directory_path() / ("mmseg-unit-pipe-" + name);
    fs::remove_all(c.output_dir);
    return c;
}

}  // namespace

TEST_CASE("config: resolved form round-trips and is a fixed point") {
    const auto c = pipeline::toy_config();
    const auto j = pipeline::config_to_json(c);
    const auto back = pipeline::config_from_json(j);
    CHECK(pipeline::config_to_json(back) == j);
    CHECK(j.at("version") == pipeline::kConfigVersion);
}

TEST_CASE("config: unknown keys and bad values are rejected") {
    auto j = pipeline::config_to_json(pipeline::toy_config());
    j["distill"]["mae_fil"] = true;
    CHECK_THROWS_WITH_AS(pipeline::config_from_json(j), doctest::Contains("mae_fil"), std::invalid_argument);
    auto k = pipeline::config_to_json(pipeline::toy_config());
    k["version"] = 99;
    CHECK_THROWS(pipeline::config_from_json(k));
    auto f = pipeline::config_to_json(pipeline::toy_config());
    f["split"]["fm_ratio"] = 0.0;
    CHECK_THROWS(pipeline::config_from_json(f));
    CHECK_THROWS(pipeline::config_from_json(json{{"version", 1}, {"bogus", 1}}));
    CHECK_NOTHROW(pipeline::config_from_json(json{{"version", 1}}));
}

TEST_CASE("config: presets flip exactly the ablation switches") {
    auto base = pipeline::toy_config();
    const std::vector<std::string> names{"tab4-b", "tab4-c", "tab4-d", "tab4-e"};
    std::vector<json> js;
    for (const auto& n : names) {
        auto c = base;
        pipeline::apply_preset(c, n);
        CHECK(c.hyper.indicator == hyper::Indicator::Binary);
        js.push_back(pipeline::config_to_json(c));
    }
    CHECK(pipeline::json_diff(js[0], js[1]) == std::vector<std::string>{"distill.mae_fill"});
    const auto cd = pipeline::json_diff(js[2], js[3]);
    CHECK(cd == std::vector<std::string>{"teacher.hyper"});
    CHECK(pipeline::json_diff(js[1], js[3]) == std::vector<std::string>{"distill.alpha"});
    auto c = base;
    CHECK_THROWS(pipeline::apply_preset(c, "tab4-z"));
    json via = {{"version", 1}, {"preset", "tab4-b"}};
    const auto fromj = pipeline::config_from_json(via);
    CHECK_FALSE(fromj.distill.mae_fill);
    CHECK(fromj.distill.alpha == 0.0);
}

TEST_CASE("json_diff reports dotted paths, including added and removed keys") {
    const json a = {{"x", 1}, {"y", {{"z", 2}, {"w", 3}}}};
    const json b = {{"x", 1}, {"y", {{"z", 5}}}, {"v", 0}};
    auto d = pipeline::json_diff(a, b);
    std::sort(d.begin(), d.end());
    CHECK(d == std::vector<std::string>{"v", "y.w", "y.z"});
}

TEST_CASE("stage hashes: a downstream change leaves upstream hashes alone") {
    auto a = pipeline::toy_config();
    auto b = a;
    b.distill.beta = 0.2;
    const auto ha = pipeline::stage_hashes(a), hb = pipeline::stage_hashes(b);
    REQUIRE(ha.size() == hb.size());
    for (std::size_t i = 0; i < ha.size(); ++i) {
        CHECK(ha[i].first == hb[i].first);
        const bool downstream = ha[i].first == "distill" || ha[i].first == "eval";
        CHECK((ha[i].second != hb[i].second) == downstream);
    }
    auto c = a;
    c.output_dir = "elsewhere";
    c.deterministic = true;
    CHECK(pipeline::stage_hashes(c) == ha);
}

TEST_CASE("pipeline: runs, caches, refuses a mismatched resume") {
    auto cfg = tiny("cache");
    const auto first = pipeline::run_pipeline(cfg);
    CHECK(first.report.codes.size() == 15);
    CHECK(first.training_steps > 0);
    CHECK(first.frozen_ok);
    for (const char* f : {"config.resolved.json", "split.json", "report.json", "report.csv", "report.md",
                          "report_untrained.json", "stages/a/params.bin", "stages/distill/student/params.bin"})
        CHECK_MESSAGE(fs::exists(cfg.output_dir / f), f);

    const auto again = pipeline::run_pipeline(cfg);
    CHECK(again.training_steps == 0);
    CHECK(again.trained_stages.empty());
    CHECK(again.report == first.report);

    auto changed = cfg;
    changed.pretrain.epochs_b = 2;
    CHECK_THROWS_WITH(pipeline::run_pipeline(changed), doctest::Contains("pretrain.epochs_b"));

    const auto snap = pipeline::load_config(cfg.output_dir / "config.resolved.json");
    CHECK(pipeline::config_to_json(snap) == pipeline::config_to_json(cfg));

    auto direct = cfg;
    direct.output_dir = cfg.output_dir / "direct";
    const auto d = pipeline::distill_from(direct, cfg.output_dir / "stages/c", cfg.output_dir / "stages/teacher");
    CHECK(d.frozen_ok);
    CHECK(d.training_steps > 0);
    CHECK(fs::exists(direct.output_dir / "loss.csv"));
    // Same stage inputs and seeds as the chained run.
    CHECK(pipeline::load_hyperseg(direct.output_dir / "student").checksum() ==
          pipeline::load_hyperseg(cfg.output_dir / "stages/distill/student").checksum());
}

TEST_CASE("pipeline: stop_after and checkpoint loaders") {
    auto cfg = tiny("stop");
    pipeline::PipelineOptions opt;
    opt.stop_after = "b";
    const auto r = pipeline::run_pipeline(cfg, opt);
    CHECK(r.trained_stages == std::vector<std::string>{"a", "b"});
    CHECK_FALSE(r.evaluated);
    auto f = pipeline::load_guidance(cfg.output_dir / "stages/b");
    CHECK_FALSE(f.parameters().front()->trainable);
    CHECK_THROWS(pipeline::load_hyperseg(cfg.output_dir / "stages/a"));
    opt.stop_after = "nope";
    CHECK_THROWS(pipeline::run_pipeline(cfg, opt));
}

TEST_CASE("fixtures: NIfTI dataset drives the manifest source") {
    const auto dir = fs::temp_directory_path() / "mmseg-unit-fixtures";
    fs::remove_all(dir);
    const auto man = pipeline::make_fixtures(5, 6, {16, 16, 16}, dir / "train");
    const auto ev = pipeline::make_fixtures(6, 2, {16, 16, 16}, dir / "eval");
    CHECK(fs::exists(man));
    auto cfg = tiny("manifest");
    cfg.data.source = "manifest";
    cfg.data.train_manifest = man;
    cfg.data.eval_manifest = ev;
    const auto ds = pipeline::load_datasets(cfg);
    CHECK(ds.train.size() == 6);
    CHECK(ds.eval.size() == 2);
    CHECK(ds.val.empty());
    const auto r = pipeline::run_pipeline(cfg);
    CHECK(r.report.subjects == 2);
    CHECK_THROWS(pipeline::make_fixtures(1, 0, {16, 16, 16}, dir / "none"));
}
