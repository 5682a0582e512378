// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0
//
// mmseg: command-line front end. Exit status is 0 only when every invariant
// check of the invoked subcommand holds; failed checks are listed on stderr.

#include "mmseg/data/io.hpp"
#include "mmseg/data/phantom.hpp"
#include "mmseg/data/split.hpp"
#include "mmseg/hypernet/prompt.hpp"
#include "mmseg/pipeline/pipeline.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>

using namespace mmseg;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Checks {
    int failed = 0;
    void expect(bool ok, const std::string& what) {
        if (!ok) {
            ++failed;
            std::cerr << "invariant failed: " << what << "\n";
        }
    }
    int exit_code() const { return failed == 0 ? 0 : 1; }
};

struct CommonOpts {
    std::string config;
    std::string out;
    std::string preset;
    std::optional<std::uint64_t> seed;
    bool verbose = false;
};

void add_common(CLI::App* app, CommonOpts& o) {
    app->add_option("--config", o.config, "experiment config (JSON); defaults to the toy config");
    app->add_option("--out", o.out, "output directory (overrides output_dir)");
    app->add_option("--seed", o.seed, "global seed (overrides seed)");
    app->add_flag("-v,--verbose", o.verbose, "progress on stderr");
}

pipeline::ExperimentConfig resolve(const CommonOpts& o, bool deterministic) {
    auto cfg = o.config.empty() ? pipeline::toy_config() : pipeline::load_config(o.config);
    if (!o.out.empty()) cfg.output_dir = o.out;
    if (o.seed) cfg.seed = *o.seed;
    if (!o.preset.empty()) pipeline::apply_preset(cfg, o.preset);
    if (deterministic) cfg.deterministic = true;
    return cfg;
}

void check_report(Checks& c, const eval::EvalReport& r, int m) {
    const auto expected = static_cast<std::size_t>((1 << m) - 1);
    c.expect(r.codes.size() == expected, "report has " + std::to_string(expected) + " scenario rows");
    c.expect(r.scores.size() == r.codes.size(), "one score row per scenario");
    std::set<std::string> seen;
    for (const auto& code : r.codes) seen.insert(code.str());
    c.expect(seen.size() == r.codes.size(), "scenario codes are distinct");
    for (const auto& row : r.scores)
        for (const auto& s : row) {
            c.expect(s.dsc >= 0 && s.dsc <= 1, "DSC within [0, 1]");
            c.expect(std::isfinite(s.hd95) && s.hd95 >= 0, "HD95 finite and non-negative");
        }
}

void print_summary(const eval::EvalReport& r, const char* label) {
    std::printf("%s: mean DSC WT %.4f TC %.4f ET %.4f, grand mean %.4f\n", label, r.mean_dsc[0], r.mean_dsc[1],
                r.mean_dsc[2], r.grand_mean);
}

Extent3 parse_shape(const std::vector<int>& v) {
    if (v.size() == 1) return {v[0], v[0], v[0]};
    if (v.size() == 3) return {v[0], v[1], v[2]};
    throw CLI::ValidationError("--shape", "expects 1 or 3 integers");
}

int cmd_synth(std::uint64_t seed, int n, const std::vector<int>& shape_v, const std::string& out, int m) {
    Checks c;
    const auto shape = parse_shape(shape_v);
    const auto manifest = pipeline::make_fixtures(seed, n, shape, out, m);
    const auto man = data::load_manifest(manifest);
    c.expect(static_cast<int>(man.subjects.size()) == n, "manifest lists every subject");
    for (const auto& rec : man.subjects) {
        const auto s = data::load_subject(man, rec);
        c.expect(s.volume.extent() == shape, rec.id + " has the requested shape");
        c.expect(s.masks.nested(), rec.id + " has nested regions");
        const double wt = static_cast<double>(s.masks.count(Region::WT)) / static_cast<double>(shape.voxels());
        c.expect(wt >= 0.01 && wt <= 0.10, rec.id + " WT fraction within [0.01, 0.10]");
        c.expect(s.volume.observed_code().full(), rec.id + " has every modality");
    }
    std::printf("%s\n", manifest.string().c_str());
    return c.exit_code();
}

int cmd_split(const std::string& manifest, double fm_ratio, std::uint64_t seed, std::vector<int> range,
              const std::string& out) {
    Checks c;
    const auto man = data::load_manifest(manifest);
    const int m = static_cast<int>(man.modalities.size());
    if (range.size() != 2) throw CLI::ValidationError("--missing", "expects two integers");
    const auto split = data::build_split(man.ids(), fm_ratio, seed, m, {range[0], range[1]});
    const auto n = static_cast<long>(man.subjects.size());
    const auto want_full = std::max(1L, std::lround(fm_ratio * static_cast<double>(n)));
    c.expect(static_cast<long>(split.full.size()) == want_full, "|D_f| = max(1, round(fm_ratio * N))");
    c.expect(static_cast<long>(split.size()) == n, "every subject assigned once");
    std::set<std::string> ids(split.full.begin(), split.full.end());
    for (const auto& e : split.incomplete) {
        c.expect(ids.insert(e.id).second, e.id + " appears once");
        const int miss = m - e.code.available_count();
        c.expect(miss >= range[0] && miss <= range[1], e.id + " missing count within range");
    }
    const auto j = data::split_to_json(split).dump(2);
    if (out.empty()) {
        std::cout << j << "\n";
    } else {
        std::ofstream(out) << j << "\n";
    }
    return c.exit_code();
}

int cmd_stage(const CommonOpts& o, bool det, const std::string& stop) {
    Checks c;
    const auto cfg = resolve(o, det);
    pipeline::PipelineOptions opt;
    opt.verbose = o.verbose;
    opt.stop_after = stop;
    const auto res = pipeline::run_pipeline(cfg, opt);
    c.expect(res.frozen_ok, "teacher and guidance model unchanged by later stages");
    std::printf("trained: %zu stage(s), cached: %zu stage(s), %ld optimizer steps\n", res.trained_stages.size(),
                res.cached_stages.size(), res.training_steps);
    if (res.evaluated) {
        check_report(c, res.report, cfg.data.modalities);
        print_summary(res.untrained, "untrained");
        print_summary(res.report, "trained");
        std::printf("reports in %s\n", cfg.output_dir.string().c_str());
    }
    return c.exit_code();
}

int cmd_distill_from(const CommonOpts& o, bool det, const std::string& mae, const std::string& teacher) {
    Checks c;
    const auto cfg = resolve(o, det);
    pipeline::PipelineOptions opt;
    opt.verbose = o.verbose;
    const auto res = pipeline::distill_from(cfg, mae, teacher, opt);
    c.expect(res.frozen_ok, "teacher unchanged by distillation");
    check_report(c, res.report, cfg.data.modalities);
    print_summary(res.untrained, "untrained");
    print_summary(res.report, "trained");
    std::printf("student and reports in %s\n", cfg.output_dir.string().c_str());
    return c.exit_code();
}

int cmd_eval(const CommonOpts& o, bool det, const std::string& ckpt, const std::string& data_path,
             const std::string& out) {
    Checks c;
    auto cfg = resolve(o, det);
    pipeline::set_deterministic(cfg.deterministic);
    auto model = pipeline::load_hyperseg(ckpt);
    const auto man = data::load_manifest(data_path);
    std::vector<train::Subject> subjects;
    for (const auto& rec : man.subjects) subjects.push_back(data::load_subject(man, rec));
    const auto samples = train::full_samples(subjects);
    hyper::PromptBank bank;
    if (model.has_hyper() && model.hyper_config().indicator == hyper::Indicator::Clip) {
        cfg.embedder.dim = model.hyper_config().text_dim;
        auto emb = hyper::make_embedder(cfg.embedder);
        bank = hyper::PromptBank(*emb, static_cast<int>(man.modalities.size()));
    }
    auto eopt = cfg.eval_options();
    if (!samples.empty()) {
        const auto e = samples.front().volume.extent();
        eopt.crop = {std::min(eopt.crop.d, e.d), std::min(eopt.crop.h, e.h), std::min(eopt.crop.w, e.w)};
    }
    const auto report = eval::evaluate_sweep(model, samples, bank, eopt);
    check_report(c, report, static_cast<int>(man.modalities.size()));
    const auto text = eval::render_report(report, out.empty() ? eval::Format::Markdown : eval::format_from_path(out));
    if (out.empty())
        std::cout << text;
    else
        std::ofstream(out) << text;
    print_summary(report, "eval");
    return c.exit_code();
}

int cmd_embed(hyper::EmbedderConfig ec, int m, const std::string& out) {
    Checks c;
    auto emb = hyper::make_embedder(ec);
    hyper::write_prompt_file(out, *emb, m);
    hyper::OfflineEmbedder back(out);
    const auto codes = sweep_codes(m);
    std::set<std::string> prompts;
    for (const auto& code : codes) {
        const auto p = hyper::build_prompt(code);
        prompts.insert(p);
        c.expect(p.rfind(hyper::kPromptPrefix, 0) == 0, "prompt starts with the template prefix");
        c.expect(static_cast<int>(back.embed(p).size()) == emb->dim(), "row length equals embedder dim");
    }
    c.expect(prompts.size() == codes.size(), "every scenario has a distinct prompt");
    std::printf("%zu prompts (%s, dim %d) -> %s\n", codes.size(), emb->provider_id().c_str(), emb->dim(),
                out.c_str());
    return c.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mmseg: missing-modality brain tumor segmentation"};
    app.require_subcommand(1);
    bool det = false;
    app.add_flag("--deterministic", det, "bitwise-stable kernels and scheduling");

    std::uint64_t synth_seed = 0;
    int synth_n = 10, synth_m = 4;
    std::vector<int> synth_shape{32};
    std::string synth_out = "fixtures";
    auto* synth = app.add_subcommand("synth", "write a phantom dataset (NIfTI + manifest)");
    synth->add_option("--seed", synth_seed);
    synth->add_option("--n", synth_n, "number of subjects")->check(CLI::PositiveNumber);
    synth->add_option("--shape", synth_shape, "D H W, or one value for a cube");
    synth->add_option("--modalities", synth_m)->check(CLI::Range(2, 8));
    synth->add_option("--out", synth_out);

    std::string split_manifest, split_out;
    double split_ratio = 0.1;
    std::uint64_t split_seed = 0;
    std::vector<int> split_range{1, 3};
    auto* split = app.add_subcommand("split", "build a full/incomplete training split");
    split->add_option("--manifest", split_manifest)->required()->check(CLI::ExistingFile);
    split->add_option("--fm-ratio", split_ratio);
    split->add_option("--seed", split_seed);
    split->add_option("--missing", split_range, "lo hi missing-count range")->expected(2);
    split->add_option("--out", split_out, "split JSON (stdout when omitted)");

    CommonOpts pre_o, teach_o, dist_o, eval_o, pipe_o;
    std::string pre_stage = "c";
    auto* pretrain = app.add_subcommand("pretrain", "run pretraining up to a stage");
    add_common(pretrain, pre_o);
    pretrain->add_option("--stage", pre_stage)->check(CLI::IsMember({"a", "b", "c"}));

    auto* teacher = app.add_subcommand("teacher", "pretraining plus the full-modality teacher");
    add_common(teacher, teach_o);
    teacher->add_option("--preset", teach_o.preset)->check(CLI::IsMember({"tab4-b", "tab4-c", "tab4-d", "tab4-e"}));

    auto* distill = app.add_subcommand("distill", "every stage through co-distillation");
    add_common(distill, dist_o);
    distill->add_option("--preset", dist_o.preset)->check(CLI::IsMember({"tab4-b", "tab4-c", "tab4-d", "tab4-e"}));
    std::string dist_mae, dist_teacher;
    auto* mae_opt = distill->add_option("--mae", dist_mae, "MAE checkpoint (stage c); skips the earlier stages")
                        ->check(CLI::ExistingDirectory);
    distill->add_option("--teacher", dist_teacher, "teacher checkpoint")->check(CLI::ExistingDirectory)->needs(mae_opt);
    mae_opt->needs("--teacher");

    std::string eval_ckpt, eval_data, eval_report;
    auto* evalc = app.add_subcommand("eval", "15-scenario sweep of a checkpoint");
    evalc->add_option("--config", eval_o.config);
    evalc->add_option("--ckpt", eval_ckpt, "segmentation checkpoint directory")->required()->check(CLI::ExistingDirectory);
    evalc->add_option("--data", eval_data, "manifest")->required()->check(CLI::ExistingFile);
    evalc->add_option("--out", eval_report, "report path (.csv, .json or .md)");

    hyper::EmbedderConfig emb_cfg;
    int emb_m = 4;
    std::string emb_out = "prompts.json";
    auto* embed = app.add_subcommand("embed-prompts", "embed the scenario prompts into an offline table");
    embed->add_option("--provider", emb_cfg.provider)->check(CLI::IsMember({"stub", "live"}));
    embed->add_option("--dim", emb_cfg.dim);
    embed->add_option("--seed", emb_cfg.seed);
    embed->add_option("--endpoint", emb_cfg.live.endpoint);
    embed->add_option("--cache", emb_cfg.live.cache);
    embed->add_option("--modalities", emb_m)->check(CLI::Range(2, 8));
    embed->add_option("--out", emb_out);

    auto* pipe = app.add_subcommand("pipeline", "full stage chain and evaluation");
    add_common(pipe, pipe_o);
    pipe->add_option("--preset", pipe_o.preset)->check(CLI::IsMember({"tab4-b", "tab4-c", "tab4-d", "tab4-e"}));

    CLI11_PARSE(app, argc, argv);
    try {
        if (*synth) return cmd_synth(synth_seed, synth_n, synth_shape, synth_out, synth_m);
        if (*split) return cmd_split(split_manifest, split_ratio, split_seed, split_range, split_out);
        if (*pretrain) return cmd_stage(pre_o, det, pre_stage);
        if (*teacher) return cmd_stage(teach_o, det, "teacher");
        if (*distill && !dist_mae.empty()) return cmd_distill_from(dist_o, det, dist_mae, dist_teacher);
        if (*distill) return cmd_stage(dist_o, det, "distill");
        if (*evalc) return cmd_eval(eval_o, det, eval_ckpt, eval_data, eval_report);
        if (*embed) {
            emb_cfg.live.dim = emb_cfg.dim;
            return cmd_embed(emb_cfg, emb_m, emb_out);
        }
        if (*pipe) return cmd_stage(pipe_o, det, "");
    } catch (const std::exception& e) {
        std::cerr << "mmseg: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
