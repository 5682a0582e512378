// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmseg/pipeline/pipeline.hpp"

#include "mmseg/data/io.hpp"
#include "mmseg/data/phantom.hpp"
#include "mmseg/nn/checkpoint.hpp"
#include "mmseg/rng.hpp"

#include <nlohmann/json.hpp>
#include <omp.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace mmseg::pipeline {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

json read_json(const fs::path& p) {
    std::ifstream is(p);
    if (!is) throw std::runtime_error("cannot open " + p.string());
    return json::parse(is);
}

void write_text(const fs::path& p, const std::string& s) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    const auto tmp = p.string() + ".tmp";
    {
        std::ofstream os(tmp);
        os << s;
        if (!os) throw std::runtime_error("cannot write " + p.string());
    }
    fs::rename(tmp, p);
}

std::string hex(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

std::string hash_json(const json& j) {
    const auto s = j.dump();
    return hex(fnv1a(s.data(), s.size()));
}

std::vector<train::Subject> phantom_subjects(std::uint64_t seed, const char* tag, int n, Extent3 shape, int m) {
    std::vector<train::Subject> out;
    const auto base = derive_seed(seed, tag);
    for (int i = 0; i < n; ++i) {
        auto ph = data::generate_phantom(derive_seed(base, static_cast<std::uint64_t>(i)), shape, m);
        char id[32];
        std::snprintf(id, sizeof(id), "%s-%03d", tag, i);
        ph.volume.subject_id = id;
        out.push_back({std::move(ph.volume), std::move(ph.masks)});
    }
    return out;
}

std::vector<train::Subject> manifest_subjects(const fs::path& path) {
    const auto m = data::load_manifest(path);
    std::vector<train::Subject> out;
    for (const auto& rec : m.subjects) out.push_back(data::load_subject(m, rec));
    return out;
}

json backbone_json(const nn::BackboneConfig& b) {
    return {{"in_channels", b.in_channels}, {"base_width", b.base_width}, {"depth", b.depth},
            {"groups", b.groups}, {"seg_out_channels", b.seg_out_channels}, {"mae_out_channels", b.mae_out_channels}};
}

nn::BackboneConfig backbone_from(const json& j) {
    nn::BackboneConfig b;
    b.in_channels = j.at("in_channels");
    b.base_width = j.at("base_width");
    b.depth = j.at("depth");
    b.groups = j.at("groups");
    b.seg_out_channels = j.at("seg_out_channels");
    b.mae_out_channels = j.at("mae_out_channels");
    b.validate();
    return b;
}

json hyper_json(const hyper::HyperConfig& h) {
    return {{"enabled", h.enabled},
            {"indicator", h.indicator == hyper::Indicator::Clip ? "clip" : "binary"},
            {"text_dim", h.text_dim},
            {"hidden", h.hidden},
            {"mode", h.mode == nn::HeadMode::Residual ? "residual" : "direct"}};
}

hyper::HyperConfig hyper_from(const json& j) {
    hyper::HyperConfig h;
    h.enabled = j.at("enabled");
    h.indicator = j.at("indicator") == "clip" ? hyper::Indicator::Clip : hyper::Indicator::Binary;
    h.text_dim = j.at("text_dim");
    h.hidden = j.at("hidden");
    h.mode = j.at("mode") == "residual" ? nn::HeadMode::Residual : nn::HeadMode::Direct;
    return h;
}

json checkpoint_config(const fs::path& dir, const char* kind) {
    const auto j = read_json(dir / "config.json");
    if (j.at("kind") != kind)
        throw std::runtime_error(dir.string() + " holds a '" + j.at("kind").get<std::string>() +
                                 "' checkpoint, expected '" + kind + "'");
    return j;
}

const char* kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::Mae: return "mae";
        case ModelKind::Guidance: return "guidance";
        case ModelKind::HyperSeg: return "hyperseg";
    }
    return "?";
}

// Resolved-config slices each stage depends on.
std::vector<std::pair<std::string, json>> stage_keys(const ExperimentConfig& cfg) {
    const auto r = config_to_json(cfg);
    json base = {{"seed", r["seed"]},         {"data", r["data"]},       {"split", r["split"]},
                 {"backbone", r["backbone"]}, {"preprocess", r["preprocess"]}, {"optim", r["optim"]},
                 {"masking", r["masking"]}};
    std::vector<std::pair<std::string, json>> out;
    json a = base;
    a["pretrain"] = {{"epochs_a", r["pretrain"]["epochs_a"]}};
    out.emplace_back("a", a);
    json b = {{"up", hash_json(a)}, {"pretrain", {{"epochs_b", r["pretrain"]["epochs_b"]}}}};
    out.emplace_back("b", b);
    json c = {{"up", hash_json(b)},
              {"pretrain", {{"epochs_c", r["pretrain"]["epochs_c"]}, {"lambda_da", r["pretrain"]["lambda_da"]}}}};
    out.emplace_back("c", c);
    json t = {{"up", hash_json(c)}, {"teacher", r["teacher"]}, {"hyper", r["hyper"]}, {"embedder", r["embedder"]}};
    out.emplace_back("teacher", t);
    json d = {{"up", hash_json(t)}, {"distill", r["distill"]}};
    out.emplace_back("distill", d);
    json e = {{"up", hash_json(d)}, {"eval", r["eval"]}};
    out.emplace_back("eval", e);
    return out;
}

}  // namespace

void set_deterministic(bool on) {
    if (on) {
        omp_set_dynamic(0);
        kernels::set_default_exec(kernels::Exec::Parallel);
    }
}

std::vector<std::pair<std::string, std::string>> stage_hashes(const ExperimentConfig& cfg) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& [name, key] : stage_keys(cfg)) out.emplace_back(name, hash_json(key));
    return out;
}

Datasets load_datasets(const ExperimentConfig& cfg) {
    const int m = cfg.data.modalities;
    std::vector<train::Subject> tr, va, ev;
    if (cfg.data.source == "phantom") {
        const auto ps = derive_seed(cfg.seed, "phantom");
        const auto& p = cfg.data.phantom;
        tr = phantom_subjects(ps, "train", p.n_train, p.shape, m);
        va = phantom_subjects(ps, "val", p.n_val, p.shape, m);
        ev = phantom_subjects(ps, "eval", p.n_eval, p.shape, m);
    } else {
        tr = manifest_subjects(cfg.data.train_manifest);
        if (!cfg.data.val_manifest.empty()) va = manifest_subjects(cfg.data.val_manifest);
        ev = manifest_subjects(cfg.data.eval_manifest);
    }
    Datasets d;
    std::vector<std::string> ids;
    for (const auto& s : tr) ids.push_back(s.volume.subject_id);
    d.split = data::build_split(ids, cfg.fm_ratio, derive_seed(cfg.seed, "split"), m, cfg.missing);
    d.train = train::make_samples(tr, d.split);
    // Files may already lack modalities; availability is the intersection.
    for (auto& s : d.train) {
        const auto obs = tr[static_cast<std::size_t>(&s - d.train.data())].volume.observed_code();
        for (int i = 0; i < m; ++i)
            if (!obs[i]) s.code.set(i, false);
        if (s.code.available_count() == 0)
            throw std::runtime_error("subject " + s.id + " has no available modality after the split");
    }
    d.val = train::full_samples(va);
    d.eval = train::full_samples(ev);
    return d;
}

fs::path make_fixtures(std::uint64_t seed, int n_subjects, Extent3 shape, const fs::path& dir, int modalities) {
    if (n_subjects <= 0) throw std::invalid_argument("make_fixtures: need at least one subject");
    fs::create_directories(dir);
    data::Manifest man;
    man.modalities = modality_names(modalities);
    man.root = dir;
    const auto subjects = phantom_subjects(seed, "sub", n_subjects, shape, modalities);
    for (const auto& s : subjects) {
        data::SubjectRecord rec;
        rec.id = s.volume.subject_id;
        for (int c = 0; c < modalities; ++c) {
            const auto& name = man.modalities[static_cast<std::size_t>(c)];
            const fs::path rel = rec.id + "_" + name + ".nii.gz";
            Tensor<float> ch({1, shape.d, shape.h, shape.w});
            std::copy(s.volume.voxels.channel(c), s.volume.voxels.channel(c) + shape.voxels(), ch.data());
            data::write_nifti(dir / rel, ch, s.volume.spacing);
            rec.images[name] = rel;
        }
        rec.label = rec.id + "_seg.nii.gz";
        data::save_labels(dir / rec.label, *s.masks.labels, s.volume.spacing);
        man.subjects.push_back(std::move(rec));
    }
    const auto path = dir / "manifest.json";
    data::save_manifest(path, man);
    return path;
}

void save_checkpoint(const fs::path& dir, ModelKind kind, const nn::ParamList<float>& params,
                     const nn::BackboneConfig& b, const hyper::HyperConfig* h, std::uint64_t seed) {
    fs::create_directories(dir);
    nn::save_archive(dir / "params.bin", params);
    json j = {{"kind", kind_name(kind)}, {"backbone", backbone_json(b)}, {"seed", seed}};
    j["hyper"] = h ? hyper_json(*h) : json(nullptr);
    write_text(dir / "config.json", j.dump(2) + "\n");
}

nn::ReconstructionNet<float> load_mae(const fs::path& dir) {
    const auto j = checkpoint_config(dir, "mae");
    nn::ReconstructionNet<float> m(backbone_from(j.at("backbone")), j.at("seed").get<std::uint64_t>());
    nn::assign_from_archive(nn::load_archive(dir / "params.bin"), m.parameters(), true);
    return m;
}

nn::SegmentationNet<float> load_guidance(const fs::path& dir) {
    const auto j = checkpoint_config(dir, "guidance");
    nn::SegmentationNet<float> m(backbone_from(j.at("backbone")), j.at("seed").get<std::uint64_t>());
    nn::assign_from_archive(nn::load_archive(dir / "params.bin"), m.parameters(), true);
    m.set_trainable(false);
    return m;
}

hyper::HyperSegModel<float> load_hyperseg(const fs::path& dir) {
    const auto j = checkpoint_config(dir, "hyperseg");
    hyper::HyperSegModel<float> m(backbone_from(j.at("backbone")), hyper_from(j.at("hyper")),
                                  j.at("seed").get<std::uint64_t>());
    nn::assign_from_archive(nn::load_archive(dir / "params.bin"), m.parameters(), true);
    return m;
}

namespace {

hyper::PromptBank make_bank(const ExperimentConfig& cfg) {
    hyper::PromptBank bank;
    if (cfg.hyper.indicator != hyper::Indicator::Clip) return bank;
    auto emb = hyper::make_embedder(cfg.embedder);
    bank = hyper::PromptBank(*emb, cfg.data.modalities);
    if (bank.dim() != cfg.hyper.text_dim)
        throw std::runtime_error("embedder produces length " + std::to_string(bank.dim()) + ", hyper.text_dim is " +
                                 std::to_string(cfg.hyper.text_dim));
    return bank;
}

void write_reports(const fs::path& out, const PipelineResult& res) {
    write_text(out / "report_untrained.json", eval::render_report(res.untrained, eval::Format::Json));
    write_text(out / "report.json", eval::render_report(res.report, eval::Format::Json));
    write_text(out / "report.csv", eval::render_report(res.report, eval::Format::Csv));
    write_text(out / "report.md", eval::render_report(res.report, eval::Format::Markdown));
}

}  // namespace

PipelineResult run_pipeline(const ExperimentConfig& cfg, const PipelineOptions& opt) {
    static const std::vector<std::string> known = {"", "a", "b", "c", "teacher", "distill"};
    if (std::find(known.begin(), known.end(), opt.stop_after) == known.end())
        throw std::invalid_argument("unknown stage '" + opt.stop_after + "'");
    set_deterministic(cfg.deterministic);
    const fs::path out = cfg.output_dir;
    const auto keys = stage_keys(cfg);
    auto stage_dir = [&](const std::string& name) { return out / "stages" / name; };

    // Refuse before doing anything if an existing stage came from another config.
    for (const auto& [name, key] : keys) {
        const auto meta = stage_dir(name) / "stage.json";
        if (!fs::exists(meta)) continue;
        const auto have = read_json(meta).at("hash").get<std::string>();
        const auto want = hash_json(key);
        if (have != want) {
            const auto diff = json_diff(read_json(meta).at("key"), key);
            std::string what;
            for (const auto& d : diff) what += (what.empty() ? "" : ", ") + d;
            throw std::runtime_error("refusing to resume: stage '" + name + "' in " + out.string() +
                                     " was produced by a different configuration (hash " + have + ", config gives " +
                                     want + "; differing keys: " + what +
                                     "). Use a fresh output_dir or delete the stale stages.");
        }
    }
    fs::create_directories(out);
    write_text(out / "config.resolved.json", config_to_json(cfg).dump(2) + "\n");

    PipelineResult res;
    auto log = [&](const char* fmt, const std::string& s) {
        if (opt.verbose) std::fprintf(stderr, fmt, s.c_str());
    };
    auto cached = [&](const std::string& name) { return fs::exists(stage_dir(name) / "stage.json"); };
    auto finish = [&](const std::string& name, double seconds, long steps) {
        const auto& key = keys[static_cast<std::size_t>(std::find_if(keys.begin(), keys.end(), [&](const auto& k) {
                                                              return k.first == name;
                                                          }) - keys.begin())]
                              .second;
        json meta = {{"stage", name}, {"hash", hash_json(key)}, {"key", key}, {"seconds", seconds}, {"steps", steps}};
        write_text(stage_dir(name) / "stage.json", meta.dump(2) + "\n");
        res.trained_stages.push_back(name);
        res.training_steps += steps;
    };
    using clock = std::chrono::steady_clock;
    auto since = [](clock::time_point t0) { return std::chrono::duration<double>(clock::now() - t0).count(); };

    const auto ds = load_datasets(cfg);
    write_text(out / "split.json", data::split_to_json(ds.split).dump(2) + "\n");
    const long n = static_cast<long>(ds.train.size());

    const auto bank = make_bank(cfg);
    train::StageHooks hooks;
    hooks.verbose = opt.verbose;

    // Stage A
    const auto sa = derive_seed(cfg.seed, "stage-a");
    std::optional<nn::ReconstructionNet<float>> theta0;
    if (cached("a")) {
        theta0 = load_mae(stage_dir("a"));
        res.cached_stages.push_back("a");
    } else {
        log("[pipeline] %s\n", "stage a");
        const auto t0 = clock::now();
        hooks.loss_csv = stage_dir("a") / "loss.csv";
        theta0 = train::train_mae_stage_a(ds.train, cfg.backbone, cfg.pretrain, sa, nullptr, hooks);
        save_checkpoint(stage_dir("a"), ModelKind::Mae, theta0->parameters(), cfg.backbone, nullptr,
                        derive_seed(sa, "init"));
        finish("a", since(t0), cfg.pretrain.epochs_a * n);
    }
    if (opt.stop_after == "a") return res;

    // Stage B
    const auto sb = derive_seed(cfg.seed, "stage-b");
    std::optional<nn::SegmentationNet<float>> f;
    if (cached("b")) {
        f = load_guidance(stage_dir("b"));
        res.cached_stages.push_back("b");
    } else {
        log("[pipeline] %s\n", "stage b");
        const auto t0 = clock::now();
        hooks.loss_csv = stage_dir("b") / "loss.csv";
        f = train::train_guidance_model(ds.train, *theta0, cfg.pretrain, sb, nullptr, hooks);
        save_checkpoint(stage_dir("b"), ModelKind::Guidance, f->parameters(), cfg.backbone, nullptr,
                        derive_seed(sb, "init"));
        finish("b", since(t0), cfg.pretrain.epochs_b * n);
    }
    const auto f_checksum = f->checksum();
    if (opt.stop_after == "b") return res;

    // Stage C
    const auto sc = derive_seed(cfg.seed, "stage-c");
    std::optional<nn::ReconstructionNet<float>> theta;
    if (cached("c")) {
        theta = load_mae(stage_dir("c"));
        res.cached_stages.push_back("c");
    } else {
        log("[pipeline] %s\n", "stage c");
        const auto t0 = clock::now();
        hooks.loss_csv = stage_dir("c") / "loss.csv";
        theta = train::train_mae_stage_c(ds.train, *theta0, *f, cfg.pretrain, sc, nullptr, hooks);
        save_checkpoint(stage_dir("c"), ModelKind::Mae, theta->parameters(), cfg.backbone, nullptr,
                        derive_seed(sc, "init"));
        finish("c", since(t0), cfg.pretrain.epochs_c * n);
    }
    if (f->checksum() != f_checksum) res.frozen_ok = false;
    if (opt.stop_after == "c") return res;

    // Teacher
    const auto st = derive_seed(cfg.seed, "teacher");
    auto hcfg_t = cfg.hyper;
    hcfg_t.enabled = cfg.distill.hyper_teacher && !cfg.distill.teacher_reuse_guidance;
    std::optional<hyper::HyperSegModel<float>> teacher;
    if (cached("teacher")) {
        teacher = load_hyperseg(stage_dir("teacher"));
        teacher->set_trainable(false);
        res.cached_stages.push_back("teacher");
    } else {
        log("[pipeline] %s\n", "teacher");
        const auto t0 = clock::now();
        long steps = 0;
        if (cfg.distill.teacher_reuse_guidance) {
            teacher = train::teacher_from_guidance(*f, hcfg_t);
        } else {
            hooks.loss_csv = stage_dir("teacher") / "loss.csv";
            teacher = train::build_teacher(ds.train, *theta, hcfg_t, bank, cfg.distill, st, nullptr, hooks);
            steps = cfg.distill.teacher_epochs * n;
        }
        save_checkpoint(stage_dir("teacher"), ModelKind::HyperSeg, teacher->parameters(), cfg.backbone, &hcfg_t,
                        derive_seed(st, "init"));
        finish("teacher", since(t0), steps);
    }
    const auto teacher_checksum = teacher->checksum();
    if (opt.stop_after == "teacher") return res;

    // Distill
    const auto sd = derive_seed(cfg.seed, "distill");
    std::optional<hyper::HyperSegModel<float>> student;
    if (cached("distill")) {
        student = load_hyperseg(stage_dir("distill") / "student");
        res.cached_stages.push_back("distill");
    } else {
        log("[pipeline] %s\n", "distill");
        const auto t0 = clock::now();
        train::DistillHooks dh;
        dh.loss_csv = stage_dir("distill") / "loss.csv";
        dh.validation = &ds.val;
        dh.val_opt = cfg.eval_options();
        dh.verbose = opt.verbose;
        auto state = train::run_distill(ds.train, *theta, *teacher, cfg.hyper, bank, cfg.distill, sd, dh);
        save_checkpoint(stage_dir("distill") / "student", ModelKind::HyperSeg, state.student->parameters(),
                        cfg.backbone, &cfg.hyper, derive_seed(sd, "student"));
        save_checkpoint(stage_dir("distill") / "recoverer", ModelKind::Mae, state.recoverer->parameters(),
                        cfg.backbone, nullptr, derive_seed(sd, "recoverer"));
        student = std::move(*state.student);
        finish("distill", since(t0), state.step);
    }
    if (teacher->checksum() != teacher_checksum || f->checksum() != f_checksum) res.frozen_ok = false;
    if (opt.stop_after == "distill") return res;

    // Evaluation (cached alongside its hash like a stage).
    const auto eopt = cfg.eval_options();
    if (cached("eval") && fs::exists(out / "report.json") && fs::exists(out / "report_untrained.json")) {
        res.report = eval::report_from_json(read_json(out / "report.json"));
        res.untrained = eval::report_from_json(read_json(out / "report_untrained.json"));
        res.cached_stages.push_back("eval");
        res.evaluated = true;
        return res;
    }
    log("[pipeline] %s\n", "evaluation");
    const auto t0 = clock::now();
    hyper::HyperSegModel<float> untrained(cfg.backbone, cfg.hyper, derive_seed(sd, "student"));
    res.untrained = eval::evaluate_sweep(untrained, ds.eval, bank, eopt);
    res.report = eval::evaluate_sweep(*student, ds.eval, bank, eopt);
    write_reports(out, res);
    finish("eval", since(t0), 0);
    res.evaluated = true;
    return res;
}

PipelineResult distill_from(const ExperimentConfig& cfg, const fs::path& mae_dir, const fs::path& teacher_dir,
                            const PipelineOptions& opt) {
    set_deterministic(cfg.deterministic);
    const fs::path out = cfg.output_dir;
    fs::create_directories(out);
    write_text(out / "config.resolved.json", config_to_json(cfg).dump(2) + "\n");
    const auto ds = load_datasets(cfg);
    write_text(out / "split.json", data::split_to_json(ds.split).dump(2) + "\n");
    const auto bank = make_bank(cfg);

    auto theta = load_mae(mae_dir);
    auto teacher = load_hyperseg(teacher_dir);
    teacher.set_trainable(false);
    const auto teacher_checksum = teacher.checksum();

    const auto sd = derive_seed(cfg.seed, "distill");
    train::DistillHooks dh;
    dh.loss_csv = out / "loss.csv";
    dh.validation = &ds.val;
    dh.val_opt = cfg.eval_options();
    dh.verbose = opt.verbose;
    auto state = train::run_distill(ds.train, theta, teacher, cfg.hyper, bank, cfg.distill, sd, dh);
    save_checkpoint(out / "student", ModelKind::HyperSeg, state.student->parameters(), cfg.backbone, &cfg.hyper,
                    derive_seed(sd, "student"));
    save_checkpoint(out / "recoverer", ModelKind::Mae, state.recoverer->parameters(), cfg.backbone, nullptr,
                    derive_seed(sd, "recoverer"));

    PipelineResult res;
    res.training_steps = state.step;
    res.trained_stages = {"distill"};
    res.frozen_ok = teacher.checksum() == teacher_checksum;
    const auto eopt = cfg.eval_options();
    hyper::HyperSegModel<float> untrained(cfg.backbone, cfg.hyper, derive_seed(sd, "student"));
    res.untrained = eval::evaluate_sweep(untrained, ds.eval, bank, eopt);
    res.report = eval::evaluate_sweep(*state.student, ds.eval, bank, eopt);
    write_reports(out, res);
    res.evaluated = true;
    return res;
}

}  // namespace mmseg::pipeline
