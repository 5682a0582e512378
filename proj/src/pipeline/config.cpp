// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmseg/pipeline/config.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>
#include <stdexcept>

namespace mmseg::pipeline {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

void check_keys(const json& j, const std::string& section, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw std::invalid_argument("config section '" + section + "' must be an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j.items())
        if (!ok.count(k))
            throw std::invalid_argument("unknown config key '" + (section.empty() ? k : section + "." + k) + "'");
}

template <typename V>
void read(const json& j, const char* key, V& dst) {
    if (j.contains(key) && !j.at(key).is_null()) dst = j.at(key).get<V>();
}

void read_path(const json& j, const char* key, fs::path& dst) {
    if (j.contains(key) && !j.at(key).is_null()) dst = j.at(key).get<std::string>();
}

Extent3 read_extent(const json& j, const char* key, Extent3 def) {
    if (!j.contains(key)) return def;
    const auto v = j.at(key).get<std::vector<std::int64_t>>();
    if (v.size() != 3) throw std::invalid_argument(std::string("config key '") + key + "' needs 3 entries");
    return {v[0], v[1], v[2]};
}

json extent_json(Extent3 e) { return json::array({e.d, e.h, e.w}); }

json path_json(const fs::path& p) { return p.empty() ? json(nullptr) : json(p.generic_string()); }

nn::BackboneConfig backbone_preset(const std::string& name, int m) {
    if (name == "toy") return nn::BackboneConfig::toy(m);
    if (name == "full") return nn::BackboneConfig::full(m);
    if (name == "micro") return nn::BackboneConfig::micro(m);
    throw std::invalid_argument("unknown backbone preset '" + name + "' (toy, full, micro)");
}

}  // namespace

eval::EvalOptions ExperimentConfig::eval_options() const {
    eval::EvalOptions o;
    o.crop = pretrain.crop;
    o.threshold = eval_threshold;
    o.hd.one_empty = hd95_one_empty;
    return o;
}

ExperimentConfig config_from_json(const json& j) {
    check_keys(j, "", {"version", "seed", "output_dir", "deterministic", "preset", "data", "split", "backbone",
                       "preprocess", "optim", "masking", "pretrain", "teacher", "distill", "hyper", "embedder", "eval"});
    const int version = j.value("version", kConfigVersion);
    if (version != kConfigVersion)
        throw std::invalid_argument("config version " + std::to_string(version) + " is not supported (expected " +
                                    std::to_string(kConfigVersion) + ")");
    ExperimentConfig c;
    read(j, "seed", c.seed);
    read_path(j, "output_dir", c.output_dir);
    read(j, "deterministic", c.deterministic);

    if (j.contains("data")) {
        const auto& d = j.at("data");
        check_keys(d, "data", {"source", "modalities", "phantom", "train_manifest", "val_manifest", "eval_manifest"});
        read(d, "source", c.data.source);
        read(d, "modalities", c.data.modalities);
        if (d.contains("phantom")) {
            const auto& p = d.at("phantom");
            check_keys(p, "data.phantom", {"n_train", "n_val", "n_eval", "shape"});
            read(p, "n_train", c.data.phantom.n_train);
            read(p, "n_val", c.data.phantom.n_val);
            read(p, "n_eval", c.data.phantom.n_eval);
            c.data.phantom.shape = read_extent(p, "shape", c.data.phantom.shape);
        }
        read_path(d, "train_manifest", c.data.train_manifest);
        read_path(d, "val_manifest", c.data.val_manifest);
        read_path(d, "eval_manifest", c.data.eval_manifest);
    }
    if (c.data.source != "phantom" && c.data.source != "manifest")
        throw std::invalid_argument("data.source must be 'phantom' or 'manifest'");
    if (c.data.source == "manifest" && (c.data.train_manifest.empty() || c.data.eval_manifest.empty()))
        throw std::invalid_argument("data.source 'manifest' needs data.train_manifest and data.eval_manifest");
    const int m = c.data.modalities;

    c.missing = {1, m - 1};
    if (j.contains("split")) {
        const auto& s = j.at("split");
        check_keys(s, "split", {"fm_ratio", "missing_min", "missing_max"});
        read(s, "fm_ratio", c.fm_ratio);
        read(s, "missing_min", c.missing.lo);
        read(s, "missing_max", c.missing.hi);
    }
    if (!(c.fm_ratio > 0 && c.fm_ratio <= 1)) throw std::invalid_argument("split.fm_ratio must be in (0, 1]");
    if (c.missing.lo < 1 || c.missing.lo > c.missing.hi || c.missing.hi > m - 1)
        throw std::invalid_argument("split.missing_min/missing_max must satisfy 1 <= min <= max <= modalities - 1");

    c.backbone = backbone_preset(c.backbone_preset, m);
    if (j.contains("backbone")) {
        const auto& b = j.at("backbone");
        check_keys(b, "backbone", {"preset", "base_width", "depth", "groups"});
        read(b, "preset", c.backbone_preset);
        c.backbone = backbone_preset(c.backbone_preset, m);
        read(b, "base_width", c.backbone.base_width);
        read(b, "depth", c.backbone.depth);
        read(b, "groups", c.backbone.groups);
    }
    c.backbone.validate();

    if (j.contains("preprocess")) {
        const auto& p = j.at("preprocess");
        check_keys(p, "preprocess", {"crop", "shift", "scale", "flip_p"});
        c.pretrain.crop = read_extent(p, "crop", c.pretrain.crop);
        read(p, "shift", c.pretrain.aug.shift);
        if (p.contains("scale")) {
            const auto s = p.at("scale").get<std::array<double, 2>>();
            c.pretrain.aug.scale_lo = s[0];
            c.pretrain.aug.scale_hi = s[1];
        }
        read(p, "flip_p", c.pretrain.aug.flip_p);
    }
    if (j.contains("optim")) {
        const auto& o = j.at("optim");
        check_keys(o, "optim", {"lr", "weight_decay", "beta1", "beta2", "eps"});
        read(o, "lr", c.pretrain.optim.lr);
        read(o, "weight_decay", c.pretrain.optim.weight_decay);
        read(o, "beta1", c.pretrain.optim.beta1);
        read(o, "beta2", c.pretrain.optim.beta2);
        read(o, "eps", c.pretrain.optim.eps);
    }
    if (j.contains("masking")) {
        const auto& k = j.at("masking");
        check_keys(k, "masking", {"patch", "ratio"});
        c.pretrain.patch = read_extent(k, "patch", c.pretrain.patch);
        read(k, "ratio", c.pretrain.mask_ratio);
    }
    if (j.contains("pretrain")) {
        const auto& p = j.at("pretrain");
        check_keys(p, "pretrain", {"epochs_a", "epochs_b", "epochs_c", "lambda_da"});
        read(p, "epochs_a", c.pretrain.epochs_a);
        read(p, "epochs_b", c.pretrain.epochs_b);
        read(p, "epochs_c", c.pretrain.epochs_c);
        read(p, "lambda_da", c.pretrain.lambda_da);
    }
    if (c.pretrain.lambda_da < 0) throw std::invalid_argument("pretrain.lambda_da must be >= 0");

    c.distill.crop = c.pretrain.crop;
    c.distill.optim = c.pretrain.optim;
    c.distill.aug = c.pretrain.aug;
    if (j.contains("teacher")) {
        const auto& t = j.at("teacher");
        check_keys(t, "teacher", {"epochs", "hyper", "reuse_guidance"});
        read(t, "epochs", c.distill.teacher_epochs);
        read(t, "hyper", c.distill.hyper_teacher);
        read(t, "reuse_guidance", c.distill.teacher_reuse_guidance);
    }
    if (j.contains("distill")) {
        const auto& d = j.at("distill");
        check_keys(d, "distill", {"epochs", "alpha", "beta", "kd_margin", "kd_layers", "kd_through_recoverer",
                                  "mae_fill", "patience", "val_every"});
        read(d, "epochs", c.distill.epochs);
        read(d, "alpha", c.distill.alpha);
        read(d, "beta", c.distill.beta);
        read(d, "kd_margin", c.distill.kd_margin);
        read(d, "kd_layers", c.distill.kd_layers);
        read(d, "kd_through_recoverer", c.distill.kd_through_recoverer);
        read(d, "mae_fill", c.distill.mae_fill);
        read(d, "patience", c.distill.patience);
        read(d, "val_every", c.distill.val_every);
    }
    if (c.distill.alpha < 0 || c.distill.beta < 0 || c.distill.kd_margin < 0)
        throw std::invalid_argument("distill.alpha, distill.beta and distill.kd_margin must be >= 0");
    for (int l : c.distill.kd_layers)
        if (l < 0 || l >= c.backbone.depth)
            throw std::invalid_argument("distill.kd_layers entry " + std::to_string(l) + " outside [0, depth)");

    if (j.contains("hyper")) {
        const auto& h = j.at("hyper");
        check_keys(h, "hyper", {"indicator", "text_dim", "hidden", "mode", "fused_dim"});
        const std::string ind = h.value("indicator", "clip");
        if (ind == "clip")
            c.hyper.indicator = hyper::Indicator::Clip;
        else if (ind == "binary")
            c.hyper.indicator = hyper::Indicator::Binary;
        else
            throw std::invalid_argument("hyper.indicator must be 'clip' or 'binary'");
        read(h, "text_dim", c.hyper.text_dim);
        read(h, "hidden", c.hyper.hidden);
        const std::string mode = h.value("mode", "residual");
        if (mode == "residual")
            c.hyper.mode = nn::HeadMode::Residual;
        else if (mode == "direct")
            c.hyper.mode = nn::HeadMode::Direct;
        else
            throw std::invalid_argument("hyper.mode must be 'residual' or 'direct'");
    }
    if (j.contains("embedder")) {
        const auto& e = j.at("embedder");
        check_keys(e, "embedder", {"provider", "seed", "file", "endpoint", "cache", "timeout_s"});
        read(e, "provider", c.embedder.provider);
        read(e, "seed", c.embedder.seed);
        read_path(e, "file", c.embedder.file);
        read(e, "endpoint", c.embedder.live.endpoint);
        read_path(e, "cache", c.embedder.live.cache);
        read(e, "timeout_s", c.embedder.live.timeout_s);
    }
    if (j.contains("eval")) {
        const auto& e = j.at("eval");
        check_keys(e, "eval", {"threshold", "hd95_one_empty"});
        read(e, "threshold", c.eval_threshold);
        if (e.contains("hd95_one_empty") && !e.at("hd95_one_empty").is_null())
            c.hd95_one_empty = e.at("hd95_one_empty").get<double>();
    }
    if (j.contains("preset") && !j.at("preset").is_null()) apply_preset(c, j.at("preset").get<std::string>());

    // The binary indicator maps the M-bit code through an M→M identity-initialised layer.
    if (c.hyper.indicator == hyper::Indicator::Binary) c.hyper.text_dim = m;
    c.embedder.dim = c.hyper.text_dim;
    return c;
}

void apply_preset(ExperimentConfig& c, const std::string& name) {
    const auto s = train::ablation_preset(name);
    c.distill.mae_fill = s.mae_fill;
    c.distill.alpha = s.data_refine ? 1.0 : 0.0;
    c.distill.hyper_teacher = s.hyper_teacher;
    // The co-distillation ablation uses the binary indicator throughout.
    c.hyper.indicator = hyper::Indicator::Binary;
    c.hyper.text_dim = c.data.modalities;
    c.embedder.dim = c.hyper.text_dim;
}

json config_to_json(const ExperimentConfig& c) {
    json j;
    j["version"] = kConfigVersion;
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir.generic_string();
    j["deterministic"] = c.deterministic;
    j["data"] = {{"source", c.data.source},
                 {"modalities", c.data.modalities},
                 {"phantom",
                  {{"n_train", c.data.phantom.n_train},
                   {"n_val", c.data.phantom.n_val},
                   {"n_eval", c.data.phantom.n_eval},
                   {"shape", extent_json(c.data.phantom.shape)}}},
                 {"train_manifest", path_json(c.data.train_manifest)},
                 {"val_manifest", path_json(c.data.val_manifest)},
                 {"eval_manifest", path_json(c.data.eval_manifest)}};
    j["split"] = {{"fm_ratio", c.fm_ratio}, {"missing_min", c.missing.lo}, {"missing_max", c.missing.hi}};
    j["backbone"] = {{"preset", c.backbone_preset},
                     {"base_width", c.backbone.base_width},
                     {"depth", c.backbone.depth},
                     {"groups", c.backbone.groups}};
    j["preprocess"] = {{"crop", extent_json(c.pretrain.crop)},
                       {"shift", c.pretrain.aug.shift},
                       {"scale", {c.pretrain.aug.scale_lo, c.pretrain.aug.scale_hi}},
                       {"flip_p", c.pretrain.aug.flip_p}};
    j["optim"] = {{"lr", c.pretrain.optim.lr},
                  {"weight_decay", c.pretrain.optim.weight_decay},
                  {"beta1", c.pretrain.optim.beta1},
                  {"beta2", c.pretrain.optim.beta2},
                  {"eps", c.pretrain.optim.eps}};
    j["masking"] = {{"patch", extent_json(c.pretrain.patch)}, {"ratio", c.pretrain.mask_ratio}};
    j["pretrain"] = {{"epochs_a", c.pretrain.epochs_a},
                     {"epochs_b", c.pretrain.epochs_b},
                     {"epochs_c", c.pretrain.epochs_c},
                     {"lambda_da", c.pretrain.lambda_da}};
    j["teacher"] = {{"epochs", c.distill.teacher_epochs},
                    {"hyper", c.distill.hyper_teacher},
                    {"reuse_guidance", c.distill.teacher_reuse_guidance}};
    j["distill"] = {{"epochs", c.distill.epochs},
                    {"alpha", c.distill.alpha},
                    {"beta", c.distill.beta},
                    {"kd_margin", c.distill.kd_margin},
                    {"kd_layers", c.distill.kd_layers},
                    {"kd_through_recoverer", c.distill.kd_through_recoverer},
                    {"mae_fill", c.distill.mae_fill},
                    {"patience", c.distill.patience},
                    {"val_every", c.distill.val_every}};
    j["hyper"] = {{"indicator", c.hyper.indicator == hyper::Indicator::Clip ? "clip" : "binary"},
                  {"text_dim", c.hyper.text_dim},
                  {"hidden", c.hyper.hidden},
                  {"mode", c.hyper.mode == nn::HeadMode::Residual ? "residual" : "direct"},
                  {"fused_dim", c.hyper.fused_dim(c.backbone)}};
    j["embedder"] = {{"provider", c.embedder.provider},
                     {"seed", c.embedder.seed},
                     {"file", path_json(c.embedder.file)},
                     {"endpoint", c.embedder.live.endpoint.empty() ? json(nullptr) : json(c.embedder.live.endpoint)},
                     {"cache", path_json(c.embedder.live.cache)},
                     {"timeout_s", c.embedder.live.timeout_s}};
    j["eval"] = {{"threshold", c.eval_threshold},
                 {"hd95_one_empty", c.hd95_one_empty ? json(*c.hd95_one_empty) : json(nullptr)}};
    return j;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config " + path.string());
    return config_from_json(json::parse(is));
}

std::vector<std::string> json_diff(const json& a, const json& b) {
    std::vector<std::string> out;
    auto rec = [&](auto&& self, const json& x, const json& y, const std::string& prefix) -> void {
        if (x.is_object() && y.is_object()) {
            std::set<std::string> keys;
            for (const auto& [k, v] : x.items()) keys.insert(k);
            for (const auto& [k, v] : y.items()) keys.insert(k);
            for (const auto& k : keys) {
                const auto p = prefix.empty() ? k : prefix + "." + k;
                if (!x.contains(k) || !y.contains(k))
                    out.push_back(p);
                else
                    self(self, x.at(k), y.at(k), p);
            }
            return;
        }
        if (x != y) out.push_back(prefix);
    };
    rec(rec, a, b, "");
    return out;
}

ExperimentConfig toy_config() { return config_from_json(json::object()); }

}  // namespace mmseg::pipeline
