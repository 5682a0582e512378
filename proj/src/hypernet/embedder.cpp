// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmseg/hypernet/embedder.hpp"

#include "mmseg/hypernet/prompt.hpp"
#include "mmseg/rng.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace mmseg::hyper {

namespace fs = std::filesystem;

std::vector<float> StubEmbedder::embed(const std::string& prompt) {
    if (prompt.empty()) throw std::invalid_argument("embed: empty prompt");
    Rng rng(fnv1a(prompt.data(), prompt.size(), splitmix64(seed_)));
    std::vector<double> v(static_cast<std::size_t>(dim_));
    double norm = 0;
    for (auto& x : v) {
        x = rng.normal();
        norm += x * x;
    }
    norm = std::sqrt(norm);
    std::vector<float> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i] / norm);
    return out;
}

OfflineEmbedder::OfflineEmbedder(const fs::path& file) {
    std::ifstream is(file);
    if (!is) throw std::runtime_error("cannot open embedding file " + file.string());
    const auto j = nlohmann::json::parse(is);
    for (const auto& [prompt, row] : j.items()) {
        auto v = row.get<std::vector<float>>();
        if (dim_ == 0) dim_ = static_cast<int>(v.size());
        if (static_cast<int>(v.size()) != dim_)
            throw std::runtime_error("embedding file " + file.string() + ": row for '" + prompt + "' has length " +
                                     std::to_string(v.size()) + ", expected " + std::to_string(dim_));
        table_.emplace(prompt, std::move(v));
    }
    if (table_.empty()) throw std::runtime_error("embedding file " + file.string() + " is empty");
}

std::vector<float> OfflineEmbedder::embed(const std::string& prompt) {
    auto it = table_.find(prompt);
    if (it == table_.end()) throw std::out_of_range("offline embeddings have no row for prompt '" + prompt + "'");
    return it->second;
}

LiveEmbedder::LiveEmbedder(LiveOptions opt) : opt_(std::move(opt)) {
    if (opt_.cache.empty()) throw std::invalid_argument("live embedder requires a cache file");
    if (fs::exists(opt_.cache)) {
        std::ifstream is(opt_.cache);
        const auto j = nlohmann::json::parse(is);
        for (const auto& [prompt, row] : j.items()) cache_.emplace(prompt, row.get<std::vector<float>>());
    }
}

std::vector<float> LiveEmbedder::embed(const std::string& prompt) {
    std::lock_guard lock(mu_);
    if (auto it = cache_.find(prompt); it != cache_.end()) return it->second;

    const auto& url = opt_.endpoint;
    const auto scheme_end = url.find("://");
    const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    const std::string host = path_start == std::string::npos ? url : url.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);
    httplib::Client cli(host);
    cli.set_connection_timeout(opt_.timeout_s);
    cli.set_read_timeout(opt_.timeout_s);

    const std::string body = nlohmann::json{{"text", prompt}}.dump();
    std::string last_error = "no attempt made";
    for (int attempt = 0; attempt < std::max(1, opt_.attempts); ++attempt) {
        auto res = cli.Post(path, body, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        auto v = nlohmann::json::parse(res->body).at("embedding").get<std::vector<float>>();
        if (static_cast<int>(v.size()) != opt_.dim)
            throw std::runtime_error("live embedder returned length " + std::to_string(v.size()) + ", expected " +
                                     std::to_string(opt_.dim));
        cache_.emplace(prompt, v);
        nlohmann::json j(cache_);
        if (opt_.cache.has_parent_path()) fs::create_directories(opt_.cache.parent_path());
        std::ofstream(opt_.cache) << j.dump() << '\n';
        return v;
    }
    throw std::runtime_error("live embedder failed for '" + prompt + "': " + last_error);
}

std::unique_ptr<TextEmbedder> make_embedder(const EmbedderConfig& cfg) {
    if (cfg.provider == "stub") return std::make_unique<StubEmbedder>(cfg.dim, cfg.seed);
    if (cfg.provider == "offline") return std::make_unique<OfflineEmbedder>(cfg.file);
    if (cfg.provider == "live") {
        auto opt = cfg.live;
        opt.dim = cfg.dim;
        return std::make_unique<LiveEmbedder>(opt);
    }
    throw std::invalid_argument("unknown embedder provider '" + cfg.provider + "' (stub, offline, live)");
}

PromptBank::PromptBank(TextEmbedder& embedder, int modalities) {
    for (const auto& code : sweep_codes(modalities)) {
        auto v = embedder.embed(build_prompt(code));
        if (dim_ == 0) dim_ = static_cast<int>(v.size());
        rows_.emplace(code.str(), std::move(v));
    }
}

const std::vector<float>& PromptBank::get(const ModalityCode& code) const {
    auto it = rows_.find(code.str());
    if (it == rows_.end()) throw std::out_of_range("no prompt embedding for code " + code.str());
    return it->second;
}

void write_prompt_file(const fs::path& out, TextEmbedder& embedder, int modalities) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& code : sweep_codes(modalities)) {
        const auto p = build_prompt(code);
        j[p] = embedder.embed(p);
    }
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    std::ofstream(out) << j.dump() << '\n';
}

}  // namespace mmseg::hyper
