// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Text embedding providers for modality prompts.
//   stub    - hash-seeded unit vector, hermetic
//   offline - JSON file {prompt: [E_t floats]}
//   live    - HTTP endpoint, serialized, cached on disk

#pragma once

#include "mmseg/modality.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace mmseg::hyper {

class TextEmbedder {
public:
    virtual ~TextEmbedder() = default;
    virtual std::vector<float> embed(const std::string& prompt) = 0;
    virtual std::string provider_id() const = 0;
    virtual int dim() const = 0;
};

class StubEmbedder final : public TextEmbedder {
public:
    explicit StubEmbedder(int dim = 512, std::uint64_t seed = 0) : dim_(dim), seed_(seed) {}
    std::vector<float> embed(const std::string& prompt) override;
    std::string provider_id() const override { return "stub"; }
    int dim() const override { return dim_; }

private:
    int dim_;
    std::uint64_t seed_;
};

class OfflineEmbedder final : public TextEmbedder {
public:
    explicit OfflineEmbedder(const std::filesystem::path& file);
    std::vector<float> embed(const std::string& prompt) override;
    std::string provider_id() const override { return "offline"; }
    int dim() const override { return dim_; }
    std::size_t rows() const { return table_.size(); }

private:
    std::map<std::string, std::vector<float>> table_;
    int dim_ = 0;
};

struct LiveOptions {
    std::string endpoint;  // e.g. http://127.0.0.1:8000/embed
    std::filesystem::path cache;
    int dim = 512;
    int timeout_s = 10;
    int attempts = 2;
};

/// POSTs {"text": prompt} and expects {"embedding": [...]}. Every result is
/// written to the cache file; cached prompts never touch the network.
class LiveEmbedder final : public TextEmbedder {
public:
    explicit LiveEmbedder(LiveOptions opt);
    std::vector<float> embed(const std::string& prompt) override;
    std::string provider_id() const override { return "live"; }
    int dim() const override { return opt_.dim; }

private:
    LiveOptions opt_;
    std::map<std::string, std::vector<float>> cache_;
    std::mutex mu_;
};

struct EmbedderConfig {
    std::string provider = "stub";
    int dim = 512;
    std::uint64_t seed = 0;
    std::filesystem::path file;  // offline
    LiveOptions live;
};

std::unique_ptr<TextEmbedder> make_embedder(const EmbedderConfig& cfg);

/// Prompt embeddings for every non-empty code of an M-modality setup.
class PromptBank {
public:
    PromptBank() = default;
    PromptBank(TextEmbedder& embedder, int modalities);

    const std::vector<float>& get(const ModalityCode& code) const;
    int dim() const { return dim_; }

private:
    std::map<std::string, std::vector<float>> rows_;  // keyed by code string
    int dim_ = 0;
};

/// {prompt: embedding} for every non-empty code, written as JSON.
void write_prompt_file(const std::filesystem::path& out, TextEmbedder& embedder, int modalities);

}  // namespace mmseg::hyper
