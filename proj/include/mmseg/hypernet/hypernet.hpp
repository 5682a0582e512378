// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Hyper-network: MLP(Z_m ⊕ Z_e) → flat vector → per-layer {w_i, b_i} of the
// prediction head. Z_m is a prompt embedding (or a learned map of the binary
// code), Z_e the pooled bottleneck of the segmentation trunk.

#pragma once

#include "mmseg/modality.hpp"
#include "mmseg/nn/network.hpp"

#include <vector>

namespace mmseg::hyper {

enum class Indicator { Clip, Binary };

struct HyperConfig {
    bool enabled = true;
    Indicator indicator = Indicator::Clip;
    int text_dim = 512;  // E_t; the binary path maps the M-bit code to this length
    int hidden = 256;
    nn::HeadMode mode = nn::HeadMode::Residual;

    /// Length of Z_m ⊕ Z_e for a given backbone.
    int fused_dim(const nn::BackboneConfig& b) const {
        return text_dim + static_cast<int>(b.bottleneck_channels());
    }
};

template <typename T>
struct HyperIndicator {
    std::vector<T> text;    // Z_m
    std::vector<T> visual;  // Z_e
    std::vector<T> fused() const;
};

template <typename T>
class HyperNetwork {
public:
    HyperNetwork() = default;
    HyperNetwork(const HyperConfig& cfg, int modalities, int visual_dim,
                 std::vector<std::pair<Shape, Shape>> head_shapes);

    /// Z_m for a code: the binary map output, or the supplied text embedding.
    std::vector<T> text_indicator(const ModalityCode& code, const std::vector<float>* text);

    nn::GeneratedParams<T> forward(const HyperIndicator<T>& ind);
    /// Returns (∂/∂Z_m, ∂/∂Z_e). Parameter grads accumulate when trainable.
    std::pair<std::vector<T>, std::vector<T>> backward(const nn::GeneratedParams<T>& grad);
    /// Chain ∂/∂Z_m into the binary map (no-op for the text path).
    void backward_indicator(const std::vector<T>& grad_text);

    void collect(nn::ParamList<T>& out);
    void init(std::uint64_t seed);
    std::int64_t output_size() const { return fc3_.out; }
    const HyperConfig& config() const { return cfg_; }

private:
    HyperConfig cfg_;
    int modalities_ = 0, visual_dim_ = 0;
    std::vector<std::pair<Shape, Shape>> shapes_;
    nn::Linear<T> binary_, fc1_, fc2_, fc3_;
    std::vector<T> pre1_, pre2_;
};

/// Segmentation network plus optional hyper-network driving its head.
template <typename T>
class HyperSegModel : public nn::ParamSet<T> {
public:
    HyperSegModel() = default;
    HyperSegModel(const nn::BackboneConfig& b, const HyperConfig& h, std::uint64_t seed);

    /// text may be null for the binary indicator or when the hyper-network is disabled.
    nn::SegOutput<T> forward(const Tensor<T>& x, const ModalityCode& code, const std::vector<float>* text);
    /// Full backward including the path through generated params into Z_e.
    Tensor<T> backward(const Tensor<T>& grad_logits, const std::vector<Tensor<T>>& grad_taps, bool need_input_grad);

    nn::ParamList<T> parameters() override;
    nn::ParamList<T> trunk_parameters() { return net_.trunk_parameters(); }
    nn::SegmentationNet<T>& net() { return net_; }
    HyperNetwork<T>& hyper() { return hyper_; }
    bool has_hyper() const { return hcfg_.enabled; }
    const nn::BackboneConfig& backbone() const { return net_.config(); }
    const HyperConfig& hyper_config() const { return hcfg_; }
    /// Generated params and indicator of the last forward (hyper mode only).
    const nn::GeneratedParams<T>& last_generated() const { return gen_; }
    const HyperIndicator<T>& last_indicator() const { return ind_; }

private:
    HyperConfig hcfg_;
    nn::SegmentationNet<T> net_;
    HyperNetwork<T> hyper_;
    nn::GeneratedParams<T> gen_;
    HyperIndicator<T> ind_;
};

}  // namespace mmseg::hyper
