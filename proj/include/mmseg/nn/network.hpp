// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared 3D U-Net backbone (group norm throughout) with two heads:
//   SegmentationNet   - 3 region logits (WT, TC, ET), optional generated head offsets
//   ReconstructionNet - M-channel reconstruction (the masked autoencoder)
// Both own an identical trunk; the heads differ only in their final 1x1x1 layer.

#pragma once

#include "mmseg/nn/layers.hpp"
#include "mmseg/tensor.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mmseg::nn {

struct BackboneConfig {
    int in_channels = 4;
    int base_width = 8;
    int depth = 3;
    int groups = 4;
    int seg_out_channels = 3;
    int mae_out_channels = 4;

    static BackboneConfig full(int m = 4) { return {m, 16, 4, 8, 3, m}; }
    static BackboneConfig toy(int m = 4) { return {m, 8, 3, 4, 3, m}; }
    static BackboneConfig micro(int m = 4) { return {m, 4, 2, 2, 3, m}; }

    void validate() const;
    std::int64_t width(int level) const { return static_cast<std::int64_t>(base_width) << level; }
    std::int64_t bottleneck_channels() const { return width(depth - 1); }
    std::int64_t head_hidden() const { return base_width; }
    /// Spatial dims must be divisible by this.
    std::int64_t divisor() const { return std::int64_t{1} << (depth - 1); }
    void check_input(const Shape& s) const;

    bool operator==(const BackboneConfig&) const = default;
};

/// Per-layer weights/biases for the prediction head, i = 1..L_hyp (here 2).
template <typename T>
struct GeneratedParams {
    struct Layer {
        Tensor<T> weight;  // [cout, cin, 1, 1, 1]
        Tensor<T> bias;    // [cout]
    };
    std::vector<Layer> layers;

    std::int64_t flat_size() const;
    /// Deterministic reshape: layer 0 weight, layer 0 bias, layer 1 weight, ...
    static GeneratedParams unflatten(const std::vector<T>& flat, const std::vector<std::pair<Shape, Shape>>& shapes);
    std::vector<T> flatten() const;
};

enum class HeadMode { Residual, Direct };

/// Two 1x1x1 convolutions: width → hidden → out, LeakyReLU in between.
template <typename T>
class PredictionHead {
public:
    PredictionHead() = default;
    PredictionHead(const std::string& name, std::int64_t in, std::int64_t hidden, std::int64_t out);

    /// Shapes of the L_hyp generated layers, in flatten order.
    std::vector<std::pair<Shape, Shape>> layer_shapes() const;
    std::int64_t flat_size() const;

    Tensor<T> forward(const Tensor<T>& features, const GeneratedParams<T>* gen = nullptr,
                      HeadMode mode = HeadMode::Residual);
    /// Returns the feature gradient; fills grad_gen when the forward used generated params.
    Tensor<T> backward(const Tensor<T>& grad_out, GeneratedParams<T>* grad_gen = nullptr);

    void collect(ParamList<T>& out) {
        out.push_back(&w1_);
        out.push_back(&b1_);
        out.push_back(&w2_);
        out.push_back(&b2_);
    }
    void init(std::uint64_t seed);

private:
    std::int64_t in_ = 0, hidden_ = 0, out_ = 0;
    Param<T> w1_, b1_, w2_, b2_;
    // Effective (static ⊕ generated) parameters and activations of the last forward.
    Tensor<T> ew1_, eb1_, ew2_, eb2_;
    Tensor<T> input_, hidden_pre_, hidden_act_;
    bool used_gen_ = false;
    HeadMode mode_ = HeadMode::Residual;
};

/// Encoder/decoder trunk output. taps are ordered coarse → fine:
/// taps[0] is the bottleneck, taps[l] the decoder output at level depth-1-l.
template <typename T>
struct TrunkOutput {
    Tensor<T> features;
    std::vector<Tensor<T>> taps;
    std::vector<T> pooled;  // global average of the bottleneck
};

template <typename T>
class UNetTrunk {
public:
    UNetTrunk() = default;
    explicit UNetTrunk(const BackboneConfig& cfg);

    TrunkOutput<T> forward(const Tensor<T>& x);
    /// grad_taps / grad_pooled may be empty (no contribution). grad_features
    /// is added to the gradient of the last tap.
    Tensor<T> backward(const Tensor<T>& grad_features, const std::vector<Tensor<T>>& grad_taps,
                       const std::vector<T>& grad_pooled, bool need_input_grad);

    void collect(ParamList<T>& out);
    void init(std::uint64_t seed);
    const BackboneConfig& config() const { return cfg_; }

private:
    BackboneConfig cfg_;
    std::vector<ConvBlock<T>> enc_;
    std::vector<UpConv<T>> up_;
    std::vector<ConvBlock<T>> dec_;
    Shape feature_shape_;
};

/// Common parameter bookkeeping for a model made of named params.
template <typename T>
class ParamSet {
public:
    virtual ~ParamSet() = default;
    virtual ParamList<T> parameters() = 0;

    void zero_grad();
    void set_trainable(bool on);
    bool any_grad_nonzero();
    std::uint64_t checksum();
    std::int64_t parameter_count();
};

template <typename T>
struct SegOutput {
    Tensor<T> logits;  // [3, D, H, W]
    std::vector<Tensor<T>> taps;
    std::vector<T> pooled;
};

template <typename T>
class SegmentationNet : public ParamSet<T> {
public:
    SegmentationNet() = default;
    SegmentationNet(const BackboneConfig& cfg, std::uint64_t seed);

    /// Trunk forward only; pair with head_forward when the head params depend
    /// on the pooled embedding.
    TrunkOutput<T>& trunk_forward(const Tensor<T>& x);
    Tensor<T> head_forward(const GeneratedParams<T>* gen, HeadMode mode = HeadMode::Residual);

    SegOutput<T> forward(const Tensor<T>& x, const GeneratedParams<T>* gen = nullptr,
                         HeadMode mode = HeadMode::Residual);

    /// Head backward; returns the gradient w.r.t. generated params (empty if none used).
    GeneratedParams<T> head_backward(const Tensor<T>& grad_logits);
    Tensor<T> trunk_backward(const std::vector<Tensor<T>>& grad_taps, const std::vector<T>& grad_pooled,
                             bool need_input_grad);
    /// Convenience: head + trunk backward with no pooled gradient.
    Tensor<T> backward(const Tensor<T>& grad_logits, const std::vector<Tensor<T>>& grad_taps, bool need_input_grad);

    ParamList<T> parameters() override;
    ParamList<T> trunk_parameters();
    const BackboneConfig& config() const { return cfg_; }
    const PredictionHead<T>& head() const { return head_; }
    std::vector<std::pair<Shape, Shape>> head_shapes() const { return head_.layer_shapes(); }

private:
    BackboneConfig cfg_;
    UNetTrunk<T> trunk_;
    PredictionHead<T> head_;
    TrunkOutput<T> last_;
    Tensor<T> grad_features_;
};

template <typename T>
class ReconstructionNet : public ParamSet<T> {
public:
    ReconstructionNet() = default;
    ReconstructionNet(const BackboneConfig& cfg, std::uint64_t seed);

    Tensor<T> forward(const Tensor<T>& x);
    Tensor<T> backward(const Tensor<T>& grad_out, bool need_input_grad);

    ParamList<T> parameters() override;
    ParamList<T> trunk_parameters();
    const BackboneConfig& config() const { return cfg_; }

private:
    BackboneConfig cfg_;
    UNetTrunk<T> trunk_;
    PredictionHead<T> head_;
};

/// Copy parameters by name from src into dst where shapes agree.
/// Returns the number of parameters copied.
template <typename T>
int copy_matching(const ParamList<T>& src, const ParamList<T>& dst);

}  // namespace mmseg::nn
