// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmseg/hypernet/hypernet.hpp"

#include "mmseg/rng.hpp"

#include <stdexcept>

namespace mmseg::hyper {

using i64 = std::int64_t;

template <typename T>
std::vector<T> HyperIndicator<T>::fused() const {
    std::vector<T> out(text);
    out.insert(out.end(), visual.begin(), visual.end());
    return out;
}

template <typename T>
HyperNetwork<T>::HyperNetwork(const HyperConfig& cfg, int modalities, int visual_dim,
                              std::vector<std::pair<Shape, Shape>> head_shapes)
    : cfg_(cfg), modalities_(modalities), visual_dim_(visual_dim), shapes_(std::move(head_shapes)) {
    i64 flat = 0;
    for (const auto& [ws, bs] : shapes_) flat += numel(ws) + numel(bs);
    if (cfg_.indicator == Indicator::Binary) binary_ = nn::Linear<T>("hyper.binary", modalities, cfg_.text_dim);
    fc1_ = nn::Linear<T>("hyper.fc1", cfg_.text_dim + visual_dim, cfg_.hidden);
    fc2_ = nn::Linear<T>("hyper.fc2", cfg_.hidden, cfg_.hidden);
    fc3_ = nn::Linear<T>("hyper.fc3", cfg_.hidden, flat);
}

template <typename T>
void HyperNetwork<T>::init(std::uint64_t seed) {
    if (cfg_.indicator == Indicator::Binary) {
        binary_.weight.value.zero();
        binary_.bias.value.zero();
        for (i64 i = 0; i < std::min<i64>(modalities_, cfg_.text_dim); ++i)
            binary_.weight.value[i * modalities_ + i] = T{1};
    }
    fc1_.init(seed);
    fc2_.init(seed);
    fc3_.weight.value.zero();
    fc3_.bias.value.zero();
}

template <typename T>
void HyperNetwork<T>::collect(nn::ParamList<T>& out) {
    if (cfg_.indicator == Indicator::Binary) binary_.collect(out);
    fc1_.collect(out);
    fc2_.collect(out);
    fc3_.collect(out);
}

template <typename T>
std::vector<T> HyperNetwork<T>::text_indicator(const ModalityCode& code, const std::vector<float>* text) {
    if (cfg_.indicator == Indicator::Binary) {
        if (code.size() != modalities_)
            throw std::invalid_argument("binary indicator expects a " + std::to_string(modalities_) + "-bit code");
        std::vector<T> bits(static_cast<std::size_t>(modalities_));
        for (int i = 0; i < modalities_; ++i) bits[static_cast<std::size_t>(i)] = code[i] ? T{1} : T{0};
        return binary_.forward(bits);
    }
    if (!text) throw std::invalid_argument("hyper-network needs a text embedding for code " + code.str());
    return std::vector<T>(text->begin(), text->end());
}

template <typename T>
nn::GeneratedParams<T> HyperNetwork<T>::forward(const HyperIndicator<T>& ind) {
    if (static_cast<int>(ind.text.size()) != cfg_.text_dim)
        throw std::invalid_argument("text embedding length " + std::to_string(ind.text.size()) + ", expected " +
                                    std::to_string(cfg_.text_dim));
    if (static_cast<int>(ind.visual.size()) != visual_dim_)
        throw std::invalid_argument("visual embedding length " + std::to_string(ind.visual.size()) + ", expected " +
                                    std::to_string(visual_dim_));
    pre1_ = fc1_.forward(ind.fused());
    pre2_ = fc2_.forward(nn::leaky_relu(pre1_));
    return nn::GeneratedParams<T>::unflatten(fc3_.forward(nn::leaky_relu(pre2_)), shapes_);
}

template <typename T>
std::pair<std::vector<T>, std::vector<T>> HyperNetwork<T>::backward(const nn::GeneratedParams<T>& grad) {
    auto g = fc3_.backward(grad.flatten());
    g = fc2_.backward(nn::leaky_relu_backward(pre2_, g));
    g = fc1_.backward(nn::leaky_relu_backward(pre1_, g));
    std::vector<T> gt(g.begin(), g.begin() + cfg_.text_dim), gv(g.begin() + cfg_.text_dim, g.end());
    return {std::move(gt), std::move(gv)};
}

template <typename T>
void HyperNetwork<T>::backward_indicator(const std::vector<T>& grad_text) {
    if (cfg_.indicator == Indicator::Binary) binary_.backward(grad_text);
}

// ---------------------------------------------------------------------------

template <typename T>
HyperSegModel<T>::HyperSegModel(const nn::BackboneConfig& b, const HyperConfig& h, std::uint64_t seed)
    : hcfg_(h), net_(b, seed) {
    if (hcfg_.enabled) {
        hyper_ = HyperNetwork<T>(hcfg_, b.in_channels, static_cast<int>(b.bottleneck_channels()), net_.head_shapes());
        hyper_.init(derive_seed(seed, "hyper"));
    }
}

template <typename T>
nn::SegOutput<T> HyperSegModel<T>::forward(const Tensor<T>& x, const ModalityCode& code,
                                           const std::vector<float>* text) {
    auto& trunk = net_.trunk_forward(x);
    nn::SegOutput<T> out;
    if (hcfg_.enabled) {
        ind_.text = hyper_.text_indicator(code, text);
        ind_.visual = trunk.pooled;
        gen_ = hyper_.forward(ind_);
        out.logits = net_.head_forward(&gen_, hcfg_.mode);
    } else {
        out.logits = net_.head_forward(nullptr);
    }
    out.taps = trunk.taps;
    out.pooled = trunk.pooled;
    return out;
}

template <typename T>
Tensor<T> HyperSegModel<T>::backward(const Tensor<T>& grad_logits, const std::vector<Tensor<T>>& grad_taps,
                                     bool need_input_grad) {
    std::vector<T> grad_pooled;
    if (!grad_logits.empty()) {
        auto gg = net_.head_backward(grad_logits);
        if (hcfg_.enabled) {
            auto [gt, gv] = hyper_.backward(gg);
            hyper_.backward_indicator(gt);
            grad_pooled = std::move(gv);
        }
    }
    return net_.trunk_backward(grad_taps, grad_pooled, need_input_grad);
}

template <typename T>
nn::ParamList<T> HyperSegModel<T>::parameters() {
    auto out = net_.parameters();
    if (hcfg_.enabled) hyper_.collect(out);
    return out;
}

template struct HyperIndicator<float>;
template struct HyperIndicator<double>;
template class HyperNetwork<float>;
template class HyperNetwork<double>;
template class HyperSegModel<float>;
template class HyperSegModel<double>;

}  // namespace mmseg::hyper
