// Copyright (c) 2026, The mmseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmseg/nn/network.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace mmseg::nn {

using i64 = std::int64_t;

void BackboneConfig::validate() const {
    if (depth < 2) throw std::invalid_argument("backbone depth must be >= 2");
    if (groups <= 0 || base_width % groups != 0)
        throw std::invalid_argument("base_width " + std::to_string(base_width) + " not divisible by groups " +
                                    std::to_string(groups));
    if (in_channels < 1 || seg_out_channels < 1 || mae_out_channels < 1)
        throw std::invalid_argument("backbone channel counts must be positive");
}

void BackboneConfig::check_input(const Shape& s) const {
    if (s.size() != 4 || s[0] != in_channels)
        throw std::invalid_argument("expected input [" + std::to_string(in_channels) + ",D,H,W], got " + shape_str(s));
    const i64 div = divisor();
    for (std::size_t i = 1; i < 4; ++i)
        if (s[i] % div != 0 || s[i] < div)
            throw std::invalid_argument("input spatial dims " + shape_str(s) + " must be divisible by " +
                                        std::to_string(div) + " (2^(depth-1))");
}

// ---------------------------------------------------------------------------

template <typename T>
i64 GeneratedParams<T>::flat_size() const {
    i64 n = 0;
    for (const auto& l : layers) n += l.weight.numel() + l.bias.numel();
    return n;
}

template <typename T>
GeneratedParams<T> GeneratedParams<T>::unflatten(const std::vector<T>& flat,
                                                 const std::vector<std::pair<Shape, Shape>>& shapes) {
    i64 expected = 0;
    for (const auto& [ws, bs] : shapes) expected += numel(ws) + numel(bs);
    if (static_cast<i64>(flat.size()) != expected)
        throw std::invalid_argument("generated parameter vector has length " + std::to_string(flat.size()) +
                                    ", head expects " + std::to_string(expected));
    GeneratedParams out;
    std::size_t off = 0;
    for (const auto& [ws, bs] : shapes) {
        Layer l{Tensor<T>(ws), Tensor<T>(bs)};
        for (i64 i = 0; i < l.weight.numel(); ++i) l.weight[i] = flat[off++];
        for (i64 i = 0; i < l.bias.numel(); ++i) l.bias[i] = flat[off++];
        out.layers.push_back(std::move(l));
    }
    return out;
}

template <typename T>
std::vector<T> GeneratedParams<T>::flatten() const {
    std::vector<T> out;
    out.reserve(static_cast<std::size_t>(flat_size()));
    for (const auto& l : layers) {
        out.insert(out.end(), l.weight.storage().begin(), l.weight.storage().end());
        out.insert(out.end(), l.bias.storage().begin(), l.bias.storage().end());
    }
    return out;
}

// ---------------------------------------------------------------------------

template <typename T>
PredictionHead<T>::PredictionHead(const std::string& name, i64 in, i64 hidden, i64 out)
    : in_(in), hidden_(hidden), out_(out), w1_(name + ".0.weight", {hidden, in, 1, 1, 1}), b1_(name + ".0.bias", {hidden}),
      w2_(name + ".1.weight", {out, hidden, 1, 1, 1}), b2_(name + ".1.bias", {out}) {}

template <typename T>
void PredictionHead<T>::init(std::uint64_t seed) {
    init_normal(w1_, seed, std::sqrt(2.0 / static_cast<double>(in_)));
    init_constant(b1_, T{0});
    init_normal(w2_, seed, std::sqrt(1.0 / static_cast<double>(hidden_)));
    init_constant(b2_, T{0});
}

template <typename T>
std::vector<std::pair<Shape, Shape>> PredictionHead<T>::layer_shapes() const {
    return {{w1_.value.shape(), b1_.value.shape()}, {w2_.value.shape(), b2_.value.shape()}};
}

template <typename T>
i64 PredictionHead<T>::flat_size() const {
    return w1_.value.numel() + b1_.value.numel() + w2_.value.numel() + b2_.value.numel();
}

template <typename T>
Tensor<T> PredictionHead<T>::forward(const Tensor<T>& features, const GeneratedParams<T>* gen, HeadMode mode) {
    used_gen_ = gen != nullptr;
    mode_ = mode;
    if (gen) {
        const auto shapes = layer_shapes();
        if (gen->layers.size() != shapes.size())
            throw std::invalid_argument("generated params have " + std::to_string(gen->layers.size()) +
                                        " layers, head has " + std::to_string(shapes.size()));
        for (std::size_t i = 0; i < shapes.size(); ++i)
            if (gen->layers[i].weight.shape() != shapes[i].first || gen->layers[i].bias.shape() != shapes[i].second)
                throw std::invalid_argument("generated param shape mismatch at head layer " + std::to_string(i) +
                                            ": expected " + shape_str(shapes[i].first) + ", got " +
                                            shape_str(gen->layers[i].weight.shape()));
        const bool res = mode == HeadMode::Residual;
        auto combine = [&](const Param<T>& p, const Tensor<T>& g) {
            Tensor<T> out = res ? p.value : Tensor<T>(p.value.shape());
            out += g;
            return out;
        };
        ew1_ = combine(w1_, gen->layers[0].weight);
        eb1_ = combine(b1_, gen->layers[0].bias);
        ew2_ = combine(w2_, gen->layers[1].weight);
        eb2_ = combine(b2_, gen->layers[1].bias);
    } else {
        ew1_ = w1_.value;
        eb1_ = b1_.value;
        ew2_ = w2_.value;
        eb2_ = b2_.value;
    }
    const auto e = features.extent();
    input_ = features;
    hidden_pre_ = Tensor<T>({hidden_, e.d, e.h, e.w});
    kernels::conv3d_forward(features.data(), ew1_.data(), eb1_.data(), hidden_pre_.data(),
                            {in_, hidden_, e.d, e.h, e.w, 1}, kernels::default_exec());
    LeakyReLU<T> act;
    hidden_act_ = act.forward(hidden_pre_);
    Tensor<T> out({out_, e.d, e.h, e.w});
    kernels::conv3d_forward(hidden_act_.data(), ew2_.data(), eb2_.data(), out.data(),
                            {hidden_, out_, e.d, e.h, e.w, 1}, kernels::default_exec());
    return out;
}

template <typename T>
Tensor<T> PredictionHead<T>::backward(const Tensor<T>& grad_out, GeneratedParams<T>* grad_gen) {
    const auto e = input_.extent();
    const auto ex = kernels::default_exec();
    const kernels::ConvGeom g2{hidden_, out_, e.d, e.h, e.w, 1};
    const kernels::ConvGeom g1{in_, hidden_, e.d, e.h, e.w, 1};

    Tensor<T> gw2(ew2_.shape()), gb2(eb2_.shape()), gw1(ew1_.shape()), gb1(eb1_.shape());
    kernels::conv3d_backward_weight(grad_out.data(), hidden_act_.data(), gw2.data(), gb2.data(), g2, ex);
    Tensor<T> g_hidden(hidden_act_.shape());
    kernels::conv3d_backward_input(grad_out.data(), ew2_.data(), g_hidden.data(), g2, ex);
    // LeakyReLU backward on the cached pre-activation.
    for (i64 i = 0; i < g_hidden.numel(); ++i)
        if (!(hidden_pre_[i] > T{0})) g_hidden[i] *= T(0.01);
    kernels::conv3d_backward_weight(g_hidden.data(), input_.data(), gw1.data(), gb1.data(), g1, ex);
    Tensor<T> g_in(input_.shape());
    kernels::conv3d_backward_input(g_hidden.data(), ew1_.data(), g_in.data(), g1, ex);

    const bool static_used = !used_gen_ || mode_ == HeadMode::Residual;
    if (static_used && w1_.trainable) {
        w1_.grad += gw1;
        b1_.grad += gb1;
        w2_.grad += gw2;
        b2_.grad += gb2;
    }
    if (used_gen_ && grad_gen) {
        grad_gen->layers.clear();
        grad_gen->layers.push_back({std::move(gw1), std::move(gb1)});
        grad_gen->layers.push_back({std::move(gw2), std::move(gb2)});
    }
    return g_in;
}

// ---------------------------------------------------------------------------

template <typename T>
UNetTrunk<T>::UNetTrunk(const BackboneConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    for (int l = 0; l < cfg.depth; ++l) {
        const i64 cin = l == 0 ? cfg.in_channels : cfg.width(l - 1);
        enc_.emplace_back("trunk.enc." + std::to_string(l), cin, cfg.width(l), cfg.groups);
    }
    for (int j = 0; j < cfg.depth - 1; ++j) {
        const int l = cfg.depth - 2 - j;
        up_.emplace_back("trunk.up." + std::to_string(j), cfg.width(l + 1), cfg.width(l));
        dec_.emplace_back("trunk.dec." + std::to_string(j), 2 * cfg.width(l), cfg.width(l), cfg.groups);
    }
}

template <typename T>
void UNetTrunk<T>::init(std::uint64_t seed) {
    for (auto& b : enc_) b.init(seed);
    for (auto& u : up_) u.init(seed);
    for (auto& b : dec_) b.init(seed);
}

template <typename T>
void UNetTrunk<T>::collect(ParamList<T>& out) {
    for (auto& b : enc_) b.collect(out);
    for (std::size_t j = 0; j < up_.size(); ++j) {
        up_[j].collect(out);
        dec_[j].collect(out);
    }
}

template <typename T>
TrunkOutput<T> UNetTrunk<T>::forward(const Tensor<T>& x) {
    cfg_.check_input(x.shape());
    const int depth = cfg_.depth;
    std::vector<Tensor<T>> skips(static_cast<std::size_t>(depth));
    Tensor<T> h = enc_[0].forward(x);
    skips[0] = h;
    for (int l = 1; l < depth; ++l) {
        h = enc_[static_cast<std::size_t>(l)].forward(avg_pool2(h));
        skips[static_cast<std::size_t>(l)] = h;
    }
    TrunkOutput<T> out;
    out.taps.push_back(h);
    const i64 vox = h.numel() / h.channels();
    out.pooled.assign(static_cast<std::size_t>(h.channels()), T{0});
    for (i64 c = 0; c < h.channels(); ++c) {
        double s = 0.0;
        const T* p = h.channel(c);
        for (i64 i = 0; i < vox; ++i) s += p[i];
        out.pooled[static_cast<std::size_t>(c)] = static_cast<T>(s / static_cast<double>(vox));
    }
    for (int j = 0; j < depth - 1; ++j) {
        const int l = depth - 2 - j;
        auto u = up_[static_cast<std::size_t>(j)].forward(h);
        h = dec_[static_cast<std::size_t>(j)].forward(concat_channels(u, skips[static_cast<std::size_t>(l)]));
        out.taps.push_back(h);
    }
    feature_shape_ = h.shape();
    out.features = h;
    return out;
}

template <typename T>
Tensor<T> UNetTrunk<T>::backward(const Tensor<T>& grad_features, const std::vector<Tensor<T>>& grad_taps,
                                 const std::vector<T>& grad_pooled, bool need_input_grad) {
    const int depth = cfg_.depth;
    auto tap_grad = [&](int i) -> const Tensor<T>* {
        if (static_cast<std::size_t>(i) < grad_taps.size() && !grad_taps[static_cast<std::size_t>(i)].empty())
            return &grad_taps[static_cast<std::size_t>(i)];
        return nullptr;
    };
    std::vector<Tensor<T>> skip_grads(static_cast<std::size_t>(depth));

    Tensor<T> g = grad_features;
    if (auto* t = tap_grad(depth - 1)) {
        if (g.empty())
            g = *t;
        else
            g += *t;
    }
    if (g.empty()) g = Tensor<T>(feature_shape_);
    for (int j = depth - 2; j >= 0; --j) {
        const int l = depth - 2 - j;
        auto gcat = dec_[static_cast<std::size_t>(j)].backward(g);
        Tensor<T> gu, gskip;
        split_channels(gcat, cfg_.width(l), gu, gskip);
        skip_grads[static_cast<std::size_t>(l)] = std::move(gskip);
        g = up_[static_cast<std::size_t>(j)].backward(gu);
        if (auto* t = tap_grad(j)) g += *t;
    }
    // g is now the gradient at the bottleneck.
    if (!grad_pooled.empty()) {
        const i64 vox = g.numel() / g.channels();
        const T inv = T(1) / static_cast<T>(vox);
        for (i64 c = 0; c < g.channels(); ++c) {
            const T add = grad_pooled[static_cast<std::size_t>(c)] * inv;
            T* p = g.channel(c);
            for (i64 i = 0; i < vox; ++i) p[i] += add;
        }
    }
    for (int l = depth - 1; l >= 0; --l) {
        const bool need = l > 0 || need_input_grad;
        auto gin = enc_[static_cast<std::size_t>(l)].backward(g, need);
        if (l == 0) return gin;
        g = avg_pool2_backward(gin);
        g += skip_grads[static_cast<std::size_t>(l - 1)];
    }
    return {};
}

// ---------------------------------------------------------------------------

template <typename T>
void ParamSet<T>::zero_grad() {
    for (auto* p : parameters()) p->grad.zero();
}

template <typename T>
void ParamSet<T>::set_trainable(bool on) {
    for (auto* p : parameters()) p->trainable = on;
}

template <typename T>
bool ParamSet<T>::any_grad_nonzero() {
    for (auto* p : parameters())
        for (i64 i = 0; i < p->grad.numel(); ++i)
            if (p->grad[i] != T{0}) return true;
    return false;
}

template <typename T>
std::uint64_t ParamSet<T>::checksum() {
    std::uint64_t h = 1469598103934665603ULL;
    for (auto* p : parameters()) h = mmseg::checksum(p->value, h);
    return h;
}

template <typename T>
i64 ParamSet<T>::parameter_count() {
    i64 n = 0;
    for (auto* p : parameters()) n += p->value.numel();
    return n;
}

// ---------------------------------------------------------------------------

template <typename T>
SegmentationNet<T>::SegmentationNet(const BackboneConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), trunk_(cfg), head_("head", cfg.base_width, cfg.head_hidden(), cfg.seg_out_channels) {
    trunk_.init(seed);
    head_.init(seed);
}

template <typename T>
TrunkOutput<T>& SegmentationNet<T>::trunk_forward(const Tensor<T>& x) {
    last_ = trunk_.forward(x);
    return last_;
}

template <typename T>
Tensor<T> SegmentationNet<T>::head_forward(const GeneratedParams<T>* gen, HeadMode mode) {
    return head_.forward(last_.features, gen, mode);
}

template <typename T>
SegOutput<T> SegmentationNet<T>::forward(const Tensor<T>& x, const GeneratedParams<T>* gen, HeadMode mode) {
    trunk_forward(x);
    SegOutput<T> out;
    out.logits = head_forward(gen, mode);
    out.taps = last_.taps;
    out.pooled = last_.pooled;
    return out;
}

template <typename T>
GeneratedParams<T> SegmentationNet<T>::head_backward(const Tensor<T>& grad_logits) {
    GeneratedParams<T> gg;
    grad_features_ = head_.backward(grad_logits, &gg);
    return gg;
}

template <typename T>
Tensor<T> SegmentationNet<T>::trunk_backward(const std::vector<Tensor<T>>& grad_taps,
                                             const std::vector<T>& grad_pooled, bool need_input_grad) {
    auto g = trunk_.backward(grad_features_, grad_taps, grad_pooled, need_input_grad);
    grad_features_ = {};
    return g;
}

template <typename T>
Tensor<T> SegmentationNet<T>::backward(const Tensor<T>& grad_logits, const std::vector<Tensor<T>>& grad_taps,
                                       bool need_input_grad) {
    if (!grad_logits.empty()) head_backward(grad_logits);
    return trunk_backward(grad_taps, {}, need_input_grad);
}

template <typename T>
ParamList<T> SegmentationNet<T>::parameters() {
    ParamList<T> out;
    trunk_.collect(out);
    head_.collect(out);
    return out;
}

template <typename T>
ParamList<T> SegmentationNet<T>::trunk_parameters() {
    ParamList<T> out;
    trunk_.collect(out);
    return out;
}

// ---------------------------------------------------------------------------

template <typename T>
ReconstructionNet<T>::ReconstructionNet(const BackboneConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), trunk_(cfg), head_("head", cfg.base_width, cfg.head_hidden(), cfg.mae_out_channels) {
    trunk_.init(seed);
    head_.init(seed);
}

template <typename T>
Tensor<T> ReconstructionNet<T>::forward(const Tensor<T>& x) {
    auto t = trunk_.forward(x);
    return head_.forward(t.features);
}

template <typename T>
Tensor<T> ReconstructionNet<T>::backward(const Tensor<T>& grad_out, bool need_input_grad) {
    auto gf = head_.backward(grad_out);
    return trunk_.backward(gf, {}, {}, need_input_grad);
}

template <typename T>
ParamList<T> ReconstructionNet<T>::parameters() {
    ParamList<T> out;
    trunk_.collect(out);
    head_.collect(out);
    return out;
}

template <typename T>
ParamList<T> ReconstructionNet<T>::trunk_parameters() {
    ParamList<T> out;
    trunk_.collect(out);
    return out;
}

template <typename T>
int copy_matching(const ParamList<T>& src, const ParamList<T>& dst) {
    std::map<std::string, const Param<T>*> by_name;
    for (const auto* p : src) by_name[p->name] = p;
    int n = 0;
    for (auto* d : dst) {
        auto it = by_name.find(d->name);
        if (it == by_name.end() || it->second->value.shape() != d->value.shape()) continue;
        d->value = it->second->value;
        ++n;
    }
    return n;
}

#define MMSEG_INSTANTIATE(T)                                                \
    template struct GeneratedParams<T>;                                   \
    template class PredictionHead<T>;                                     \
    template class UNetTrunk<T>;                                          \
    template class ParamSet<T>;                                           \
    template class SegmentationNet<T>;                                    \
    template class ReconstructionNet<T>;                                  \
    template int copy_matching<T>(const ParamList<T>&, const ParamList<T>&);

MMSEG_INSTANTIATE(float)
MMSEG_INSTANTIATE(double)
#undef MMSEG_INSTANTIATE

}  // namespace mmseg::nn
