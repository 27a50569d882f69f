#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "sosnet/errors.hpp"
#include "sosnet/losses.hpp"
#include "sosnet/rng.hpp"
#include "sosnet/tensor.hpp"

namespace sosnet::network {

// ==========================================================================
// Architecture and parameters
// ==========================================================================

// Desk backbone: N blocks of [3x3 conv, pad 1 -> relu -> 2x2 avg pool],
// then global average pool, fc7 -> embedding, and the two heads.
struct ArchConfig {
    int in_ch = 3;
    int in_h = 16;
    int in_w = 16;
    std::vector<int> channels = {8, 16, 32, 64};
    int embed_dim = 256;
    int head1_width = 2;  // 2 for classification logits, 1 for regression

    void validate() const {
        if (in_ch < 1 || channels.empty() || embed_dim < 1)
            throw DataError("arch: inconsistent shapes");
        if (head1_width != 1 && head1_width != 2)
            throw DataError("arch: head1_width must be 1 or 2");
        int div = 1 << int(channels.size());
        if (in_h < div || in_w < div || in_h % div != 0 || in_w % div != 0)
            throw DataError("arch: input dims must be divisible by 2^n_blocks");
        for (int c : channels)
            if (c < 1) throw DataError("arch: channel counts must be >= 1");
    }

    int n_blocks() const { return int(channels.size()); }
    int feat_dim() const { return channels.back(); }
    int out_h() const { return in_h >> n_blocks(); }
    int out_w() const { return in_w >> n_blocks(); }
    int mid_conv_dim() const { return feat_dim() * out_h() * out_w(); }

    bool operator==(const ArchConfig&) const = default;
};

template <typename T>
struct ConvLayerT {
    TensorT<T> w;       // (oc, ic, 3, 3)
    std::vector<T> b;   // (oc)
};

template <typename T>
struct NetParamsT {
    ArchConfig arch;
    std::vector<ConvLayerT<T>> convs;
    TensorT<T> fc7_w;   // (embed_dim, feat_dim)
    std::vector<T> fc7_b;
    TensorT<T> fc81_w;  // (head1_width, embed_dim)
    std::vector<T> fc81_b;
    TensorT<T> fc82_w;  // (1, embed_dim)
    std::vector<T> fc82_b;
};

using NetParams = NetParamsT<float>;

// flat view over every learnable array, in checkpoint order
template <typename T>
struct ParamGroupRef {
    std::string name;
    T* data;
    std::size_t size;
};

template <typename T>
std::vector<ParamGroupRef<T>> param_groups(NetParamsT<T>& p) {
    std::vector<ParamGroupRef<T>> g;
    for (std::size_t i = 0; i < p.convs.size(); ++i) {
        g.push_back({"conv" + std::to_string(i) + ".w", p.convs[i].w.data.data(),
                     p.convs[i].w.numel()});
        g.push_back({"conv" + std::to_string(i) + ".b", p.convs[i].b.data(),
                     p.convs[i].b.size()});
    }
    g.push_back({"fc7.w", p.fc7_w.data.data(), p.fc7_w.numel()});
    g.push_back({"fc7.b", p.fc7_b.data(), p.fc7_b.size()});
    g.push_back({"fc8_1.w", p.fc81_w.data.data(), p.fc81_w.numel()});
    g.push_back({"fc8_1.b", p.fc81_b.data(), p.fc81_b.size()});
    g.push_back({"fc8_2.w", p.fc82_w.data.data(), p.fc82_w.numel()});
    g.push_back({"fc8_2.b", p.fc82_b.data(), p.fc82_b.size()});
    return g;
}

template <typename T>
std::size_t param_count(const NetParamsT<T>& p) {
    std::size_t n = 0;
    for (const auto& g : param_groups(const_cast<NetParamsT<T>&>(p))) n += g.size;
    return n;
}

template <typename T>
NetParamsT<T> make_empty_params(const ArchConfig& arch) {
    arch.validate();
    NetParamsT<T> p;
    p.arch = arch;
    int ic = arch.in_ch;
    for (int oc : arch.channels) {
        ConvLayerT<T> layer;
        layer.w = TensorT<T>({std::size_t(oc), std::size_t(ic), 3, 3});
        layer.b.assign(std::size_t(oc), T(0));
        p.convs.push_back(std::move(layer));
        ic = oc;
    }
    p.fc7_w = TensorT<T>({std::size_t(arch.embed_dim), std::size_t(arch.feat_dim())});
    p.fc7_b.assign(std::size_t(arch.embed_dim), T(0));
    p.fc81_w = TensorT<T>({std::size_t(arch.head1_width), std::size_t(arch.embed_dim)});
    p.fc81_b.assign(std::size_t(arch.head1_width), T(0));
    p.fc82_w = TensorT<T>({1, std::size_t(arch.embed_dim)});
    p.fc82_b.assign(1, T(0));
    return p;
}

template <typename T>
NetParamsT<T> zeros_like(const NetParamsT<T>& p) {
    return make_empty_params<T>(p.arch);
}

// He-style init scaled by fan-in; biases zero. zero_init keeps everything 0
// so forward outputs are bias-only (a linearity check hook).
template <typename T>
NetParamsT<T> init_params(const ArchConfig& arch, std::uint64_t seed, bool zero_init = false) {
    NetParamsT<T> p = make_empty_params<T>(arch);
    if (zero_init) return p;
    Rng rng(seed);
    int ic = arch.in_ch;
    for (std::size_t i = 0; i < p.convs.size(); ++i) {
        double scale = std::sqrt(2.0 / (double(ic) * 9.0));
        for (T& v : p.convs[i].w.data) v = T(rng.normal() * scale);
        ic = arch.channels[i];
    }
    double s7 = std::sqrt(2.0 / double(arch.feat_dim()));
    for (T& v : p.fc7_w.data) v = T(rng.normal() * s7);
    double s8 = std::sqrt(2.0 / double(arch.embed_dim));
    for (T& v : p.fc81_w.data) v = T(rng.normal() * s8);
    for (T& v : p.fc82_w.data) v = T(rng.normal() * s8);
    return p;
}

template <typename T>
bool all_finite(const NetParamsT<T>& p) {
    for (const auto& g : param_groups(const_cast<NetParamsT<T>&>(p)))
        for (std::size_t i = 0; i < g.size; ++i)
            if (!std::isfinite(double(g.data[i]))) return false;
    return true;
}

// w <- w + alpha * g, group by group (the SGD step uses alpha = -lr)
template <typename T>
void axpy_params(NetParamsT<T>& w, T alpha, const NetParamsT<T>& g) {
    auto wg = param_groups(w);
    auto gg = param_groups(const_cast<NetParamsT<T>&>(g));
    for (std::size_t k = 0; k < wg.size(); ++k)
        for (std::size_t i = 0; i < wg[k].size; ++i)
            wg[k].data[i] += alpha * gg[k].data[i];
}

// ==========================================================================
// Forward
// ==========================================================================

template <typename T>
struct StreamOutputT {
    std::vector<T> logits;     // head1_width entries
    T rank_score = T(0);
    std::vector<T> embedding;  // embed_dim entries
};

using StreamOutput = StreamOutputT<float>;

namespace detail {

// 3x3 pad-1 convolution; inner loops are contiguous row passes so the
// compiler can vectorize them.
template <typename T>
void conv3x3_forward(const TensorT<T>& in, const TensorT<T>& w, const std::vector<T>& b,
                     TensorT<T>& out) {
    const std::size_t icn = in.shape[0], h = in.shape[1], wd = in.shape[2];
    const std::size_t ocn = b.size();
    for (std::size_t oc = 0; oc < ocn; ++oc) {
        T* oplane = &out.data[oc * h * wd];
        std::fill(oplane, oplane + h * wd, b[oc]);
        for (std::size_t ic = 0; ic < icn; ++ic) {
            const T* iplane = &in.data[ic * h * wd];
            const T* wk = &w.data[(oc * icn + ic) * 9];
            for (int ky = 0; ky < 3; ++ky) {
                const T w0 = wk[ky * 3 + 0], w1 = wk[ky * 3 + 1], w2 = wk[ky * 3 + 2];
                for (std::size_t y = 0; y < h; ++y) {
                    long iy = long(y) + ky - 1;
                    if (iy < 0 || iy >= long(h)) continue;
                    T* orow = oplane + y * wd;
                    const T* irow = iplane + std::size_t(iy) * wd;
                    orow[0] += w1 * irow[0] + w2 * irow[1];
                    for (std::size_t x = 1; x + 1 < wd; ++x)
                        orow[x] += w0 * irow[x - 1] + w1 * irow[x] + w2 * irow[x + 1];
                    orow[wd - 1] += w0 * irow[wd - 2] + w1 * irow[wd - 1];
                }
            }
        }
    }
}

template <typename T>
void relu_forward(const TensorT<T>& pre, TensorT<T>& post) {
    for (std::size_t i = 0; i < pre.data.size(); ++i)
        post.data[i] = pre.data[i] > T(0) ? pre.data[i] : T(0);
}

// 2x2 max pool; argmax (0..3, first maximum wins) recorded for backward
template <typename T>
void maxpool2_forward(const TensorT<T>& in, TensorT<T>& out, std::vector<std::uint8_t>& argmax) {
    const std::size_t c_n = in.shape[0], h = in.shape[1], w = in.shape[2];
    const std::size_t oh = h / 2, ow = w / 2;
    argmax.resize(c_n * oh * ow);
    for (std::size_t c = 0; c < c_n; ++c)
        for (std::size_t y = 0; y < oh; ++y) {
            const T* r0 = &in.data[(c * h + 2 * y) * w];
            const T* r1 = r0 + w;
            T* orow = &out.data[(c * oh + y) * ow];
            std::uint8_t* arow = &argmax[(c * oh + y) * ow];
            for (std::size_t x = 0; x < ow; ++x) {
                T v[4] = {r0[2 * x], r0[2 * x + 1], r1[2 * x], r1[2 * x + 1]};
                std::uint8_t best = 0;
                for (std::uint8_t k = 1; k < 4; ++k)
                    if (v[k] > v[best]) best = k;
                orow[x] = v[best];
                arow[x] = best;
            }
        }
}

template <typename T>
void affine_forward(const TensorT<T>& w, const std::vector<T>& b, const std::vector<T>& x,
                    std::vector<T>& y) {
    const std::size_t out_n = w.shape[0], in_n = w.shape[1];
    y.assign(out_n, T(0));
    for (std::size_t o = 0; o < out_n; ++o) {
        const T* row = &w.data[o * in_n];
        T acc = b[o];
        for (std::size_t i = 0; i < in_n; ++i) acc += row[i] * x[i];
        y[o] = acc;
    }
}

}  // namespace detail

// everything backward needs, kept per image
template <typename T>
struct ForwardCache {
    std::vector<TensorT<T>> pre;     // conv outputs before relu, per block
    std::vector<TensorT<T>> post;    // after relu, per block
    std::vector<TensorT<T>> pooled;  // after 2x2 max pool, per block
    std::vector<std::vector<std::uint8_t>> pool_argmax;
    std::vector<T> gap;              // global average pooled features
    std::vector<T> fc7_pre;
    StreamOutputT<T> out;
};

template <typename T>
void forward_cached(const NetParamsT<T>& p, const TensorT<T>& image, ForwardCache<T>& c) {
    const ArchConfig& a = p.arch;
    if (image.shape.size() != 3 || int(image.shape[0]) != a.in_ch ||
        int(image.shape[1]) != a.in_h || int(image.shape[2]) != a.in_w)
        throw DataError("forward: image shape mismatch");

    int nb = a.n_blocks();
    c.pre.resize(nb);
    c.post.resize(nb);
    c.pooled.resize(nb);
    c.pool_argmax.resize(nb);

    const TensorT<T>* cur = &image;
    std::size_t h = std::size_t(a.in_h), w = std::size_t(a.in_w);
    for (int i = 0; i < nb; ++i) {
        std::size_t oc = std::size_t(a.channels[i]);
        c.pre[i] = TensorT<T>({oc, h, w});
        detail::conv3x3_forward(*cur, p.convs[i].w, p.convs[i].b, c.pre[i]);
        c.post[i] = TensorT<T>({oc, h, w});
        detail::relu_forward(c.pre[i], c.post[i]);
        h /= 2;
        w /= 2;
        c.pooled[i] = TensorT<T>({oc, h, w});
        detail::maxpool2_forward(c.post[i], c.pooled[i], c.pool_argmax[i]);
        cur = &c.pooled[i];
    }

    const TensorT<T>& last = c.pooled[nb - 1];
    std::size_t spatial = last.shape[1] * last.shape[2];
    c.gap.assign(last.shape[0], T(0));
    for (std::size_t ch = 0; ch < last.shape[0]; ++ch) {
        const T* plane = &last.data[ch * spatial];
        T acc = T(0);
        for (std::size_t i = 0; i < spatial; ++i) acc += plane[i];
        c.gap[ch] = acc / T(spatial);
    }

    detail::affine_forward(p.fc7_w, p.fc7_b, c.gap, c.fc7_pre);
    c.out.embedding.resize(c.fc7_pre.size());
    for (std::size_t i = 0; i < c.fc7_pre.size(); ++i)
        c.out.embedding[i] = c.fc7_pre[i] > T(0) ? c.fc7_pre[i] : T(0);

    detail::affine_forward(p.fc81_w, p.fc81_b, c.out.embedding, c.out.logits);
    std::vector<T> rank;
    detail::affine_forward(p.fc82_w, p.fc82_b, c.out.embedding, rank);
    c.out.rank_score = rank[0];
}

template <typename T>
StreamOutputT<T> forward(const NetParamsT<T>& p, const TensorT<T>& image) {
    ForwardCache<T> c;
    forward_cached(p, image, c);
    return c.out;
}

// two streams share the parameters: literally two forward calls
template <typename T>
std::pair<StreamOutputT<T>, StreamOutputT<T>> forward_pair(const NetParamsT<T>& p,
                                                           const TensorT<T>& img_r,
                                                           const TensorT<T>& img_s) {
    return {forward(p, img_r), forward(p, img_s)};
}

// Data-dependent init calibration (LSUV-style): after random init, rescale
// each layer's weights so its pre-activation RMS over a probe set hits the
// target. Without this, repeated pooling shrinks activations and the
// documented learning-rate schedule cannot move the heads within desk-scale
// step budgets. Heads get a small RMS so training starts near-symmetric.
template <typename T>
void calibrate_init(NetParamsT<T>& p, const std::vector<const TensorT<T>*>& probe,
                    double feature_rms = 1.0, double head_rms = 0.1) {
    if (probe.empty()) throw DataError("calibrate_init: empty probe set");
    auto rescale = [](TensorT<T>& w, double target, double rms) {
        if (rms < 1e-30) return;  // zero weights stay zero
        T f = T(target / rms);
        for (T& v : w.data) v *= f;
    };

    const int nb = p.arch.n_blocks();
    ForwardCache<T> c;
    for (int i = 0; i < nb; ++i) {
        double ss = 0.0;
        std::size_t n = 0;
        for (const TensorT<T>* img : probe) {
            forward_cached(p, *img, c);
            for (const T& v : c.pre[i].data) ss += double(v) * double(v);
            n += c.pre[i].data.size();
        }
        rescale(p.convs[i].w, feature_rms, n ? std::sqrt(ss / double(n)) : 0.0);
    }
    {
        double ss = 0.0;
        std::size_t n = 0;
        for (const TensorT<T>* img : probe) {
            forward_cached(p, *img, c);
            for (const T& v : c.fc7_pre) ss += double(v) * double(v);
            n += c.fc7_pre.size();
        }
        rescale(p.fc7_w, feature_rms, n ? std::sqrt(ss / double(n)) : 0.0);
    }
    {
        double ss1 = 0.0, ss2 = 0.0;
        std::size_t n1 = 0, n2 = 0;
        for (const TensorT<T>* img : probe) {
            forward_cached(p, *img, c);
            for (const T& v : c.out.logits) {
                ss1 += double(v) * double(v);
                n1++;
            }
            ss2 += double(c.out.rank_score) * double(c.out.rank_score);
            n2++;
        }
        rescale(p.fc81_w, head_rms, n1 ? std::sqrt(ss1 / double(n1)) : 0.0);
        rescale(p.fc82_w, head_rms, n2 ? std::sqrt(ss2 / double(n2)) : 0.0);
    }
}

struct Prediction {
    int cls = 0;
    double prob = 0.0;
};

// argmax of the fc8_1 softmax path; ties break toward class 0
template <typename T>
Prediction predict(const NetParamsT<T>& p, const TensorT<T>& image) {
    if (p.arch.head1_width != 2) throw DataError("predict: needs a 2-class head");
    StreamOutputT<T> out = forward(p, image);
    double l0 = double(out.logits[0]), l1 = double(out.logits[1]);
    Prediction pr;
    pr.cls = (l1 > l0) ? 1 : 0;
    double m = std::max(l0, l1);
    double z = std::exp(l0 - m) + std::exp(l1 - m);
    pr.prob = std::exp((pr.cls == 0 ? l0 : l1) - m) / z;
    return pr;
}

enum class FeatureLayer { Embedding, MidConv };

// MidConv is the flattened output of the last block's pool, the closest
// desk-scale analogue of a mid-network pooling layer feature.
template <typename T>
std::vector<T> extract_features(const NetParamsT<T>& p, const TensorT<T>& image,
                                FeatureLayer layer) {
    ForwardCache<T> c;
    forward_cached(p, image, c);
    if (layer == FeatureLayer::Embedding) return c.out.embedding;
    const TensorT<T>& last = c.pooled.back();
    return last.data;
}

// ==========================================================================
// Losses over the network's outputs
// ==========================================================================

enum class LossKind { Combined, Contrast, ContrastSoftmax, SoftmaxOnly, Square };

struct LossSpec {
    LossKind kind = LossKind::Combined;
    double lambda = 1.0;  // weight of the pair term where applicable
    double margin = 1.0;  // contrast margin

    void validate() const {
        if (lambda < 0.0) throw DataError("loss: lambda must be >= 0");
        if (margin <= 0.0) throw DataError("loss: margin must be > 0");
    }
};

inline std::string loss_kind_name(LossKind k) {
    switch (k) {
        case LossKind::Combined: return "combined";
        case LossKind::Contrast: return "contrast";
        case LossKind::ContrastSoftmax: return "contrast+softmax";
        case LossKind::SoftmaxOnly: return "softmax-only";
        case LossKind::Square: return "square";
    }
    return "?";
}

// one oriented training pair; class indices for classification losses,
// targets for the regression (Square) loss
template <typename T>
struct PairSample {
    const TensorT<T>* img_r = nullptr;
    const TensorT<T>* img_s = nullptr;
    int y_r = 0;
    int y_s = 1;
    T target_r = T(0);
    T target_s = T(0);
};

template <typename T>
struct SingleSample {
    const TensorT<T>* img = nullptr;
    int y = 0;
};

template <typename T>
struct BatchLossT {
    T total = T(0);      // batch mean per pair (or per image for SoftmaxOnly)
    T softmax_r = T(0);  // square_r for the Square loss
    T softmax_s = T(0);
    T pair_term = T(0);  // ranking or contrast mean
};

namespace detail {

inline void hash_bit(std::uint64_t& h, bool bit) {
    h = (h ^ (bit ? 0x9e3779b9u : 0x85ebca6bu)) * 1099511628211ULL;
}

// loss-only evaluation used by the numeric differentiator; mask_hash
// fingerprints every relu sign, pool argmax, and hinge activation so kink
// crossings between +eps/-eps evaluations are detected exactly
template <typename T>
void hash_relu_masks(const ForwardCache<T>& c, std::uint64_t& h) {
    for (const auto& pre : c.pre)
        for (const T& v : pre.data) hash_bit(h, v > T(0));
    for (const auto& amx : c.pool_argmax)
        for (std::uint8_t k : amx) {
            hash_bit(h, (k & 1) != 0);
            hash_bit(h, (k & 2) != 0);
        }
    for (const T& v : c.fc7_pre) hash_bit(h, v > T(0));
}

template <typename T>
struct HeadGrads {
    std::vector<T> dlogits;
    T drank = T(0);
    std::vector<T> dembedding;
};

// gradient of the loss for one pair w.r.t. both streams' head outputs;
// contributions are already scaled by 1/n_pairs
template <typename T>
void pair_loss_and_grads(const StreamOutputT<T>& out_r, const StreamOutputT<T>& out_s,
                         const PairSample<T>& s, const LossSpec& spec, T inv_n,
                         BatchLossT<T>& acc, HeadGrads<T>& g_r, HeadGrads<T>& g_s) {
    const T lambda = T(spec.lambda);
    const T margin = T(spec.margin);
    g_r.dlogits.assign(out_r.logits.size(), T(0));
    g_s.dlogits.assign(out_s.logits.size(), T(0));
    g_r.drank = g_s.drank = T(0);
    g_r.dembedding.assign(out_r.embedding.size(), T(0));
    g_s.dembedding.assign(out_s.embedding.size(), T(0));

    auto softmax_grad = [&](const StreamOutputT<T>& o, int y, std::vector<T>& dl) -> T {
        T l0 = o.logits[0], l1 = o.logits[1];
        T loss = losses::softmax_ce(l0, l1, y);
        T m = l0 > l1 ? l0 : l1;
        T e0 = std::exp(l0 - m), e1 = std::exp(l1 - m);
        T z = e0 + e1;
        dl[0] += (e0 / z - (y == 0 ? T(1) : T(0))) * inv_n;
        dl[1] += (e1 / z - (y == 1 ? T(1) : T(0))) * inv_n;
        return loss;
    };

    auto ranking_grads = [&]() {
        T l = losses::ranking_loss(out_r.rank_score, out_s.rank_score);
        // d/d s_r of sigma(s_s - s_r) = -l(1-l)
        T d = l * (T(1) - l);
        g_r.drank += lambda * (-d) * inv_n;
        g_s.drank += lambda * d * inv_n;
        acc.pair_term += l * inv_n;
        return l;
    };

    auto contrast_grads = [&](T weight) {
        const std::size_t dim = out_r.embedding.size();
        T d2 = T(0);
        for (std::size_t k = 0; k < dim; ++k) {
            T d = out_r.embedding[k] - out_s.embedding[k];
            d2 += d * d;
        }
        T loss;
        T sign;  // gradient multiplier of 2*(e_r - e_s)
        if (s.y_r == s.y_s) {
            loss = d2;
            sign = T(1);
        } else if (margin - d2 > T(0)) {
            loss = margin - d2;
            sign = T(-1);
        } else {
            loss = T(0);
            sign = T(0);
        }
        for (std::size_t k = 0; k < dim; ++k) {
            T d = out_r.embedding[k] - out_s.embedding[k];
            g_r.dembedding[k] += weight * sign * T(2) * d * inv_n;
            g_s.dembedding[k] -= weight * sign * T(2) * d * inv_n;
        }
        acc.pair_term += loss * inv_n;
        return loss;
    };

    switch (spec.kind) {
        case LossKind::Combined: {
            T ce_r = softmax_grad(out_r, s.y_r, g_r.dlogits);
            T ce_s = softmax_grad(out_s, s.y_s, g_s.dlogits);
            T rk = ranking_grads();
            acc.softmax_r += ce_r * inv_n;
            acc.softmax_s += ce_s * inv_n;
            acc.total += (ce_r + ce_s + lambda * rk) * inv_n;
            break;
        }
        case LossKind::Contrast: {
            T cl = contrast_grads(T(1));
            acc.total += cl * inv_n;
            break;
        }
        case LossKind::ContrastSoftmax: {
            T ce_r = softmax_grad(out_r, s.y_r, g_r.dlogits);
            T ce_s = softmax_grad(out_s, s.y_s, g_s.dlogits);
            T cl = contrast_grads(lambda);
            acc.softmax_r += ce_r * inv_n;
            acc.softmax_s += ce_s * inv_n;
            acc.total += (ce_r + ce_s + lambda * cl) * inv_n;
            break;
        }
        case LossKind::Square: {
            T pr = out_r.logits[0], ps = out_s.logits[0];
            T sq_r = losses::square_loss(pr, s.target_r);
            T sq_s = losses::square_loss(ps, s.target_s);
            g_r.dlogits[0] += T(2) * (pr - s.target_r) * inv_n;
            g_s.dlogits[0] += T(2) * (ps - s.target_s) * inv_n;
            T rk = ranking_grads();
            acc.softmax_r += sq_r * inv_n;
            acc.softmax_s += sq_s * inv_n;
            acc.total += (sq_r + sq_s + lambda * rk) * inv_n;
            break;
        }
        case LossKind::SoftmaxOnly:
            throw DataError("softmax-only is a single-image loss; use the singles batch path");
    }
}

// backprop one stream's head gradients through the shared parameters
template <typename T>
void backward_stream(const NetParamsT<T>& p, const TensorT<T>& image, const ForwardCache<T>& c,
                     const HeadGrads<T>& hg, NetParamsT<T>& grads) {
    const ArchConfig& a = p.arch;
    const std::size_t embed = std::size_t(a.embed_dim);

    // heads -> embedding
    std::vector<T> demb = hg.dembedding;
    demb.resize(embed, T(0));
    for (std::size_t o = 0; o < hg.dlogits.size(); ++o) {
        T d = hg.dlogits[o];
        if (d == T(0)) continue;
        const T* wrow = &p.fc81_w.data[o * embed];
        T* gwrow = &grads.fc81_w.data[o * embed];
        for (std::size_t i = 0; i < embed; ++i) {
            gwrow[i] += d * c.out.embedding[i];
            demb[i] += d * wrow[i];
        }
        grads.fc81_b[o] += d;
    }
    if (hg.drank != T(0)) {
        T d = hg.drank;
        const T* wrow = p.fc82_w.data.data();
        T* gwrow = grads.fc82_w.data.data();
        for (std::size_t i = 0; i < embed; ++i) {
            gwrow[i] += d * c.out.embedding[i];
            demb[i] += d * wrow[i];
        }
        grads.fc82_b[0] += d;
    }

    // embedding relu -> fc7
    const std::size_t feat = c.gap.size();
    std::vector<T> dgap(feat, T(0));
    for (std::size_t o = 0; o < embed; ++o) {
        if (c.fc7_pre[o] <= T(0)) continue;
        T d = demb[o];
        if (d == T(0)) continue;
        const T* wrow = &p.fc7_w.data[o * feat];
        T* gwrow = &grads.fc7_w.data[o * feat];
        for (std::size_t i = 0; i < feat; ++i) {
            gwrow[i] += d * c.gap[i];
            dgap[i] += d * wrow[i];
        }
        grads.fc7_b[o] += d;
    }

    // global average pool -> last pooled map
    const int nb = a.n_blocks();
    const TensorT<T>& last = c.pooled[nb - 1];
    std::size_t spatial = last.shape[1] * last.shape[2];
    TensorT<T> dpooled(last.shape);
    for (std::size_t ch = 0; ch < last.shape[0]; ++ch) {
        T v = dgap[ch] / T(spatial);
        T* plane = &dpooled.data[ch * spatial];
        for (std::size_t i = 0; i < spatial; ++i) plane[i] = v;
    }

    // blocks in reverse: maxpool -> relu -> conv
    for (int i = nb - 1; i >= 0; --i) {
        const TensorT<T>& pre = c.pre[i];
        const std::size_t cn = pre.shape[0], h = pre.shape[1], w = pre.shape[2];
        const std::size_t oh = h / 2, ow = w / 2;

        // max pool backward: the recorded argmax cell takes the whole grad
        TensorT<T> dpre({cn, h, w});
        const std::vector<std::uint8_t>& argmax = c.pool_argmax[i];
        for (std::size_t ch = 0; ch < cn; ++ch)
            for (std::size_t y = 0; y < oh; ++y) {
                const T* drow = &dpooled.data[(ch * oh + y) * ow];
                const std::uint8_t* arow = &argmax[(ch * oh + y) * ow];
                T* r0 = &dpre.data[(ch * h + 2 * y) * w];
                T* r1 = r0 + w;
                for (std::size_t x = 0; x < ow; ++x) {
                    std::uint8_t k = arow[x];
                    T* row = k < 2 ? r0 : r1;
                    row[2 * x + (k & 1)] = drow[x];
                }
            }

        // relu backward in place
        for (std::size_t k = 0; k < dpre.data.size(); ++k)
            if (pre.data[k] <= T(0)) dpre.data[k] = T(0);

        // conv backward
        const TensorT<T>& input = (i == 0) ? image : c.pooled[i - 1];
        const std::size_t icn = input.shape[0];
        TensorT<T>* dinput = nullptr;
        TensorT<T> din;
        if (i > 0) {
            din = TensorT<T>({icn, h, w});
            dinput = &din;
        }

        TensorT<T>& gw = grads.convs[i].w;
        std::vector<T>& gb = grads.convs[i].b;
        for (std::size_t oc = 0; oc < cn; ++oc) {
            const T* dplane = &dpre.data[oc * h * w];
            T bacc = T(0);
            for (std::size_t k = 0; k < h * w; ++k) bacc += dplane[k];
            gb[oc] += bacc;

            for (std::size_t ic = 0; ic < icn; ++ic) {
                const T* iplane = &input.data[ic * h * w];
                T* gwk = &gw.data[(oc * icn + ic) * 9];
                const T* wk = &p.convs[i].w.data[(oc * icn + ic) * 9];
                T* dinplane = dinput ? &dinput->data[ic * h * w] : nullptr;
                for (int ky = 0; ky < 3; ++ky) {
                    T s0 = T(0), s1 = T(0), s2 = T(0);
                    const T w0 = wk[ky * 3 + 0], w1 = wk[ky * 3 + 1], w2 = wk[ky * 3 + 2];
                    for (std::size_t y = 0; y < h; ++y) {
                        long iy = long(y) + ky - 1;
                        if (iy < 0 || iy >= long(h)) continue;
                        const T* drow = dplane + y * w;
                        const T* irow = iplane + std::size_t(iy) * w;
                        // weight grads: shifted row dot products
                        T a0 = T(0), a1 = T(0), a2 = T(0);
                        for (std::size_t x = 1; x < w; ++x) a0 += drow[x] * irow[x - 1];
                        for (std::size_t x = 0; x < w; ++x) a1 += drow[x] * irow[x];
                        for (std::size_t x = 0; x + 1 < w; ++x) a2 += drow[x] * irow[x + 1];
                        s0 += a0;
                        s1 += a1;
                        s2 += a2;
                        if (dinplane) {
                            // input grads: gather with the flipped kernel taps
                            T* dirow = dinplane + std::size_t(iy) * w;
                            dirow[0] += w1 * drow[0] + w0 * drow[1];
                            for (std::size_t x = 1; x + 1 < w; ++x)
                                dirow[x] += w2 * drow[x - 1] + w1 * drow[x] + w0 * drow[x + 1];
                            dirow[w - 1] += w2 * drow[w - 2] + w1 * drow[w - 1];
                        }
                    }
                    gwk[ky * 3 + 0] += s0;
                    gwk[ky * 3 + 1] += s1;
                    gwk[ky * 3 + 2] += s2;
                }
            }
        }
        if (i > 0) dpooled = std::move(din);
    }
}

}  // namespace detail

// Batch-mean loss and its gradient w.r.t. every parameter. Pair members
// contribute through the shared parameters: both streams sum into grads.
template <typename T>
BatchLossT<T> backward_pairs(const NetParamsT<T>& p, const std::vector<PairSample<T>>& batch,
                             const LossSpec& spec, NetParamsT<T>& grads) {
    spec.validate();
    if (batch.empty()) throw DataError("backward: empty batch");
    if (spec.kind == LossKind::Square && p.arch.head1_width != 1)
        throw DataError("square loss needs head1_width == 1");
    if ((spec.kind == LossKind::Combined || spec.kind == LossKind::ContrastSoftmax) &&
        p.arch.head1_width != 2)
        throw DataError("classification losses need head1_width == 2");

    BatchLossT<T> acc;
    const T inv_n = T(1) / T(batch.size());
    ForwardCache<T> c_r, c_s;
    detail::HeadGrads<T> g_r, g_s;
    for (std::size_t bi = 0; bi < batch.size(); ++bi) {
        const PairSample<T>& s = batch[bi];
        forward_cached(p, *s.img_r, c_r);
        forward_cached(p, *s.img_s, c_s);
        detail::pair_loss_and_grads(c_r.out, c_s.out, s, spec, inv_n, acc, g_r, g_s);
        detail::backward_stream(p, *s.img_r, c_r, g_r, grads);
        detail::backward_stream(p, *s.img_s, c_s, g_s, grads);
    }
    if (!std::isfinite(double(acc.total)))
        throw NumericError("backward: non-finite batch loss (" + loss_kind_name(spec.kind) +
                           ", batch size " + std::to_string(batch.size()) + ")");
    return acc;
}

// single-stream softmax-only baseline: batch of individual images
template <typename T>
BatchLossT<T> backward_singles(const NetParamsT<T>& p, const std::vector<SingleSample<T>>& batch,
                               NetParamsT<T>& grads) {
    if (batch.empty()) throw DataError("backward: empty batch");
    if (p.arch.head1_width != 2) throw DataError("softmax-only needs head1_width == 2");
    BatchLossT<T> acc;
    const T inv_n = T(1) / T(batch.size());
    ForwardCache<T> c;
    detail::HeadGrads<T> hg;
    for (const SingleSample<T>& s : batch) {
        forward_cached(p, *s.img, c);
        hg.dlogits.assign(2, T(0));
        hg.drank = T(0);
        hg.dembedding.assign(c.out.embedding.size(), T(0));
        T l0 = c.out.logits[0], l1 = c.out.logits[1];
        T loss = losses::softmax_ce(l0, l1, s.y);
        T m = l0 > l1 ? l0 : l1;
        T e0 = std::exp(l0 - m), e1 = std::exp(l1 - m);
        T z = e0 + e1;
        hg.dlogits[0] = (e0 / z - (s.y == 0 ? T(1) : T(0))) * inv_n;
        hg.dlogits[1] = (e1 / z - (s.y == 1 ? T(1) : T(0))) * inv_n;
        acc.total += loss * inv_n;
        detail::backward_stream(p, *s.img, c, hg, grads);
    }
    if (!std::isfinite(double(acc.total)))
        throw NumericError("backward: non-finite batch loss (softmax-only)");
    return acc;
}

// ==========================================================================
// Gradient checking
// ==========================================================================

namespace detail {

// loss with a kink fingerprint: if the fingerprint differs between the two
// perturbed evaluations, a relu/hinge boundary was crossed and the central
// difference there is meaningless
template <typename T>
double loss_with_mask(const NetParamsT<T>& p, const std::vector<PairSample<T>>& batch,
                      const LossSpec& spec, std::uint64_t& mask) {
    BatchLossT<T> acc;
    const T inv_n = T(1) / T(batch.size());
    ForwardCache<T> c_r, c_s;
    mask = 1469598103934665603ULL;
    for (const PairSample<T>& s : batch) {
        forward_cached(p, *s.img_r, c_r);
        forward_cached(p, *s.img_s, c_s);
        hash_relu_masks(c_r, mask);
        hash_relu_masks(c_s, mask);
        if (spec.kind == LossKind::Contrast || spec.kind == LossKind::ContrastSoftmax) {
            T d2 = T(0);
            for (std::size_t k = 0; k < c_r.out.embedding.size(); ++k) {
                T d = c_r.out.embedding[k] - c_s.out.embedding[k];
                d2 += d * d;
            }
            hash_bit(mask, T(spec.margin) - d2 > T(0));
        }
        HeadGrads<T> g_r, g_s;  // discarded; reuse the loss bookkeeping
        pair_loss_and_grads(c_r.out, c_s.out, s, spec, inv_n, acc, g_r, g_s);
    }
    return double(acc.total);
}

template <typename T>
double loss_with_mask(const NetParamsT<T>& p, const std::vector<SingleSample<T>>& batch,
                      std::uint64_t& mask) {
    double total = 0.0;
    ForwardCache<T> c;
    mask = 1469598103934665603ULL;
    for (const SingleSample<T>& s : batch) {
        forward_cached(p, *s.img, c);
        hash_relu_masks(c, mask);
        total += double(losses::softmax_ce(c.out.logits[0], c.out.logits[1], s.y));
    }
    return total / double(batch.size());
}

struct GradCheckReport {
    double max_rel_err = 0.0;
    int coords_checked = 0;
    int kinks_skipped = 0;
};

// generic driver: eval(params, mask&) -> loss
template <typename T, typename EvalFn>
GradCheckReport grad_check_impl(NetParamsT<T>& params, const NetParamsT<T>& analytic,
                                EvalFn eval, double eps, int min_coords, std::uint64_t seed) {
    if (eps < 1e-6 || eps > 1e-3) throw DataError("grad_check: eps must be in [1e-6, 1e-3]");
    auto pg = param_groups(params);
    auto ag = param_groups(const_cast<NetParamsT<T>&>(analytic));

    // per-group shuffled index pools; drawn round-robin so every group is
    // represented even after kink skips
    Rng rng(seed);
    std::vector<std::vector<std::size_t>> pool(pg.size());
    std::vector<std::size_t> cursor(pg.size(), 0);
    for (std::size_t g = 0; g < pg.size(); ++g) {
        pool[g].resize(pg[g].size);
        for (std::size_t i = 0; i < pool[g].size(); ++i) pool[g][i] = i;
        rng.shuffle(pool[g]);
    }

    GradCheckReport rep;
    auto try_coord = [&](std::size_t g, std::size_t i) {
        T* slot = pg[g].data + i;
        T saved = *slot;
        std::uint64_t m1 = 0, m2 = 0;
        *slot = saved + T(eps);
        double l1 = eval(params, m1);
        *slot = saved - T(eps);
        double l2 = eval(params, m2);
        *slot = saved;
        if (m1 != m2) {
            rep.kinks_skipped++;
            return;
        }
        double numeric = (l1 - l2) / (2.0 * eps);
        double a = double(ag[g].data[i]);
        double rel = std::fabs(a - numeric) /
                     std::max(std::max(std::fabs(a), std::fabs(numeric)), 1e-8);
        rep.max_rel_err = std::max(rep.max_rel_err, rel);
        rep.coords_checked++;
    };

    bool exhausted = false;
    while (rep.coords_checked < min_coords && !exhausted) {
        exhausted = true;
        for (std::size_t g = 0; g < pg.size() && rep.coords_checked < min_coords; ++g) {
            if (cursor[g] >= pool[g].size()) continue;
            exhausted = false;
            try_coord(g, pool[g][cursor[g]++]);
        }
    }
    if (rep.coords_checked < min_coords)
        throw NumericError("grad_check: only " + std::to_string(rep.coords_checked) +
                           " usable coordinates (kinks everywhere?)");
    return rep;
}

}  // namespace detail

using GradCheckReport = detail::GradCheckReport;

template <typename T>
GradCheckReport grad_check(const NetParamsT<T>& params, const std::vector<PairSample<T>>& batch,
                           const LossSpec& spec, double eps = 1e-4, int min_coords = 200,
                           std::uint64_t seed = 0) {
    NetParamsT<T> grads = zeros_like(params);
    backward_pairs(params, batch, spec, grads);
    NetParamsT<T> work = params;
    return detail::grad_check_impl(
        work, grads,
        [&batch, &spec](NetParamsT<T>& p, std::uint64_t& m) {
            return detail::loss_with_mask(p, batch, spec, m);
        },
        eps, min_coords, seed);
}

template <typename T>
GradCheckReport grad_check_singles(const NetParamsT<T>& params,
                                   const std::vector<SingleSample<T>>& batch, double eps = 1e-4,
                                   int min_coords = 200, std::uint64_t seed = 0) {
    NetParamsT<T> grads = zeros_like(params);
    backward_singles(params, batch, grads);
    NetParamsT<T> work = params;
    return detail::grad_check_impl(
        work, grads,
        [&batch](NetParamsT<T>& p, std::uint64_t& m) {
            return detail::loss_with_mask(p, batch, m);
        },
        eps, min_coords, seed);
}

// ==========================================================================
// Checkpoints
// ==========================================================================

// Layout (little-endian): magic "SOSNETCK", u32 version=1, u32 scalar_bits,
// i32 in_ch/in_h/in_w, u32 n_blocks, u32 channels[n_blocks], i32 embed_dim,
// i32 head1_width, then the raw parameter arrays in param_groups order.
inline constexpr char kCheckpointMagic[8] = {'S', 'O', 'S', 'N', 'E', 'T', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace detail {
template <typename V>
void put(std::ofstream& out, V v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <typename V>
V take(std::ifstream& in, const std::string& path) {
    V v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw DataError("truncated checkpoint: " + path);
    return v;
}
}  // namespace detail

template <typename T>
void save_checkpoint(const std::string& path, const NetParamsT<T>& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out.write(kCheckpointMagic, 8);
    detail::put(out, kCheckpointVersion);
    detail::put(out, std::uint32_t(sizeof(T) * 8));
    detail::put(out, std::int32_t(params.arch.in_ch));
    detail::put(out, std::int32_t(params.arch.in_h));
    detail::put(out, std::int32_t(params.arch.in_w));
    detail::put(out, std::uint32_t(params.arch.channels.size()));
    for (int c : params.arch.channels) detail::put(out, std::uint32_t(c));
    detail::put(out, std::int32_t(params.arch.embed_dim));
    detail::put(out, std::int32_t(params.arch.head1_width));
    for (const auto& g : param_groups(const_cast<NetParamsT<T>&>(params)))
        out.write(reinterpret_cast<const char*>(g.data), std::streamsize(g.size * sizeof(T)));
    if (!out) throw DataError("short checkpoint write: " + path);
}

template <typename T>
NetParamsT<T> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw DataError("not a checkpoint file: " + path);
    if (detail::take<std::uint32_t>(in, path) != kCheckpointVersion)
        throw DataError("unsupported checkpoint version: " + path);
    std::uint32_t bits = detail::take<std::uint32_t>(in, path);
    if (bits != sizeof(T) * 8)
        throw DataError("checkpoint scalar width is " + std::to_string(bits) +
                        " bits, expected " + std::to_string(sizeof(T) * 8) + ": " + path);
    ArchConfig a;
    a.in_ch = detail::take<std::int32_t>(in, path);
    a.in_h = detail::take<std::int32_t>(in, path);
    a.in_w = detail::take<std::int32_t>(in, path);
    std::uint32_t nb = detail::take<std::uint32_t>(in, path);
    if (nb == 0 || nb > 16) throw DataError("implausible block count in checkpoint: " + path);
    a.channels.clear();
    for (std::uint32_t i = 0; i < nb; ++i)
        a.channels.push_back(int(detail::take<std::uint32_t>(in, path)));
    a.embed_dim = detail::take<std::int32_t>(in, path);
    a.head1_width = detail::take<std::int32_t>(in, path);

    NetParamsT<T> p = make_empty_params<T>(a);
    for (auto& g : param_groups(p)) {
        in.read(reinterpret_cast<char*>(g.data), std::streamsize(g.size * sizeof(T)));
        if (std::size_t(in.gcount()) != g.size * sizeof(T))
            throw DataError("truncated checkpoint arrays: " + path);
    }
    char extra;
    if (in.read(&extra, 1)) throw DataError("trailing bytes in checkpoint: " + path);
    return p;
}

}  // namespace sosnet::network
