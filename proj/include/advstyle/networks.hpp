#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "advstyle/layers.hpp"
#include "advstyle/stat_ops.hpp"
#include "advstyle/tensor.hpp"

namespace advstyle {

enum class Profile { desk, paper };

struct EncoderConfig {
    std::array<std::size_t, 4> block_widths{8, 16, 32, 64};
    // VGG-16 layout truncated after the first conv of block 4.
    std::array<std::size_t, 4> convs_per_block{2, 2, 3, 1};
    std::size_t input_channels = 3;

    static EncoderConfig desk() { return {}; }
    static EncoderConfig paper() { return {{64, 128, 256, 512}, {2, 2, 3, 1}, 3}; }

    std::size_t concat_channels() const {
        return block_widths[0] + block_widths[1] + block_widths[2] + block_widths[3];
    }
};

struct NetConfig {
    EncoderConfig encoder;
    std::array<std::size_t, 4> disc_widths{8, 16, 32, 64};
    std::size_t categories = 9;
    double leaky_slope = 0.2;

    static NetConfig for_profile(Profile p, std::size_t categories = 9) {
        NetConfig cfg;
        cfg.categories = categories;
        if (p == Profile::paper) {
            cfg.encoder = EncoderConfig::paper();
            cfg.disc_widths = {64, 128, 256, 512};
        }
        return cfg;
    }
};

// How batchnorm layers behave in one forward call.
struct NormPolicy {
    NormMode mode = NormMode::train;
    bool update_running = true;

    static NormPolicy train() { return {NormMode::train, true}; }
    // Batch statistics without touching running averages.
    static NormPolicy train_frozen_stats() { return {NormMode::train, false}; }
    static NormPolicy eval() { return {NormMode::eval, false}; }
};

enum class Act { none, relu, leaky, tanh };

// A named tensor owned by a network. Buffers (batchnorm running stats) are
// serialized with the parameters but never optimized.
template <class T>
struct NamedTensor {
    std::string name;
    Tensor4<T>* tensor;
    int rank;
};

template <class T>
using ParamGrads = std::vector<Tensor4<T>>;

template <class T>
ParamGrads<T> zero_grads(const std::vector<NamedTensor<T>>& params) {
    ParamGrads<T> g;
    g.reserve(params.size());
    for (const auto& p : params) g.emplace_back(p.tensor->shape());
    return g;
}

// conv (or transposed conv) -> optional batchnorm -> activation.
template <class T>
struct ConvUnit {
    std::string name;
    Tensor4<T> weight;
    Tensor4<T> bias;
    std::size_t stride = 1, pad = 1;
    bool transpose = false;
    bool has_bn = false;
    Tensor4<T> gamma, beta;
    RunningStats<T> running;
    Act act = Act::none;
    T slope = T(0.2);

    struct Cache {
        Tensor4<T> input;
        Tensor4<T> conv_out;
        BatchNormCache<T> bn;
        Tensor4<T> pre_act;
        Tensor4<T> output;
    };

    static ConvUnit make(std::string name, std::size_t cin, std::size_t cout, std::size_t k, std::size_t stride,
                         std::size_t pad, bool transpose, bool bn, Act act, T slope) {
        ConvUnit u;
        u.name = std::move(name);
        u.weight = transpose ? Tensor4<T>(cin, cout, k, k) : Tensor4<T>(cout, cin, k, k);
        u.bias = Tensor4<T>(cout, 1, 1, 1);
        u.stride = stride;
        u.pad = pad;
        u.transpose = transpose;
        u.has_bn = bn;
        if (bn) {
            u.gamma = Tensor4<T>(cout, 1, 1, 1, T(1));
            u.beta = Tensor4<T>(cout, 1, 1, 1);
            u.running = RunningStats<T>(cout);
        }
        u.act = act;
        u.slope = slope;
        return u;
    }

    std::size_t out_channels() const { return transpose ? weight.c() : weight.n(); }

    // He-normal weights, zero bias.
    template <class Rng>
    void init(Rng& rng) {
        const std::size_t fan_in = (transpose ? weight.n() : weight.c()) * weight.h() * weight.w();
        fill_normal(weight, rng, 0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
        bias.fill(T(0));
    }

    void zero_init() {
        weight.fill(T(0));
        bias.fill(T(0));
    }

    void collect(std::vector<NamedTensor<T>>& params, const std::string& prefix) {
        params.push_back({prefix + name + ".weight", &weight, 4});
        params.push_back({prefix + name + ".bias", &bias, 1});
        if (has_bn) {
            params.push_back({prefix + name + ".gamma", &gamma, 1});
            params.push_back({prefix + name + ".beta", &beta, 1});
        }
    }
    void collect_buffers(std::vector<NamedTensor<T>>& bufs, const std::string& prefix) {
        if (!has_bn) return;
        bufs.push_back({prefix + name + ".running_mean", &running.mean, 1});
        bufs.push_back({prefix + name + ".running_var", &running.var, 1});
    }
    std::size_t param_count() const { return has_bn ? 4 : 2; }

    Tensor4<T> forward(const Tensor4<T>& x, NormPolicy policy, Cache* cache) {
        std::span<const T> b(bias.data(), bias.size());
        Tensor4<T> y = transpose ? conv2d_transpose_forward(x, weight, b, stride, pad)
                                 : conv2d_forward(x, weight, b, stride, pad);
        Tensor4<T> conv_out;
        BatchNormCache<T> bn_cache;
        if (has_bn) {
            if (cache) conv_out = y;
            RunningStats<T>* rs = (policy.mode == NormMode::eval || policy.update_running) ? &running : nullptr;
            y = batchnorm_forward(y, std::span<const T>(gamma.data(), gamma.size()),
                                  std::span<const T>(beta.data(), beta.size()), policy.mode, rs,
                                  cache ? &bn_cache : nullptr);
        }
        Tensor4<T> pre = cache && act != Act::none ? y : Tensor4<T>();
        switch (act) {
            case Act::none: break;
            case Act::relu: y = relu(y); break;
            case Act::leaky: y = leaky_relu(y, slope); break;
            case Act::tanh: y = tanh_forward(y); break;
        }
        if (cache) {
            cache->input = x;
            cache->conv_out = std::move(conv_out);
            cache->bn = std::move(bn_cache);
            cache->pre_act = std::move(pre);
            cache->output = y;
        }
        return y;
    }

    // `grads` points at this unit's param_count() gradient slots (accumulated
    // into), or is null for frozen units.
    Tensor4<T> backward(const Cache& cache, const Tensor4<T>& out_grad, Tensor4<T>* grads) const {
        Tensor4<T> g;
        switch (act) {
            case Act::none: g = out_grad; break;
            case Act::relu: g = relu_backward(cache.pre_act, out_grad); break;
            case Act::leaky: g = leaky_relu_backward(cache.pre_act, out_grad, slope); break;
            case Act::tanh: g = tanh_backward(cache.output, out_grad); break;
        }
        if (has_bn) {
            auto bg = batchnorm_backward(cache.bn, std::span<const T>(gamma.data(), gamma.size()), g);
            if (grads) {
                grads[2] += bg.param_grads[0];
                grads[3] += bg.param_grads[1];
            }
            g = std::move(bg.input_grad);
        }
        const bool need = grads != nullptr;
        auto cg = transpose ? conv2d_transpose_backward(cache.input, weight, g, stride, pad, need)
                            : conv2d_backward(cache.input, weight, g, stride, pad, need);
        if (grads) {
            grads[0] += cg.param_grads[0];
            grads[1] += cg.param_grads[1];
        }
        return std::move(cg.input_grad);
    }
};

// ---------------------------------------------------------------------------
// Encoder features.

template <class T>
struct FeatureSet {
    // Outputs of the first conv (after ReLU) of each block, at H, H/2, H/4, H/8.
    std::array<Tensor4<T>, 4> f;
    // f1..f3 average-pooled to the f4 grid and concatenated with f4.
    Tensor4<T> concat;
};

template <class T>
struct Encoder {
    EncoderConfig cfg;
    std::vector<ConvUnit<T>> units;
    std::array<std::size_t, 4> block_start{};

    struct Tape {
        std::vector<typename ConvUnit<T>::Cache> units;
        std::array<PoolIndices, 3> pools;
        Shape4 input_shape;
    };

    static Encoder make(const EncoderConfig& cfg) {
        Encoder e;
        e.cfg = cfg;
        std::size_t cin = cfg.input_channels;
        for (std::size_t b = 0; b < 4; ++b) {
            e.block_start[b] = e.units.size();
            for (std::size_t j = 0; j < cfg.convs_per_block[b]; ++j) {
                const std::size_t w = cfg.block_widths[b];
                e.units.push_back(ConvUnit<T>::make("block" + std::to_string(b + 1) + ".conv" + std::to_string(j + 1),
                                                    cin, w, 3, 1, 1, false, false, Act::relu, T(0)));
                cin = w;
            }
        }
        return e;
    }

    template <class Rng>
    void init(Rng& rng) {
        for (auto& u : units) u.init(rng);
    }

    std::vector<NamedTensor<T>> params() {
        std::vector<NamedTensor<T>> p;
        for (auto& u : units) u.collect(p, "encoder.");
        return p;
    }

    FeatureSet<T> forward(const Tensor4<T>& image, Tape* tape) {
        if (image.c() != cfg.input_channels)
            throw DimensionError("encode: image " + image.shape().str() + " expected " +
                                 std::to_string(cfg.input_channels) + " channels");
        if (image.h() % 8 != 0 || image.w() % 8 != 0)
            throw DimensionError("encode: image height and width must be divisible by 8, got " + image.shape().str());
        FeatureSet<T> fs;
        if (tape) {
            tape->units.assign(units.size(), {});
            tape->input_shape = image.shape();
        }
        Tensor4<T> x = image;
        for (std::size_t b = 0; b < 4; ++b) {
            if (b > 0) {
                auto pooled = maxpool2(x);
                if (tape) tape->pools[b - 1] = std::move(pooled.indices);
                x = std::move(pooled.output);
            }
            for (std::size_t j = 0; j < cfg.convs_per_block[b]; ++j) {
                const std::size_t u = block_start[b] + j;
                x = units[u].forward(x, NormPolicy::train(), tape ? &tape->units[u] : nullptr);
                if (j == 0) fs.f[b] = x;
            }
        }
        const auto p1 = avgpool(fs.f[0], 8), p2 = avgpool(fs.f[1], 4), p3 = avgpool(fs.f[2], 2);
        const std::array<const Tensor4<T>*, 4> parts{&p1, &p2, &p3, &fs.f[3]};
        fs.concat = concat_channels<T>(parts);
        return fs;
    }

    // Gradient w.r.t. the image given gradients on the per-block taps and/or
    // the concatenated output. Null entries mean zero gradient.
    Tensor4<T> backward(const Tape& tape, std::array<const Tensor4<T>*, 4> tap_grads,
                        const Tensor4<T>* concat_grad) const {
        std::array<Tensor4<T>, 4> taps;
        std::array<bool, 4> has{};
        for (std::size_t b = 0; b < 4; ++b)
            if (tap_grads[b]) {
                taps[b] = *tap_grads[b];
                has[b] = true;
            }
        if (concat_grad) {
            const std::array<std::size_t, 4> ch = cfg.block_widths;
            auto parts = split_channels(*concat_grad, std::span<const std::size_t>(ch));
            const std::array<std::size_t, 4> factor{8, 4, 2, 1};
            for (std::size_t b = 0; b < 4; ++b) {
                const Shape4 s = tape.units[block_start[b]].output.shape();
                auto g = avgpool_backward(s, parts[b], factor[b]);
                if (has[b]) taps[b] += g;
                else taps[b] = std::move(g);
                has[b] = true;
            }
        }
        // Walk blocks in reverse; `g` is the gradient on the current block's last output.
        Tensor4<T> g;
        bool have_g = false;
        for (std::size_t bi = 4; bi-- > 0;) {
            for (std::size_t j = cfg.convs_per_block[bi]; j-- > 0;) {
                const std::size_t u = block_start[bi] + j;
                const auto& cache = tape.units[u];
                if (!have_g) {
                    g = Tensor4<T>(cache.output.shape());
                    have_g = true;
                }
                if (j == 0 && has[bi]) g += taps[bi];
                g = units[u].backward(cache, g, nullptr);
            }
            if (bi > 0) g = maxpool2_backward(tape.pools[bi - 1], g);
        }
        return g;
    }
};

// ---------------------------------------------------------------------------
// Sequential stack of ConvUnits (mask module and decoder).

template <class T>
struct Sequential {
    std::string prefix;
    std::vector<ConvUnit<T>> units;

    struct Tape {
        std::vector<typename ConvUnit<T>::Cache> units;
    };

    std::vector<NamedTensor<T>> params() {
        std::vector<NamedTensor<T>> p;
        for (auto& u : units) u.collect(p, prefix);
        return p;
    }
    std::vector<NamedTensor<T>> buffers() {
        std::vector<NamedTensor<T>> b;
        for (auto& u : units) u.collect_buffers(b, prefix);
        return b;
    }

    Tensor4<T> forward(const Tensor4<T>& x, NormPolicy policy, Tape* tape) {
        if (tape) tape->units.assign(units.size(), {});
        Tensor4<T> y = x;
        for (std::size_t i = 0; i < units.size(); ++i) y = units[i].forward(y, policy, tape ? &tape->units[i] : nullptr);
        return y;
    }

    // `grads` aligned with params(); may be null when only the input gradient is wanted.
    Tensor4<T> backward(const Tape& tape, const Tensor4<T>& out_grad, ParamGrads<T>* grads) const {
        std::vector<std::size_t> offset(units.size());
        std::size_t o = 0;
        for (std::size_t i = 0; i < units.size(); ++i) {
            offset[i] = o;
            o += units[i].param_count();
        }
        Tensor4<T> g = out_grad;
        for (std::size_t i = units.size(); i-- > 0;)
            g = units[i].backward(tape.units[i], g, grads ? grads->data() + offset[i] : nullptr);
        return g;
    }
};

// Mask module: 2C -> C -> C -> C, LeakyReLU + batchnorm between, tanh at the
// end so values lie in [-1, 1]. The last conv starts at zero, so the initial
// mask is identically 0 and the generator starts as plain AdaIN.
template <class T>
Sequential<T> make_mask_module(std::size_t channels, T slope) {
    Sequential<T> m;
    m.prefix = "mask.";
    const std::size_t C = channels;
    m.units.push_back(ConvUnit<T>::make("conv1", 2 * C, C, 3, 1, 1, false, true, Act::leaky, slope));
    m.units.push_back(ConvUnit<T>::make("conv2", C, C, 3, 1, 1, false, true, Act::leaky, slope));
    m.units.push_back(ConvUnit<T>::make("conv3", C, C, 3, 1, 1, false, false, Act::tanh, slope));
    return m;
}

// Decoder: mirror of the encoder. Block 4 maps the concat width down to
// width4; each following block starts with a k=2 stride-2 transposed conv.
// The final conv emits 3 channels through tanh.
template <class T>
Sequential<T> make_decoder(const EncoderConfig& cfg, T slope) {
    Sequential<T> d;
    d.prefix = "decoder.";
    const auto& w = cfg.block_widths;
    std::size_t cin = cfg.concat_channels();
    for (std::size_t j = 0; j < cfg.convs_per_block[3]; ++j) {
        d.units.push_back(ConvUnit<T>::make("block4.conv" + std::to_string(j + 1), cin, w[3], 3, 1, 1, false, true,
                                            Act::leaky, slope));
        cin = w[3];
    }
    for (std::size_t b = 3; b-- > 0;) {
        const std::string blk = "block" + std::to_string(b + 1);
        d.units.push_back(ConvUnit<T>::make(blk + ".up", cin, w[b], 2, 2, 0, true, true, Act::leaky, slope));
        cin = w[b];
        const std::size_t nconv = cfg.convs_per_block[b];
        for (std::size_t j = 0; j < nconv; ++j) {
            const bool last = (b == 0 && j + 1 == nconv);
            d.units.push_back(ConvUnit<T>::make(blk + ".conv" + std::to_string(j + 1), cin,
                                                last ? cfg.input_channels : w[b], 3, 1, 1, false, !last,
                                                last ? Act::tanh : Act::leaky, slope));
            cin = w[b];
        }
    }
    return d;
}

// ---------------------------------------------------------------------------
// Discriminator.

template <class T>
struct DiscOutput {
    Tensor4<T> patch_logits;    // (n,1,hp,wp)
    Tensor4<T> class_logits;    // (n,K,1,1)
    Tensor4<T> pooled_feature;  // (n,d,1,1)
};

template <class T>
struct Discriminator {
    Sequential<T> trunk;   // 4 stride-2 convs
    ConvUnit<T> patch_head;
    ConvUnit<T> class_head;  // linear d -> K as a 1x1 conv
    Tensor4<T> embedding;    // (K,d,1,1) projection embedding
    std::size_t categories = 9;

    struct Tape {
        typename Sequential<T>::Tape trunk;
        typename ConvUnit<T>::Cache patch;
        typename ConvUnit<T>::Cache cls;
        Shape4 trunk_shape;
    };

    static Discriminator make(const NetConfig& cfg) {
        Discriminator d;
        const T slope = static_cast<T>(cfg.leaky_slope);
        d.trunk.prefix = "disc.";
        std::size_t cin = cfg.encoder.input_channels;
        for (std::size_t i = 0; i < 4; ++i) {
            d.trunk.units.push_back(ConvUnit<T>::make("conv" + std::to_string(i + 1), cin, cfg.disc_widths[i], 4, 2, 1,
                                                      false, i > 0, Act::leaky, slope));
            cin = cfg.disc_widths[i];
        }
        d.patch_head = ConvUnit<T>::make("patch_head", cin, 1, 3, 1, 1, false, false, Act::none, slope);
        d.class_head = ConvUnit<T>::make("class_head", cin, cfg.categories, 1, 1, 0, false, false, Act::none, slope);
        d.embedding = Tensor4<T>(cfg.categories, cin, 1, 1);
        d.categories = cfg.categories;
        return d;
    }

    std::size_t feature_dim() const { return embedding.c(); }

    template <class Rng>
    void init(Rng& rng) {
        for (auto& u : trunk.units) u.init(rng);
        patch_head.init(rng);
        class_head.init(rng);
        fill_normal(embedding, rng, 0.0, 1.0 / std::sqrt(static_cast<double>(feature_dim())));
    }

    std::vector<NamedTensor<T>> params() {
        auto p = trunk.params();
        patch_head.collect(p, "disc.");
        class_head.collect(p, "disc.");
        p.push_back({"disc.embedding", &embedding, 2});
        return p;
    }
    std::vector<NamedTensor<T>> buffers() { return trunk.buffers(); }

    DiscOutput<T> forward(const Tensor4<T>& image, NormPolicy policy, Tape* tape) {
        if (image.h() < 16 || image.w() < 16)
            throw DimensionError("discriminate: image must be at least 16x16, got " + image.shape().str());
        if (image.c() != trunk.units.front().weight.c())
            throw DimensionError("discriminate: image " + image.shape().str() + " has wrong channel count");
        Tensor4<T> feat = trunk.forward(image, policy, tape ? &tape->trunk : nullptr);
        DiscOutput<T> out;
        out.patch_logits = patch_head.forward(feat, policy, tape ? &tape->patch : nullptr);
        out.pooled_feature = global_avg_pool(feat);
        out.class_logits = class_head.forward(out.pooled_feature, policy, tape ? &tape->cls : nullptr);
        if (tape) tape->trunk_shape = feat.shape();
        return out;
    }

    // Null gradient pointers mean zero. `grads` aligned with params().
    Tensor4<T> backward(const Tape& tape, const Tensor4<T>* patch_grad, const Tensor4<T>* class_grad,
                        const Tensor4<T>* pooled_grad, ParamGrads<T>* grads) const {
        const std::size_t trunk_params = 4 * 2 + 3 * 2;
        Tensor4<T>* g = grads ? grads->data() : nullptr;
        Tensor4<T> dfeat(tape.trunk_shape);
        if (patch_grad) dfeat += patch_head.backward(tape.patch, *patch_grad, g ? g + trunk_params : nullptr);
        Tensor4<T> dpooled(tape.trunk_shape.n, tape.trunk_shape.c, 1, 1);
        if (class_grad) dpooled += class_head.backward(tape.cls, *class_grad, g ? g + trunk_params + 2 : nullptr);
        if (pooled_grad) dpooled += *pooled_grad;
        dfeat += global_avg_pool_backward(tape.trunk_shape, dpooled);
        return trunk.backward(tape.trunk, dfeat, grads);
    }

    // Index of the embedding tensor inside params().
    std::size_t embedding_index() const { return 4 * 2 + 3 * 2 + 2 + 2; }
};

// Projection-conditioned real/fake logit per sample:
//   mean(patch_logits[n]) + <embedding[category[n]], pooled_feature[n]>
template <class T>
std::vector<T> conditional_logit(const DiscOutput<T>& out, std::span<const int> categories,
                                 const Tensor4<T>& embedding) {
    const std::size_t N = out.patch_logits.n(), D = out.pooled_feature.c(), K = embedding.n();
    if (categories.size() != N)
        throw DimensionError("conditional_logit: " + std::to_string(categories.size()) + " labels for batch of " +
                             std::to_string(N));
    if (embedding.c() != D)
        throw DimensionError("conditional_logit: embedding " + embedding.shape().str() + " vs feature " +
                             out.pooled_feature.shape().str());
    std::vector<T> logits(N);
    const std::size_t P = out.patch_logits.c() * out.patch_logits.plane();
    for (std::size_t n = 0; n < N; ++n) {
        const int cat = categories[n];
        if (cat < 0 || static_cast<std::size_t>(cat) >= K)
            throw DomainError("conditional_logit: category " + std::to_string(cat) + " outside [0," +
                              std::to_string(K) + ")");
        T s = 0;
        const T* p = out.patch_logits.sample(n);
        for (std::size_t i = 0; i < P; ++i) s += p[i];
        T proj = 0;
        for (std::size_t d = 0; d < D; ++d)
            proj += embedding(static_cast<std::size_t>(cat), d, 0, 0) * out.pooled_feature(n, d, 0, 0);
        logits[n] = s / static_cast<T>(P) + proj;
    }
    return logits;
}

template <class T>
struct ConditionalLogitGrad {
    Tensor4<T> patch_grad;
    Tensor4<T> pooled_grad;
    Tensor4<T> embedding_grad;
};

template <class T>
ConditionalLogitGrad<T> conditional_logit_backward(const DiscOutput<T>& out, std::span<const int> categories,
                                                   const Tensor4<T>& embedding, std::span<const T> logit_grad) {
    const std::size_t N = out.patch_logits.n(), D = out.pooled_feature.c();
    if (logit_grad.size() != N || categories.size() != N)
        throw DimensionError("conditional_logit_backward: batch size mismatch");
    ConditionalLogitGrad<T> g{Tensor4<T>(out.patch_logits.shape()), Tensor4<T>(out.pooled_feature.shape()),
                              Tensor4<T>(embedding.shape())};
    const std::size_t P = out.patch_logits.c() * out.patch_logits.plane();
    for (std::size_t n = 0; n < N; ++n) {
        const auto cat = static_cast<std::size_t>(categories[n]);
        const T gn = logit_grad[n];
        T* pg = g.patch_grad.sample(n);
        for (std::size_t i = 0; i < P; ++i) pg[i] = gn / static_cast<T>(P);
        for (std::size_t d = 0; d < D; ++d) {
            g.pooled_grad(n, d, 0, 0) = gn * embedding(cat, d, 0, 0);
            g.embedding_grad(cat, d, 0, 0) += gn * out.pooled_feature(n, d, 0, 0);
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Everything learnable or frozen in one place.

enum class MaskMode { learned, force0, force1 };

template <class T>
struct ModelBundle {
    NetConfig cfg;
    Encoder<T> encoder;  // frozen
    Sequential<T> mask;
    Sequential<T> decoder;
    Discriminator<T> disc;

    static ModelBundle make(const NetConfig& cfg, std::uint64_t seed) {
        ModelBundle b;
        b.cfg = cfg;
        const T slope = static_cast<T>(cfg.leaky_slope);
        b.encoder = Encoder<T>::make(cfg.encoder);
        b.mask = make_mask_module<T>(cfg.encoder.concat_channels(), slope);
        b.decoder = make_decoder<T>(cfg.encoder, slope);
        b.disc = Discriminator<T>::make(cfg);
        // Independent streams so e.g. the encoder does not depend on decoder size.
        std::mt19937_64 enc_rng(seed ^ 0x656e636f646572ULL), mask_rng(seed ^ 0x6d61736bULL),
            dec_rng(seed ^ 0x6465636f646572ULL), disc_rng(seed ^ 0x64697363ULL);
        b.encoder.init(enc_rng);
        for (auto& u : b.mask.units) u.init(mask_rng);
        b.mask.units.back().zero_init();
        for (auto& u : b.decoder.units) u.init(dec_rng);
        b.disc.init(disc_rng);
        return b;
    }

    // Mask module + decoder: the generator's trainable parameters.
    std::vector<NamedTensor<T>> generator_params() {
        auto p = mask.params();
        auto d = decoder.params();
        p.insert(p.end(), d.begin(), d.end());
        return p;
    }
    std::vector<NamedTensor<T>> generator_buffers() {
        auto p = mask.buffers();
        auto d = decoder.buffers();
        p.insert(p.end(), d.begin(), d.end());
        return p;
    }
    std::vector<NamedTensor<T>> disc_params() { return disc.params(); }
    std::vector<NamedTensor<T>> encoder_params() { return encoder.params(); }

    // Every tensor in serialization order: encoder, mask, decoder, disc, then buffers.
    std::vector<NamedTensor<T>> all_tensors() {
        auto all = encoder_params();
        for (auto& v : {generator_params(), disc_params(), generator_buffers(), disc.buffers()})
            all.insert(all.end(), v.begin(), v.end());
        return all;
    }
};

template <class T>
struct GeneratorTape {
    FeatureSet<T> content;
    FeatureSet<T> style;
    typename Encoder<T>::Tape content_enc;  // filled only when input gradients are requested
    typename Encoder<T>::Tape style_enc;
    typename Sequential<T>::Tape mask;
    typename Sequential<T>::Tape decoder;
    AdainCache<T> adain;
    Tensor4<T> mask_input;
    Tensor4<T> adain_out;
    Tensor4<T> mask_out;
    Tensor4<T> z;
    MaskMode mode = MaskMode::learned;
    bool input_tapes = false;
};

template <class T>
struct GenerateResult {
    Tensor4<T> stylized;
    Tensor4<T> mask;
};

// Decoder stage shared by generate() and the trainer: everything after the
// encoder. Takes precomputed content/style features.
template <class T>
GenerateResult<T> generate_from_features(ModelBundle<T>& b, const FeatureSet<T>& content, const FeatureSet<T>& style,
                                         MaskMode mode, NormPolicy policy, GeneratorTape<T>* tape) {
    const Tensor4<T>& xc = content.concat;
    const Tensor4<T>& ys = style.concat;
    if (xc.shape() != ys.shape())
        throw DimensionError("generate: content features " + xc.shape().str() + " and style features " +
                             ys.shape().str() + " differ");
    AdainCache<T> ac;
    Tensor4<T> a = adain(xc, ys, static_cast<T>(kStatEps), tape ? &ac : nullptr);
    Tensor4<T> m;
    Tensor4<T> mask_in;
    typename Sequential<T>::Tape mtape;
    switch (mode) {
        case MaskMode::force0: m = Tensor4<T>(xc.shape(), T(0)); break;
        case MaskMode::force1: m = Tensor4<T>(xc.shape(), T(1)); break;
        case MaskMode::learned: {
            const std::array<const Tensor4<T>*, 2> parts{&xc, &ys};
            mask_in = concat_channels<T>(parts);
            m = b.mask.forward(mask_in, policy, tape ? &mtape : nullptr);
            break;
        }
    }
    Tensor4<T> z = mask_blend(xc, a, m);
    GenerateResult<T> r;
    r.stylized = b.decoder.forward(z, policy, tape ? &tape->decoder : nullptr);
    r.mask = m;
    if (tape) {
        tape->adain = std::move(ac);
        tape->mask = std::move(mtape);
        tape->mask_input = std::move(mask_in);
        tape->adain_out = std::move(a);
        tape->mask_out = m;
        tape->z = std::move(z);
        tape->mode = mode;
        tape->content = content;
        tape->style = style;
    }
    return r;
}

// stylized = decode(mask_blend(xc, adain(xc, ys), mask_module(xc, ys))).
template <class T>
GenerateResult<T> generate(ModelBundle<T>& b, const Tensor4<T>& content, const Tensor4<T>& style, MaskMode mode,
                           NormPolicy policy, GeneratorTape<T>* tape = nullptr, bool keep_input_tapes = false) {
    if (content.n() != style.n())
        throw DimensionError("generate: content batch " + content.shape().str() + " vs style batch " +
                             style.shape().str());
    const bool keep = tape && keep_input_tapes;
    FeatureSet<T> fc = b.encoder.forward(content, keep ? &tape->content_enc : nullptr);
    FeatureSet<T> fs = b.encoder.forward(style, keep ? &tape->style_enc : nullptr);
    auto r = generate_from_features(b, fc, fs, mode, policy, tape);
    if (tape) tape->input_tapes = keep;
    return r;
}

template <class T>
struct GeneratorGrad {
    ParamGrads<T> mask;     // aligned with mask.params()
    ParamGrads<T> decoder;  // aligned with decoder.params()
    Tensor4<T> content_grad;  // only when the tape kept encoder tapes
    Tensor4<T> style_grad;
};

template <class T>
GeneratorGrad<T> generate_backward(ModelBundle<T>& b, const GeneratorTape<T>& tape, const Tensor4<T>& stylized_grad) {
    GeneratorGrad<T> g;
    g.mask = zero_grads(b.mask.params());
    g.decoder = zero_grads(b.decoder.params());
    Tensor4<T> dz = b.decoder.backward(tape.decoder, stylized_grad, &g.decoder);
    const Tensor4<T>& xc = tape.content.concat;
    auto bg = mask_blend_backward(xc, tape.adain_out, tape.mask_out, dz);
    Tensor4<T> dxc = std::move(bg.x_grad);
    Tensor4<T> dys(tape.style.concat.shape());
    if (tape.mode == MaskMode::learned) {
        Tensor4<T> dmask_in = b.mask.backward(tape.mask, bg.m_grad, &g.mask);
        if (tape.input_tapes) {
            const std::array<std::size_t, 2> ch{xc.c(), xc.c()};
            auto parts = split_channels(dmask_in, std::span<const std::size_t>(ch));
            dxc += parts[0];
            dys += parts[1];
        }
    }
    if (tape.input_tapes) {
        auto ag = adain_backward(xc, tape.style.concat, tape.adain, bg.a_grad);
        dxc += ag.x_grad;
        dys += ag.y_grad;
        g.content_grad = b.encoder.backward(tape.content_enc, {nullptr, nullptr, nullptr, nullptr}, &dxc);
        g.style_grad = b.encoder.backward(tape.style_enc, {nullptr, nullptr, nullptr, nullptr}, &dys);
    }
    return g;
}

template <class T>
DiscOutput<T> discriminate(ModelBundle<T>& b, const Tensor4<T>& image, NormPolicy policy,
                           typename Discriminator<T>::Tape* tape = nullptr) {
    return b.disc.forward(image, policy, tape);
}

// Human-readable architecture table: one "name<TAB>shape" line per tensor.
template <class T>
std::string architecture_table(ModelBundle<T>& b) {
    std::string out;
    for (const auto& t : b.all_tensors()) {
        const auto& s = t.tensor->shape();
        out += t.name + "\t" + std::to_string(s.n);
        if (t.rank >= 2) out += "x" + std::to_string(s.c);
        if (t.rank >= 4) out += "x" + std::to_string(s.h) + "x" + std::to_string(s.w);
        out += "\n";
    }
    return out;
}

}  // namespace advstyle
