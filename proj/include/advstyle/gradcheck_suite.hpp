#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "advstyle/gradcheck.hpp"
#include "advstyle/layers.hpp"
#include "advstyle/losses.hpp"
#include "advstyle/networks.hpp"
#include "advstyle/stat_ops.hpp"

namespace advstyle {

// Finite-difference checks for every layer, statistical op, network and loss,
// run in double precision on small random instances.
namespace gradcheck_suite {

using Td = Tensor4<double>;

struct SuiteOptions {
    Profile profile = Profile::desk;
    double tolerance = 1e-5;
    // Coordinates sampled per tensor for network-level checks.
    std::size_t network_samples = 12;
    std::uint64_t seed = 7;
};

struct Entry {
    std::string group;
    GradcheckReport report;
    double seconds = 0;
};

namespace detail {

inline Td rnd(Shape4 s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    Td t(s);
    fill_uniform(t, rng, lo, hi);
    return t;
}

inline std::span<const double> sp(const Td& t) { return {t.data(), t.size()}; }

inline void add_params(std::vector<GradTarget<double>>& out, const std::vector<NamedTensor<double>>& params,
                       const ParamGrads<double>& grads) {
    for (std::size_t i = 0; i < params.size(); ++i) out.push_back({params[i].name, params[i].tensor, &grads[i]});
}

// Random nonzero init for heads that start at zero, so every path carries gradient.
inline void randomize_mask_head(ModelBundle<double>& b, std::mt19937_64& rng) {
    auto& u = b.mask.units.back();
    fill_normal(u.weight, rng, 0.0, 0.05);
    fill_uniform(u.bias, rng, -0.1, 0.1);
}

inline void randomize_norm_affine(std::vector<ConvUnit<double>>& units, std::mt19937_64& rng) {
    for (auto& u : units)
        if (u.has_bn) {
            fill_uniform(u.gamma, rng, 0.5, 1.5);
            fill_uniform(u.beta, rng, -0.2, 0.2);
        }
}

}  // namespace detail

inline std::vector<Entry> run(const SuiteOptions& so, const std::function<void(const Entry&)>& on_entry = {}) {
    using namespace detail;
    std::vector<Entry> out;
    std::mt19937_64 rng(so.seed);
    const GradcheckOptions full{.tolerance = so.tolerance};
    GradcheckOptions sampled{.tolerance = so.tolerance, .max_samples_per_tensor = so.network_samples};
    if (so.profile == Profile::paper) sampled.max_samples_per_tensor = std::min<std::size_t>(3, so.network_samples);

    auto record = [&](const std::string& group, auto&& fn) {
        const auto t0 = std::chrono::steady_clock::now();
        Entry e{group, fn(), 0};
        e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (on_entry) on_entry(e);
        out.push_back(std::move(e));
    };

    // ---- tensor-core -------------------------------------------------------
    for (std::size_t stride : {1, 2}) {
        record("tensor-core", [&] {
            Td x = rnd({2, 3, 5, 5}, rng), w = rnd({4, 3, 3, 3}, rng), b = rnd({4, 1, 1, 1}, rng);
            Td gw = rnd(conv2d_forward<double>(x, w, sp(b), stride, 1).shape(), rng);
            auto g = conv2d_backward<double>(x, w, gw, stride, 1);
            std::vector<GradTarget<double>> t{
                {"input", &x, &g.input_grad}, {"weight", &w, &g.param_grads[0]}, {"bias", &b, &g.param_grads[1]}};
            return gradcheck<double>("conv2d/stride" + std::to_string(stride), t,
                                     [&] { return weighted_sum(gw, conv2d_forward<double>(x, w, sp(b), stride, 1)); },
                                     full);
        });
    }
    record("tensor-core", [&] {
        Td x = rnd({2, 3, 3, 3}, rng), w = rnd({3, 2, 4, 4}, rng), b = rnd({2, 1, 1, 1}, rng);
        Td gw = rnd(conv2d_transpose_forward<double>(x, w, sp(b), 2, 1).shape(), rng);
        auto g = conv2d_transpose_backward<double>(x, w, gw, 2, 1);
        std::vector<GradTarget<double>> t{
            {"input", &x, &g.input_grad}, {"weight", &w, &g.param_grads[0]}, {"bias", &b, &g.param_grads[1]}};
        return gradcheck<double>("conv2d_transpose", t,
                                 [&] { return weighted_sum(gw, conv2d_transpose_forward<double>(x, w, sp(b), 2, 1)); },
                                 full);
    });
    record("tensor-core", [&] {
        Td x = rnd({2, 2, 4, 4}, rng), gw = rnd({2, 2, 2, 2}, rng);
        auto g = maxpool2_backward(maxpool2(x).indices, gw);
        std::vector<GradTarget<double>> t{{"input", &x, &g}};
        return gradcheck<double>("maxpool2", t, [&] { return weighted_sum(gw, maxpool2(x).output); }, full);
    });
    for (double slope : {0.0, 0.2}) {
        record("tensor-core", [&] {
            Td x = rnd({2, 2, 3, 3}, rng), gw = rnd({2, 2, 3, 3}, rng);
            for (auto& v : x.values())
                if (std::abs(v) < 0.05) v += 0.1;
            auto g = leaky_relu_backward(x, gw, slope);
            std::vector<GradTarget<double>> t{{"input", &x, &g}};
            return gradcheck<double>(slope == 0.0 ? "relu" : "leaky_relu", t,
                                     [&] { return weighted_sum(gw, leaky_relu(x, slope)); }, full);
        });
    }
    record("tensor-core", [&] {
        Td x = rnd({2, 2, 3, 3}, rng, -2, 2), gw = rnd({2, 2, 3, 3}, rng);
        auto g = tanh_backward(tanh_forward(x), gw);
        std::vector<GradTarget<double>> t{{"input", &x, &g}};
        return gradcheck<double>("tanh", t, [&] { return weighted_sum(gw, tanh_forward(x)); }, full);
    });
    for (NormMode mode : {NormMode::train, NormMode::eval}) {
        record("tensor-core", [&] {
            Td x = rnd({3, 2, 3, 3}, rng), gamma = rnd({2, 1, 1, 1}, rng, 0.5, 1.5), beta = rnd({2, 1, 1, 1}, rng);
            RunningStats<double> rs(2);
            rs.mean[1] = 0.25;
            rs.var[0] = 1.7;
            auto fwd = [&](BatchNormCache<double>* c) {
                return batchnorm_forward<double>(x, sp(gamma), sp(beta), mode, mode == NormMode::eval ? &rs : nullptr, c);
            };
            BatchNormCache<double> cache;
            Td gw = rnd(fwd(&cache).shape(), rng);
            auto g = batchnorm_backward<double>(cache, sp(gamma), gw);
            std::vector<GradTarget<double>> t{
                {"input", &x, &g.input_grad}, {"gamma", &gamma, &g.param_grads[0]}, {"beta", &beta, &g.param_grads[1]}};
            return gradcheck<double>(mode == NormMode::train ? "batchnorm/train" : "batchnorm/eval", t,
                                     [&] { return weighted_sum(gw, fwd(nullptr)); }, full);
        });
    }
    record("tensor-core", [&] {
        Td x = rnd({2, 2, 4, 4}, rng), gw = rnd({2, 2, 2, 2}, rng);
        auto g = avgpool_backward(x.shape(), gw, 2);
        std::vector<GradTarget<double>> t{{"input", &x, &g}};
        return gradcheck<double>("avgpool", t, [&] { return weighted_sum(gw, avgpool(x, 2)); }, full);
    });
    record("tensor-core", [&] {
        Td x = rnd({2, 3, 3, 2}, rng), gw = rnd({2, 3, 1, 1}, rng);
        auto g = global_avg_pool_backward(x.shape(), gw);
        std::vector<GradTarget<double>> t{{"input", &x, &g}};
        return gradcheck<double>("global_avg_pool", t, [&] { return weighted_sum(gw, global_avg_pool(x)); }, full);
    });
    record("tensor-core", [&] {
        Td x = rnd({3, 5, 1, 1}, rng), w = rnd({4, 5, 1, 1}, rng), b = rnd({4, 1, 1, 1}, rng);
        Td gw = rnd({3, 4, 1, 1}, rng);
        auto g = linear_backward<double>(x, w, gw);
        std::vector<GradTarget<double>> t{
            {"input", &x, &g.input_grad}, {"weight", &w, &g.param_grads[0]}, {"bias", &b, &g.param_grads[1]}};
        return gradcheck<double>("linear", t, [&] { return weighted_sum(gw, linear_forward<double>(x, w, sp(b))); },
                                 full);
    });

    // ---- stat-ops ----------------------------------------------------------
    record("stat-ops", [&] {
        Td x = rnd({2, 3, 3, 3}, rng), gm = rnd({2, 3, 1, 1}, rng), gs = rnd({2, 3, 1, 1}, rng);
        auto g = instance_stats_backward(x, instance_stats(x), gm, gs);
        std::vector<GradTarget<double>> t{{"x", &x, &g}};
        return gradcheck<double>("instance_stats", t, [&] {
            auto s = instance_stats(x);
            return weighted_sum(gm, s.mu) + weighted_sum(gs, s.sigma);
        }, full);
    });
    record("stat-ops", [&] {
        Td x = rnd({2, 3, 3, 3}, rng), y = rnd({2, 3, 2, 4}, rng), gw = rnd({2, 3, 3, 3}, rng);
        AdainCache<double> c;
        adain(x, y, kStatEps, &c);
        auto g = adain_backward(x, y, c, gw);
        std::vector<GradTarget<double>> t{{"x", &x, &g.x_grad}, {"y", &y, &g.y_grad}};
        return gradcheck<double>("adain", t, [&] { return weighted_sum(gw, adain(x, y)); }, full);
    });
    record("stat-ops", [&] {
        Td x = rnd({2, 2, 3, 3}, rng), a = rnd({2, 2, 3, 3}, rng), m = rnd({2, 2, 3, 3}, rng, -0.9, 0.9);
        Td gw = rnd({2, 2, 3, 3}, rng);
        auto g = mask_blend_backward(x, a, m, gw);
        std::vector<GradTarget<double>> t{{"x", &x, &g.x_grad}, {"a", &a, &g.a_grad}, {"m", &m, &g.m_grad}};
        return gradcheck<double>("mask_blend", t, [&] { return weighted_sum(gw, mask_blend(x, a, m)); }, full);
    });
    record("stat-ops", [&] {
        Td x = rnd({2, 3, 3, 2}, rng), gw = rnd({2, 3, 3, 1}, rng);
        auto g = gram_backward(x, gw);
        std::vector<GradTarget<double>> t{{"x", &x, &g}};
        return gradcheck<double>("gram", t, [&] { return weighted_sum(gw, gram(x)); }, full);
    });

    // ---- networks ----------------------------------------------------------
    const std::size_t categories = 4;
    const std::size_t img = 16;
    auto bundle = ModelBundle<double>::make(NetConfig::for_profile(so.profile, categories), so.seed);
    randomize_mask_head(bundle, rng);
    randomize_norm_affine(bundle.mask.units, rng);
    randomize_norm_affine(bundle.decoder.units, rng);
    randomize_norm_affine(bundle.disc.trunk.units, rng);
    const Shape4 img_shape{2, 3, img, img};

    record("networks", [&] {
        Td x = rnd(img_shape, rng);
        typename Encoder<double>::Tape tape;
        auto fs = bundle.encoder.forward(x, &tape);
        std::array<Td, 4> tw;
        for (std::size_t l = 0; l < 4; ++l) tw[l] = rnd(fs.f[l].shape(), rng);
        Td cw = rnd(fs.concat.shape(), rng);
        auto g = bundle.encoder.backward(tape, {&tw[0], &tw[1], &tw[2], &tw[3]}, &cw);
        std::vector<GradTarget<double>> t{{"image", &x, &g}};
        return gradcheck<double>("encoder", t, [&] {
            auto f = bundle.encoder.forward(x, nullptr);
            double s = weighted_sum(cw, f.concat);
            for (std::size_t l = 0; l < 4; ++l) s += weighted_sum(tw[l], f.f[l]);
            return s;
        }, sampled);
    });
    record("networks", [&] {
        const std::size_t C = bundle.cfg.encoder.concat_channels();
        Td x = rnd({2, 2 * C, 2, 2}, rng);
        typename Sequential<double>::Tape tape;
        Td gw = rnd(bundle.mask.forward(x, NormPolicy::train_frozen_stats(), &tape).shape(), rng);
        auto params = bundle.mask.params();
        auto grads = zero_grads(params);
        Td gx = bundle.mask.backward(tape, gw, &grads);
        std::vector<GradTarget<double>> t{{"input", &x, &gx}};
        add_params(t, params, grads);
        return gradcheck<double>("mask_module", t, [&] {
            return weighted_sum(gw, bundle.mask.forward(x, NormPolicy::train_frozen_stats(), nullptr));
        }, sampled);
    });
    record("networks", [&] {
        const std::size_t C = bundle.cfg.encoder.concat_channels();
        Td z = rnd({2, C, 2, 2}, rng);
        typename Sequential<double>::Tape tape;
        Td gw = rnd(bundle.decoder.forward(z, NormPolicy::train_frozen_stats(), &tape).shape(), rng);
        auto params = bundle.decoder.params();
        auto grads = zero_grads(params);
        Td gz = bundle.decoder.backward(tape, gw, &grads);
        std::vector<GradTarget<double>> t{{"input", &z, &gz}};
        add_params(t, params, grads);
        return gradcheck<double>("decoder", t, [&] {
            return weighted_sum(gw, bundle.decoder.forward(z, NormPolicy::train_frozen_stats(), nullptr));
        }, sampled);
    });
    record("networks", [&] {
        Td x = rnd(img_shape, rng);
        typename Discriminator<double>::Tape tape;
        auto o = bundle.disc.forward(x, NormPolicy::train_frozen_stats(), &tape);
        Td pw = rnd(o.patch_logits.shape(), rng), cw = rnd(o.class_logits.shape(), rng),
           fw = rnd(o.pooled_feature.shape(), rng);
        auto params = bundle.disc.params();
        auto grads = zero_grads(params);
        Td gx = bundle.disc.backward(tape, &pw, &cw, &fw, &grads);
        std::vector<GradTarget<double>> t{{"image", &x, &gx}};
        // The embedding does not enter this forward; it is covered by conditional_logit.
        params.pop_back();
        grads.pop_back();
        add_params(t, params, grads);
        return gradcheck<double>("discriminator", t, [&] {
            auto r = bundle.disc.forward(x, NormPolicy::train_frozen_stats(), nullptr);
            return weighted_sum(pw, r.patch_logits) + weighted_sum(cw, r.class_logits) +
                   weighted_sum(fw, r.pooled_feature);
        }, sampled);
    });
    record("networks", [&] {
        DiscOutput<double> o{rnd({3, 1, 2, 2}, rng), rnd({3, categories, 1, 1}, rng), rnd({3, 5, 1, 1}, rng)};
        Td emb = rnd({categories, 5, 1, 1}, rng);
        const std::vector<int> cats{0, 3, 3};
        std::vector<double> lw{0.7, -1.3, 0.4};
        auto g = conditional_logit_backward<double>(o, cats, emb, lw);
        std::vector<GradTarget<double>> t{{"patch_logits", &o.patch_logits, &g.patch_grad},
                                          {"pooled_feature", &o.pooled_feature, &g.pooled_grad},
                                          {"embedding", &emb, &g.embedding_grad}};
        return gradcheck<double>("conditional_logit", t, [&] {
            auto l = conditional_logit<double>(o, cats, emb);
            double s = 0;
            for (std::size_t i = 0; i < l.size(); ++i) s += lw[i] * l[i];
            return s;
        }, full);
    });
    record("networks", [&] {
        Td c = rnd(img_shape, rng), s = rnd(img_shape, rng);
        GeneratorTape<double> tape;
        auto r = generate(bundle, c, s, MaskMode::learned, NormPolicy::train_frozen_stats(), &tape, true);
        Td gw = rnd(r.stylized.shape(), rng);
        auto g = generate_backward(bundle, tape, gw);
        std::vector<GradTarget<double>> t{{"content", &c, &g.content_grad}, {"style", &s, &g.style_grad}};
        add_params(t, bundle.mask.params(), g.mask);
        add_params(t, bundle.decoder.params(), g.decoder);
        return gradcheck<double>("generator", t, [&] {
            return weighted_sum(
                gw, generate(bundle, c, s, MaskMode::learned, NormPolicy::train_frozen_stats()).stylized);
        }, sampled);
    });

    // ---- losses ------------------------------------------------------------
    record("losses", [&] {
        Td x4 = rnd({2, 3, 2, 2}, rng), xh = rnd({2, 3, 2, 2}, rng);
        auto g = content_loss(x4, xh).grad;
        std::vector<GradTarget<double>> t{{"xhat4", &xh, &g}};
        return gradcheck<double>("content_loss", t, [&] { return content_loss(x4, xh).value; }, full);
    });
    record("losses", [&] {
        std::array<Td, 4> sf, gf;
        const std::array<Shape4, 4> shapes{Shape4{2, 2, 4, 4}, {2, 3, 2, 2}, {2, 2, 2, 1}, {2, 3, 1, 1}};
        for (std::size_t l = 0; l < 4; ++l) {
            sf[l] = rnd(shapes[l], rng, 0, 2);
            gf[l] = rnd(shapes[l], rng, 0, 2);
        }
        auto r = style_loss(sf, gf);
        std::vector<GradTarget<double>> t;
        for (std::size_t l = 0; l < 4; ++l) t.push_back({"level" + std::to_string(l + 1), &gf[l], &r.grads[l]});
        return gradcheck<double>("style_loss", t, [&] { return style_loss(sf, gf).value; }, full);
    });
    record("losses", [&] {
        Td l = rnd({4, 1, 1, 1}, rng, -3, 3);
        auto r = gen_adv_loss<double>(l.values());
        Td g(l.shape(), std::vector<double>(r.grad));
        std::vector<GradTarget<double>> t{{"logits", &l, &g}};
        return gradcheck<double>("gen_adv_loss", t, [&] { return gen_adv_loss<double>(l.values()).value; }, full);
    });
    record("losses", [&] {
        Td l = rnd({3, categories, 1, 1}, rng, -2, 2);
        const std::vector<int> labels{1, 0, 3};
        auto g = class_loss(l, labels).grad;
        std::vector<GradTarget<double>> t{{"class_logits", &l, &g}};
        return gradcheck<double>("class_loss", t, [&] { return class_loss(l, labels).value; }, full);
    });
    record("losses", [&] {
        Td lf = rnd({3, 1, 1, 1}, rng, -2, 2), lr = rnd({3, 1, 1, 1}, rng, -2, 2);
        Td cf = rnd({3, categories, 1, 1}, rng), cr = rnd({3, categories, 1, 1}, rng);
        const std::vector<int> labels{2, 2, 1};
        auto r = discriminator_loss<double>(lf.values(), lr.values(), cf, cr, labels, 1.0);
        Td gf(lf.shape(), std::vector<double>(r.fake_logit_grad)), gr(lr.shape(), std::vector<double>(r.real_logit_grad));
        std::vector<GradTarget<double>> t{{"logit_fake", &lf, &gf},
                                          {"logit_real", &lr, &gr},
                                          {"class_fake", &cf, &r.fake_class_grad},
                                          {"class_real", &cr, &r.real_class_grad}};
        return gradcheck<double>("discriminator_loss", t, [&] {
            return discriminator_loss<double>(lf.values(), lr.values(), cf, cr, labels, 1.0).value;
        }, full);
    });
    return out;
}

}  // namespace gradcheck_suite

}  // namespace advstyle
