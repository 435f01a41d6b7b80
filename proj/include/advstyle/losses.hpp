#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "advstyle/networks.hpp"
#include "advstyle/stat_ops.hpp"
#include "advstyle/tensor.hpp"

namespace advstyle {

struct LossWeights {
    double lambda_ds = 1.0;
    double lambda_c = 1.0;
    double lambda_s = 200.0;

    void validate() const {
        if (lambda_ds < 0 || lambda_c < 0 || lambda_s < 0) throw DomainError("loss weights must be >= 0");
    }
};

// Numerically stable log(1 + exp(x)).
inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

inline double logistic(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Scalar loss plus its gradient w.r.t. one input.
template <class T>
struct LossGrad {
    double value = 0;
    Tensor4<T> grad;
};

namespace detail {

// sign(d) with sign(0) = 0.
template <class T>
T l1_subgrad(T d) {
    return d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
}

}  // namespace detail

// Mean absolute difference between block-4 features; gradient is w.r.t. xhat4.
template <class T>
LossGrad<T> content_loss(const Tensor4<T>& x4, const Tensor4<T>& xhat4) {
    x4.require_same_shape(xhat4, "content_loss");
    LossGrad<T> r{0, Tensor4<T>(x4.shape())};
    const T inv = T(1) / static_cast<T>(x4.size());
    double s = 0;
    for (std::size_t i = 0; i < x4.size(); ++i) {
        const T d = xhat4[i] - x4[i];
        s += std::abs(static_cast<double>(d));
        r.grad[i] = detail::l1_subgrad(d) * inv;
    }
    r.value = s / static_cast<double>(x4.size());
    return r;
}

// Sum over the four levels of mean |Gram(style) - Gram(generated)|.
// Gradients are w.r.t. the generated features, one per level.
template <class T>
struct StyleLossResult {
    double value = 0;
    std::array<double, 4> per_level{};
    std::array<Tensor4<T>, 4> grads;
};

template <class T>
StyleLossResult<T> style_loss(const std::array<Tensor4<T>, 4>& style_feats,
                              const std::array<Tensor4<T>, 4>& gen_feats) {
    StyleLossResult<T> r;
    for (std::size_t l = 0; l < 4; ++l) {
        if (style_feats[l].c() != gen_feats[l].c() || style_feats[l].n() != gen_feats[l].n())
            throw DimensionError("style_loss: level " + std::to_string(l + 1) + " style " +
                                 style_feats[l].shape().str() + " vs generated " + gen_feats[l].shape().str());
        const Tensor4<T> gs = gram(style_feats[l]);
        const Tensor4<T> gg = gram(gen_feats[l]);
        Tensor4<T> dg(gg.shape());
        const T inv = T(1) / static_cast<T>(gg.size());
        double s = 0;
        for (std::size_t i = 0; i < gg.size(); ++i) {
            const T d = gg[i] - gs[i];
            s += std::abs(static_cast<double>(d));
            dg[i] = detail::l1_subgrad(d) * inv;
        }
        r.per_level[l] = s / static_cast<double>(gg.size());
        r.value += r.per_level[l];
        r.grads[l] = gram_backward(gen_feats[l], dg);
    }
    return r;
}

template <class T>
StyleLossResult<T> style_loss(const FeatureSet<T>& style, const FeatureSet<T>& gen) {
    return style_loss(style.f, gen.f);
}

// Non-saturating generator loss: mean softplus(-logit) = E[-log P(real | D(x_hat))].
template <class T>
struct VectorLoss {
    double value = 0;
    std::vector<T> grad;
};

template <class T>
VectorLoss<T> gen_adv_loss(std::span<const T> cond_logit_fake) {
    const std::size_t N = cond_logit_fake.size();
    if (N == 0) throw DimensionError("gen_adv_loss: empty batch");
    VectorLoss<T> r{0, std::vector<T>(N)};
    for (std::size_t n = 0; n < N; ++n) {
        const double l = static_cast<double>(cond_logit_fake[n]);
        r.value += softplus(-l);
        r.grad[n] = static_cast<T>(-logistic(-l) / static_cast<double>(N));
    }
    r.value /= static_cast<double>(N);
    return r;
}

// Mean categorical cross-entropy. class_logits is (n,K,1,1).
template <class T>
LossGrad<T> class_loss(const Tensor4<T>& class_logits, std::span<const int> labels) {
    const std::size_t N = class_logits.n(), K = class_logits.c();
    if (labels.size() != N)
        throw DimensionError("class_loss: " + std::to_string(labels.size()) + " labels for logits " +
                             class_logits.shape().str());
    LossGrad<T> r{0, Tensor4<T>(class_logits.shape())};
    std::vector<double> p(K);
    for (std::size_t n = 0; n < N; ++n) {
        const int y = labels[n];
        if (y < 0 || static_cast<std::size_t>(y) >= K)
            throw DomainError("class_loss: label " + std::to_string(y) + " outside [0," + std::to_string(K) + ")");
        double mx = -INFINITY;
        for (std::size_t k = 0; k < K; ++k) mx = std::max(mx, static_cast<double>(class_logits(n, k, 0, 0)));
        double z = 0;
        for (std::size_t k = 0; k < K; ++k) {
            p[k] = std::exp(static_cast<double>(class_logits(n, k, 0, 0)) - mx);
            z += p[k];
        }
        const double logz = std::log(z) + mx;
        r.value += logz - static_cast<double>(class_logits(n, static_cast<std::size_t>(y), 0, 0));
        for (std::size_t k = 0; k < K; ++k) {
            const double pk = p[k] / z - (k == static_cast<std::size_t>(y) ? 1.0 : 0.0);
            r.grad(n, k, 0, 0) = static_cast<T>(pk / static_cast<double>(N));
        }
    }
    r.value /= static_cast<double>(N);
    return r;
}

struct GeneratorLossParts {
    double adv = 0;      // L_A
    double ds = 0;       // L_DS
    double content = 0;  // L_c
    double style = 0;    // L_s
};

// L_G = L_A + lambda_ds L_DS + lambda_c L_c + lambda_s L_s
inline double generator_loss(const GeneratorLossParts& parts, const LossWeights& w) {
    w.validate();
    const std::array<std::pair<const char*, double>, 4> named{
        {{"adversarial", parts.adv}, {"style-class", parts.ds}, {"content", parts.content}, {"style", parts.style}}};
    for (const auto& [name, v] : named)
        if (!std::isfinite(v)) throw NumericError(std::string("generator_loss: non-finite ") + name + " part");
    return parts.adv + w.lambda_ds * parts.ds + w.lambda_c * parts.content + w.lambda_s * parts.style;
}

template <class T>
struct DiscLossResult {
    double value = 0;
    double adv = 0;  // mean[softplus(l_fake) + softplus(-l_real)]
    double cls = 0;  // class loss on fakes (if enabled) + on reals
    std::vector<T> fake_logit_grad;
    std::vector<T> real_logit_grad;
    Tensor4<T> fake_class_grad;
    Tensor4<T> real_class_grad;
};

// L_D = mean[softplus(l_fake) + softplus(-l_real)] + lambda_ds (CE(fake) + CE(real)).
// The fake class term can be dropped for ablation.
template <class T>
DiscLossResult<T> discriminator_loss(std::span<const T> cond_logit_fake, std::span<const T> cond_logit_real,
                                     const Tensor4<T>& class_logits_fake, const Tensor4<T>& class_logits_real,
                                     std::span<const int> labels, double lambda_ds, bool fake_class_term = true) {
    const std::size_t N = cond_logit_fake.size();
    if (cond_logit_real.size() != N || class_logits_fake.n() != N || class_logits_real.n() != N || labels.size() != N)
        throw DimensionError("discriminator_loss: batch sizes differ");
    DiscLossResult<T> r;
    r.fake_logit_grad.resize(N);
    r.real_logit_grad.resize(N);
    for (std::size_t n = 0; n < N; ++n) {
        const double lf = static_cast<double>(cond_logit_fake[n]);
        const double lr = static_cast<double>(cond_logit_real[n]);
        r.adv += softplus(lf) + softplus(-lr);
        r.fake_logit_grad[n] = static_cast<T>(logistic(lf) / static_cast<double>(N));
        r.real_logit_grad[n] = static_cast<T>(-logistic(-lr) / static_cast<double>(N));
    }
    r.adv /= static_cast<double>(N);
    auto cr = class_loss(class_logits_real, labels);
    r.cls = cr.value;
    r.real_class_grad = std::move(cr.grad);
    r.real_class_grad *= static_cast<T>(lambda_ds);
    if (fake_class_term) {
        auto cf = class_loss(class_logits_fake, labels);
        r.cls += cf.value;
        r.fake_class_grad = std::move(cf.grad);
        r.fake_class_grad *= static_cast<T>(lambda_ds);
    } else {
        r.fake_class_grad = Tensor4<T>(class_logits_fake.shape());
    }
    r.value = r.adv + lambda_ds * r.cls;
    return r;
}

}  // namespace advstyle
