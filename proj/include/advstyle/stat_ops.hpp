#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include "advstyle/tensor.hpp"

namespace advstyle {

inline constexpr double kStatEps = 1e-5;

// Per-sample, per-channel mean and standard deviation, both shaped (n,c,1,1).
// sigma = sqrt(biased variance + eps), so sigma >= sqrt(eps).
template <class T>
struct ChannelStats {
    Tensor4<T> mu;
    Tensor4<T> sigma;
};

template <class T>
ChannelStats<T> instance_stats(const Tensor4<T>& x, T eps = static_cast<T>(kStatEps)) {
    if (!(eps > T(0))) throw DomainError("instance_stats: eps must be positive");
    ChannelStats<T> s{Tensor4<T>(x.n(), x.c(), 1, 1), Tensor4<T>(x.n(), x.c(), 1, 1)};
    const std::size_t P = x.plane();
    for (std::size_t n = 0; n < x.n(); ++n)
        for (std::size_t c = 0; c < x.c(); ++c) {
            const T* p = x.plane(n, c);
            T sum = 0;
            for (std::size_t i = 0; i < P; ++i) sum += p[i];
            const T mu = sum / static_cast<T>(P);
            T var = 0;
            for (std::size_t i = 0; i < P; ++i) var += (p[i] - mu) * (p[i] - mu);
            var /= static_cast<T>(P);
            s.mu(n, c, 0, 0) = mu;
            s.sigma(n, c, 0, 0) = std::sqrt(var + eps);
        }
    return s;
}

// Gradient w.r.t. x given gradients on mu and sigma.
template <class T>
Tensor4<T> instance_stats_backward(const Tensor4<T>& x, const ChannelStats<T>& stats, const Tensor4<T>& mu_grad,
                                   const Tensor4<T>& sigma_grad) {
    const Shape4 expect{x.n(), x.c(), 1, 1};
    if (mu_grad.shape() != expect || sigma_grad.shape() != expect)
        throw DimensionError("instance_stats_backward: gradients " + mu_grad.shape().str() + "/" +
                             sigma_grad.shape().str() + " expected " + expect.str());
    Tensor4<T> g(x.shape());
    const std::size_t P = x.plane();
    const T inv_p = T(1) / static_cast<T>(P);
    for (std::size_t n = 0; n < x.n(); ++n)
        for (std::size_t c = 0; c < x.c(); ++c) {
            const T mu = stats.mu(n, c, 0, 0), sigma = stats.sigma(n, c, 0, 0);
            const T dmu = mu_grad(n, c, 0, 0) * inv_p;
            const T dsig = sigma_grad(n, c, 0, 0) * inv_p / sigma;
            const T* p = x.plane(n, c);
            T* d = g.plane(n, c);
            for (std::size_t i = 0; i < P; ++i) d[i] = dmu + dsig * (p[i] - mu);
        }
    return g;
}

// ---------------------------------------------------------------------------
// Adaptive instance normalization:
//   A = sigma(y) * (x - mu(x)) / sigma(x) + mu(y)
// x and y share n and c; their spatial sizes may differ.

template <class T>
struct AdainCache {
    ChannelStats<T> x_stats;
    ChannelStats<T> y_stats;
    Tensor4<T> x_hat;
};

template <class T>
Tensor4<T> adain(const Tensor4<T>& x, const Tensor4<T>& y, T eps = static_cast<T>(kStatEps),
                 AdainCache<T>* cache = nullptr) {
    if (x.n() != y.n() || x.c() != y.c())
        throw DimensionError("adain: content " + x.shape().str() + " and style " + y.shape().str() +
                             " must agree on n and c");
    auto xs = instance_stats(x, eps);
    auto ys = instance_stats(y, eps);
    Tensor4<T> out(x.shape());
    Tensor4<T> xhat(x.shape());
    const std::size_t P = x.plane();
    for (std::size_t n = 0; n < x.n(); ++n)
        for (std::size_t c = 0; c < x.c(); ++c) {
            const T mx = xs.mu(n, c, 0, 0), sx = xs.sigma(n, c, 0, 0);
            const T my = ys.mu(n, c, 0, 0), sy = ys.sigma(n, c, 0, 0);
            const T* p = x.plane(n, c);
            T* xh = xhat.plane(n, c);
            T* o = out.plane(n, c);
            for (std::size_t i = 0; i < P; ++i) {
                xh[i] = (p[i] - mx) / sx;
                o[i] = sy * xh[i] + my;
            }
        }
    if (cache != nullptr) *cache = AdainCache<T>{std::move(xs), std::move(ys), std::move(xhat)};
    return out;
}

template <class T>
struct AdainGrad {
    Tensor4<T> x_grad;
    Tensor4<T> y_grad;
};

template <class T>
AdainGrad<T> adain_backward(const Tensor4<T>& x, const Tensor4<T>& y, const AdainCache<T>& cache,
                            const Tensor4<T>& out_grad) {
    x.require_same_shape(out_grad, "adain_backward");
    const std::size_t P = x.plane();
    const T inv_p = T(1) / static_cast<T>(P);
    Tensor4<T> dx(x.shape());
    Tensor4<T> dmu_y(y.n(), y.c(), 1, 1), dsig_y(y.n(), y.c(), 1, 1);
    for (std::size_t n = 0; n < x.n(); ++n)
        for (std::size_t c = 0; c < x.c(); ++c) {
            const T sx = cache.x_stats.sigma(n, c, 0, 0), sy = cache.y_stats.sigma(n, c, 0, 0);
            const T* dy = out_grad.plane(n, c);
            const T* xh = cache.x_hat.plane(n, c);
            T sum = 0, sum_xh = 0;
            for (std::size_t i = 0; i < P; ++i) {
                sum += dy[i];
                sum_xh += dy[i] * xh[i];
            }
            dmu_y(n, c, 0, 0) = sum;
            dsig_y(n, c, 0, 0) = sum_xh;
            // Instance-norm backward with d(xhat) = sy * dy.
            const T k = sy / sx;
            const T mean_dy = sum * inv_p, mean_dy_xh = sum_xh * inv_p;
            T* d = dx.plane(n, c);
            for (std::size_t i = 0; i < P; ++i) d[i] = k * (dy[i] - mean_dy - xh[i] * mean_dy_xh);
        }
    return {std::move(dx), instance_stats_backward(y, cache.y_stats, dmu_y, dsig_y)};
}

// ---------------------------------------------------------------------------
// Mask blend: z = m * x + (1 - m) * a, elementwise, with m in [-1, 1].

template <class T>
Tensor4<T> mask_blend(const Tensor4<T>& x, const Tensor4<T>& a, const Tensor4<T>& m) {
    x.require_same_shape(a, "mask_blend");
    x.require_same_shape(m, "mask_blend");
    Tensor4<T> z(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const T mv = m[i];
        if (!(mv >= T(-1) && mv <= T(1)))
            throw DomainError("mask_blend: mask value " + std::to_string(static_cast<double>(mv)) +
                              " outside [-1,1] at flat index " + std::to_string(i));
        z[i] = mv * x[i] + (T(1) - mv) * a[i];
    }
    return z;
}

template <class T>
struct BlendGrad {
    Tensor4<T> x_grad;
    Tensor4<T> a_grad;
    Tensor4<T> m_grad;
};

template <class T>
BlendGrad<T> mask_blend_backward(const Tensor4<T>& x, const Tensor4<T>& a, const Tensor4<T>& m,
                                 const Tensor4<T>& out_grad) {
    x.require_same_shape(out_grad, "mask_blend_backward");
    BlendGrad<T> g{Tensor4<T>(x.shape()), Tensor4<T>(x.shape()), Tensor4<T>(x.shape())};
    for (std::size_t i = 0; i < x.size(); ++i) {
        g.x_grad[i] = m[i] * out_grad[i];
        g.a_grad[i] = (T(1) - m[i]) * out_grad[i];
        g.m_grad[i] = (x[i] - a[i]) * out_grad[i];
    }
    return g;
}

// ---------------------------------------------------------------------------
// Gram matrix per sample: G = F F^T / (c h w), F the c x (h w) unfolding.
// Stored as (n, c, c, 1); entries (i,j) and (j,i) are the same computed value.

template <class T>
Tensor4<T> gram(const Tensor4<T>& x) {
    const std::size_t C = x.c(), P = x.plane();
    const T norm = T(1) / static_cast<T>(C * P);
    Tensor4<T> g(x.n(), C, C, 1);
    for (std::size_t n = 0; n < x.n(); ++n)
        for (std::size_t i = 0; i < C; ++i) {
            const T* fi = x.plane(n, i);
            for (std::size_t j = i; j < C; ++j) {
                const T* fj = x.plane(n, j);
                T s = 0;
                for (std::size_t p = 0; p < P; ++p) s += fi[p] * fj[p];
                s *= norm;
                g(n, i, j, 0) = s;
                g(n, j, i, 0) = s;
            }
        }
    return g;
}

template <class T>
Tensor4<T> gram_backward(const Tensor4<T>& x, const Tensor4<T>& out_grad) {
    const std::size_t C = x.c(), P = x.plane();
    if (out_grad.shape() != Shape4{x.n(), C, C, 1})
        throw DimensionError("gram_backward: out_grad " + out_grad.shape().str() + " for input " + x.shape().str());
    const T norm = T(1) / static_cast<T>(C * P);
    Tensor4<T> dx(x.shape());
    // dF = (dG + dG^T) F / (c h w)
    std::vector<T> sym(C * C);
    for (std::size_t n = 0; n < x.n(); ++n) {
        for (std::size_t i = 0; i < C; ++i)
            for (std::size_t j = 0; j < C; ++j)
                sym[i * C + j] = (out_grad(n, i, j, 0) + out_grad(n, j, i, 0)) * norm;
        detail::gemm_nn(C, P, C, sym.data(), x.sample(n), dx.sample(n));
    }
    return dx;
}

}  // namespace advstyle
