#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "advstyle/tensor.hpp"

namespace advstyle {

namespace detail {

inline std::size_t conv_out_size(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad,
                                 const char* op) {
    if (stride < 1) throw DimensionError(std::string(op) + ": stride must be >= 1");
    if (in + 2 * pad < k)
        throw DimensionError(std::string(op) + ": kernel " + std::to_string(k) +
                             " larger than padded input " + std::to_string(in + 2 * pad));
    return (in + 2 * pad - k) / stride + 1;
}

// Unfold one sample [c, h, w] into columns [c*k*k, oh*ow].
template <class T>
void im2col(const T* src, std::size_t c, std::size_t h, std::size_t w, std::size_t k,
            std::size_t stride, std::size_t pad, std::size_t oh, std::size_t ow, T* col) {
    const std::size_t cols = oh * ow;
    for (std::size_t ci = 0; ci < c; ++ci)
        for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx) {
                T* dst = col + ((ci * k + ky) * k + kx) * cols;
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                    T* drow = dst + oy * ow;
                    if (iy < 0 || iy >= static_cast<long>(h)) {
                        std::fill_n(drow, ow, T(0));
                        continue;
                    }
                    const T* srow = src + (ci * h + static_cast<std::size_t>(iy)) * w;
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                        const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                        drow[ox] = (ix < 0 || ix >= static_cast<long>(w)) ? T(0)
                                                                          : srow[static_cast<std::size_t>(ix)];
                    }
                }
            }
}

// Adjoint of im2col: scatter-add columns back into [c, h, w].
template <class T>
void col2im(const T* col, std::size_t c, std::size_t h, std::size_t w, std::size_t k,
            std::size_t stride, std::size_t pad, std::size_t oh, std::size_t ow, T* dst) {
    const std::size_t cols = oh * ow;
    for (std::size_t ci = 0; ci < c; ++ci)
        for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx) {
                const T* src = col + ((ci * k + ky) * k + kx) * cols;
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                    if (iy < 0 || iy >= static_cast<long>(h)) continue;
                    T* drow = dst + (ci * h + static_cast<std::size_t>(iy)) * w;
                    const T* srow = src + oy * ow;
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                        const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                        if (ix < 0 || ix >= static_cast<long>(w)) continue;
                        drow[static_cast<std::size_t>(ix)] += srow[ox];
                    }
                }
            }
}

template <class T>
void check_conv_weight(const Tensor4<T>& input, const Tensor4<T>& weight, std::span<const T> bias,
                       std::size_t in_channels_axis_value, const char* op) {
    if (weight.h() != weight.w())
        throw DimensionError(std::string(op) + ": kernel must be square, weight " + weight.shape().str());
    if (input.c() != in_channels_axis_value)
        throw DimensionError(std::string(op) + ": input " + input.shape().str() +
                             " incompatible with weight " + weight.shape().str());
    (void)bias;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Convolution (cross-correlation). weight is (c_out, c_in, k, k).

template <class T>
Tensor4<T> conv2d_forward(const Tensor4<T>& input, const Tensor4<T>& weight, std::span<const T> bias,
                          std::size_t stride, std::size_t pad) {
    detail::check_conv_weight(input, weight, bias, weight.c(), "conv2d");
    const std::size_t co = weight.n(), ci = weight.c(), k = weight.h();
    if (!bias.empty() && bias.size() != co)
        throw DimensionError("conv2d: bias length " + std::to_string(bias.size()) + " vs weight " +
                             weight.shape().str());
    const std::size_t oh = detail::conv_out_size(input.h(), k, stride, pad, "conv2d");
    const std::size_t ow = detail::conv_out_size(input.w(), k, stride, pad, "conv2d");
    Tensor4<T> out(input.n(), co, oh, ow);
    const std::size_t rows = ci * k * k, cols = oh * ow;
    const bool pointwise = (k == 1 && stride == 1 && pad == 0);
    std::vector<T> col(pointwise ? 0 : rows * cols);
    for (std::size_t n = 0; n < input.n(); ++n) {
        const T* src = input.sample(n);
        if (!pointwise) {
            detail::im2col(src, ci, input.h(), input.w(), k, stride, pad, oh, ow, col.data());
            src = col.data();
        }
        T* dst = out.sample(n);
        if (!bias.empty())
            for (std::size_t o = 0; o < co; ++o) std::fill_n(dst + o * cols, cols, bias[o]);
        detail::gemm_nn(co, cols, rows, weight.data(), src, dst);
    }
    return out;
}

// Gradients of sum(out_grad * conv2d_forward(...)). param_grads = {weight, bias}.
// With need_param_grads == false only input_grad is computed (frozen layers).
template <class T>
LayerGrad<T> conv2d_backward(const Tensor4<T>& input, const Tensor4<T>& weight, const Tensor4<T>& out_grad,
                             std::size_t stride, std::size_t pad, bool need_param_grads = true) {
    detail::check_conv_weight<T>(input, weight, {}, weight.c(), "conv2d_backward");
    const std::size_t co = weight.n(), ci = weight.c(), k = weight.h();
    const std::size_t oh = detail::conv_out_size(input.h(), k, stride, pad, "conv2d_backward");
    const std::size_t ow = detail::conv_out_size(input.w(), k, stride, pad, "conv2d_backward");
    if (out_grad.shape() != Shape4{input.n(), co, oh, ow})
        throw DimensionError("conv2d_backward: out_grad " + out_grad.shape().str() + " expected " +
                             Shape4{input.n(), co, oh, ow}.str());
    LayerGrad<T> g{Tensor4<T>(input.shape()), {}};
    Tensor4<T> dw(weight.shape());
    Tensor4<T> db(co, 1, 1, 1);
    const std::size_t rows = ci * k * k, cols = oh * ow;
    std::vector<T> col(rows * cols), dcol(rows * cols);
    for (std::size_t n = 0; n < input.n(); ++n) {
        const T* dy = out_grad.sample(n);
        std::fill(dcol.begin(), dcol.end(), T(0));
        detail::gemm_tn(rows, cols, co, weight.data(), dy, dcol.data());
        detail::col2im(dcol.data(), ci, input.h(), input.w(), k, stride, pad, oh, ow, g.input_grad.sample(n));
        if (need_param_grads) {
            detail::im2col(input.sample(n), ci, input.h(), input.w(), k, stride, pad, oh, ow, col.data());
            detail::gemm_nt(co, rows, cols, dy, col.data(), dw.data());
            for (std::size_t o = 0; o < co; ++o) {
                T s = 0;
                for (std::size_t j = 0; j < cols; ++j) s += dy[o * cols + j];
                db[o] += s;
            }
        }
    }
    if (need_param_grads) {
        g.param_grads.push_back(std::move(dw));
        g.param_grads.push_back(std::move(db));
    }
    return g;
}

// ---------------------------------------------------------------------------
// Transposed convolution. weight is (c_in, c_out, k, k);
// output spatial size = (h - 1) * stride - 2 * pad + k.

template <class T>
Tensor4<T> conv2d_transpose_forward(const Tensor4<T>& input, const Tensor4<T>& weight, std::span<const T> bias,
                                    std::size_t stride, std::size_t pad) {
    detail::check_conv_weight(input, weight, bias, weight.n(), "conv2d_transpose");
    const std::size_t cin = weight.n(), co = weight.c(), k = weight.h();
    if (stride < 1) throw DimensionError("conv2d_transpose: stride must be >= 1");
    if (!bias.empty() && bias.size() != co)
        throw DimensionError("conv2d_transpose: bias length " + std::to_string(bias.size()) +
                             " vs weight " + weight.shape().str());
    const long ohl = static_cast<long>((input.h() - 1) * stride + k) - 2 * static_cast<long>(pad);
    const long owl = static_cast<long>((input.w() - 1) * stride + k) - 2 * static_cast<long>(pad);
    if (ohl < 1 || owl < 1) throw DimensionError("conv2d_transpose: empty output for " + input.shape().str());
    const auto oh = static_cast<std::size_t>(ohl), ow = static_cast<std::size_t>(owl);
    Tensor4<T> out(input.n(), co, oh, ow);
    const std::size_t rows = co * k * k, cols = input.h() * input.w();
    std::vector<T> col(rows * cols);
    for (std::size_t n = 0; n < input.n(); ++n) {
        std::fill(col.begin(), col.end(), T(0));
        detail::gemm_tn(rows, cols, cin, weight.data(), input.sample(n), col.data());
        T* dst = out.sample(n);
        if (!bias.empty())
            for (std::size_t o = 0; o < co; ++o) std::fill_n(dst + o * oh * ow, oh * ow, bias[o]);
        detail::col2im(col.data(), co, oh, ow, k, stride, pad, input.h(), input.w(), dst);
    }
    return out;
}

template <class T>
LayerGrad<T> conv2d_transpose_backward(const Tensor4<T>& input, const Tensor4<T>& weight,
                                       const Tensor4<T>& out_grad, std::size_t stride, std::size_t pad,
                                       bool need_param_grads = true) {
    detail::check_conv_weight<T>(input, weight, {}, weight.n(), "conv2d_transpose_backward");
    const std::size_t cin = weight.n(), co = weight.c(), k = weight.h();
    const long ohl = static_cast<long>((input.h() - 1) * stride + k) - 2 * static_cast<long>(pad);
    const long owl = static_cast<long>((input.w() - 1) * stride + k) - 2 * static_cast<long>(pad);
    const Shape4 expect{input.n(), co, static_cast<std::size_t>(std::max(ohl, 1L)),
                        static_cast<std::size_t>(std::max(owl, 1L))};
    if (out_grad.shape() != expect)
        throw DimensionError("conv2d_transpose_backward: out_grad " + out_grad.shape().str() + " expected " +
                             expect.str());
    const std::size_t oh = expect.h, ow = expect.w;
    LayerGrad<T> g{Tensor4<T>(input.shape()), {}};
    Tensor4<T> dw(weight.shape());
    Tensor4<T> db(co, 1, 1, 1);
    const std::size_t rows = co * k * k, cols = input.h() * input.w();
    std::vector<T> col(rows * cols);
    for (std::size_t n = 0; n < input.n(); ++n) {
        const T* dy = out_grad.sample(n);
        detail::im2col(dy, co, oh, ow, k, stride, pad, input.h(), input.w(), col.data());
        detail::gemm_nn(cin, cols, rows, weight.data(), col.data(), g.input_grad.sample(n));
        if (need_param_grads) {
            detail::gemm_nt(cin, rows, cols, input.sample(n), col.data(), dw.data());
            for (std::size_t o = 0; o < co; ++o) {
                T s = 0;
                for (std::size_t j = 0; j < oh * ow; ++j) s += dy[o * oh * ow + j];
                db[o] += s;
            }
        }
    }
    if (need_param_grads) {
        g.param_grads.push_back(std::move(dw));
        g.param_grads.push_back(std::move(db));
    }
    return g;
}

// ---------------------------------------------------------------------------
// 2x2 stride-2 max pooling.

struct PoolIndices {
    // Flat input index of the selected element for every output element.
    std::vector<std::size_t> argmax;
    Shape4 input_shape;
};

template <class T>
struct MaxPoolResult {
    Tensor4<T> output;
    PoolIndices indices;
};

template <class T>
MaxPoolResult<T> maxpool2(const Tensor4<T>& input) {
    if (input.h() % 2 != 0 || input.w() % 2 != 0)
        throw DimensionError("maxpool2: spatial size must be even, got " + input.shape().str());
    const std::size_t oh = input.h() / 2, ow = input.w() / 2;
    MaxPoolResult<T> r{Tensor4<T>(input.n(), input.c(), oh, ow), {{}, input.shape()}};
    r.indices.argmax.resize(r.output.size());
    std::size_t o = 0;
    for (std::size_t n = 0; n < input.n(); ++n)
        for (std::size_t c = 0; c < input.c(); ++c)
            for (std::size_t y = 0; y < oh; ++y)
                for (std::size_t x = 0; x < ow; ++x, ++o) {
                    // Strict '>' keeps the first maximum in row-major scan order.
                    std::size_t best = input.index(n, c, 2 * y, 2 * x);
                    for (std::size_t dy = 0; dy < 2; ++dy)
                        for (std::size_t dx = 0; dx < 2; ++dx) {
                            const std::size_t i = input.index(n, c, 2 * y + dy, 2 * x + dx);
                            if (input[i] > input[best]) best = i;
                        }
                    r.output[o] = input[best];
                    r.indices.argmax[o] = best;
                }
    return r;
}

template <class T>
Tensor4<T> maxpool2_backward(const PoolIndices& idx, const Tensor4<T>& out_grad) {
    if (out_grad.size() != idx.argmax.size())
        throw DimensionError("maxpool2_backward: out_grad " + out_grad.shape().str() +
                             " does not match recorded pooling of " + idx.input_shape.str());
    Tensor4<T> g(idx.input_shape);
    for (std::size_t o = 0; o < idx.argmax.size(); ++o) g[idx.argmax[o]] += out_grad[o];
    return g;
}

// ---------------------------------------------------------------------------
// Average pooling with a square window equal to its stride.

template <class T>
Tensor4<T> avgpool(const Tensor4<T>& input, std::size_t factor) {
    if (factor == 1) return input;
    if (factor == 0 || input.h() % factor != 0 || input.w() % factor != 0)
        throw DimensionError("avgpool: " + input.shape().str() + " not divisible by " + std::to_string(factor));
    const std::size_t oh = input.h() / factor, ow = input.w() / factor;
    Tensor4<T> out(input.n(), input.c(), oh, ow);
    const T inv = T(1) / static_cast<T>(factor * factor);
    for (std::size_t n = 0; n < input.n(); ++n)
        for (std::size_t c = 0; c < input.c(); ++c)
            for (std::size_t y = 0; y < oh; ++y)
                for (std::size_t x = 0; x < ow; ++x) {
                    T s = 0;
                    for (std::size_t dy = 0; dy < factor; ++dy)
                        for (std::size_t dx = 0; dx < factor; ++dx)
                            s += input(n, c, y * factor + dy, x * factor + dx);
                    out(n, c, y, x) = s * inv;
                }
    return out;
}

template <class T>
Tensor4<T> avgpool_backward(const Shape4& input_shape, const Tensor4<T>& out_grad, std::size_t factor) {
    if (factor == 1) return out_grad;
    if (out_grad.shape() != Shape4{input_shape.n, input_shape.c, input_shape.h / factor, input_shape.w / factor})
        throw DimensionError("avgpool_backward: out_grad " + out_grad.shape().str() + " vs input " +
                             input_shape.str());
    Tensor4<T> g(input_shape);
    const T inv = T(1) / static_cast<T>(factor * factor);
    for (std::size_t n = 0; n < input_shape.n; ++n)
        for (std::size_t c = 0; c < input_shape.c; ++c)
            for (std::size_t y = 0; y < input_shape.h; ++y)
                for (std::size_t x = 0; x < input_shape.w; ++x)
                    g(n, c, y, x) = out_grad(n, c, y / factor, x / factor) * inv;
    return g;
}

// ---------------------------------------------------------------------------
// Activations. relu is leaky_relu with slope 0; the derivative at exactly 0
// is the negative-side slope.

template <class T>
Tensor4<T> leaky_relu(const Tensor4<T>& input, T slope) {
    if (!(slope >= T(0) && slope < T(1))) throw DomainError("leaky_relu: slope must be in [0,1)");
    Tensor4<T> out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) {
        const T x = input[i];
        out[i] = x > T(0) ? x : slope * x;
    }
    return out;
}

template <class T>
Tensor4<T> leaky_relu_backward(const Tensor4<T>& input, const Tensor4<T>& out_grad, T slope) {
    input.require_same_shape(out_grad, "leaky_relu_backward");
    Tensor4<T> g(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) g[i] = input[i] > T(0) ? out_grad[i] : slope * out_grad[i];
    return g;
}

template <class T>
Tensor4<T> relu(const Tensor4<T>& input) {
    return leaky_relu(input, T(0));
}

template <class T>
Tensor4<T> relu_backward(const Tensor4<T>& input, const Tensor4<T>& out_grad) {
    return leaky_relu_backward(input, out_grad, T(0));
}

// Symmetric squashing into (-1, 1).
template <class T>
Tensor4<T> tanh_forward(const Tensor4<T>& input) {
    Tensor4<T> out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) out[i] = std::tanh(input[i]);
    return out;
}

// Takes the forward *output*.
template <class T>
Tensor4<T> tanh_backward(const Tensor4<T>& output, const Tensor4<T>& out_grad) {
    output.require_same_shape(out_grad, "tanh_backward");
    Tensor4<T> g(output.shape());
    for (std::size_t i = 0; i < output.size(); ++i) g[i] = out_grad[i] * (T(1) - output[i] * output[i]);
    return g;
}

// ---------------------------------------------------------------------------
// Batch normalization over (n, h, w) per channel.

enum class NormMode { train, eval };

// Running mean/variance, each shaped (c,1,1,1).
template <class T>
struct RunningStats {
    Tensor4<T> mean;
    Tensor4<T> var;

    RunningStats() = default;
    explicit RunningStats(std::size_t c) : mean(c, 1, 1, 1, T(0)), var(c, 1, 1, 1, T(1)) {}
};

template <class T>
struct BatchNormCache {
    NormMode mode = NormMode::train;
    Tensor4<T> xhat;
    std::vector<T> inv_std;
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

// In train mode `running` (if non-null) is updated with momentum 0.1 using
// the unbiased batch variance. In eval mode `running` must be provided.
template <class T>
Tensor4<T> batchnorm_forward(const Tensor4<T>& input, std::span<const T> gamma, std::span<const T> beta,
                             NormMode mode, RunningStats<T>* running, BatchNormCache<T>* cache = nullptr) {
    const std::size_t C = input.c(), N = input.n(), P = input.plane();
    if (gamma.size() != C || beta.size() != C)
        throw DimensionError("batchnorm: gamma/beta length " + std::to_string(gamma.size()) + "/" +
                             std::to_string(beta.size()) + " vs input " + input.shape().str());
    if (mode == NormMode::eval && (running == nullptr || running->mean.size() != C))
        throw DimensionError("batchnorm: eval mode needs running stats for " + std::to_string(C) + " channels");
    const T eps = static_cast<T>(kBatchNormEps);
    Tensor4<T> out(input.shape());
    Tensor4<T> xhat(input.shape());
    std::vector<T> inv_std(C);
    const double m = static_cast<double>(N * P);
    for (std::size_t c = 0; c < C; ++c) {
        T mean, var;
        if (mode == NormMode::train) {
            double s = 0;
            for (std::size_t n = 0; n < N; ++n) {
                const T* p = input.plane(n, c);
                for (std::size_t i = 0; i < P; ++i) s += p[i];
            }
            const double mu = s / m;
            double v = 0;
            for (std::size_t n = 0; n < N; ++n) {
                const T* p = input.plane(n, c);
                for (std::size_t i = 0; i < P; ++i) v += (p[i] - mu) * (p[i] - mu);
            }
            mean = static_cast<T>(mu);
            var = static_cast<T>(v / m);
            if (running != nullptr) {
                const T mom = static_cast<T>(kBatchNormMomentum);
                const T unbiased = m > 1 ? static_cast<T>(v / (m - 1)) : var;
                running->mean[c] = (T(1) - mom) * running->mean[c] + mom * mean;
                running->var[c] = (T(1) - mom) * running->var[c] + mom * unbiased;
            }
        } else {
            mean = running->mean[c];
            var = running->var[c];
        }
        const T is = T(1) / std::sqrt(var + eps);
        inv_std[c] = is;
        for (std::size_t n = 0; n < N; ++n) {
            const T* p = input.plane(n, c);
            T* xh = xhat.plane(n, c);
            T* o = out.plane(n, c);
            for (std::size_t i = 0; i < P; ++i) {
                xh[i] = (p[i] - mean) * is;
                o[i] = gamma[c] * xh[i] + beta[c];
            }
        }
    }
    if (cache != nullptr) *cache = BatchNormCache<T>{mode, std::move(xhat), std::move(inv_std)};
    return out;
}

// param_grads = {gamma, beta}, each shaped (c,1,1,1).
template <class T>
LayerGrad<T> batchnorm_backward(const BatchNormCache<T>& cache, std::span<const T> gamma, const Tensor4<T>& out_grad) {
    cache.xhat.require_same_shape(out_grad, "batchnorm_backward");
    const std::size_t C = out_grad.c(), N = out_grad.n(), P = out_grad.plane();
    if (gamma.size() != C) throw DimensionError("batchnorm_backward: gamma length mismatch");
    LayerGrad<T> g{Tensor4<T>(out_grad.shape()), {Tensor4<T>(C, 1, 1, 1), Tensor4<T>(C, 1, 1, 1)}};
    const T m = static_cast<T>(N * P);
    for (std::size_t c = 0; c < C; ++c) {
        T sum_dy = 0, sum_dy_xhat = 0;
        for (std::size_t n = 0; n < N; ++n) {
            const T* dy = out_grad.plane(n, c);
            const T* xh = cache.xhat.plane(n, c);
            for (std::size_t i = 0; i < P; ++i) {
                sum_dy += dy[i];
                sum_dy_xhat += dy[i] * xh[i];
            }
        }
        g.param_grads[0][c] = sum_dy_xhat;
        g.param_grads[1][c] = sum_dy;
        const T k = gamma[c] * cache.inv_std[c];
        for (std::size_t n = 0; n < N; ++n) {
            const T* dy = out_grad.plane(n, c);
            const T* xh = cache.xhat.plane(n, c);
            T* dx = g.input_grad.plane(n, c);
            if (cache.mode == NormMode::train) {
                for (std::size_t i = 0; i < P; ++i)
                    dx[i] = k * (dy[i] - sum_dy / m - xh[i] * sum_dy_xhat / m);
            } else {
                for (std::size_t i = 0; i < P; ++i) dx[i] = k * dy[i];
            }
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Global average pooling (n,c,h,w) -> (n,c,1,1).

template <class T>
Tensor4<T> global_avg_pool(const Tensor4<T>& input) {
    Tensor4<T> out(input.n(), input.c(), 1, 1);
    const T inv = T(1) / static_cast<T>(input.plane());
    for (std::size_t n = 0; n < input.n(); ++n)
        for (std::size_t c = 0; c < input.c(); ++c) {
            const T* p = input.plane(n, c);
            T s = 0;
            for (std::size_t i = 0; i < input.plane(); ++i) s += p[i];
            out(n, c, 0, 0) = s * inv;
        }
    return out;
}

template <class T>
Tensor4<T> global_avg_pool_backward(const Shape4& input_shape, const Tensor4<T>& out_grad) {
    if (out_grad.shape() != Shape4{input_shape.n, input_shape.c, 1, 1})
        throw DimensionError("global_avg_pool_backward: " + out_grad.shape().str() + " vs " + input_shape.str());
    Tensor4<T> g(input_shape);
    const T inv = T(1) / static_cast<T>(input_shape.h * input_shape.w);
    for (std::size_t n = 0; n < input_shape.n; ++n)
        for (std::size_t c = 0; c < input_shape.c; ++c) {
            T* p = g.plane(n, c);
            std::fill_n(p, input_shape.h * input_shape.w, out_grad(n, c, 0, 0) * inv);
        }
    return g;
}

// ---------------------------------------------------------------------------
// Fully connected layer: input (n,d,1,1), weight (k,d,1,1) -> (n,k,1,1).
// Equivalent to a 1x1 convolution on a 1x1 map.

template <class T>
Tensor4<T> linear_forward(const Tensor4<T>& input, const Tensor4<T>& weight, std::span<const T> bias) {
    if (input.h() != 1 || input.w() != 1)
        throw DimensionError("linear: input must be (n,d,1,1), got " + input.shape().str());
    return conv2d_forward(input, weight, bias, 1, 0);
}

template <class T>
LayerGrad<T> linear_backward(const Tensor4<T>& input, const Tensor4<T>& weight, const Tensor4<T>& out_grad) {
    return conv2d_backward(input, weight, out_grad, 1, 0);
}

}  // namespace advstyle
