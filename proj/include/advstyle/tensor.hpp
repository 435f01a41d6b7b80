#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "advstyle/error.hpp"

namespace advstyle {

#ifdef ADVSTYLE_DOUBLE
using real_t = double;
#else
using real_t = float;
#endif

struct Shape4 {
    std::size_t n = 1, c = 1, h = 1, w = 1;

    std::size_t count() const { return n * c * h * w; }
    std::size_t plane() const { return h * w; }

    friend bool operator==(const Shape4&, const Shape4&) = default;

    std::string str() const {
        std::ostringstream os;
        os << "(" << n << "," << c << "," << h << "," << w << ")";
        return os.str();
    }
};

// Dense NCHW array, row-major. Every dimension is at least one.
template <class T>
class Tensor4 {
public:
    using value_type = T;

    Tensor4() : shape_{1, 1, 1, 1}, data_(1, T(0)) {}

    Tensor4(std::size_t n, std::size_t c, std::size_t h, std::size_t w, T fill = T(0))
        : Tensor4(Shape4{n, c, h, w}, fill) {}

    explicit Tensor4(Shape4 s, T fill = T(0)) : shape_(s) {
        if (s.n == 0 || s.c == 0 || s.h == 0 || s.w == 0)
            throw DimensionError("tensor dimensions must be >= 1, got " + s.str());
        data_.assign(s.count(), fill);
    }

    Tensor4(Shape4 s, std::vector<T> values) : Tensor4(s) {
        if (values.size() != s.count())
            throw DimensionError("value count " + std::to_string(values.size()) +
                                 " does not match shape " + s.str());
        data_ = std::move(values);
    }

    const Shape4& shape() const { return shape_; }
    std::size_t n() const { return shape_.n; }
    std::size_t c() const { return shape_.c; }
    std::size_t h() const { return shape_.h; }
    std::size_t w() const { return shape_.w; }
    std::size_t size() const { return data_.size(); }
    // Elements per (n, c) plane.
    std::size_t plane() const { return shape_.plane(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::span<T> values() { return data_; }
    std::span<const T> values() const { return data_; }

    std::size_t index(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
        return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
    }
    T& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
        return data_[index(n, c, h, w)];
    }
    T operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
        return data_[index(n, c, h, w)];
    }
    T& operator[](std::size_t i) { return data_[i]; }
    T operator[](std::size_t i) const { return data_[i]; }

    // Pointer to the start of the (n, c) plane.
    T* plane(std::size_t n, std::size_t c) { return data_.data() + index(n, c, 0, 0); }
    const T* plane(std::size_t n, std::size_t c) const { return data_.data() + index(n, c, 0, 0); }
    T* sample(std::size_t n) { return data_.data() + index(n, 0, 0, 0); }
    const T* sample(std::size_t n) const { return data_.data() + index(n, 0, 0, 0); }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    Tensor4& operator+=(const Tensor4& o) {
        require_same_shape(o, "+=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    Tensor4& operator*=(T s) {
        for (auto& v : data_) v *= s;
        return *this;
    }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
    }

    T sum() const {
        T s = 0;
        for (T v : data_) s += v;
        return s;
    }

    void require_same_shape(const Tensor4& o, const char* op) const {
        if (shape_ != o.shape_)
            throw DimensionError(std::string(op) + ": shape mismatch " + shape_.str() + " vs " +
                                 o.shape_.str());
    }

    template <class U>
    Tensor4<U> cast() const {
        Tensor4<U> out(shape_);
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return out;
    }

    friend bool operator==(const Tensor4& a, const Tensor4& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    Shape4 shape_;
    std::vector<T> data_;
};

// Gradients produced by one backward call.
template <class T>
struct LayerGrad {
    Tensor4<T> input_grad;
    std::vector<Tensor4<T>> param_grads;
};

template <class T>
Tensor4<T> zeros_like(const Tensor4<T>& t) {
    return Tensor4<T>(t.shape());
}

template <class T, class Rng>
void fill_normal(Tensor4<T>& t, Rng& rng, double mean, double stddev) {
    std::normal_distribution<double> dist(mean, stddev);
    for (auto& v : t.values()) v = static_cast<T>(dist(rng));
}

template <class T, class Rng>
void fill_uniform(Tensor4<T>& t, Rng& rng, double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    for (auto& v : t.values()) v = static_cast<T>(dist(rng));
}

// Concatenate along channels. All inputs share n, h, w.
template <class T>
Tensor4<T> concat_channels(std::span<const Tensor4<T>* const> parts) {
    if (parts.empty()) throw DimensionError("concat_channels: no inputs");
    const Shape4 first = parts[0]->shape();
    std::size_t channels = 0;
    for (const auto* p : parts) {
        if (p->n() != first.n || p->h() != first.h || p->w() != first.w)
            throw DimensionError("concat_channels: " + p->shape().str() + " vs " + first.str());
        channels += p->c();
    }
    Tensor4<T> out(first.n, channels, first.h, first.w);
    for (std::size_t n = 0; n < first.n; ++n) {
        T* dst = out.sample(n);
        for (const auto* p : parts) {
            const std::size_t len = p->c() * first.plane();
            std::copy_n(p->sample(n), len, dst);
            dst += len;
        }
    }
    return out;
}

// Inverse of concat_channels: split `t` into blocks with the given channel counts.
template <class T>
std::vector<Tensor4<T>> split_channels(const Tensor4<T>& t, std::span<const std::size_t> channels) {
    std::size_t total = 0;
    for (auto c : channels) total += c;
    if (total != t.c())
        throw DimensionError("split_channels: channel sum " + std::to_string(total) + " vs " +
                             t.shape().str());
    std::vector<Tensor4<T>> out;
    out.reserve(channels.size());
    for (auto c : channels) out.emplace_back(t.n(), c, t.h(), t.w());
    for (std::size_t n = 0; n < t.n(); ++n) {
        const T* src = t.sample(n);
        for (auto& o : out) {
            const std::size_t len = o.c() * o.h() * o.w();
            std::copy_n(src, len, o.sample(n));
            src += len;
        }
    }
    return out;
}

namespace detail {

// Row-major GEMM kernels. Loops are ordered so the innermost loop walks
// contiguous memory; the order of floating-point accumulation is fixed.

// C[m x n] += A[m x k] * B[k x n]
template <class T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
    for (std::size_t i = 0; i < m; ++i) {
        T* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const T av = a[i * k + p];
            if (av == T(0)) continue;
            const T* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m x n] += A^T * B, with A stored [k x m] and B [k x n]
template <class T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
    for (std::size_t p = 0; p < k; ++p) {
        const T* arow = a + p * m;
        const T* brow = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const T av = arow[i];
            if (av == T(0)) continue;
            T* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m x n] += A * B^T, with A stored [m x k] and B [n x k]
template <class T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
    std::vector<T> bt(k * n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
    gemm_nn(m, n, k, a, bt.data(), c);
}

}  // namespace detail

}  // namespace advstyle
