#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "advstyle/tensor.hpp"

namespace advstyle {

struct GradcheckOptions {
    double tolerance = 1e-6;
    // 0 picks the precision default: 1e-5 for double, 1e-3 for float.
    double step = 0;
    // 0 checks every coordinate; otherwise a fixed-seed random subset per tensor.
    std::size_t max_samples_per_tensor = 0;
    std::uint64_t seed = 0x5eed;
};

struct TensorCheck {
    std::string name;
    double max_rel_error = 0;
    std::size_t checked = 0;
    // Coordinates that only agreed after re-probing with a different step
    // (typically a ReLU kink or max-pool switch inside the first step).
    std::size_t refined = 0;
};

struct GradcheckReport {
    std::string name;
    double tolerance = 0;
    std::vector<TensorCheck> tensors;

    double max_error() const {
        double m = 0;
        for (const auto& t : tensors) m = std::max(m, t.max_rel_error);
        return m;
    }
    bool passed() const { return max_error() <= tolerance; }
    std::size_t checked() const {
        std::size_t s = 0;
        for (const auto& t : tensors) s += t.checked;
        return s;
    }
};

template <class T>
struct GradTarget {
    std::string name;
    Tensor4<T>* tensor;          // perturbed in place, restored afterwards
    const Tensor4<T>* analytic;  // gradient computed by the backward under test
};

// Compare analytic gradients with central differences of `scalar_fn`, which
// must recompute the scalar from the current contents of every target tensor.
//
// Per-coordinate error is |a - d| / max(|a|, |d|, 1e-3 * scale) where scale is
// the largest analytic magnitude over all targets; the floor keeps coordinates
// whose true gradient is ~0 (e.g. a bias feeding batchnorm) from turning
// rounding noise into failures.
template <class T, class Fn>
GradcheckReport gradcheck(std::string name, std::span<const GradTarget<T>> targets, Fn&& scalar_fn,
                          const GradcheckOptions& opt = {}) {
    const double base_step = opt.step > 0 ? opt.step : (std::is_same_v<T, double> ? 1e-5 : 1e-3);
    GradcheckReport report{std::move(name), opt.tolerance, {}};
    std::mt19937_64 rng(opt.seed);

    auto eval = [&](const std::string& tname, std::size_t idx) {
        const double v = static_cast<double>(scalar_fn());
        if (!std::isfinite(v))
            throw NumericError("gradcheck " + report.name + ": non-finite value while probing " + tname +
                               "[" + std::to_string(idx) + "]");
        return v;
    };

    double scale = 0;
    for (const auto& tgt : targets)
        for (T v : tgt.analytic->values())
            if (std::isfinite(v)) scale = std::max(scale, std::abs(static_cast<double>(v)));
    const double floor = std::max(1e-3 * scale, 1e-12);

    for (const auto& tgt : targets) {
        Tensor4<T>& x = *tgt.tensor;
        const Tensor4<T>& a = *tgt.analytic;
        x.require_same_shape(a, "gradcheck");
        if (!a.all_finite()) {
            for (std::size_t i = 0; i < a.size(); ++i)
                if (!std::isfinite(a[i]))
                    throw NumericError("gradcheck " + report.name + ": non-finite analytic gradient at " +
                                       tgt.name + "[" + std::to_string(i) + "]");
        }
        std::vector<std::size_t> coords(x.size());
        std::iota(coords.begin(), coords.end(), std::size_t{0});
        if (opt.max_samples_per_tensor > 0 && coords.size() > opt.max_samples_per_tensor) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(opt.max_samples_per_tensor);
            std::sort(coords.begin(), coords.end());
        }
        TensorCheck tc{tgt.name, 0, 0, 0};
        for (std::size_t idx : coords) {
            const T saved = x[idx];
            auto central = [&](double h) {
                x[idx] = static_cast<T>(static_cast<double>(saved) + h);
                const double hp = static_cast<double>(x[idx]) - static_cast<double>(saved);
                const double fp = eval(tgt.name, idx);
                x[idx] = static_cast<T>(static_cast<double>(saved) - h);
                const double hm = static_cast<double>(saved) - static_cast<double>(x[idx]);
                const double fm = eval(tgt.name, idx);
                x[idx] = saved;
                return (fp - fm) / (hp + hm);
            };
            const double an = static_cast<double>(a[idx]);
            auto rel = [&](double d) {
                return std::abs(an - d) / std::max({std::abs(an), std::abs(d), floor});
            };
            double err = rel(central(base_step));
            if (err > opt.tolerance) {
                const double small = rel(central(base_step * 0.1));
                const double large = rel(central(base_step * 10));
                const double best = std::min(small, large);
                if (best < err) {
                    err = best;
                    if (err <= opt.tolerance) ++tc.refined;
                }
            }
            tc.max_rel_error = std::max(tc.max_rel_error, err);
            ++tc.checked;
        }
        report.tensors.push_back(std::move(tc));
    }
    return report;
}

// Weighted-sum probe: s = sum(weights * out). Used to turn any tensor-valued
// forward into a scalar whose gradient w.r.t. `out` is `weights`.
template <class T>
double weighted_sum(const Tensor4<T>& weights, const Tensor4<T>& out) {
    weights.require_same_shape(out, "weighted_sum");
    long double s = 0;
    for (std::size_t i = 0; i < out.size(); ++i)
        s += static_cast<long double>(weights[i]) * static_cast<long double>(out[i]);
    return static_cast<double>(s);
}

}  // namespace advstyle
