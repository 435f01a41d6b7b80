#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "advstyle/networks.hpp"
#include "advstyle/tensor.hpp"

namespace advstyle {

template <class T>
struct AdamState {
    std::size_t step = 0;
    std::vector<Tensor4<T>> m;
    std::vector<Tensor4<T>> v;
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.9;
    double eps = 1e-8;

    static AdamState for_params(const std::vector<NamedTensor<T>>& params, double lr = 2e-4, double beta1 = 0.5,
                                double beta2 = 0.9) {
        if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1))
            throw DomainError("adam: betas must lie in [0,1)");
        AdamState s;
        s.lr = lr;
        s.beta1 = beta1;
        s.beta2 = beta2;
        for (const auto& p : params) {
            s.m.emplace_back(p.tensor->shape());
            s.v.emplace_back(p.tensor->shape());
        }
        return s;
    }
};

// One bias-corrected Adam update. All gradients are validated before any
// parameter is touched.
template <class T>
void adam_step(const std::vector<NamedTensor<T>>& params, const ParamGrads<T>& grads, AdamState<T>& st) {
    if (grads.size() != params.size() || st.m.size() != params.size())
        throw DimensionError("adam_step: " + std::to_string(params.size()) + " params, " +
                             std::to_string(grads.size()) + " grads, " + std::to_string(st.m.size()) + " moments");
    for (std::size_t i = 0; i < params.size(); ++i) {
        params[i].tensor->require_same_shape(grads[i], "adam_step");
        if (!grads[i].all_finite()) throw NumericError("adam_step: non-finite gradient for " + params[i].name);
    }
    ++st.step;
    const double b1 = st.beta1, b2 = st.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(st.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor4<T>& p = *params[i].tensor;
        Tensor4<T>& m = st.m[i];
        Tensor4<T>& v = st.v[i];
        const Tensor4<T>& g = grads[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double gj = static_cast<double>(g[j]);
            const double mj = b1 * static_cast<double>(m[j]) + (1.0 - b1) * gj;
            const double vj = b2 * static_cast<double>(v[j]) + (1.0 - b2) * gj * gj;
            m[j] = static_cast<T>(mj);
            v[j] = static_cast<T>(vj);
            const double mhat = mj / c1, vhat = vj / c2;
            p[j] = static_cast<T>(static_cast<double>(p[j]) - st.lr * mhat / (std::sqrt(vhat) + st.eps));
        }
    }
}

// Parameter snapshot taken just before a player's most recent update.
template <class T>
struct PredictionState {
    std::vector<Tensor4<T>> previous;

    bool empty() const { return previous.empty(); }

    void record(const std::vector<NamedTensor<T>>& params) {
        previous.clear();
        previous.reserve(params.size());
        for (const auto& p : params) previous.push_back(*p.tensor);
    }
};

// predicted = current + (current - previous). Without history the
// prediction is the current value.
template <class T>
std::vector<Tensor4<T>> predict_params(const std::vector<NamedTensor<T>>& current, const PredictionState<T>& st) {
    std::vector<Tensor4<T>> out;
    out.reserve(current.size());
    if (st.empty()) {
        for (const auto& p : current) out.push_back(*p.tensor);
        return out;
    }
    if (st.previous.size() != current.size())
        throw DimensionError("predict_params: snapshot has " + std::to_string(st.previous.size()) +
                             " tensors, parameters have " + std::to_string(current.size()));
    for (std::size_t i = 0; i < current.size(); ++i) {
        const Tensor4<T>& cur = *current[i].tensor;
        cur.require_same_shape(st.previous[i], "predict_params");
        Tensor4<T> pred(cur.shape());
        for (std::size_t j = 0; j < cur.size(); ++j) pred[j] = cur[j] + (cur[j] - st.previous[i][j]);
        out.push_back(std::move(pred));
    }
    return out;
}

// Swaps predicted values into live parameters for the lifetime of the guard
// and restores the originals bit-for-bit afterwards. Inactive guards do nothing.
template <class T>
class ScopedPrediction {
public:
    ScopedPrediction(const std::vector<NamedTensor<T>>& params, const PredictionState<T>& st, bool active = true)
        : params_(params) {
        if (!active) return;
        auto predicted = predict_params(params, st);
        saved_.reserve(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            saved_.push_back(std::move(*params[i].tensor));
            *params[i].tensor = std::move(predicted[i]);
        }
    }
    ~ScopedPrediction() { restore(); }
    ScopedPrediction(const ScopedPrediction&) = delete;
    ScopedPrediction& operator=(const ScopedPrediction&) = delete;

    void restore() {
        for (std::size_t i = 0; i < saved_.size(); ++i) *params_[i].tensor = std::move(saved_[i]);
        saved_.clear();
    }

private:
    std::vector<NamedTensor<T>> params_;
    std::vector<Tensor4<T>> saved_;
};

struct LrSchedule {
    double base = 2e-4;
    std::size_t decay_start = 60;
    std::size_t total_epochs = 150;
};

// Constant until decay_start, then linear down to 0 at total_epochs.
inline double lr_schedule(std::size_t epoch, const LrSchedule& cfg) {
    if (epoch > cfg.total_epochs)
        throw DomainError("lr_schedule: epoch " + std::to_string(epoch) + " beyond total " +
                          std::to_string(cfg.total_epochs));
    if (epoch <= cfg.decay_start || cfg.total_epochs <= cfg.decay_start) return cfg.base;
    const double span = static_cast<double>(cfg.total_epochs - cfg.decay_start);
    return cfg.base * static_cast<double>(cfg.total_epochs - epoch) / span;
}

// Two-player bilinear game min_x max_y x*y, saddle at the origin. Both players
// use Adam; with `prediction` each update is taken against the opponent's
// extrapolated parameters. Returns the final distance to the saddle.
inline double bilinear_saddle_distance(std::size_t steps, double lr, bool prediction, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> init(0.5, 1.0);
    Tensor4<double> x(1, 1, 1, 1, init(rng)), y(1, 1, 1, 1, init(rng));
    const std::vector<NamedTensor<double>> px{{"x", &x, 0}}, py{{"y", &y, 0}};
    auto ax = AdamState<double>::for_params(px, lr), ay = AdamState<double>::for_params(py, lr);
    PredictionState<double> hx, hy;
    for (std::size_t t = 0; t < steps; ++t) {
        ParamGrads<double> gx(1, Tensor4<double>(1, 1, 1, 1));
        {
            ScopedPrediction<double> guard(py, hy, prediction);
            gx[0][0] = y[0];
        }
        hx.record(px);
        adam_step(px, gx, ax);
        ParamGrads<double> gy(1, Tensor4<double>(1, 1, 1, 1));
        {
            ScopedPrediction<double> guard(px, hx, prediction);
            gy[0][0] = -x[0];
        }
        hy.record(py);
        adam_step(py, gy, ay);
    }
    return std::hypot(x[0], y[0]);
}

}  // namespace advstyle
