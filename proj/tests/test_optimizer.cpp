#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "advstyle/optimizer.hpp"
#include "test_util.hpp"

using namespace advstyle;
using Td = Tensor4<double>;

namespace {

struct Scalar {
    Td t{1, 1, 1, 1};
    std::vector<NamedTensor<double>> params() { return {{"p", &t, 0}}; }
};

ParamGrads<double> grad(double g) { return {Td(1, 1, 1, 1, g)}; }

}  // namespace

TEST(Adam, FiveStepTraceMatchesHandOracle) {
    const double lr = 0.05, b1 = 0.5, b2 = 0.9, eps = 1e-8;
    const double gs[5] = {1.0, -0.5, 2.0, 0.25, -1.0};
    Scalar s;
    s.t[0] = 0.3;
    auto st = AdamState<double>::for_params(s.params(), lr, b1, b2);
    long double p = 0.3L, m = 0, v = 0;
    for (int k = 1; k <= 5; ++k) {
        const long double g = gs[k - 1];
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        const long double mh = m / (1 - std::pow(static_cast<long double>(b1), k));
        const long double vh = v / (1 - std::pow(static_cast<long double>(b2), k));
        p -= lr * mh / (std::sqrt(vh) + eps);
        adam_step(s.params(), grad(gs[k - 1]), st);
        EXPECT_NEAR(s.t[0], static_cast<double>(p), 1e-12) << "step " << k;
    }
    EXPECT_EQ(st.step, 5u);
}

TEST(Adam, FirstStepIsUnitStep) {
    Scalar s;
    auto st = AdamState<double>::for_params(s.params(), 0.1);
    for (int k = 1; k <= 3; ++k) {
        adam_step(s.params(), grad(1.0), st);
        EXPECT_NEAR(s.t[0], -0.1 * k, 1e-8);
    }
}

TEST(Adam, ZeroGradientsAndDecay) {
    Scalar s;
    s.t[0] = 2.0;
    auto st = AdamState<double>::for_params(s.params());
    adam_step(s.params(), grad(0.0), st);
    EXPECT_EQ(s.t[0], 2.0);
    EXPECT_EQ(st.step, 1u);
    adam_step(s.params(), grad(1.0), st);
    const double m0 = st.m[0][0], v0 = st.v[0][0];
    for (int k = 0; k < 10; ++k) adam_step(s.params(), grad(0.0), st);
    EXPECT_NEAR(st.m[0][0], m0 * std::pow(0.5, 10), 1e-15);
    EXPECT_NEAR(st.v[0][0], v0 * std::pow(0.9, 10), 1e-15);
}

TEST(Adam, Errors) {
    Scalar s;
    auto st = AdamState<double>::for_params(s.params());
    EXPECT_THROW(adam_step(s.params(), grad(NAN), st), NumericError);
    EXPECT_EQ(st.step, 0u);
    EXPECT_THROW(adam_step(s.params(), {Td(1, 1, 1, 2)}, st), DimensionError);
    EXPECT_THROW(AdamState<double>::for_params(s.params(), 1e-3, 1.0, 0.9), DomainError);
}

TEST(Prediction, Extrapolates) {
    Scalar s;
    PredictionState<double> h;
    s.t[0] = 1.0;
    EXPECT_EQ(predict_params(s.params(), h)[0][0], 1.0);
    h.record(s.params());
    s.t[0] = 3.0;
    EXPECT_EQ(predict_params(s.params(), h)[0][0], 5.0);
    PredictionState<double> wrong;
    wrong.previous = {Td(1, 1, 1, 2)};
    EXPECT_THROW(predict_params(s.params(), wrong), DimensionError);
}

TEST(Prediction, ScopedRestoreIsBitwise) {
    auto a = advstyle::testing::random_tensor<double>({2, 3, 4, 4}, 1);
    auto b = advstyle::testing::random_tensor<double>({3, 1, 1, 1}, 2);
    std::vector<NamedTensor<double>> ps{{"a", &a, 4}, {"b", &b, 1}};
    PredictionState<double> h;
    h.record(ps);
    a *= 1.37;
    b[0] += 0.1;
    const Td a0 = a, b0 = b;
    {
        ScopedPrediction<double> g(ps, h);
        EXPECT_FALSE(a == a0);
        EXPECT_DOUBLE_EQ(b[0], b0[0] + 0.1);
    }
    EXPECT_EQ(std::memcmp(a.data(), a0.data(), a.size() * sizeof(double)), 0);
    EXPECT_EQ(std::memcmp(b.data(), b0.data(), b.size() * sizeof(double)), 0);
    {
        ScopedPrediction<double> g(ps, h, false);
        EXPECT_EQ(a, a0);
    }
}

TEST(LrSchedule, Values) {
    const LrSchedule cfg;
    EXPECT_EQ(lr_schedule(0, cfg), 2e-4);
    EXPECT_EQ(lr_schedule(60, cfg), 2e-4);
    EXPECT_NEAR(lr_schedule(105, cfg), 1e-4, 1e-18);
    EXPECT_EQ(lr_schedule(150, cfg), 0.0);
    EXPECT_THROW(lr_schedule(151, cfg), DomainError);
    double prev = lr_schedule(0, cfg);
    for (std::size_t e = 1; e <= 150; ++e) {
        const double cur = lr_schedule(e, cfg);
        EXPECT_LE(cur, prev);
        EXPECT_LE(prev - cur, 2e-4 / 90 + 1e-18);
        prev = cur;
    }
}

TEST(Prediction, BilinearGameConvergesCloser) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const double with = bilinear_saddle_distance(2000, 0.01, true, seed);
        const double without = bilinear_saddle_distance(2000, 0.01, false, seed);
        EXPECT_LT(with, without) << "seed " << seed;
    }
}
