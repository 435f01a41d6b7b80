#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "advstyle/losses.hpp"
#include "test_util.hpp"

using namespace advstyle;
using advstyle::testing::random_tensor;
using Td = Tensor4<double>;

TEST(GeneratorLoss, WeightedSum) {
    EXPECT_EQ(generator_loss({1, 1, 1, 1}, LossWeights{}), 203.0);
    EXPECT_EQ(generator_loss({0, 0, 0, 0}, LossWeights{}), 0.0);
    EXPECT_EQ(generator_loss({5, 7, 11, 0.5}, LossWeights{0, 0, 3}), 5.0 + 1.5);
    // Linear in each part with the others fixed.
    const LossWeights w{0.5, 2, 200};
    const double base = generator_loss({1, 2, 3, 4}, w);
    EXPECT_DOUBLE_EQ(generator_loss({1, 2, 3 + 1.5, 4}, w) - base, 1.5 * w.lambda_c);
    EXPECT_DOUBLE_EQ(generator_loss({1, 2 - 1, 3, 4}, w) - base, -w.lambda_ds);
}

TEST(GeneratorLoss, NonFinitePartNamed) {
    try {
        generator_loss({1, 1, NAN, 1}, LossWeights{});
        FAIL();
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("content"), std::string::npos);
    }
    EXPECT_THROW(generator_loss({1, 1, 1, 1}, LossWeights{-1, 1, 1}), DomainError);
}

TEST(ClassLoss, UniformLogitsGiveLogK) {
    Td logits(3, 9, 1, 1, 0.0);
    const std::vector<int> labels{0, 4, 8};
    EXPECT_NEAR(class_loss(logits, labels).value, std::log(9.0), 1e-12);
    const std::vector<int> bad{0, 9, 1};
    EXPECT_THROW(class_loss(logits, bad), DomainError);
    const std::vector<int> neg{0, -1, 1};
    EXPECT_THROW(class_loss(logits, neg), DomainError);
    const std::vector<int> short_labels{0};
    EXPECT_THROW(class_loss(logits, short_labels), DimensionError);
}

TEST(ClassLoss, PositiveAndLargeMarginLimit) {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 20; ++t) {
        auto l = random_tensor<double>({2, 5, 1, 1}, rng(), -10, 10);
        const std::vector<int> y{static_cast<int>(rng() % 5), static_cast<int>(rng() % 5)};
        EXPECT_GT(class_loss(l, y).value, 0.0);
    }
    Td l(1, 3, 1, 1, 0.0);
    l[1] = 60.0;
    const std::vector<int> y{1};
    EXPECT_LT(class_loss(l, y).value, 1e-20);
}

TEST(GenAdvLoss, KnownValues) {
    const std::vector<double> zero{0.0, 0.0};
    EXPECT_NEAR(gen_adv_loss<double>(zero).value, std::log(2.0), 1e-15);
    const std::vector<double> big{50.0};
    EXPECT_LT(gen_adv_loss<double>(big).value, 1e-20);
    // Decreasing in the logit: fooling D lowers the loss.
    const std::vector<double> a{-1.0}, b{1.0};
    EXPECT_GT(gen_adv_loss<double>(a).value, gen_adv_loss<double>(b).value);
    EXPECT_LT(gen_adv_loss<double>(a).grad[0], 0.0);
}

TEST(GenAdvLoss, PairWithFakeTermPositive) {
    for (double l : {-40.0, -3.0, 0.0, 0.7, 5.0, 40.0}) {
        const std::vector<double> v{l};
        EXPECT_GT(gen_adv_loss<double>(v).value + softplus(l), 0.0);
    }
}

TEST(DiscriminatorLoss, UniformValue) {
    const std::vector<double> z(4, 0.0);
    Td cf(4, 9, 1, 1), cr(4, 9, 1, 1);
    const std::vector<int> y{0, 3, 5, 8};
    auto r = discriminator_loss<double>(z, z, cf, cr, y, 1.0);
    const double oracle = 2 * std::log(2.0) + 2 * std::log(9.0);
    EXPECT_NEAR(r.value, oracle, 1e-12);
    EXPECT_NEAR(r.value, 5.7807, 5e-5);
    auto no_fake = discriminator_loss<double>(z, z, cf, cr, y, 1.0, false);
    EXPECT_NEAR(no_fake.value, 2 * std::log(2.0) + std::log(9.0), 1e-12);
    for (double v : no_fake.fake_class_grad.values()) EXPECT_EQ(v, 0.0);
}

TEST(DiscriminatorLoss, SeparatedLimitAndErrors) {
    const std::vector<double> fake(2, -60.0), real(2, 60.0);
    Td cf(2, 3, 1, 1), cr(2, 3, 1, 1);
    const std::vector<int> y{1, 2};
    for (std::size_t n = 0; n < 2; ++n) {
        cf(n, static_cast<std::size_t>(y[n]), 0, 0) = 60;
        cr(n, static_cast<std::size_t>(y[n]), 0, 0) = 60;
    }
    EXPECT_LT(discriminator_loss<double>(fake, real, cf, cr, y, 1.0).value, 1e-20);
    const std::vector<double> one{0.0};
    EXPECT_THROW(discriminator_loss<double>(one, real, cf, cr, y, 1.0), DimensionError);
}

TEST(ContentLoss, ValueAndKink) {
    Td a(Shape4{1, 1, 1, 4}, {1, 2, 3, 4}), b(Shape4{1, 1, 1, 4}, {1, 0, 4, 4});
    auto r = content_loss(a, b);
    EXPECT_DOUBLE_EQ(r.value, 3.0 / 4);
    EXPECT_EQ(r.grad[0], 0.0);
    EXPECT_EQ(r.grad[1], -0.25);
    EXPECT_EQ(r.grad[2], 0.25);
    EXPECT_EQ(r.grad[3], 0.0);
    EXPECT_EQ(content_loss(a, a).value, 0.0);
    // l1, not l2: one-sided slopes at equality differ in sign.
    const double h = 1e-6;
    Td up = a, dn = a;
    up[0] += h;
    dn[0] -= h;
    EXPECT_NEAR((content_loss(a, up).value - 0) / h, 0.25, 1e-9);
    EXPECT_NEAR((0 - content_loss(a, dn).value) / h, -0.25, 1e-9);
    EXPECT_THROW(content_loss(a, Td(1, 1, 2, 2)), DimensionError);
}

TEST(StyleLoss, IdenticalAndSingleLevel) {
    std::array<Td, 4> f{random_tensor<double>({1, 2, 4, 4}, 1), random_tensor<double>({1, 3, 2, 2}, 2),
                        random_tensor<double>({1, 2, 2, 2}, 3), random_tensor<double>({1, 2, 1, 1}, 4)};
    EXPECT_EQ(style_loss(f, f).value, 0.0);
    // Level 2 replaced by the hand example: channels (1,2),(3,4) vs zeros.
    auto g = f;
    f[1] = Td(Shape4{1, 2, 1, 2}, {1, 2, 3, 4});
    g[1] = Td(1, 2, 1, 2);
    auto r = style_loss(f, g);
    EXPECT_DOUBLE_EQ(r.value, (1.25 + 2.75 + 2.75 + 6.25) / 4);
    EXPECT_DOUBLE_EQ(r.per_level[1], r.value);
}

TEST(StyleLoss, SpatialPermutationInvariant) {
    std::mt19937_64 rng(9);
    std::array<Td, 4> s, g;
    for (std::size_t l = 0; l < 4; ++l) {
        s[l] = random_tensor<double>({2, 3, 4, 3}, rng());
        g[l] = random_tensor<double>({2, 3, 4, 3}, rng());
    }
    const double base = style_loss(s, g).value;
    for (int t = 0; t < 5; ++t) {
        auto gp = g;
        for (auto& f : gp) {
            std::vector<std::size_t> perm(f.plane());
            std::iota(perm.begin(), perm.end(), 0);
            std::shuffle(perm.begin(), perm.end(), rng);
            Td out(f.shape());
            for (std::size_t n = 0; n < f.n(); ++n)
                for (std::size_t c = 0; c < f.c(); ++c)
                    for (std::size_t i = 0; i < perm.size(); ++i) out.plane(n, c)[i] = f.plane(n, c)[perm[i]];
            f = out;
        }
        EXPECT_NEAR(style_loss(s, gp).value, base, 1e-12);
    }
}
