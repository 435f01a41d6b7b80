#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "advstyle/gradcheck_suite.hpp"
#include "advstyle/networks.hpp"
#include "test_util.hpp"

using namespace advstyle;
using advstyle::testing::random_tensor;
using Td = Tensor4<double>;
using Tf = Tensor4<float>;

namespace {

// Output side of a k4 s2 p1 conv, written out independently of the library.
std::size_t down(std::size_t s) { return (s + 2 - 4) / 2 + 1; }

}  // namespace

TEST(Encoder, DeskShapes) {
    auto b = ModelBundle<double>::make(NetConfig::for_profile(Profile::desk, 9), 1);
    auto x = random_tensor<double>({2, 3, 32, 32}, 2);
    auto fs = b.encoder.forward(x, nullptr);
    EXPECT_EQ(fs.f[0].shape(), (Shape4{2, 8, 32, 32}));
    EXPECT_EQ(fs.f[1].shape(), (Shape4{2, 16, 16, 16}));
    EXPECT_EQ(fs.f[2].shape(), (Shape4{2, 32, 8, 8}));
    EXPECT_EQ(fs.f[3].shape(), (Shape4{2, 64, 4, 4}));
    EXPECT_EQ(fs.concat.shape(), (Shape4{2, 120, 4, 4}));
    for (const auto& f : fs.f)
        for (double v : f.values()) ASSERT_GE(v, 0.0);
}

TEST(Encoder, PaperShapes) {
    auto b = ModelBundle<float>::make(NetConfig::for_profile(Profile::paper, 9), 1);
    auto x = random_tensor<float>({1, 3, 256, 256}, 3);
    auto fs = b.encoder.forward(x, nullptr);
    EXPECT_EQ(fs.concat.shape(), (Shape4{1, 960, 32, 32}));
    EXPECT_EQ(b.cfg.encoder.concat_channels(), 960u);
}

TEST(Encoder, RejectsBadInput) {
    auto b = ModelBundle<double>::make(NetConfig::for_profile(Profile::desk, 9), 1);
    EXPECT_THROW(b.encoder.forward(Td(1, 3, 20, 24), nullptr), DimensionError);
    EXPECT_THROW(b.encoder.forward(Td(1, 1, 16, 16), nullptr), DimensionError);
}

TEST(Discriminator, Shapes) {
    auto b = ModelBundle<double>::make(NetConfig::for_profile(Profile::desk, 9), 1);
    for (std::size_t s : {16u, 32u, 48u}) {
        auto o = b.disc.forward(random_tensor<double>({3, 3, s, s}, s), NormPolicy::eval(), nullptr);
        const std::size_t p = down(down(down(down(s))));
        EXPECT_EQ(o.patch_logits.shape(), (Shape4{3, 1, p, p}));
        EXPECT_EQ(o.class_logits.shape(), (Shape4{3, 9, 1, 1}));
        EXPECT_EQ(o.pooled_feature.shape(), (Shape4{3, 64, 1, 1}));
    }
    EXPECT_EQ(down(down(down(down(32)))), 2u);
    EXPECT_THROW(b.disc.forward(Td(1, 3, 8, 8), NormPolicy::eval(), nullptr), DimensionError);
    EXPECT_EQ(b.disc.params()[b.disc.embedding_index()].name, "disc.embedding");
}

TEST(Generator, ZeroInitialMaskAndShapes) {
    auto b = ModelBundle<double>::make(NetConfig::for_profile(Profile::desk, 4), 5);
    auto c = random_tensor<double>({2, 3, 32, 32}, 6), s = random_tensor<double>({2, 3, 32, 32}, 7);
    auto r = generate(b, c, s, MaskMode::learned, NormPolicy::train());
    EXPECT_EQ(r.stylized.shape(), c.shape());
    EXPECT_EQ(r.mask.shape(), (Shape4{2, 120, 4, 4}));
    for (double v : r.mask.values()) ASSERT_EQ(v, 0.0);
    for (double v : r.stylized.values()) ASSERT_LE(std::abs(v), 1.0);
    // With m = 0 the learned path equals forcing the mask to zero.
    auto r0 = generate(b, c, s, MaskMode::force0, NormPolicy::train_frozen_stats());
    auto rl = generate(b, c, s, MaskMode::learned, NormPolicy::train_frozen_stats());
    EXPECT_EQ(r0.stylized, rl.stylized);
}

TEST(Generator, ForcedOneKeepsContentFeatures) {
    auto b = ModelBundle<double>::make(NetConfig::for_profile(Profile::desk, 4), 5);
    auto c = random_tensor<double>({2, 3, 16, 16}, 8), s = random_tensor<double>({2, 3, 16, 16}, 9);
    GeneratorTape<double> tape;
    generate(b, c, s, MaskMode::force1, NormPolicy::train_frozen_stats(), &tape);
    EXPECT_EQ(tape.z, b.encoder.forward(c, nullptr).concat);
}

TEST(Generator, ContentStyleBatchMismatch) {
    auto b = ModelBundle<double>::make(NetConfig::for_profile(Profile::desk, 4), 5);
    EXPECT_THROW(generate(b, Td(2, 3, 16, 16), Td(1, 3, 16, 16), MaskMode::learned, NormPolicy::eval()),
                 DimensionError);
    EXPECT_THROW(generate(b, Td(1, 3, 16, 16), Td(1, 3, 32, 32), MaskMode::learned, NormPolicy::eval()),
                 DimensionError);
}

TEST(Generator, EncoderIsFrozen) {
    auto b = ModelBundle<double>::make(NetConfig::for_profile(Profile::desk, 4), 5);
    std::vector<Td> before;
    for (auto& p : b.encoder_params()) before.push_back(*p.tensor);
    auto gp = b.generator_params();
    for (const auto& p : gp) EXPECT_EQ(p.name.rfind("encoder.", 0), std::string::npos);
    auto c = random_tensor<double>({2, 3, 16, 16}, 10);
    GeneratorTape<double> tape;
    auto r = generate(b, c, c, MaskMode::learned, NormPolicy::train(), &tape);
    auto g = generate_backward(b, tape, r.stylized);
    EXPECT_EQ(g.mask.size() + g.decoder.size(), gp.size());
    auto ep = b.encoder_params();
    for (std::size_t i = 0; i < ep.size(); ++i) EXPECT_EQ(*ep[i].tensor, before[i]);
}

TEST(Bundle, DeterministicAndUniqueNames) {
    auto a = ModelBundle<double>::make(NetConfig::for_profile(Profile::desk, 4), 11);
    auto b = ModelBundle<double>::make(NetConfig::for_profile(Profile::desk, 4), 11);
    auto c = ModelBundle<double>::make(NetConfig::for_profile(Profile::desk, 4), 12);
    auto ta = a.all_tensors(), tb = b.all_tensors(), tc = c.all_tensors();
    std::set<std::string> names;
    bool any_diff = false;
    for (std::size_t i = 0; i < ta.size(); ++i) {
        EXPECT_EQ(*ta[i].tensor, *tb[i].tensor) << ta[i].name;
        any_diff |= !(*ta[i].tensor == *tc[i].tensor);
        EXPECT_TRUE(names.insert(ta[i].name).second) << ta[i].name;
    }
    EXPECT_TRUE(any_diff);
    EXPECT_NE(architecture_table(a).find("mask.conv1.weight\t120x240x3x3"), std::string::npos);
}

TEST(ConditionalLogit, HandExample) {
    DiscOutput<double> o{Td(Shape4{1, 1, 2, 2}, {1, 2, 3, 6}), Td(1, 2, 1, 1), Td(Shape4{1, 2, 1, 1}, {0.5, -1})};
    Td emb(Shape4{2, 2, 1, 1}, {1, 1, 2, 4});
    const std::vector<int> c0{0}, c1{1};
    EXPECT_DOUBLE_EQ(conditional_logit<double>(o, c0, emb)[0], 3.0 - 0.5);
    EXPECT_DOUBLE_EQ(conditional_logit<double>(o, c1, emb)[0], 3.0 + 1.0 - 4.0);
    const std::vector<int> bad{2};
    EXPECT_THROW(conditional_logit<double>(o, bad, emb), DomainError);
}

TEST(GradcheckSuite, AllEntriesWithinTolerance) {
    gradcheck_suite::SuiteOptions so;
    so.tolerance = 1e-5;
    auto entries = gradcheck_suite::run(so);
    std::set<std::string> groups;
    for (const auto& e : entries) {
        groups.insert(e.group);
        EXPECT_TRUE(e.report.passed()) << e.report.name << " max rel error " << e.report.max_error();
        EXPECT_GT(e.report.checked(), 0u) << e.report.name;
    }
    EXPECT_EQ(groups, (std::set<std::string>{"tensor-core", "stat-ops", "networks", "losses"}));
}
