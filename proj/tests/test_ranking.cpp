#include <gtest/gtest.h>

#include <cmath>

#include "advstyle/advstyle.hpp"
#include "test_util.hpp"

using namespace advstyle;
using advstyle::testing::TempDir;

namespace {

// Output whose conditional logit is `logit` for every category (zero pooled
// feature) and whose class logits are given.
DiscOutput<double> output_with(double logit, std::vector<double> class_logits, std::size_t patches = 4) {
    DiscOutput<double> o;
    o.patch_logits = Tensor4<double>(1, 1, 1, patches, logit);
    o.pooled_feature = Tensor4<double>(1, 2, 1, 1, 0.0);
    o.class_logits = Tensor4<double>(1, class_logits.size(), 1, 1);
    for (std::size_t k = 0; k < class_logits.size(); ++k) o.class_logits[k] = class_logits[k];
    return o;
}

}  // namespace

TEST(Score, ProductOfRealAndClassProbabilities) {
    const Tensor4<double> emb(2, 2, 1, 1, 0.0);
    // logistic(ln 4) = 0.8, softmax([ln 4, 0])[0] = 0.8
    const auto e = score_from_output(output_with(std::log(4.0), {std::log(4.0), 0.0}), emb, 0);
    EXPECT_NEAR(e.p_real, 0.8, 1e-15);
    EXPECT_NEAR(e.p_class, 0.8, 1e-15);
    EXPECT_NEAR(e.score, 0.64, 1e-15);

    const Tensor4<double> emb9(9, 2, 1, 1, 0.0);
    const auto u = score_from_output(output_with(0.0, std::vector<double>(9, 1.5)), emb9, 4);
    EXPECT_NEAR(u.score, 0.5 / 9, 1e-15);
    EXPECT_THROW(score_from_output(output_with(0.0, {0, 0}), emb, 2), DomainError);
}

TEST(Score, ProjectionTermEntersLogit) {
    auto o = output_with(0.0, {0.0, 0.0});
    o.pooled_feature[0] = 1.0;
    Tensor4<double> emb(2, 2, 1, 1, 0.0);
    emb(1, 0, 0, 0) = std::log(4.0);
    EXPECT_NEAR(score_from_output(o, emb, 1).p_real, 0.8, 1e-15);
    EXPECT_NEAR(score_from_output(o, emb, 0).p_real, 0.5, 1e-15);
}

TEST(Score, MonotoneInLogit) {
    const Tensor4<double> emb(3, 2, 1, 1, 0.0);
    double prev = -1;
    for (double l = -8; l <= 8; l += 0.5) {
        const double s = score_from_output(output_with(l, {0.3, -0.2, 1.0}), emb, 1).score;
        EXPECT_GT(s, prev);
        prev = s;
    }
}

TEST(Ranking, SortsByScoreThenPath) {
    std::vector<RankEntry> v{{"b", 0.5}, {"c", 0.9}, {"a", 0.5}, {"d", 0.1}};
    sort_ranking(v);
    EXPECT_EQ(v[0].path, "c");
    EXPECT_EQ(v[1].path, "a");
    EXPECT_EQ(v[2].path, "b");
    EXPECT_EQ(v[3].path, "d");
}

TEST(Ranking, OrderInvariantUnderLog) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(1e-6, 1.0);
    std::vector<RankEntry> a, b;
    for (int i = 0; i < 50; ++i) {
        const double s = u(rng);
        a.push_back({"p" + std::to_string(i), s});
        b.push_back({"p" + std::to_string(i), std::log(s)});
    }
    sort_ranking(a);
    sort_ranking(b);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].path, b[i].path);
}

TEST(Ranking, DirectoryScanSkipsBadFilesAndBreaksTies) {
    TempDir dir("rank");
    auto bundle = ModelBundle<double>::make(NetConfig::for_profile(Profile::desk, 4), 3);
    const auto img = advstyle::testing::random_tensor<double>({1, 3, 16, 16}, 9);
    save_image(dir / "b.ppm", img);
    save_image(dir / "a.ppm", img);  // duplicate: equal score, ordered by path
    save_image(dir / "c.ppm", advstyle::testing::random_tensor<double>({1, 3, 16, 16}, 10));
    write_file_atomic(dir / "broken.ppm", std::string("P6\n4 4\n255\nxx"));
    write_file_atomic(dir / "notes.txt", std::string("ignored"));
    save_image(dir / "tiny.ppm", advstyle::testing::random_tensor<double>({1, 3, 4, 4}, 11));

    const auto r = rank_directory(dir.path(), 2, bundle);
    EXPECT_EQ(r.skipped, 2u);
    ASSERT_EQ(r.entries.size(), 3u);
    std::size_t ia = 0, ib = 0;
    for (std::size_t i = 0; i < r.entries.size(); ++i) {
        if (r.entries[i].path == (dir / "a.ppm").string()) ia = i;
        if (r.entries[i].path == (dir / "b.ppm").string()) ib = i;
    }
    EXPECT_EQ(ib, ia + 1);
    EXPECT_EQ(r.entries[ia].score, r.entries[ib].score);
    for (std::size_t i = 1; i < r.entries.size(); ++i) EXPECT_GE(r.entries[i - 1].score, r.entries[i].score);
    EXPECT_EQ(rank_directory(dir.path(), 2, bundle, 1).entries.size(), 1u);

    const std::string text = format_ranking(r.entries);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
    EXPECT_EQ(text.rfind("1\t", 0), 0u);

    EXPECT_THROW(rank_directory(dir.path(), 4, bundle), DomainError);
    EXPECT_THROW(rank_directory(dir / "missing", 0, bundle), IoError);
}

TEST(Ranking, EmptyDirectoryIsAnError) {
    TempDir dir("rank_empty");
    auto bundle = ModelBundle<double>::make(NetConfig::for_profile(Profile::desk, 4), 3);
    EXPECT_THROW(rank_directory(dir.path(), 0, bundle), DomainError);
}

TEST(Auc, KnownValues) {
    EXPECT_EQ(auc({3, 4}, {1, 2}), 1.0);
    EXPECT_EQ(auc({1, 2}, {3, 4}), 0.0);
    EXPECT_EQ(auc({1}, {1}), 0.5);
    EXPECT_EQ(auc({1, 3}, {2}), 0.5);
    EXPECT_THROW(auc({}, {1}), DomainError);
}
