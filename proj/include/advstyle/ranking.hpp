#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "advstyle/losses.hpp"
#include "advstyle/networks.hpp"
#include "advstyle/ppm.hpp"

namespace advstyle {

struct RankEntry {
    std::string path;
    double score = 0;
    double p_real = 0;
    double p_class = 0;
    int category = 0;
};

// score = P(real | D(x)) * P(category | D(x)), with the real/fake logit from
// conditional_logit and the class probability from a softmax over class logits.
template <class T>
RankEntry score_from_output(const DiscOutput<T>& out, const Tensor4<T>& embedding, int category, std::size_t n = 0) {
    const std::size_t K = out.class_logits.c();
    if (category < 0 || static_cast<std::size_t>(category) >= K)
        throw DomainError("score: category " + std::to_string(category) + " outside [0," + std::to_string(K) + ")");
    DiscOutput<T> one;
    one.patch_logits = Tensor4<T>(1, out.patch_logits.c(), out.patch_logits.h(), out.patch_logits.w());
    std::copy_n(out.patch_logits.sample(n), one.patch_logits.size(), one.patch_logits.data());
    one.pooled_feature = Tensor4<T>(1, out.pooled_feature.c(), 1, 1);
    std::copy_n(out.pooled_feature.sample(n), one.pooled_feature.size(), one.pooled_feature.data());
    const int cats[1] = {category};
    const double logit = static_cast<double>(conditional_logit<T>(one, cats, embedding)[0]);
    double mx = -INFINITY;
    for (std::size_t k = 0; k < K; ++k) mx = std::max(mx, static_cast<double>(out.class_logits(n, k, 0, 0)));
    double z = 0;
    for (std::size_t k = 0; k < K; ++k) z += std::exp(static_cast<double>(out.class_logits(n, k, 0, 0)) - mx);
    RankEntry e;
    e.category = category;
    e.p_real = logistic(logit);
    e.p_class = std::exp(static_cast<double>(out.class_logits(n, static_cast<std::size_t>(category), 0, 0)) - mx) / z;
    e.score = e.p_real * e.p_class;
    return e;
}

template <class T>
RankEntry score_image(ModelBundle<T>& b, const Tensor4<T>& image, int category) {
    if (category < 0 || static_cast<std::size_t>(category) >= b.cfg.categories)
        throw DomainError("score_image: category " + std::to_string(category) + " outside [0," +
                          std::to_string(b.cfg.categories) + ")");
    return score_from_output(b.disc.forward(image, NormPolicy::eval(), nullptr), b.disc.embedding, category);
}

// Score descending, then path ascending.
inline void sort_ranking(std::vector<RankEntry>& entries) {
    std::sort(entries.begin(), entries.end(), [](const RankEntry& a, const RankEntry& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.path < b.path;
    });
}

struct Ranking {
    std::vector<RankEntry> entries;
    std::size_t skipped = 0;  // unreadable or unusable files
};

// Scores every *.ppm file directly inside `dir`. top_k = 0 keeps all.
template <class T>
Ranking rank_directory(const std::filesystem::path& dir, int category, ModelBundle<T>& b, std::size_t top_k = 0) {
    if (!std::filesystem::is_directory(dir)) throw IoError("rank: not a directory: " + dir.string());
    if (category < 0 || static_cast<std::size_t>(category) >= b.cfg.categories)
        throw DomainError("rank: category " + std::to_string(category) + " outside [0," +
                          std::to_string(b.cfg.categories) + ")");
    std::vector<std::filesystem::path> files;
    for (const auto& de : std::filesystem::directory_iterator(dir))
        if (de.is_regular_file() && de.path().extension() == ".ppm") files.push_back(de.path());
    std::sort(files.begin(), files.end());
    Ranking r;
    for (const auto& f : files) {
        try {
            auto e = score_image(b, load_image<T>(f), category);
            e.path = f.string();
            r.entries.push_back(std::move(e));
        } catch (const ParseError&) {
            ++r.skipped;
        } catch (const IoError&) {
            ++r.skipped;
        } catch (const DimensionError&) {
            ++r.skipped;
        }
    }
    if (r.entries.empty())
        throw DomainError("rank: no readable PPM images in " + dir.string() + " (" + std::to_string(r.skipped) +
                          " skipped)");
    sort_ranking(r.entries);
    if (top_k > 0 && r.entries.size() > top_k) r.entries.resize(top_k);
    return r;
}

// `rank<TAB>score<TAB>p_real<TAB>p_class<TAB>path`, one line per entry.
inline std::string format_ranking(const std::vector<RankEntry>& entries) {
    std::string out;
    char buf[128];
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        std::snprintf(buf, sizeof buf, "%zu\t%.9g\t%.9g\t%.9g\t", i + 1, e.score, e.p_real, e.p_class);
        out += buf + e.path + "\n";
    }
    return out;
}

// Probability that a random positive scores above a random negative (ties count half).
inline double auc(const std::vector<double>& positive, const std::vector<double>& negative) {
    if (positive.empty() || negative.empty()) throw DomainError("auc: need both positive and negative scores");
    double s = 0;
    for (double p : positive)
        for (double n : negative) s += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
    return s / (static_cast<double>(positive.size()) * static_cast<double>(negative.size()));
}

}  // namespace advstyle
