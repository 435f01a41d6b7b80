// Acceptance run: one PASS/FAIL line per criterion, exit status 0 iff all pass.

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <numeric>

#include "advstyle/advstyle.hpp"
#include "test_util.hpp"

using namespace advstyle;
using advstyle::testing::random_tensor;
using advstyle::testing::TempDir;
using Td = Tensor4<double>;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + std::string("failed: ") + what;
        }
    }
    void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string fmt(const char* f, double v) {
    char b[64];
    std::snprintf(b, sizeof b, f, v);
    return b;
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::int64_t ulp_distance(float a, float b) {
    std::int32_t ia, ib;
    std::memcpy(&ia, &a, 4);
    std::memcpy(&ib, &b, 4);
    if (ia < 0) ia = std::numeric_limits<std::int32_t>::min() - ia;
    if (ib < 0) ib = std::numeric_limits<std::int32_t>::min() - ib;
    return std::abs(static_cast<std::int64_t>(ia) - ib);
}

std::int64_t ulp_distance(double a, double b) {
    std::int64_t ia, ib;
    std::memcpy(&ia, &a, 8);
    std::memcpy(&ib, &b, 8);
    if (ia < 0) ia = std::numeric_limits<std::int64_t>::min() - ia;
    if (ib < 0) ib = std::numeric_limits<std::int64_t>::min() - ib;
    return ia > ib ? ia - ib : ib - ia;
}

template <class T>
std::int64_t max_ulp(const Tensor4<T>& a, const Tensor4<T>& b) {
    if (a.shape() != b.shape()) return std::numeric_limits<std::int64_t>::max();
    std::int64_t m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, ulp_distance(a[i], b[i]));
    return m;
}

std::string slurp(const std::filesystem::path& p) {
    const Bytes b = read_file(p);
    return std::string(b.begin(), b.end());
}

// ---------------------------------------------------------------------------

Outcome gradient_suite() {
    Outcome o;
    const auto t0 = Clock::now();
    double worst = 0;
    std::size_t n = 0;
    for (const auto& e : gradcheck_suite::run({})) {
        ++n;
        worst = std::max(worst, e.report.max_error());
        o.require(e.report.passed(), e.group + "/" + e.report.name + " " + fmt("%.3e", e.report.max_error()));
    }
    const double secs = seconds_since(t0);
    o.require(secs <= 300, "runtime " + fmt("%.0f s", secs));
    o.note(std::to_string(n) + " checks, max rel err " + fmt("%.2e", worst) + ", " + fmt("%.1f s", secs));
    return o;
}

Outcome adain_statistics() {
    Outcome o;
    std::mt19937_64 rng(2024);
    double worst = 0;
    // Independent moments in long double, sigma = sqrt(var + eps) as in instance_stats.
    auto moments = [](const double* p, std::size_t m) {
        long double mu = 0, var = 0;
        for (std::size_t i = 0; i < m; ++i) mu += p[i];
        mu /= m;
        for (std::size_t i = 0; i < m; ++i) var += (p[i] - mu) * (p[i] - mu);
        return std::pair<double, double>(static_cast<double>(mu),
                                         static_cast<double>(std::sqrt(var / m + static_cast<long double>(kStatEps))));
    };
    auto random_channels = [&](Shape4 s, double lo_scale, double hi_scale) {
        Td t = random_tensor<double>(s, rng(), -1.0, 1.0);
        std::uniform_real_distribution<double> scale(lo_scale, hi_scale), shift(-5.0, 5.0);
        for (std::size_t n = 0; n < s.n; ++n)
            for (std::size_t c = 0; c < s.c; ++c) {
                const double a = scale(rng), b = shift(rng);
                double* p = t.plane(n, c);
                for (std::size_t i = 0; i < t.plane(); ++i) p[i] = a * p[i] + b;
            }
        return t;
    };
    std::uniform_int_distribution<std::size_t> dim(4, 12);
    for (int pair = 0; pair < 100; ++pair) {
        const std::size_t n = dim(rng) % 3 + 1, c = dim(rng);
        const auto x = random_channels({n, c, dim(rng), dim(rng)}, 1.0, 5.0);
        const auto y = random_channels({n, c, dim(rng), dim(rng)}, 1.0, 5.0);
        const auto a = adain(x, y);
        for (std::size_t s = 0; s < n; ++s)
            for (std::size_t k = 0; k < c; ++k) {
                const auto [ma, sa] = moments(a.plane(s, k), a.plane());
                const auto [my, sy] = moments(y.plane(s, k), y.plane());
                worst = std::max({worst, std::abs(ma - my) / std::max(std::abs(my), sy), std::abs(sa - sy) / sy});
            }
    }
    o.require(worst <= 1e-4, "max relative deviation " + fmt("%.3e", worst));
    o.note("100 pairs, max relative deviation " + fmt("%.2e", worst));
    return o;
}

Outcome mask_identity() {
    Outcome o;
    auto check = [&](auto tag) {
        using T = decltype(tag);
        auto b = ModelBundle<T>::make(NetConfig::for_profile(Profile::desk, 4), 31);
        const auto c = random_tensor<T>({2, 3, 32, 32}, 1), s = random_tensor<T>({2, 3, 32, 32}, 2);
        GeneratorTape<T> t1, t0;
        generate(b, c, s, MaskMode::force1, NormPolicy::eval(), &t1);
        generate(b, c, s, MaskMode::force0, NormPolicy::eval(), &t0);
        const auto fc = b.encoder.forward(c, nullptr), fs = b.encoder.forward(s, nullptr);
        const auto u1 = max_ulp(t1.z, fc.concat);
        const auto u0 = max_ulp(t0.z, adain(fc.concat, fs.concat));
        const std::string name = sizeof(T) == 4 ? "float" : "double";
        o.require(u1 <= 1, name + " mask=1 differs by " + std::to_string(u1) + " ulp");
        o.require(u0 <= 1, name + " mask=0 differs by " + std::to_string(u0) + " ulp");
        o.note(name + ": mask=1 " + std::to_string(u1) + " ulp, mask=0 " + std::to_string(u0) + " ulp");
    };
    check(float{});
    check(double{});
    return o;
}

Outcome gram_properties() {
    Outcome o;
    std::mt19937_64 rng(55);
    double min_eig = INFINITY, worst_scale = 0, worst_perm = 0;
    bool symmetric = true;
    for (int trial = 0; trial < 20; ++trial) {
        const auto x = random_tensor<double>({2, 6, 5, 4}, rng(), -2.0, 2.0);
        const auto g = gram(x);
        for (std::size_t n = 0; n < 2; ++n) {
            Eigen::MatrixXd m(6, 6);
            for (std::size_t i = 0; i < 6; ++i)
                for (std::size_t j = 0; j < 6; ++j) {
                    const double gij = g(n, i, j, 0), gji = g(n, j, i, 0);
                    symmetric = symmetric && std::memcmp(&gij, &gji, sizeof(double)) == 0;
                    m(static_cast<long>(i), static_cast<long>(j)) = g(n, i, j, 0);
                }
            min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues().minCoeff());
        }
        const double c = std::uniform_real_distribution<double>(-4.0, 4.0)(rng);
        Td cx = x;
        cx *= c;
        const auto gc = gram(cx);
        for (std::size_t i = 0; i < g.size(); ++i)
            if (g[i] != 0) worst_scale = std::max(worst_scale, std::abs(gc[i] - c * c * g[i]) / std::abs(c * c * g[i]));
    }
    std::array<Td, 4> s, gf;
    for (std::size_t l = 0; l < 4; ++l) {
        s[l] = random_tensor<double>({2, 4, 6, 5}, rng());
        gf[l] = random_tensor<double>({2, 4, 6, 5}, rng());
    }
    const double base = style_loss(s, gf).value;
    for (int t = 0; t < 10; ++t) {
        auto gp = gf;
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
        worst_perm = std::max(worst_perm, std::abs(style_loss(s, gp).value - base));
    }
    o.require(symmetric, "bitwise symmetry");
    o.require(min_eig >= -1e-9, "PSD, min eigenvalue " + fmt("%.3e", min_eig));
    o.require(worst_scale <= 1e-10, "quadratic scaling " + fmt("%.3e", worst_scale));
    o.require(worst_perm <= 1e-12, "permutation invariance " + fmt("%.3e", worst_perm));
    o.note("min eig " + fmt("%.2e", min_eig) + ", scaling " + fmt("%.1e", worst_scale) + ", permutation " +
           fmt("%.1e", worst_perm));
    return o;
}

Outcome loss_arithmetic() {
    Outcome o;
    const double g = generator_loss({1, 1, 1, 1}, LossWeights{});
    o.require(g == 203.0, "generator_loss = " + fmt("%.17g", g));
    const Td logits(4, 9, 1, 1, 0.37);
    const std::vector<int> labels{0, 3, 8, 5};
    const double cl = class_loss(logits, labels).value;
    o.require(std::abs(cl - std::log(9.0)) <= 1e-12, "class_loss - ln 9 = " + fmt("%.3e", cl - std::log(9.0)));
    o.note("generator_loss " + fmt("%.17g", g) + ", |class_loss - ln 9| " + fmt("%.1e", std::abs(cl - std::log(9.0))));
    return o;
}

Outcome optimizer_checks() {
    Outcome o;
    // Adam against a long-double hand recurrence.
    Td p(1, 1, 1, 1, 0.3);
    std::vector<NamedTensor<double>> ps{{"p", &p, 0}};
    const double lr = 0.05, b1 = 0.5, b2 = 0.9, eps = 1e-8, gs[5] = {1.0, -0.5, 2.0, 0.25, -1.0};
    auto st = AdamState<double>::for_params(ps, lr, b1, b2);
    long double hp = 0.3L, m = 0, v = 0, worst = 0;
    for (int k = 1; k <= 5; ++k) {
        m = b1 * m + (1 - b1) * gs[k - 1];
        v = b2 * v + (1 - b2) * gs[k - 1] * gs[k - 1];
        hp -= lr * (m / (1 - std::pow((long double)b1, k))) / (std::sqrt(v / (1 - std::pow((long double)b2, k))) + eps);
        adam_step(ps, ParamGrads<double>{Td(1, 1, 1, 1, gs[k - 1])}, st);
        worst = std::max(worst, std::abs(static_cast<long double>(p[0]) - hp));
    }
    o.require(worst <= 1e-12, "Adam trace deviation " + fmt("%.3e", static_cast<double>(worst)));

    // Prediction and restore.
    auto a = random_tensor<double>({3, 4, 5, 5}, 8);
    auto b = random_tensor<double>({7, 1, 1, 1}, 9);
    std::vector<NamedTensor<double>> qs{{"a", &a, 4}, {"b", &b, 1}};
    PredictionState<double> h;
    h.record(qs);
    a *= 0.93;
    b[2] -= 0.25;
    const Td a0 = a, b0 = b;
    bool moved = false;
    {
        ScopedPrediction<double> guard(qs, h);
        moved = !(a == a0);
    }
    const bool restored = std::memcmp(a.data(), a0.data(), a.size() * 8) == 0 &&
                          std::memcmp(b.data(), b0.data(), b.size() * 8) == 0;
    o.require(moved && restored, "prediction/restore round trip");

    const double with = bilinear_saddle_distance(2000, 0.01, true, 1);
    const double without = bilinear_saddle_distance(2000, 0.01, false, 1);
    o.require(with < without, "bilinear saddle distance " + fmt("%.4g", with) + " vs " + fmt("%.4g", without));
    o.note("Adam dev " + fmt("%.1e", static_cast<double>(worst)) + ", restore bitwise, saddle distance " +
           fmt("%.4f", with) + " with vs " + fmt("%.4f", without) + " without prediction");
    return o;
}

// ---------------------------------------------------------------------------
// Training-based criteria share one corpus and the learned-mask smoke run.

struct SmokeRun {
    std::vector<IterationMetrics> metrics;
    TrainOutcome outcome;
    double seconds = 0;
    bool finite = true;
    std::string error;
};

TrainConfig smoke_config() {
    TrainConfig c;  // desk defaults: 32x32, batch 8, 25 epochs of 8 iterations
    c.seed = 7;
    c.iterations = 200;
    return c;
}

SmokeRun smoke(const DatasetManifest& m, const TrainConfig& cfg, const std::filesystem::path& dir) {
    SmokeRun r;
    const auto t0 = Clock::now();
    try {
        r.outcome = run_training<real_t>(m, cfg, dir, {}, [&](const IterationMetrics& it) {
            for (double v : {it.l_a, it.l_ds, it.l_c, it.l_s, it.l_g, it.l_d}) r.finite = r.finite && std::isfinite(v);
            r.metrics.push_back(it);
        });
    } catch (const std::exception& e) {
        r.error = e.what();
        r.finite = false;
    }
    r.seconds = seconds_since(t0);
    return r;
}

double mean_of(const std::vector<IterationMetrics>& ms, std::size_t from, std::size_t to,
               double IterationMetrics::*field) {
    double s = 0;
    for (std::size_t i = from; i < to; ++i) s += ms[i].*field;
    return s / static_cast<double>(to - from);
}

Outcome training_smoke(const SmokeRun& r, const Dataset<real_t>& data) {
    Outcome o;
    o.require(r.error.empty(), "training threw: " + r.error);
    o.require(r.metrics.size() == 200, std::to_string(r.metrics.size()) + " iterations");
    if (!o.pass) return o;
    const double first = mean_of(r.metrics, 0, 10, &IterationMetrics::l_g);
    const double last = mean_of(r.metrics, 190, 200, &IterationMetrics::l_g);
    const double drop = 1.0 - last / first;
    auto b = load_weights<real_t>(r.outcome.weights);
    const double acc = class_accuracy(b, data);
    o.require(drop >= 0.30, "l_g drop " + fmt("%.3f", drop));
    o.require(acc >= 0.80, "real-image class accuracy " + fmt("%.3f", acc));
    o.require(r.finite, "non-finite loss");
    o.require(r.seconds <= 600, "runtime " + fmt("%.0f s", r.seconds));
    o.note("l_g " + fmt("%.3f", first) + " -> " + fmt("%.3f", last) + " (drop " + fmt("%.1f%%", 100 * drop) +
           "), class accuracy " + fmt("%.3f", acc) + " on " + std::to_string(data.style_count()) +
           " real images, " + fmt("%.1f s", r.seconds));
    return o;
}

// The designated category s is 0 (stripes); the other categories are reported
// for information only.
Outcome ranking_auc(const SmokeRun& r, const Dataset<real_t>& data) {
    Outcome o;
    if (!r.error.empty()) {
        o.require(false, "no smoke run");
        return o;
    }
    auto b = load_weights<real_t>(r.outcome.weights);
    std::mt19937_64 rng(404);
    std::vector<Tensor4<real_t>> noise;
    for (int i = 0; i < 32; ++i) {
        Tensor4<real_t> t(1, 3, data.image_size, data.image_size);
        fill_uniform(t, rng, -1.0, 1.0);
        noise.push_back(std::move(t));
    }
    const std::size_t designated = 0;
    std::string others;
    for (std::size_t s = 0; s < data.categories(); ++s) {
        std::vector<double> pos, neg;
        std::vector<RankEntry> plain, logged;
        for (std::size_t i = 0; i < data.style[s].size(); ++i) {
            const auto e = score_image(b, data.style[s][i], static_cast<int>(s));
            pos.push_back(e.score);
            plain.push_back({"real" + std::to_string(i), e.score});
        }
        for (std::size_t i = 0; i < noise.size(); ++i) {
            const auto e = score_image(b, noise[i], static_cast<int>(s));
            neg.push_back(e.score);
            plain.push_back({"noise" + std::to_string(i), e.score});
        }
        for (auto e : plain) {
            e.score = std::log(e.score);
            logged.push_back(e);
        }
        sort_ranking(plain);
        sort_ranking(logged);
        bool same = true;
        for (std::size_t i = 0; i < plain.size(); ++i) same = same && plain[i].path == logged[i].path;
        o.require(same, "log-transform changed the order for category " + std::to_string(s));
        const double a = auc(pos, neg);
        if (s == designated) {
            o.require(a >= 0.9, data.category_names[s] + " AUC " + fmt("%.3f", a));
            o.note("s=" + data.category_names[s] + ": AUC " + fmt("%.3f", a) + " over " +
                   std::to_string(pos.size()) + " real vs " + std::to_string(neg.size()) + " uniform-noise images");
        } else {
            others += (others.empty() ? "" : " ") + data.category_names[s] + "=" + fmt("%.3f", a);
        }
    }
    o.note("other categories (info) " + others + "; order invariant under log");
    return o;
}

Outcome reproducibility(const DatasetManifest& m, const TempDir& dir) {
    Outcome o;
    auto cfg = smoke_config();
    cfg.iterations = 12;
    const auto a = run_training<real_t>(m, cfg, dir / "repro_a");
    const auto b = run_training<real_t>(m, cfg, dir / "repro_b");
    o.require(slurp(a.metrics) == slurp(b.metrics), "metrics logs differ between identical runs");

    // Interrupt after 5 iterations (mid-epoch) and resume to 12.
    cfg.iterations = 5;
    const auto part = run_training<real_t>(m, cfg, dir / "resume");
    cfg.iterations = 12;
    const auto resumed = run_training<real_t>(m, cfg, dir / "resume", part.checkpoint);
    o.require(slurp(resumed.metrics) == slurp(a.metrics), "resumed log differs");
    o.require(read_file(resumed.weights) == read_file(a.weights), "resumed weights differ");

    auto bundle = load_weights<real_t>(a.weights);
    save_weights(dir / "again.styf", bundle);
    o.require(read_file(dir / "again.styf") == read_file(a.weights), "weight file round trip");
    auto reloaded = load_weights<real_t>(dir / "again.styf");
    const auto t1 = bundle.all_tensors(), t2 = reloaded.all_tensors();
    bool same = t1.size() == t2.size();
    for (std::size_t i = 0; same && i < t1.size(); ++i)
        same = std::memcmp(t1[i].tensor->data(), t2[i].tensor->data(), t1[i].tensor->size() * sizeof(real_t)) == 0;
    o.require(same, "weights differ after reload");

    std::size_t images = 0;
    bool ppm_ok = true;
    for (const auto& e : m.entries) {
        const Bytes raw = read_file(m.resolve(e));
        ppm_ok = ppm_ok && encode_ppm(decode_ppm<real_t>(raw)) == raw;
        ++images;
    }
    o.require(ppm_ok, "PPM round trip");
    o.note("12-iteration logs identical, resume at 5 matches, weight file and " + std::to_string(images) +
           " PPM files round-trip byte-identical");
    return o;
}

Outcome ablation(const SmokeRun& learned, const SmokeRun& forced) {
    Outcome o;
    if (!learned.error.empty() || !forced.error.empty() || learned.metrics.size() != forced.metrics.size()) {
        o.require(false, "paired runs incomplete");
        return o;
    }
    const std::size_t n = learned.metrics.size(), from = n - 20;
    const double lc_l = mean_of(learned.metrics, from, n, &IterationMetrics::l_c);
    const double lc_f = mean_of(forced.metrics, from, n, &IterationMetrics::l_c);
    const double ls_l = mean_of(learned.metrics, from, n, &IterationMetrics::l_s);
    const double ls_f = mean_of(forced.metrics, from, n, &IterationMetrics::l_s);
    o.require(lc_f <= lc_l, "content loss force1 " + fmt("%.4f", lc_f) + " > learned " + fmt("%.4f", lc_l));
    o.require(ls_l <= ls_f, "style loss learned " + fmt("%.5f", ls_l) + " > force1 " + fmt("%.5f", ls_f));
    o.note("mean of last 20 iterations: l_c force1 " + fmt("%.4f", lc_f) + " <= learned " + fmt("%.4f", lc_l) +
           ", l_s learned " + fmt("%.5f", ls_l) + " <= force1 " + fmt("%.5f", ls_f));
    return o;
}

}  // namespace

int main() {
    int failures = 0;
    auto report = [&](int id, const char* name, const Outcome& o) {
        std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
        std::fflush(stdout);
        failures += !o.pass;
    };
    auto guarded = [&](int id, const char* name, const std::function<Outcome()>& fn) {
        try {
            report(id, name, fn());
        } catch (const std::exception& e) {
            Outcome o;
            o.require(false, std::string("exception: ") + e.what());
            report(id, name, o);
        }
    };

    guarded(1, "gradient-suite", gradient_suite);
    guarded(2, "adain-statistics", adain_statistics);
    guarded(3, "mask-identity", mask_identity);
    guarded(4, "gram-properties", gram_properties);
    guarded(5, "loss-arithmetic", loss_arithmetic);
    guarded(6, "optimizer", optimizer_checks);

    TempDir dir("acceptance");
    const auto corpus = make_synthetic_corpus(dir / "corpus", 16, 7);
    const auto data = load_dataset<real_t>(corpus.manifest, 32);
    const SmokeRun learned = smoke(corpus.manifest, smoke_config(), dir / "learned");
    guarded(7, "training-smoke", [&] { return training_smoke(learned, data); });
    guarded(8, "ranking", [&] { return ranking_auc(learned, data); });
    guarded(9, "reproducibility", [&] { return reproducibility(corpus.manifest, dir); });
    auto forced_cfg = smoke_config();
    forced_cfg.mask_mode = MaskMode::force1;
    const SmokeRun forced = smoke(corpus.manifest, forced_cfg, dir / "force1");
    guarded(10, "mask-ablation", [&] { return ablation(learned, forced); });

    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
