// advstyle command-line entry point.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

#include <cstdio>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "advstyle/advstyle.hpp"

using namespace advstyle;

namespace {

struct Globals {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> profile;
    std::string config_path;
};

// Flags that map onto TrainConfig keys; unset optionals leave the key alone.
struct TrainFlags {
    std::string manifest, out, resume;
    std::optional<std::size_t> epochs, iterations, batch, image_size, decay_start;
    std::optional<double> lr, beta1, beta2, lambda_ds, lambda_c, lambda_s;
    std::optional<std::string> prediction, mask_mode, style_batch, encoder_weights;
    std::optional<bool> flip, fake_class_term;
    bool quiet = false;
};

// Defaults of the chosen profile, then the config file, then flags.
TrainConfig resolve_config(const Globals& g, const TrainFlags* f) {
    TrainConfig::Pairs pairs;
    if (!g.config_path.empty()) {
        const Bytes b = read_file(g.config_path);
        pairs = TrainConfig::parse_pairs(std::string(b.begin(), b.end()));
    }
    std::string profile = "desk";
    for (const auto& [k, v] : pairs)
        if (k == "profile") profile = v;
    if (g.profile) profile = *g.profile;
    TrainConfig c;
    c.set("profile", profile);
    for (const auto& [k, v] : pairs)
        if (k != "profile") c.set(k, v);
    if (g.seed) c.seed = *g.seed;
    if (f) {
        auto put = [&](const char* key, const auto& opt) {
            if (!opt) return;
            if constexpr (std::is_same_v<std::decay_t<decltype(*opt)>, std::string>) c.set(key, *opt);
            else if constexpr (std::is_same_v<std::decay_t<decltype(*opt)>, bool>) c.set(key, *opt ? "true" : "false");
            else c.set(key, detail::fmt_double(static_cast<double>(*opt)));
        };
        put("epochs", f->epochs);
        put("iterations", f->iterations);
        put("batch", f->batch);
        put("image_size", f->image_size);
        put("decay_start", f->decay_start);
        put("lr", f->lr);
        put("beta1", f->beta1);
        put("beta2", f->beta2);
        put("lambda_ds", f->lambda_ds);
        put("lambda_c", f->lambda_c);
        put("lambda_s", f->lambda_s);
        put("prediction", f->prediction);
        put("mask_mode", f->mask_mode);
        put("style_batch", f->style_batch);
        put("encoder_weights", f->encoder_weights);
        put("flip", f->flip);
        put("fake_class_term", f->fake_class_term);
    }
    c.validate();
    return c;
}

int cmd_make_corpus(const Globals& g, const std::string& out, std::size_t per_category, std::size_t size) {
    const auto cfg = resolve_config(g, nullptr);
    const auto corpus = make_synthetic_corpus(out, per_category, cfg.seed, size);
    std::size_t content = 0, style = 0;
    for (const auto& e : corpus.manifest.entries) (e.role == Role::content ? content : style)++;
    std::printf("wrote %zu content and %zu style images to %s\n", content, style, out.c_str());
    std::printf("manifest: %s\n", (std::filesystem::path(out) / "manifest.tsv").string().c_str());
    std::printf("histogram classifier accuracy: %.4f\n", corpus.histogram_accuracy);
    return 0;
}

int cmd_train(const Globals& g, const TrainFlags& f) {
    const auto cfg = resolve_config(g, &f);
    const auto manifest = DatasetManifest::load(f.manifest);
    const auto outcome =
        run_training<real_t>(manifest, cfg, f.out, f.resume, [&](const IterationMetrics& m) {
            if (!f.quiet) std::printf("%s\n", m.line().c_str());
            std::fflush(stdout);
        });
    if (!outcome.config_matches_checkpoint)
        std::fprintf(stderr, "warning: checkpoint was written under a different configuration\n");
    std::printf("trained %zu iterations; weights: %s\n", outcome.iterations, outcome.weights.string().c_str());
    return 0;
}

int cmd_stylize(const std::string& content, const std::string& style, const std::string& weights,
                const std::string& out, bool emit_mask, const std::string& mask_mode) {
    auto bundle = load_weights<real_t>(weights);
    const MaskMode mode = detail::kMaskNames.parse("mask-mode", mask_mode);
    const auto r = stylize(bundle, load_image<real_t>(content), load_image<real_t>(style), mode);
    for (const auto& n : r.notes) std::fprintf(stderr, "note: %s\n", n.c_str());
    save_image(out, r.image);
    std::printf("wrote %s\n", out.c_str());
    if (emit_mask) {
        const auto mp = mask_path_for(out);
        save_image(mp, r.mask_image);
        std::printf("wrote %s\n", mp.string().c_str());
    }
    return 0;
}

int cmd_rank(const std::string& dir, int category, const std::string& weights, std::size_t top) {
    auto bundle = load_weights<real_t>(weights);
    const auto r = rank_directory(dir, category, bundle, top);
    std::fputs(format_ranking(r.entries).c_str(), stdout);
    if (r.skipped) std::fprintf(stderr, "skipped %zu unreadable file(s)\n", r.skipped);
    return 0;
}

int cmd_gradcheck(const Globals& g, double tolerance, std::size_t samples) {
    gradcheck_suite::SuiteOptions so;
    so.profile = detail::kProfileNames.parse("profile", g.profile.value_or("desk"));
    so.tolerance = tolerance;
    so.network_samples = samples;
    if (g.seed) so.seed = *g.seed;
    std::printf("%-12s %-28s %12s %9s %8s %8s\n", "group", "check", "max_rel_err", "checked", "refined", "status");
    bool ok = true;
    gradcheck_suite::run(so, [&](const gradcheck_suite::Entry& e) {
        std::size_t refined = 0;
        for (const auto& t : e.report.tensors) refined += t.refined;
        ok = ok && e.report.passed();
        std::printf("%-12s %-28s %12.3e %9zu %8zu %8s\n", e.group.c_str(), e.report.name.c_str(),
                    e.report.max_error(), e.report.checked(), refined, e.report.passed() ? "ok" : "FAIL");
        std::fflush(stdout);
    });
    std::printf("%s (tolerance %.1e)\n", ok ? "all checks passed" : "some checks FAILED", tolerance);
    return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "advstyle: adversarial arbitrary style transfer\n\n"
        "Configuration precedence: command-line flags > --config file > --profile defaults."};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", "advstyle 1.0");

    Globals g;
    app.add_option("--seed", g.seed, "Random seed (default 7)");
    app.add_option("--profile", g.profile, "Default set: desk or paper")->check(CLI::IsMember({"desk", "paper"}));
    app.add_option("--config", g.config_path, "key=value config file")->check(CLI::ExistingFile);

    std::string corpus_out;
    std::size_t per_category = 16, corpus_size = 32;
    auto* mk = app.add_subcommand("make-corpus", "Write the synthetic 4-category corpus and its manifest");
    mk->add_option("--out", corpus_out, "Output directory")->required();
    mk->add_option("--per-category", per_category, "Style images per category (>= 4)")->capture_default_str();
    mk->add_option("--size", corpus_size, "Image side in pixels")->capture_default_str();

    TrainFlags tf;
    auto* tr = app.add_subcommand("train", "Train generator and discriminator");
    tr->add_option("--manifest", tf.manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
    tr->add_option("--out", tf.out, "Run directory")->required();
    tr->add_option("--resume", tf.resume, "Checkpoint to resume from")->check(CLI::ExistingFile);
    tr->add_option("--epochs", tf.epochs, "Number of epochs");
    tr->add_option("--iterations", tf.iterations, "Stop after this many iterations (0 = all epochs)");
    tr->add_option("--batch", tf.batch, "Batch size");
    tr->add_option("--image-size", tf.image_size, "Training image side");
    tr->add_option("--decay-start", tf.decay_start, "Epoch where linear lr decay begins");
    tr->add_option("--lr", tf.lr, "Adam learning rate");
    tr->add_option("--beta1", tf.beta1, "Adam beta1");
    tr->add_option("--beta2", tf.beta2, "Adam beta2");
    tr->add_option("--lambda-ds", tf.lambda_ds, "Style classification weight");
    tr->add_option("--lambda-c", tf.lambda_c, "Content loss weight");
    tr->add_option("--lambda-s", tf.lambda_s, "Style loss weight");
    tr->add_option("--prediction", tf.prediction, "both, predict-d, predict-g or off")
        ->check(CLI::IsMember({"both", "predict-d", "predict-g", "off"}));
    tr->add_option("--mask-mode", tf.mask_mode, "learned, force0 or force1")
        ->check(CLI::IsMember({"learned", "force0", "force1"}));
    tr->add_option("--style-batch", tf.style_batch, "single (one category per batch) or mixed")
        ->check(CLI::IsMember({"single", "mixed"}));
    tr->add_option("--encoder-weights", tf.encoder_weights, "Tensor file with pretrained encoder weights");
    tr->add_flag("--flip,!--no-flip", tf.flip, "Random horizontal flips");
    tr->add_flag("--fake-class-term,!--no-fake-class-term", tf.fake_class_term,
                 "Include the class term on fakes in the discriminator loss");
    tr->add_flag("--quiet", tf.quiet, "Do not echo metrics lines");

    std::string content, style, weights, out, mask_mode = "learned";
    bool emit_mask = false;
    auto* st = app.add_subcommand("stylize", "Stylize one content image with one style image");
    st->add_option("--content", content, "Content PPM")->required()->check(CLI::ExistingFile);
    st->add_option("--style", style, "Style PPM")->required()->check(CLI::ExistingFile);
    st->add_option("--weights", weights, "Weight file")->required()->check(CLI::ExistingFile);
    st->add_option("--out", out, "Output PPM")->required();
    st->add_flag("--emit-mask", emit_mask, "Also write <out>.mask.ppm");
    st->add_option("--mask-mode", mask_mode, "learned, force0 or force1")
        ->check(CLI::IsMember({"learned", "force0", "force1"}))
        ->capture_default_str();

    std::string rank_dir, rank_weights;
    int category = 0;
    std::size_t top = 0;
    auto* rk = app.add_subcommand("rank", "Rank the PPM images of a directory for one style category");
    rk->add_option("--dir", rank_dir, "Directory of PPM images")->required()->check(CLI::ExistingDirectory);
    rk->add_option("--category", category, "Category index")->required()->check(CLI::NonNegativeNumber);
    rk->add_option("--weights", rank_weights, "Weight file")->required()->check(CLI::ExistingFile);
    rk->add_option("--top", top, "Keep the best N (0 = all)")->capture_default_str();

    double tolerance = 1e-5;
    std::size_t samples = 12;
    auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient check of every layer and loss");
    gc->add_option("--tolerance", tolerance, "Max relative error")->capture_default_str();
    gc->add_option("--samples", samples, "Coordinates per tensor for network checks")->capture_default_str();

    for (auto* sub : {mk, tr, st, rk, gc})
        sub->footer("Global options (before or after the subcommand): --seed UINT, --profile desk|paper, "
                    "--config FILE\nPrecedence: flags > --config file > --profile defaults.");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (mk->parsed()) return cmd_make_corpus(g, corpus_out, per_category, corpus_size);
        if (tr->parsed()) return cmd_train(g, tf);
        if (st->parsed()) return cmd_stylize(content, style, weights, out, emit_mask, mask_mode);
        if (rk->parsed()) return cmd_rank(rank_dir, category, rank_weights, top);
        if (gc->parsed()) return cmd_gradcheck(g, tolerance, samples);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
