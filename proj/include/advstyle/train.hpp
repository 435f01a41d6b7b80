#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "advstyle/config.hpp"
#include "advstyle/corpus.hpp"
#include "advstyle/losses.hpp"
#include "advstyle/networks.hpp"
#include "advstyle/optimizer.hpp"
#include "advstyle/ppm.hpp"
#include "advstyle/serialize.hpp"

namespace advstyle {

struct IterationMetrics {
    std::size_t iter = 0;
    double l_a = 0, l_ds = 0, l_c = 0, l_s = 0, l_g = 0, l_d = 0;
    double d_real_acc = 0, cls_acc = 0, lr = 0;

    // `iter l_a l_ds l_c l_s l_g l_d d_real_acc cls_acc lr`
    std::string line() const {
        char buf[320];
        std::snprintf(buf, sizeof buf, "%zu %.9g %.9g %.9g %.9g %.9g %.9g %.9g %.9g %.9g", iter, l_a, l_ds, l_c, l_s,
                      l_g, l_d, d_real_acc, cls_acc, lr);
        return buf;
    }
};

template <class T>
struct TrainBatch {
    Tensor4<T> content;
    Tensor4<T> style;
    std::vector<int> labels;
};

// Stream for one iteration, derived from the run seed and the iteration index
// so that resuming needs no generator state.
inline std::mt19937_64 iteration_rng(std::uint64_t seed, std::uint64_t iteration) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(iteration), static_cast<std::uint32_t>(iteration >> 32)};
    return std::mt19937_64(seq);
}

template <class T>
void copy_sample(const Tensor4<T>& src, Tensor4<T>& dst, std::size_t n, bool flip) {
    const std::size_t C = src.c(), H = src.h(), W = src.w();
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t y = 0; y < H; ++y)
            for (std::size_t x = 0; x < W; ++x) dst(n, c, y, x) = src(0, c, y, flip ? W - 1 - x : x);
}

template <class T>
class Trainer {
public:
    Trainer(Dataset<T> data, TrainConfig cfg) : data_(std::move(data)), cfg_(std::move(cfg)) {
        cfg_.validate();
        if (data_.content.empty()) throw DomainError("train: no content images");
        for (std::size_t c = 0; c < data_.style.size(); ++c)
            if (!data_.style[c].empty()) categories_with_images_.push_back(c);
        if (categories_with_images_.empty()) throw DomainError("train: no style images");
        if (data_.image_size != cfg_.image_size)
            throw DimensionError("train: dataset loaded at " + std::to_string(data_.image_size) + ", config expects " +
                                 std::to_string(cfg_.image_size));
        bundle_ = ModelBundle<T>::make(cfg_.net(data_.categories()), cfg_.seed);
        if (!cfg_.encoder_weights.empty()) load_subnet(cfg_.encoder_weights, bundle_.encoder_params());
        gparams_ = bundle_.generator_params();
        dparams_ = bundle_.disc_params();
        adam_g_ = AdamState<T>::for_params(gparams_, cfg_.lr, cfg_.beta1, cfg_.beta2);
        adam_d_ = AdamState<T>::for_params(dparams_, cfg_.lr, cfg_.beta1, cfg_.beta2);
        rng_seed_ = cfg_.seed;
    }
    // Parameter handles point into bundle_.
    Trainer(const Trainer&) = delete;
    Trainer& operator=(const Trainer&) = delete;

    ModelBundle<T>& bundle() { return bundle_; }
    const TrainConfig& config() const { return cfg_; }
    const Dataset<T>& data() const { return data_; }
    std::size_t iteration() const { return iteration_; }

    std::size_t iterations_per_epoch() const { return (data_.content.size() + cfg_.batch - 1) / cfg_.batch; }
    std::size_t total_iterations() const {
        return cfg_.iterations > 0 ? cfg_.iterations : cfg_.epochs * iterations_per_epoch();
    }
    std::size_t epoch() const { return iteration_ / iterations_per_epoch(); }

    double current_lr() const {
        const LrSchedule s{cfg_.lr, cfg_.decay_start, cfg_.epochs};
        return lr_schedule(std::min(epoch(), cfg_.epochs), s);
    }

    TrainBatch<T> sample_batch(std::mt19937_64& rng) const {
        const std::size_t B = cfg_.batch, S = cfg_.image_size;
        TrainBatch<T> b{Tensor4<T>(B, 3, S, S), Tensor4<T>(B, 3, S, S), std::vector<int>(B)};
        std::bernoulli_distribution flip(0.5);
        std::uniform_int_distribution<std::size_t> pick_content(0, data_.content.size() - 1);
        std::uniform_int_distribution<std::size_t> pick_cat(0, categories_with_images_.size() - 1);
        const std::size_t round_robin = categories_with_images_[iteration_ % categories_with_images_.size()];
        for (std::size_t i = 0; i < B; ++i) copy_sample(data_.content[pick_content(rng)], b.content, i, cfg_.flip && flip(rng));
        for (std::size_t i = 0; i < B; ++i) {
            const std::size_t cat =
                cfg_.style_batch == StyleBatch::single ? round_robin : categories_with_images_[pick_cat(rng)];
            const auto& pool = data_.style[cat];
            std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
            copy_sample(pool[pick(rng)], b.style, i, cfg_.flip && flip(rng));
            b.labels[i] = static_cast<int>(cat);
        }
        return b;
    }

    // One generator update followed by one discriminator update.
    IterationMetrics step() {
        auto rng = iteration_rng(rng_seed_, iteration_);
        const TrainBatch<T> batch = sample_batch(rng);
        const auto& labels = batch.labels;
        const LossWeights& w = cfg_.weights;
        IterationMetrics m;
        m.iter = iteration_;
        m.lr = current_lr();
        adam_g_.lr = adam_d_.lr = m.lr;

        auto& enc = bundle_.encoder;
        auto& disc = bundle_.disc;
        const FeatureSet<T> fc = enc.forward(batch.content, nullptr);
        const FeatureSet<T> fs = enc.forward(batch.style, nullptr);

        // Generator step against the (predicted) discriminator.
        ParamGrads<T> g_grads;
        {
            ScopedPrediction<T> predicted_d(dparams_, pred_d_, cfg_.predict_d());
            GeneratorTape<T> gt;
            const auto gen = generate_from_features(bundle_, fc, fs, cfg_.mask_mode, NormPolicy::train(), &gt);
            typename Encoder<T>::Tape et;
            const FeatureSet<T> fh = enc.forward(gen.stylized, &et);
            const auto lc = content_loss(fc.f[3], fh.f[3]);
            const auto ls = style_loss(fs.f, fh.f);
            typename Discriminator<T>::Tape dt;
            const auto dout = disc.forward(gen.stylized, NormPolicy::train_frozen_stats(), &dt);
            const auto logits = conditional_logit<T>(dout, labels, disc.embedding);
            const auto la = gen_adv_loss<T>(logits);
            const auto lds = class_loss(dout.class_logits, labels);
            m.l_a = la.value;
            m.l_ds = lds.value;
            m.l_c = lc.value;
            m.l_s = ls.value;
            m.l_g = generator_loss({la.value, lds.value, lc.value, ls.value}, w);

            const auto cg = conditional_logit_backward<T>(dout, labels, disc.embedding, la.grad);
            Tensor4<T> class_grad = lds.grad;
            class_grad *= static_cast<T>(w.lambda_ds);
            Tensor4<T> image_grad = disc.backward(dt, &cg.patch_grad, &class_grad, &cg.pooled_grad, nullptr);
            std::array<Tensor4<T>, 4> taps;
            for (std::size_t l = 0; l < 4; ++l) {
                taps[l] = ls.grads[l];
                taps[l] *= static_cast<T>(w.lambda_s);
            }
            Tensor4<T> content_grad = lc.grad;
            content_grad *= static_cast<T>(w.lambda_c);
            taps[3] += content_grad;
            image_grad += enc.backward(et, {&taps[0], &taps[1], &taps[2], &taps[3]}, nullptr);
            auto gg = generate_backward(bundle_, gt, image_grad);
            g_grads = std::move(gg.mask);
            for (auto& t : gg.decoder) g_grads.push_back(std::move(t));
        }
        pred_g_.record(gparams_);
        adam_step(gparams_, g_grads, adam_g_);

        // Discriminator step on fakes from the (predicted) generator.
        Tensor4<T> fake;
        {
            ScopedPrediction<T> predicted_g(gparams_, pred_g_, cfg_.predict_g());
            fake = generate_from_features(bundle_, fc, fs, cfg_.mask_mode, NormPolicy::train_frozen_stats(),
                                          static_cast<GeneratorTape<T>*>(nullptr))
                       .stylized;
        }
        typename Discriminator<T>::Tape tf, tr;
        const auto of = disc.forward(fake, NormPolicy::train(), &tf);
        const auto orl = disc.forward(batch.style, NormPolicy::train(), &tr);
        const auto lf = conditional_logit<T>(of, labels, disc.embedding);
        const auto lr = conditional_logit<T>(orl, labels, disc.embedding);
        const auto dl = discriminator_loss<T>(lf, lr, of.class_logits, orl.class_logits, labels, w.lambda_ds,
                                              cfg_.fake_class_term);
        if (!std::isfinite(dl.value)) throw NumericError("discriminator loss is not finite");
        m.l_d = dl.value;
        ParamGrads<T> d_grads = zero_grads(dparams_);
        const auto cgf = conditional_logit_backward<T>(of, labels, disc.embedding, dl.fake_logit_grad);
        const auto cgr = conditional_logit_backward<T>(orl, labels, disc.embedding, dl.real_logit_grad);
        disc.backward(tf, &cgf.patch_grad, &dl.fake_class_grad, &cgf.pooled_grad, &d_grads);
        disc.backward(tr, &cgr.patch_grad, &dl.real_class_grad, &cgr.pooled_grad, &d_grads);
        d_grads[disc.embedding_index()] += cgf.embedding_grad;
        d_grads[disc.embedding_index()] += cgr.embedding_grad;
        pred_d_.record(dparams_);
        adam_step(dparams_, d_grads, adam_d_);

        std::size_t real_ok = 0, cls_ok = 0;
        for (std::size_t n = 0; n < labels.size(); ++n) {
            real_ok += lr[n] > T(0);
            cls_ok += argmax_class(orl.class_logits, n) == static_cast<std::size_t>(labels[n]);
        }
        m.d_real_acc = static_cast<double>(real_ok) / static_cast<double>(labels.size());
        m.cls_acc = static_cast<double>(cls_ok) / static_cast<double>(labels.size());
        ++iteration_;
        return m;
    }

    static std::size_t argmax_class(const Tensor4<T>& class_logits, std::size_t n) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < class_logits.c(); ++k)
            if (class_logits(n, k, 0, 0) > class_logits(n, best, 0, 0)) best = k;
        return best;
    }

    // Full training state: weights, optimizer moments, prediction snapshots,
    // iteration counter, seed and config hash.
    TensorFile checkpoint() {
        TensorFile f;
        add_bundle(f, bundle_);
        f.add_u64("train.iteration", iteration_);
        f.add_u64("train.seed", rng_seed_);
        f.add_u64("train.config_hash", cfg_.hash());
        add_optimizer(f, "g", gparams_, adam_g_, pred_g_);
        add_optimizer(f, "d", dparams_, adam_d_, pred_d_);
        return f;
    }

    // Returns false when the checkpoint was written under a different config.
    bool restore(const TensorFile& f) {
        const NetConfig stored = read_net_config(f);
        const NetConfig& cur = bundle_.cfg;
        if (stored.encoder.block_widths != cur.encoder.block_widths || stored.disc_widths != cur.disc_widths ||
            stored.categories != cur.categories || stored.encoder.convs_per_block != cur.encoder.convs_per_block)
            throw ShapeMismatchError("checkpoint architecture does not match the configured profile/categories");
        f.read_into(bundle_.all_tensors());
        iteration_ = static_cast<std::size_t>(f.u64("train.iteration"));
        rng_seed_ = f.u64("train.seed");
        read_optimizer(f, "g", gparams_, adam_g_, pred_g_);
        read_optimizer(f, "d", dparams_, adam_d_, pred_d_);
        return f.u64("train.config_hash") == cfg_.hash();
    }

private:
    static void add_optimizer(TensorFile& f, const std::string& who, const std::vector<NamedTensor<T>>& params,
                              const AdamState<T>& adam, const PredictionState<T>& pred) {
        const std::string p = "optim." + who + ".";
        f.add_u64(p + "step", adam.step);
        for (std::size_t i = 0; i < params.size(); ++i) {
            f.add(p + "m." + params[i].name, adam.m[i], params[i].rank);
            f.add(p + "v." + params[i].name, adam.v[i], params[i].rank);
        }
        f.add_scalar(p + "has_previous", pred.empty() ? 0.0 : 1.0);
        if (!pred.empty())
            for (std::size_t i = 0; i < params.size(); ++i)
                f.add(p + "previous." + params[i].name, pred.previous[i], params[i].rank);
    }

    static void read_optimizer(const TensorFile& f, const std::string& who, const std::vector<NamedTensor<T>>& params,
                               AdamState<T>& adam, PredictionState<T>& pred) {
        const std::string p = "optim." + who + ".";
        adam.step = static_cast<std::size_t>(f.u64(p + "step"));
        for (std::size_t i = 0; i < params.size(); ++i) {
            f.read_into(p + "m." + params[i].name, adam.m[i]);
            f.read_into(p + "v." + params[i].name, adam.v[i]);
        }
        pred.previous.clear();
        if (f.scalar(p + "has_previous") != 0.0) {
            for (const auto& prm : params) {
                Tensor4<T> t(prm.tensor->shape());
                f.read_into(p + "previous." + prm.name, t);
                pred.previous.push_back(std::move(t));
            }
        }
    }

    Dataset<T> data_;
    TrainConfig cfg_;
    ModelBundle<T> bundle_;
    std::vector<NamedTensor<T>> gparams_, dparams_;
    AdamState<T> adam_g_, adam_d_;
    PredictionState<T> pred_g_, pred_d_;
    std::vector<std::size_t> categories_with_images_;
    std::size_t iteration_ = 0;
    std::uint64_t rng_seed_ = 0;
};

// ---------------------------------------------------------------------------
// Run directory driver: config.txt, metrics.log, checkpoint.styf (every epoch), weights.styf.

struct TrainOutcome {
    std::size_t iterations = 0;
    std::filesystem::path metrics, checkpoint, weights;
    bool config_matches_checkpoint = true;
};

namespace detail {

// Keep the first `lines` complete lines of a text file.
inline void truncate_lines(const std::filesystem::path& path, std::size_t lines) {
    std::string kept;
    if (std::filesystem::exists(path)) {
        std::ifstream in(path);
        std::string line;
        for (std::size_t i = 0; i < lines && std::getline(in, line); ++i) {
            if (in.eof()) break;  // no trailing newline: a partial line
            kept += line + "\n";
        }
    }
    write_file_atomic(path, kept);
}

}  // namespace detail

template <class T>
TrainOutcome run_training(
    const DatasetManifest& manifest, const TrainConfig& cfg, const std::filesystem::path& out_dir,
    const std::filesystem::path& resume_from = {},
    const std::function<void(const IterationMetrics&)>& on_iteration = {}) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create run directory " + out_dir.string() + ": " + ec.message());
    TrainOutcome out;
    out.metrics = out_dir / "metrics.log";
    out.checkpoint = out_dir / "checkpoint.styf";
    out.weights = out_dir / "weights.styf";
    write_file_atomic(out_dir / "config.txt", cfg.to_text());

    Trainer<T> trainer(load_dataset<T>(manifest, cfg.image_size), cfg);
    if (!resume_from.empty()) {
        out.config_matches_checkpoint = trainer.restore(TensorFile::load(resume_from));
        detail::truncate_lines(out.metrics, trainer.iteration());
    } else {
        detail::truncate_lines(out.metrics, 0);
    }
    // Always leave a loadable checkpoint behind, even if the first epoch fails.
    trainer.checkpoint().save(out.checkpoint);

    std::ofstream log(out.metrics, std::ios::app);
    if (!log) throw IoError("cannot open " + out.metrics.string());
    const std::size_t per_epoch = trainer.iterations_per_epoch();
    const std::size_t total = trainer.total_iterations();
    while (trainer.iteration() < total) {
        const IterationMetrics m = trainer.step();
        log << m.line() << "\n";
        log.flush();
        if (on_iteration) on_iteration(m);
        if (trainer.iteration() % per_epoch == 0 || trainer.iteration() == total)
            trainer.checkpoint().save(out.checkpoint);
    }
    save_weights(out.weights, trainer.bundle());
    out.iterations = trainer.iteration();
    return out;
}

// ---------------------------------------------------------------------------
// Inference.

template <class T>
struct StylizeResult {
    Tensor4<T> image;
    Tensor4<T> mask_image;  // channel-mean mask, upsampled to image size, 3 grey channels
    std::vector<std::string> notes;
};

template <class T>
StylizeResult<T> stylize(ModelBundle<T>& b, Tensor4<T> content, Tensor4<T> style, MaskMode mode = MaskMode::learned) {
    StylizeResult<T> r;
    const std::size_t h = content.h() / 8 * 8, w = content.w() / 8 * 8;
    if (h == 0 || w == 0) throw DimensionError("stylize: content image smaller than 8x8");
    if (h != content.h() || w != content.w()) {
        r.notes.push_back("content cropped from " + std::to_string(content.w()) + "x" + std::to_string(content.h()) +
                          " to " + std::to_string(w) + "x" + std::to_string(h));
        content = center_crop(content, h, w);
    }
    if (style.h() != h || style.w() != w) {
        r.notes.push_back("style " + std::string(style.h() >= h && style.w() >= w ? "cropped" : "tiled") + " from " +
                          std::to_string(style.w()) + "x" + std::to_string(style.h()) + " to " + std::to_string(w) +
                          "x" + std::to_string(h));
        style = center_tile(style, h, w);
    }
    auto g = generate(b, content, style, mode, NormPolicy::eval());
    r.image = std::move(g.stylized);
    const Tensor4<T>& m = g.mask;
    const std::size_t f = h / m.h();
    r.mask_image = Tensor4<T>(content.n(), 3, h, w);
    for (std::size_t n = 0; n < m.n(); ++n)
        for (std::size_t y = 0; y < m.h(); ++y)
            for (std::size_t x = 0; x < m.w(); ++x) {
                double s = 0;
                for (std::size_t c = 0; c < m.c(); ++c) s += static_cast<double>(m(n, c, y, x));
                const T v = static_cast<T>(s / static_cast<double>(m.c()));
                for (std::size_t k = 0; k < 3; ++k)
                    for (std::size_t dy = 0; dy < f; ++dy)
                        for (std::size_t dx = 0; dx < f; ++dx) r.mask_image(n, k, y * f + dy, x * f + dx) = v;
            }
    return r;
}

// "o.ppm" -> "o.mask.ppm"
inline std::filesystem::path mask_path_for(const std::filesystem::path& out) {
    std::filesystem::path p = out;
    p.replace_extension();
    p += ".mask.ppm";
    return p;
}

// Eval-mode category accuracy of the discriminator's class head over every
// style image in the dataset.
template <class T>
double class_accuracy(ModelBundle<T>& b, const Dataset<T>& d) {
    std::size_t ok = 0, total = 0;
    for (std::size_t c = 0; c < d.style.size(); ++c)
        for (const auto& img : d.style[c]) {
            const auto o = b.disc.forward(img, NormPolicy::eval(), nullptr);
            ok += Trainer<T>::argmax_class(o.class_logits, 0) == c;
            ++total;
        }
    return total ? static_cast<double>(ok) / static_cast<double>(total) : 0.0;
}

}  // namespace advstyle
