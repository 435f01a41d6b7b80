#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "advstyle/io.hpp"
#include "advstyle/losses.hpp"
#include "advstyle/networks.hpp"

namespace advstyle {

// Which player's parameters are extrapolated before the opponent's update.
enum class PredictionMode { both, predict_d, predict_g, off };
enum class StyleBatch { single, mixed };

struct TrainConfig {
    Profile profile = Profile::desk;
    std::size_t image_size = 32;
    std::size_t batch = 8;
    std::size_t epochs = 25;
    std::size_t decay_start = 10;
    // Hard cap on iterations; 0 means epochs * iterations_per_epoch.
    std::size_t iterations = 0;
    std::uint64_t seed = 7;
    LossWeights weights;
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.9;
    PredictionMode prediction = PredictionMode::both;
    MaskMode mask_mode = MaskMode::learned;
    bool fake_class_term = true;
    StyleBatch style_batch = StyleBatch::mixed;
    bool flip = false;
    std::string encoder_weights;  // optional pretrained encoder tensor file

    static TrainConfig for_profile(Profile p) {
        TrainConfig c;
        c.profile = p;
        if (p == Profile::paper) {
            c.image_size = 256;
            c.batch = 56;
            c.epochs = 150;
            c.decay_start = 60;
        }
        return c;
    }

    NetConfig net(std::size_t categories) const { return NetConfig::for_profile(profile, categories); }

    bool predict_d() const { return prediction == PredictionMode::both || prediction == PredictionMode::predict_d; }
    bool predict_g() const { return prediction == PredictionMode::both || prediction == PredictionMode::predict_g; }

    void validate() const {
        if (image_size < 16 || image_size % 8 != 0)
            throw ConfigError("image_size must be a multiple of 8 and at least 16, got " + std::to_string(image_size));
        if (batch < 2) throw ConfigError("batch must be >= 2 for batch normalization, got " + std::to_string(batch));
        if (epochs == 0) throw ConfigError("epochs must be >= 1");
        if (!(lr > 0)) throw ConfigError("lr must be positive");
        if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) throw ConfigError("betas must lie in [0,1)");
        weights.validate();
    }

    // Canonical key=value text; also the input format of apply_text.
    std::string to_text() const;
    void set(const std::string& key, const std::string& value);

    using Pairs = std::vector<std::pair<std::string, std::string>>;

    // key=value lines; blank lines and lines starting with '#' are skipped.
    static Pairs parse_pairs(const std::string& text) {
        Pairs out;
        std::istringstream in(text);
        std::string line;
        std::size_t lineno = 0;
        auto trim = [](std::string s) {
            s.erase(0, s.find_first_not_of(" \t"));
            s.erase(s.find_last_not_of(" \t") + 1);
            return s;
        };
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            const auto first = line.find_first_not_of(" \t");
            if (first == std::string::npos || line[first] == '#') continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
            out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
        return out;
    }

    void apply_text(const std::string& text) {
        for (const auto& [k, v] : parse_pairs(text)) set(k, v);
    }

    void apply_file(const std::filesystem::path& path) {
        const Bytes b = read_file(path);
        apply_text(std::string(b.begin(), b.end()));
    }

    // Covers everything that shapes the trajectory; the iteration cap does not,
    // so a run can be resumed with a larger cap.
    std::uint32_t hash() const {
        TrainConfig c = *this;
        c.iterations = 0;
        return crc32_of(c.to_text());
    }
};

namespace detail {

template <class E>
struct EnumNames {
    std::vector<std::pair<E, const char*>> names;

    const char* name(E v) const {
        for (const auto& [e, n] : names)
            if (e == v) return n;
        return "?";
    }
    E parse(const std::string& key, const std::string& s) const {
        std::string allowed;
        for (const auto& [e, n] : names) {
            if (s == n) return e;
            allowed += (allowed.empty() ? "" : "|") + std::string(n);
        }
        throw ConfigError(key + ": expected " + allowed + ", got '" + s + "'");
    }
};

inline const EnumNames<Profile> kProfileNames{{{Profile::desk, "desk"}, {Profile::paper, "paper"}}};
inline const EnumNames<PredictionMode> kPredictionNames{{{PredictionMode::both, "both"},
                                                         {PredictionMode::predict_d, "predict-d"},
                                                         {PredictionMode::predict_g, "predict-g"},
                                                         {PredictionMode::off, "off"}}};
inline const EnumNames<MaskMode> kMaskNames{
    {{MaskMode::learned, "learned"}, {MaskMode::force0, "force0"}, {MaskMode::force1, "force1"}}};
inline const EnumNames<StyleBatch> kStyleBatchNames{{{StyleBatch::single, "single"}, {StyleBatch::mixed, "mixed"}}};

inline std::uint64_t parse_u64(const std::string& key, const std::string& s) {
    try {
        std::size_t used = 0;
        if (!s.empty() && s[0] == '-') throw std::invalid_argument(s);
        const auto v = std::stoull(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a non-negative integer, got '" + s + "'");
    }
}

inline double parse_double(const std::string& key, const std::string& s) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + s + "'");
    }
}

inline bool parse_bool(const std::string& key, const std::string& s) {
    if (s == "true" || s == "1" || s == "on") return true;
    if (s == "false" || s == "0" || s == "off") return false;
    throw ConfigError(key + ": expected true|false, got '" + s + "'");
}

// Shortest decimal form that reads back to the same double.
inline std::string fmt_double(double v) {
    char buf[400];
    const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed);
    return std::string(buf, r.ptr);
}

}  // namespace detail

inline std::string TrainConfig::to_text() const {
    using namespace detail;
    std::ostringstream os;
    os << "profile=" << kProfileNames.name(profile) << "\n"
       << "image_size=" << image_size << "\n"
       << "batch=" << batch << "\n"
       << "epochs=" << epochs << "\n"
       << "decay_start=" << decay_start << "\n"
       << "iterations=" << iterations << "\n"
       << "seed=" << seed << "\n"
       << "lambda_ds=" << fmt_double(weights.lambda_ds) << "\n"
       << "lambda_c=" << fmt_double(weights.lambda_c) << "\n"
       << "lambda_s=" << fmt_double(weights.lambda_s) << "\n"
       << "lr=" << fmt_double(lr) << "\n"
       << "beta1=" << fmt_double(beta1) << "\n"
       << "beta2=" << fmt_double(beta2) << "\n"
       << "prediction=" << kPredictionNames.name(prediction) << "\n"
       << "mask_mode=" << kMaskNames.name(mask_mode) << "\n"
       << "fake_class_term=" << (fake_class_term ? "true" : "false") << "\n"
       << "style_batch=" << kStyleBatchNames.name(style_batch) << "\n"
       << "flip=" << (flip ? "true" : "false") << "\n"
       << "encoder_weights=" << encoder_weights << "\n";
    return os.str();
}

// Setting `profile` resets every other field to that profile's defaults, so
// it should come first in a config file.
inline void TrainConfig::set(const std::string& key, const std::string& value) {
    using namespace detail;
    if (key == "profile") {
        const auto seed_keep = seed;
        *this = for_profile(kProfileNames.parse(key, value));
        seed = seed_keep;
    } else if (key == "image_size") image_size = parse_u64(key, value);
    else if (key == "batch") batch = parse_u64(key, value);
    else if (key == "epochs") epochs = parse_u64(key, value);
    else if (key == "decay_start") decay_start = parse_u64(key, value);
    else if (key == "iterations") iterations = parse_u64(key, value);
    else if (key == "seed") seed = parse_u64(key, value);
    else if (key == "lambda_ds") weights.lambda_ds = parse_double(key, value);
    else if (key == "lambda_c") weights.lambda_c = parse_double(key, value);
    else if (key == "lambda_s") weights.lambda_s = parse_double(key, value);
    else if (key == "lr") lr = parse_double(key, value);
    else if (key == "beta1") beta1 = parse_double(key, value);
    else if (key == "beta2") beta2 = parse_double(key, value);
    else if (key == "prediction") prediction = kPredictionNames.parse(key, value);
    else if (key == "mask_mode") mask_mode = kMaskNames.parse(key, value);
    else if (key == "fake_class_term") fake_class_term = parse_bool(key, value);
    else if (key == "style_batch") style_batch = kStyleBatchNames.parse(key, value);
    else if (key == "flip") flip = parse_bool(key, value);
    else if (key == "encoder_weights") encoder_weights = value;
    else throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace advstyle
