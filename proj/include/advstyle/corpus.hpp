#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "advstyle/io.hpp"
#include "advstyle/ppm.hpp"
#include "advstyle/tensor.hpp"

namespace advstyle {

enum class Role { content, style, both };

inline const char* role_name(Role r) {
    switch (r) {
        case Role::content: return "content";
        case Role::style: return "style";
        case Role::both: return "both";
    }
    return "?";
}

struct ManifestEntry {
    std::string path;  // relative to the manifest's directory unless absolute
    Role role = Role::content;
    int category = -1;  // -1 for content-only entries
};

// Header line `#categories: a,b,...` followed by `path<TAB>role<TAB>category_id` lines.
struct DatasetManifest {
    std::vector<std::string> category_names;
    std::vector<ManifestEntry> entries;
    std::filesystem::path base_dir;

    std::size_t categories() const { return category_names.size(); }

    std::filesystem::path resolve(const ManifestEntry& e) const {
        const std::filesystem::path p(e.path);
        return p.is_absolute() ? p : base_dir / p;
    }

    void validate() const {
        if (category_names.empty()) throw DomainError("manifest: no categories declared");
        bool content = false, style = false;
        for (const auto& e : entries) {
            const bool is_style = e.role != Role::content;
            if (e.role != Role::style) content = true;
            if (is_style) {
                style = true;
                if (e.category < 0 || static_cast<std::size_t>(e.category) >= categories())
                    throw DomainError("manifest: style entry " + e.path + " has category " +
                                      std::to_string(e.category) + " outside [0," + std::to_string(categories()) +
                                      ")");
            }
        }
        if (!content) throw DomainError("manifest: no content entries");
        if (!style) throw DomainError("manifest: no style entries");
    }

    std::string to_text() const {
        std::string out = "#categories: ";
        for (std::size_t i = 0; i < category_names.size(); ++i) out += (i ? "," : "") + category_names[i];
        out += "\n";
        for (const auto& e : entries)
            out += e.path + "\t" + role_name(e.role) + "\t" + std::to_string(e.category) + "\n";
        return out;
    }

    static DatasetManifest parse(const std::string& text, const std::filesystem::path& base_dir) {
        DatasetManifest m;
        m.base_dir = base_dir;
        std::istringstream in(text);
        std::string line;
        std::size_t offset = 0;
        bool header = false;
        while (std::getline(in, line)) {
            const std::size_t line_at = offset;
            offset += line.size() + 1;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            if (!header) {
                const std::string tag = "#categories:";
                if (line.rfind(tag, 0) != 0) throw ParseError("manifest must start with '#categories:'", line_at);
                std::istringstream names(line.substr(tag.size()));
                std::string name;
                while (std::getline(names, name, ',')) {
                    name.erase(0, name.find_first_not_of(" \t"));
                    name.erase(name.find_last_not_of(" \t") + 1);
                    if (name.empty()) throw ParseError("manifest: empty category name", line_at);
                    m.category_names.push_back(name);
                }
                header = true;
                continue;
            }
            if (line[0] == '#') continue;
            std::array<std::string, 3> f;
            std::size_t start = 0;
            for (std::size_t i = 0; i < 3; ++i) {
                const std::size_t tab = line.find('\t', start);
                if ((i < 2) != (tab != std::string::npos))
                    throw ParseError("manifest: expected 3 tab-separated fields", line_at);
                f[i] = line.substr(start, tab == std::string::npos ? std::string::npos : tab - start);
                start = tab + 1;
            }
            ManifestEntry e;
            e.path = f[0];
            if (f[1] == "content") e.role = Role::content;
            else if (f[1] == "style") e.role = Role::style;
            else if (f[1] == "both") e.role = Role::both;
            else throw ParseError("manifest: unknown role '" + f[1] + "'", line_at);
            try {
                std::size_t used = 0;
                e.category = std::stoi(f[2], &used);
                if (used != f[2].size()) throw std::invalid_argument(f[2]);
            } catch (const std::exception&) {
                throw ParseError("manifest: bad category id '" + f[2] + "'", line_at);
            }
            m.entries.push_back(std::move(e));
        }
        if (!header) throw ParseError("manifest is empty", 0);
        m.validate();
        return m;
    }

    static DatasetManifest load(const std::filesystem::path& path) {
        const Bytes b = read_file(path);
        return parse(std::string(b.begin(), b.end()), path.parent_path());
    }

    void save(const std::filesystem::path& path) const { write_file_atomic(path, to_text()); }
};

// ---------------------------------------------------------------------------
// Synthetic corpus: procedural content shapes and four style families.

inline const std::array<const char*, 4> kSyntheticCategories{"stripes", "dots", "posterized", "noise"};

namespace detail {

using Rgb = std::array<double, 3>;

inline Rgb random_color(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-0.9, 0.9);
    return {u(rng), u(rng), u(rng)};
}

// Two colours far enough apart that pattern and background stay distinct.
inline std::pair<Rgb, Rgb> contrasting_pair(std::mt19937_64& rng) {
    for (;;) {
        Rgb a = random_color(rng), b = random_color(rng);
        double d = 0;
        for (int c = 0; c < 3; ++c) d += std::abs(a[c] - b[c]);
        if (d > 1.2) return {a, b};
    }
}

inline void put(Tensor4<double>& img, std::size_t y, std::size_t x, const Rgb& c) {
    for (std::size_t k = 0; k < 3; ++k) img(0, k, y, x) = c[k];
}

inline Tensor4<double> content_image(std::size_t s, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Tensor4<double> img(1, 3, s, s);
    const Rgb top = random_color(rng), bottom = random_color(rng);
    for (std::size_t y = 0; y < s; ++y) {
        const double t = static_cast<double>(y) / static_cast<double>(s - 1);
        for (std::size_t x = 0; x < s; ++x)
            put(img, y, x, {top[0] * (1 - t) + bottom[0] * t, top[1] * (1 - t) + bottom[1] * t,
                            top[2] * (1 - t) + bottom[2] * t});
    }
    const int shapes = 1 + static_cast<int>(rng() % 3);
    const double S = static_cast<double>(s);
    for (int i = 0; i < shapes; ++i) {
        const Rgb col = random_color(rng);
        const double cx = u(rng) * S, cy = u(rng) * S, r = (0.15 + 0.2 * u(rng)) * S;
        const int kind = static_cast<int>(rng() % 3);
        for (std::size_t y = 0; y < s; ++y)
            for (std::size_t x = 0; x < s; ++x) {
                const double dx = static_cast<double>(x) + 0.5 - cx, dy = static_cast<double>(y) + 0.5 - cy;
                bool inside = false;
                if (kind == 0) inside = dx * dx + dy * dy <= r * r;
                else if (kind == 1) inside = std::abs(dx) <= r && std::abs(dy) <= 0.6 * r;
                else inside = dy <= r && dy >= -r && std::abs(dx) <= (dy + r) / 2;
                if (inside) put(img, y, x, col);
            }
    }
    return img;
}

inline Tensor4<double> style_image(std::size_t category, std::size_t s, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Tensor4<double> img(1, 3, s, s);
    const double pi = std::acos(-1.0);
    switch (category) {
        case 0: {  // hard-edged stripes at a random angle
            const auto [a, b] = contrasting_pair(rng);
            const double angle = u(rng) * pi, period = 4.0 + 4.0 * u(rng), phase = u(rng) * period;
            const double ca = std::cos(angle), sa = std::sin(angle);
            for (std::size_t y = 0; y < s; ++y)
                for (std::size_t x = 0; x < s; ++x) {
                    const double t = static_cast<double>(x) * ca + static_cast<double>(y) * sa + phase;
                    put(img, y, x, std::fmod(t + 1000 * period, period) < period / 2 ? a : b);
                }
            break;
        }
        case 1: {  // dots on a flat background
            const auto [bg, dot] = contrasting_pair(rng);
            const double spacing = 6.0 + 3.0 * u(rng), radius = 1.2 + 0.8 * u(rng);
            const double ox = u(rng) * spacing, oy = u(rng) * spacing;
            for (std::size_t y = 0; y < s; ++y)
                for (std::size_t x = 0; x < s; ++x) {
                    const double fx = std::fmod(static_cast<double>(x) + ox, spacing) - spacing / 2;
                    const double fy = std::fmod(static_cast<double>(y) + oy, spacing) - spacing / 2;
                    put(img, y, x, fx * fx + fy * fy <= radius * radius ? dot : bg);
                }
            break;
        }
        case 2: {  // smooth field quantized to a small palette: flat colour regions
            const std::size_t levels = 3 + rng() % 2;
            std::vector<Rgb> palette;
            for (std::size_t i = 0; i < levels; ++i) palette.push_back(random_color(rng));
            std::array<double, 6> p{};
            for (auto& v : p) v = u(rng);
            const double S = static_cast<double>(s);
            for (std::size_t y = 0; y < s; ++y)
                for (std::size_t x = 0; x < s; ++x) {
                    const double fx = static_cast<double>(x) / S, fy = static_cast<double>(y) / S;
                    const double v = std::sin(2 * pi * (fx * (0.7 + p[0]) + p[1])) +
                                     std::sin(2 * pi * (fy * (0.7 + p[2]) + p[3])) +
                                     std::sin(2 * pi * ((fx + fy) * (0.5 + p[4]) + p[5]));
                    const double t = std::clamp((v + 3.0) / 6.0, 0.0, 0.999999);
                    put(img, y, x, palette[static_cast<std::size_t>(t * static_cast<double>(levels))]);
                }
            break;
        }
        default: {  // per-pixel noise around a base colour
            const Rgb base = random_color(rng);
            std::uniform_real_distribution<double> n(-0.6, 0.6);
            for (std::size_t y = 0; y < s; ++y)
                for (std::size_t x = 0; x < s; ++x)
                    put(img, y, x,
                        {std::clamp(base[0] + n(rng), -1.0, 1.0), std::clamp(base[1] + n(rng), -1.0, 1.0),
                         std::clamp(base[2] + n(rng), -1.0, 1.0)});
            break;
        }
    }
    return img;
}

}  // namespace detail

// Histogram feature: masses of the four most frequent colours (8 levels per
// channel) followed by the remaining mass. Independent of colour choice and
// spatial arrangement.
template <class T>
std::array<double, 5> color_rank_histogram(const Tensor4<T>& img) {
    std::map<int, std::size_t> counts;
    for (std::size_t y = 0; y < img.h(); ++y)
        for (std::size_t x = 0; x < img.w(); ++x) {
            int key = 0;
            for (std::size_t c = 0; c < 3; ++c) key = key * 8 + unit_to_byte(static_cast<double>(img(0, c, y, x))) / 32;
            ++counts[key];
        }
    std::vector<std::size_t> v;
    for (const auto& [k, n] : counts) v.push_back(n);
    std::sort(v.rbegin(), v.rend());
    const double total = static_cast<double>(img.h() * img.w());
    std::array<double, 5> f{};
    for (std::size_t i = 0; i < v.size(); ++i) f[std::min<std::size_t>(i, 4)] += static_cast<double>(v[i]) / total;
    return f;
}

// Leave-one-out nearest-centroid accuracy of the histogram feature.
template <class T>
double histogram_classifier_accuracy(const std::vector<Tensor4<T>>& images, const std::vector<int>& labels,
                                     std::size_t categories) {
    std::vector<std::array<double, 5>> feats;
    for (const auto& im : images) feats.push_back(color_rank_histogram(im));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < feats.size(); ++i) {
        std::vector<std::array<double, 5>> sum(categories, std::array<double, 5>{});
        std::vector<std::size_t> n(categories, 0);
        for (std::size_t j = 0; j < feats.size(); ++j) {
            if (j == i) continue;
            const auto c = static_cast<std::size_t>(labels[j]);
            for (std::size_t k = 0; k < 5; ++k) sum[c][k] += feats[j][k];
            ++n[c];
        }
        double best = INFINITY;
        int pred = -1;
        for (std::size_t c = 0; c < categories; ++c) {
            if (n[c] == 0) continue;
            double d = 0;
            for (std::size_t k = 0; k < 5; ++k) {
                const double diff = feats[i][k] - sum[c][k] / static_cast<double>(n[c]);
                d += diff * diff;
            }
            if (d < best) {
                best = d;
                pred = static_cast<int>(c);
            }
        }
        correct += pred == labels[i];
    }
    return feats.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(feats.size());
}

struct SyntheticCorpus {
    DatasetManifest manifest;
    double histogram_accuracy = 0;
};

// Writes n_per_category style images per category and as many content images
// in total, plus manifest.tsv, under out_dir.
inline SyntheticCorpus make_synthetic_corpus(const std::filesystem::path& out_dir, std::size_t n_per_category,
                                             std::uint64_t seed, std::size_t image_size = 32) {
    if (n_per_category < 4) throw DomainError("make_synthetic_corpus: n_per_category must be >= 4");
    if (image_size < 16 || image_size % 8 != 0)
        throw DomainError("make_synthetic_corpus: image size must be a multiple of 8 and >= 16");
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "content", ec);
    if (!ec) std::filesystem::create_directories(out_dir / "style", ec);
    if (ec) throw IoError("cannot create corpus directory " + out_dir.string() + ": " + ec.message());

    SyntheticCorpus out;
    auto& m = out.manifest;
    m.base_dir = out_dir;
    for (const char* n : kSyntheticCategories) m.category_names.emplace_back(n);
    const std::size_t K = kSyntheticCategories.size();

    std::mt19937_64 content_rng(seed ^ 0x636f6e74656e74ULL), style_rng(seed ^ 0x7374796c65ULL);
    char name[64];
    for (std::size_t i = 0; i < n_per_category * K; ++i) {
        std::snprintf(name, sizeof name, "content/c%04zu.ppm", i);
        save_image(out_dir / name, detail::content_image(image_size, content_rng));
        m.entries.push_back({name, Role::content, -1});
    }
    std::vector<Tensor4<double>> styles;
    std::vector<int> labels;
    for (std::size_t c = 0; c < K; ++c)
        for (std::size_t i = 0; i < n_per_category; ++i) {
            std::snprintf(name, sizeof name, "style/%s_%04zu.ppm", kSyntheticCategories[c], i);
            auto img = detail::style_image(c, image_size, style_rng);
            save_image(out_dir / name, img);
            // Score what was written, after 8-bit quantization.
            styles.push_back(decode_ppm<double>(encode_ppm(img)));
            labels.push_back(static_cast<int>(c));
            m.entries.push_back({name, Role::style, static_cast<int>(c)});
        }
    m.save(out_dir / "manifest.tsv");
    out.histogram_accuracy = histogram_classifier_accuracy(styles, labels, K);
    return out;
}

// ---------------------------------------------------------------------------
// Images of a manifest loaded into memory at a fixed size.

template <class T>
struct Dataset {
    std::vector<Tensor4<T>> content;
    std::vector<std::vector<Tensor4<T>>> style;  // per category
    std::vector<std::string> category_names;
    std::size_t image_size = 0;

    std::size_t categories() const { return category_names.size(); }
    std::size_t style_count() const {
        std::size_t n = 0;
        for (const auto& s : style) n += s.size();
        return n;
    }
};

// Larger images are centre-cropped to image_size; smaller ones are rejected.
template <class T>
Dataset<T> load_dataset(const DatasetManifest& m, std::size_t image_size) {
    m.validate();
    Dataset<T> d;
    d.category_names = m.category_names;
    d.image_size = image_size;
    d.style.resize(m.categories());
    for (const auto& e : m.entries) {
        auto img = load_image<T>(m.resolve(e));
        if (img.h() < image_size || img.w() < image_size)
            throw DimensionError("image " + e.path + " is " + std::to_string(img.w()) + "x" +
                                 std::to_string(img.h()) + ", smaller than training size " +
                                 std::to_string(image_size));
        if (img.h() != image_size || img.w() != image_size) img = center_crop(img, image_size, image_size);
        if (e.role != Role::style) d.content.push_back(img);
        if (e.role != Role::content) d.style[static_cast<std::size_t>(e.category)].push_back(std::move(img));
    }
    return d;
}

}  // namespace advstyle
