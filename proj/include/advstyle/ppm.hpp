#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>

#include "advstyle/io.hpp"
#include "advstyle/tensor.hpp"

namespace advstyle {

// Binary PPM (P6, maxval 255). Pixels map to [-1, 1] as v / 127.5 - 1.

inline double byte_to_unit(std::uint8_t b) { return static_cast<double>(b) / 127.5 - 1.0; }

// Inverse mapping, round half away from zero, clamped to [0, 255].
inline std::uint8_t unit_to_byte(double v) {
    if (std::isnan(v)) throw NumericError("image value is NaN");
    const double s = std::round((v + 1.0) * 127.5);
    return static_cast<std::uint8_t>(std::clamp(s, 0.0, 255.0));
}

namespace detail {

struct PpmHeader {
    std::size_t width = 0, height = 0, data_offset = 0;
};

inline PpmHeader parse_ppm_header(const Bytes& b) {
    std::size_t pos = 0;
    if (b.size() < 2 || b[0] != 'P' || b[1] != '6') throw ParseError("not a binary PPM: expected magic P6", 0);
    pos = 2;
    auto skip_space = [&] {
        bool any = false;
        while (pos < b.size()) {
            if (b[pos] == '#') {
                while (pos < b.size() && b[pos] != '\n') ++pos;
                any = true;
            } else if (std::isspace(b[pos])) {
                ++pos;
                any = true;
            } else {
                break;
            }
        }
        return any;
    };
    std::size_t start = 0;
    auto number = [&](const char* what) {
        if (!skip_space()) throw ParseError(std::string("expected whitespace before ") + what, pos);
        if (pos >= b.size() || !std::isdigit(b[pos])) throw ParseError(std::string("expected ") + what, pos);
        std::size_t v = 0;
        start = pos;
        while (pos < b.size() && std::isdigit(b[pos])) {
            v = v * 10 + static_cast<std::size_t>(b[pos] - '0');
            if (v > 1u << 20) throw ParseError(std::string(what) + " too large", start);
            ++pos;
        }
        return v;
    };
    PpmHeader h;
    h.width = number("width");
    if (h.width == 0) throw ParseError("zero image width", start);
    h.height = number("height");
    if (h.height == 0) throw ParseError("zero image height", start);
    const std::size_t maxval = number("maxval");
    if (maxval != 255) throw ParseError("only maxval 255 is supported, got " + std::to_string(maxval), start);
    if (pos >= b.size() || !std::isspace(b[pos])) throw ParseError("expected single whitespace after maxval", pos);
    h.data_offset = pos + 1;
    const std::size_t need = h.width * h.height * 3;
    if (b.size() - h.data_offset < need)
        throw ParseError("truncated pixel data: need " + std::to_string(need) + " bytes, have " +
                             std::to_string(b.size() - h.data_offset),
                         b.size());
    return h;
}

}  // namespace detail

template <class T = real_t>
Tensor4<T> decode_ppm(const Bytes& bytes) {
    const auto h = detail::parse_ppm_header(bytes);
    Tensor4<T> t(1, 3, h.height, h.width);
    const std::uint8_t* px = bytes.data() + h.data_offset;
    for (std::size_t y = 0; y < h.height; ++y)
        for (std::size_t x = 0; x < h.width; ++x)
            for (std::size_t c = 0; c < 3; ++c) t(0, c, y, x) = static_cast<T>(byte_to_unit(*px++));
    return t;
}

template <class T = real_t>
Tensor4<T> load_image(const std::filesystem::path& path) {
    return decode_ppm<T>(read_file(path));
}

// Encodes sample `n` of a (N,3,H,W) tensor.
template <class T>
Bytes encode_ppm(const Tensor4<T>& t, std::size_t n = 0) {
    if (t.c() != 3) throw DimensionError("encode_ppm: expected 3 channels, got " + t.shape().str());
    if (n >= t.n()) throw DimensionError("encode_ppm: sample " + std::to_string(n) + " of " + t.shape().str());
    const std::string header = "P6\n" + std::to_string(t.w()) + " " + std::to_string(t.h()) + "\n255\n";
    Bytes out(header.begin(), header.end());
    out.reserve(header.size() + t.h() * t.w() * 3);
    for (std::size_t y = 0; y < t.h(); ++y)
        for (std::size_t x = 0; x < t.w(); ++x)
            for (std::size_t c = 0; c < 3; ++c) out.push_back(unit_to_byte(static_cast<double>(t(n, c, y, x))));
    return out;
}

template <class T>
void save_image(const std::filesystem::path& path, const Tensor4<T>& t, std::size_t n = 0) {
    write_file_atomic(path, encode_ppm(t, n));
}

// Crop the centre of every sample to (h, w).
template <class T>
Tensor4<T> center_crop(const Tensor4<T>& t, std::size_t h, std::size_t w) {
    if (h > t.h() || w > t.w())
        throw DimensionError("center_crop: " + t.shape().str() + " smaller than " + std::to_string(h) + "x" +
                             std::to_string(w));
    const std::size_t y0 = (t.h() - h) / 2, x0 = (t.w() - w) / 2;
    Tensor4<T> out(t.n(), t.c(), h, w);
    for (std::size_t n = 0; n < t.n(); ++n)
        for (std::size_t c = 0; c < t.c(); ++c)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x) out(n, c, y, x) = t(n, c, y0 + y, x0 + x);
    return out;
}

// Periodic tiling of a centre-anchored window; used to bring a style image to
// the content size when the style image is smaller.
template <class T>
Tensor4<T> center_tile(const Tensor4<T>& t, std::size_t h, std::size_t w) {
    Tensor4<T> out(t.n(), t.c(), h, w);
    const std::ptrdiff_t oy = (static_cast<std::ptrdiff_t>(t.h()) - static_cast<std::ptrdiff_t>(h)) / 2;
    const std::ptrdiff_t ox = (static_cast<std::ptrdiff_t>(t.w()) - static_cast<std::ptrdiff_t>(w)) / 2;
    auto wrap = [](std::ptrdiff_t v, std::size_t m) {
        const auto mm = static_cast<std::ptrdiff_t>(m);
        return static_cast<std::size_t>(((v % mm) + mm) % mm);
    };
    for (std::size_t n = 0; n < t.n(); ++n)
        for (std::size_t c = 0; c < t.c(); ++c)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x)
                    out(n, c, y, x) = t(n, c, wrap(oy + static_cast<std::ptrdiff_t>(y), t.h()),
                                        wrap(ox + static_cast<std::ptrdiff_t>(x), t.w()));
    return out;
}

}  // namespace advstyle
