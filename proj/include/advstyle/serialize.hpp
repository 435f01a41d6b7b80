#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <type_traits>
#include <vector>

#include "advstyle/io.hpp"
#include "advstyle/networks.hpp"
#include "advstyle/tensor.hpp"

namespace advstyle {

static_assert(std::endian::native == std::endian::little, "tensor files are read and written little-endian");

// Tensor file layout (all integers little-endian):
//   "STYF" u32 version u32 count
//   count x { u32 name_len, name, u8 rank, rank x u32 dim, u8 dtype, data, u32 crc32(data) }
//   u32 crc32(all preceding bytes)
inline constexpr std::uint32_t kTensorFileVersion = 1;

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

template <class T>
constexpr DType dtype_of() {
    static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
    return std::is_same_v<T, float> ? DType::f32 : DType::f64;
}

inline std::size_t dtype_size(DType d) { return d == DType::f32 ? 4 : 8; }

struct StoredTensor {
    std::string name;
    std::vector<std::uint32_t> dims;
    DType dtype = DType::f32;
    Bytes data;

    std::size_t count() const {
        std::size_t c = 1;
        for (auto d : dims) c *= d;
        return c;
    }

    // Dims padded with trailing ones to NCHW.
    Shape4 shape() const {
        std::size_t s[4] = {1, 1, 1, 1};
        for (std::size_t i = 0; i < dims.size(); ++i) s[i] = dims[i];
        return {s[0], s[1], s[2], s[3]};
    }

    template <class T>
    Tensor4<T> as() const {
        Tensor4<T> t(shape());
        if (dtype == DType::f32) {
            for (std::size_t i = 0; i < t.size(); ++i) {
                float v;
                std::memcpy(&v, data.data() + 4 * i, 4);
                t[i] = static_cast<T>(v);
            }
        } else {
            for (std::size_t i = 0; i < t.size(); ++i) {
                double v;
                std::memcpy(&v, data.data() + 8 * i, 8);
                t[i] = static_cast<T>(v);
            }
        }
        return t;
    }
};

class TensorFile {
public:
    std::vector<StoredTensor> tensors;

    template <class T>
    void add(const std::string& name, const Tensor4<T>& t, int rank = 4) {
        const Shape4 s = t.shape();
        const std::size_t full[4] = {s.n, s.c, s.h, s.w};
        // Widen the rank if a dimension past it is not 1.
        std::size_t r = static_cast<std::size_t>(std::clamp(rank, 0, 4));
        for (std::size_t i = r; i < 4; ++i)
            if (full[i] != 1) r = i + 1;
        StoredTensor st;
        st.name = name;
        st.dims.assign(full, full + r);
        st.dtype = dtype_of<T>();
        st.data.resize(t.size() * sizeof(T));
        std::memcpy(st.data.data(), t.data(), st.data.size());
        tensors.push_back(std::move(st));
    }

    void add_scalar(const std::string& name, double v) { add(name, Tensor4<double>(1, 1, 1, 1, v), 0); }

    // 64-bit integers are stored as two f64 holding the high and low 32-bit halves.
    void add_u64(const std::string& name, std::uint64_t v) {
        add(name, Tensor4<double>(Shape4{2, 1, 1, 1}, {static_cast<double>(v >> 32), static_cast<double>(v & 0xffffffffu)}),
            1);
    }

    const StoredTensor* find(const std::string& name) const {
        for (const auto& t : tensors)
            if (t.name == name) return &t;
        return nullptr;
    }

    const StoredTensor& at(const std::string& name) const {
        if (const auto* t = find(name)) return *t;
        throw ShapeMismatchError("tensor file has no entry '" + name + "'");
    }

    double scalar(const std::string& name) const { return at(name).as<double>()[0]; }

    std::uint64_t u64(const std::string& name) const {
        const auto t = at(name).as<double>();
        if (t.size() != 2) throw ShapeMismatchError("entry '" + name + "' is not a 64-bit integer");
        return (static_cast<std::uint64_t>(t[0]) << 32) | static_cast<std::uint64_t>(t[1]);
    }

    // Copy a stored entry into `dst`, which must already have the stored shape.
    template <class T>
    void read_into(const std::string& name, Tensor4<T>& dst) const {
        const auto& st = at(name);
        if (st.shape() != dst.shape())
            throw ShapeMismatchError("tensor '" + name + "': file has " + st.shape().str() + ", expected " +
                                     dst.shape().str());
        dst = st.as<T>();
    }

    template <class T>
    void read_into(const std::vector<NamedTensor<T>>& targets) const {
        for (const auto& t : targets) read_into(t.name, *t.tensor);
    }

    Bytes encode() const {
        Bytes out;
        auto put = [&](const void* p, std::size_t n) {
            const auto* b = static_cast<const std::uint8_t*>(p);
            out.insert(out.end(), b, b + n);
        };
        auto put_u32 = [&](std::uint32_t v) { put(&v, 4); };
        put("STYF", 4);
        put_u32(kTensorFileVersion);
        put_u32(static_cast<std::uint32_t>(tensors.size()));
        for (const auto& t : tensors) {
            put_u32(static_cast<std::uint32_t>(t.name.size()));
            put(t.name.data(), t.name.size());
            const auto rank = static_cast<std::uint8_t>(t.dims.size());
            put(&rank, 1);
            for (auto d : t.dims) put_u32(d);
            const auto dt = static_cast<std::uint8_t>(t.dtype);
            put(&dt, 1);
            put(t.data.data(), t.data.size());
            put_u32(crc32_of(t.data.data(), t.data.size()));
        }
        put_u32(crc32_of(out.data(), out.size()));
        return out;
    }

    static TensorFile decode(const Bytes& b) {
        std::size_t pos = 0;
        auto need = [&](std::size_t n, const char* what) {
            if (b.size() - pos < n)
                throw ParseError(std::string("truncated tensor file while reading ") + what, b.size());
        };
        auto get_u32 = [&](const char* what) {
            need(4, what);
            std::uint32_t v;
            std::memcpy(&v, b.data() + pos, 4);
            pos += 4;
            return v;
        };
        auto get_u8 = [&](const char* what) {
            need(1, what);
            return b[pos++];
        };
        if (b.size() < 4 || std::memcmp(b.data(), "STYF", 4) != 0)
            throw MagicError("not a tensor file: bad magic", 0);
        pos = 4;
        const std::uint32_t version = get_u32("version");
        if (version != kTensorFileVersion)
            throw VersionError("unsupported tensor file version " + std::to_string(version), 4);
        const std::uint32_t count = get_u32("tensor count");
        TensorFile f;
        for (std::uint32_t i = 0; i < count; ++i) {
            StoredTensor t;
            const std::uint32_t len = get_u32("name length");
            need(len, "name");
            t.name.assign(reinterpret_cast<const char*>(b.data() + pos), len);
            pos += len;
            const std::size_t rank_at = pos;
            const std::uint8_t rank = get_u8("rank");
            if (rank > 4) throw ParseError("tensor '" + t.name + "' has rank " + std::to_string(rank), rank_at);
            for (std::uint8_t r = 0; r < rank; ++r) {
                const std::uint32_t d = get_u32("dims");
                if (d == 0) throw ParseError("tensor '" + t.name + "' has a zero dimension", pos - 4);
                t.dims.push_back(d);
            }
            const std::size_t dtype_at = pos;
            const std::uint8_t dt = get_u8("dtype");
            if (dt > 1) throw ParseError("tensor '" + t.name + "' has unknown dtype " + std::to_string(dt), dtype_at);
            t.dtype = static_cast<DType>(dt);
            std::size_t bytes = dtype_size(t.dtype);
            for (auto d : t.dims) {
                if (bytes > b.size() / d) throw ParseError("tensor '" + t.name + "' larger than file", dtype_at);
                bytes *= d;
            }
            const std::size_t data_at = pos;
            need(bytes, "tensor data");
            t.data.assign(b.begin() + static_cast<std::ptrdiff_t>(pos), b.begin() + static_cast<std::ptrdiff_t>(pos + bytes));
            pos += bytes;
            const std::uint32_t crc = get_u32("tensor checksum");
            if (crc != crc32_of(t.data.data(), t.data.size()))
                throw ChecksumError("checksum mismatch in tensor '" + t.name + "'", data_at);
            f.tensors.push_back(std::move(t));
        }
        const std::size_t body = pos;
        const std::uint32_t file_crc = get_u32("file checksum");
        if (file_crc != crc32_of(b.data(), body)) throw ChecksumError("file checksum mismatch", body);
        if (pos != b.size()) throw ParseError("trailing bytes after tensor file", pos);
        return f;
    }

    void save(const std::filesystem::path& path) const { write_file_atomic(path, encode()); }
    static TensorFile load(const std::filesystem::path& path) { return decode(read_file(path)); }
};

// ---------------------------------------------------------------------------
// Model weight files: architecture metadata plus every bundle tensor.

inline void add_net_config(TensorFile& f, const NetConfig& cfg) {
    auto arr = [](const std::array<std::size_t, 4>& a) {
        return Tensor4<double>(Shape4{4, 1, 1, 1}, {double(a[0]), double(a[1]), double(a[2]), double(a[3])});
    };
    f.add("meta.encoder_widths", arr(cfg.encoder.block_widths), 1);
    f.add("meta.encoder_convs", arr(cfg.encoder.convs_per_block), 1);
    f.add("meta.disc_widths", arr(cfg.disc_widths), 1);
    f.add_scalar("meta.input_channels", static_cast<double>(cfg.encoder.input_channels));
    f.add_scalar("meta.categories", static_cast<double>(cfg.categories));
    f.add_scalar("meta.leaky_slope", cfg.leaky_slope);
}

inline NetConfig read_net_config(const TensorFile& f) {
    auto arr = [&](const char* name) {
        const auto t = f.at(name).as<double>();
        if (t.size() != 4) throw ShapeMismatchError(std::string("entry '") + name + "' must hold 4 values");
        return std::array<std::size_t, 4>{std::size_t(t[0]), std::size_t(t[1]), std::size_t(t[2]), std::size_t(t[3])};
    };
    NetConfig cfg;
    cfg.encoder.block_widths = arr("meta.encoder_widths");
    cfg.encoder.convs_per_block = arr("meta.encoder_convs");
    cfg.disc_widths = arr("meta.disc_widths");
    cfg.encoder.input_channels = static_cast<std::size_t>(f.scalar("meta.input_channels"));
    cfg.categories = static_cast<std::size_t>(f.scalar("meta.categories"));
    cfg.leaky_slope = f.scalar("meta.leaky_slope");
    return cfg;
}

template <class T>
void add_bundle(TensorFile& f, ModelBundle<T>& b) {
    add_net_config(f, b.cfg);
    for (const auto& t : b.all_tensors()) f.add(t.name, *t.tensor, t.rank);
}

template <class T>
void save_weights(const std::filesystem::path& path, ModelBundle<T>& b) {
    TensorFile f;
    add_bundle(f, b);
    f.save(path);
}

// Rebuild a bundle from its own metadata and load every tensor.
template <class T>
ModelBundle<T> bundle_from_file(const TensorFile& f) {
    auto b = ModelBundle<T>::make(read_net_config(f), 0);
    f.read_into(b.all_tensors());
    return b;
}

template <class T>
ModelBundle<T> load_weights(const std::filesystem::path& path) {
    return bundle_from_file<T>(TensorFile::load(path));
}

// Load only the given tensors (e.g. a pretrained encoder) into an existing bundle.
template <class T>
void load_subnet(const std::filesystem::path& path, const std::vector<NamedTensor<T>>& targets) {
    TensorFile::load(path).read_into(targets);
}

}  // namespace advstyle
