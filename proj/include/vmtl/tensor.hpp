#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <numeric>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "vmtl/error.hpp"

namespace vmtl {

// Dense row-major tensor of doubles. Video feature maps use the
// [channels, time, height, width] layout; scalars are rank 0.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(count(shape_), 0.0) {}

    Tensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (count(shape_) != data_.size())
            throw DimensionError("tensor data length does not match shape");
    }

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<std::size_t> shape, double v) {
        Tensor t(std::move(shape));
        for (double& x : t.data_) x = v;
        return t;
    }

    static Tensor scalar(double v) { return Tensor({}, {v}); }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t numel() const { return data_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // Row-major multi-index access; index count must equal the rank.
    template <typename... Ix>
    double& at(Ix... ix) {
        return data_[offset({static_cast<std::size_t>(ix)...})];
    }
    template <typename... Ix>
    double at(Ix... ix) const {
        return data_[offset({static_cast<std::size_t>(ix)...})];
    }

    double item() const {
        if (numel() != 1) throw ContractError("item() on tensor with numel != 1");
        return data_[0];
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool all_finite() const {
        for (double x : data_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    Tensor reshaped(std::vector<std::size_t> shape) const {
        if (count(shape) != data_.size())
            throw DimensionError("reshape changes element count");
        return Tensor(std::move(shape), data_);
    }

    static std::size_t count(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return n;
    }

private:
    std::size_t offset(std::initializer_list<std::size_t> ix) const {
        if (ix.size() != shape_.size())
            throw DimensionError("index rank does not match tensor rank");
        std::size_t off = 0;
        std::size_t d = 0;
        for (std::size_t i : ix) {
            off = off * shape_[d] + i;
            ++d;
        }
        return off;
    }

    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

inline std::string shape_string(const std::vector<std::size_t>& shape) {
    if (shape.empty()) return "scalar";
    std::string s;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += 'x';
        s += std::to_string(shape[i]);
    }
    return s;
}

// ---------------------------------------------------------------------------
// STSR container: magic "STSR", version u32, rank u32, dims u64, f64 payload.
// All fields little-endian.
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
void write_le(std::ostream& os, T v) {
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i)
        buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

inline void write_f64_le(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    write_le<std::uint64_t>(os, bits);
}

template <typename T>
T read_le(std::istream& is, const std::string& what) {
    unsigned char buf[sizeof(T)];
    is.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (!is) throw ParseError("truncated STSR data while reading " + what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return static_cast<T>(v);
}

inline double read_f64_le(std::istream& is, const std::string& what) {
    std::uint64_t bits = read_le<std::uint64_t>(is, what);
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

} // namespace detail

inline constexpr std::uint32_t kStsrVersion = 1;

inline void write_stsr(std::ostream& os, const Tensor& t) {
    os.write("STSR", 4);
    detail::write_le<std::uint32_t>(os, kStsrVersion);
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) detail::write_le<std::uint64_t>(os, d);
    for (std::size_t i = 0; i < t.numel(); ++i) detail::write_f64_le(os, t[i]);
}

inline Tensor read_stsr(std::istream& is, const std::string& name) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "STSR", 4) != 0)
        throw ParseError("bad STSR magic in " + name);
    const auto version = detail::read_le<std::uint32_t>(is, name + " version");
    if (version != kStsrVersion)
        throw ParseError("unsupported STSR version in " + name);
    const auto rank = detail::read_le<std::uint32_t>(is, name + " rank");
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) {
        d = static_cast<std::size_t>(detail::read_le<std::uint64_t>(is, name + " dims"));
        if (d == 0) throw ParseError("zero dimension in " + name);
    }
    Tensor t(shape);
    for (std::size_t i = 0; i < t.numel(); ++i)
        t[i] = detail::read_f64_le(is, name + " payload");
    return t;
}

inline void save_stsr(const std::filesystem::path& path, const Tensor& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ParseError("cannot open " + path.string() + " for writing");
    write_stsr(os, t);
    if (!os) throw ParseError("write failed for " + path.string());
}

inline Tensor load_stsr(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParseError("cannot open " + path.string());
    return read_stsr(is, path.string());
}

} // namespace vmtl
