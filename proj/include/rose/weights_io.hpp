#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "rose/errors.hpp"
#include "rose/net.hpp"

namespace rose {

// Weights file, little-endian throughout:
//   "ROSEW" + version 0x01
//   u32 tensor count
//   per tensor: u16 name length, name bytes, u8 ndim, ndim x u32 dims,
//               prod(dims) x f32 values, row-major
// Tensor order is the tensor_refs order (40 tensors).

namespace detail {

constexpr char kWeightsMagic[5] = {'R', 'O', 'S', 'E', 'W'};
constexpr std::uint8_t kWeightsVersion = 0x01;

inline void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

class WeightsReader {
public:
    WeightsReader(const std::string& bytes, const std::string& path)
        : bytes_(bytes), path_(path) {}

    void need(std::size_t n, const std::string& what) {
        if (pos_ + n > bytes_.size())
            throw WeightsError(WeightsError::Kind::Truncated,
                               path_ + ": truncated while reading " + what);
    }

    std::uint8_t u8(const std::string& what) {
        need(1, what);
        return static_cast<std::uint8_t>(bytes_[pos_++]);
    }

    std::uint16_t u16(const std::string& what) {
        need(2, what);
        std::uint16_t v = static_cast<std::uint16_t>(
            static_cast<std::uint8_t>(bytes_[pos_]) |
            (static_cast<std::uint8_t>(bytes_[pos_ + 1]) << 8));
        pos_ += 2;
        return v;
    }

    std::uint32_t u32(const std::string& what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }

    float f32(const std::string& what) {
        std::uint32_t bits = u32(what);
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }

    std::string raw(std::size_t n, const std::string& what) {
        need(n, what);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    bool at_end() const { return pos_ == bytes_.size(); }

private:
    const std::string& bytes_;
    std::string path_;
    std::size_t pos_ = 0;
};

}  // namespace detail

template <typename T>
void save_weights(const NetworkWeights<T>& weights, const std::string& path) {
    std::string out;
    out.append(detail::kWeightsMagic, sizeof detail::kWeightsMagic);
    out.push_back(static_cast<char>(detail::kWeightsVersion));

    const auto refs = tensor_refs(weights);
    detail::put_u32(out, static_cast<std::uint32_t>(refs.size()));
    for (const auto& ref : refs) {
        detail::put_u16(out, static_cast<std::uint16_t>(ref.name.size()));
        out.append(ref.name);
        out.push_back(static_cast<char>(ref.dims.size()));
        for (std::uint32_t d : ref.dims) detail::put_u32(out, d);
        for (T v : *ref.values) detail::put_f32(out, static_cast<float>(v));
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("short write to " + path);
}

template <typename T = float>
NetworkWeights<T> load_weights(const std::string& path, const NetworkConfig& cfg = {}) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open weights file " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    detail::WeightsReader r(bytes, path);
    if (bytes.size() < sizeof detail::kWeightsMagic ||
        std::memcmp(bytes.data(), detail::kWeightsMagic, sizeof detail::kWeightsMagic) != 0)
        throw WeightsError(WeightsError::Kind::BadMagic, path + ": bad magic");
    r.raw(sizeof detail::kWeightsMagic, "magic");
    const std::uint8_t version = r.u8("version");
    if (version != detail::kWeightsVersion)
        throw WeightsError(WeightsError::Kind::BadVersion,
                           path + ": unsupported version " + std::to_string(version));

    NetworkWeights<T> weights = NetworkWeights<T>::zeros(cfg);
    auto refs = tensor_refs(weights);

    const std::uint32_t count = r.u32("tensor count");
    if (count != refs.size())
        throw WeightsError(WeightsError::Kind::ShapeMismatch,
                           path + ": expected " + std::to_string(refs.size()) + " tensors, found " +
                               std::to_string(count));

    for (auto& ref : refs) {
        const std::uint16_t name_len = r.u16("name length of " + ref.name);
        const std::string name = r.raw(name_len, "name of " + ref.name);
        if (name != ref.name)
            throw WeightsError(WeightsError::Kind::ShapeMismatch,
                               path + ": expected tensor " + ref.name + ", found " + name);
        const std::uint8_t ndim = r.u8("ndim of " + ref.name);
        if (ndim != ref.dims.size())
            throw WeightsError(WeightsError::Kind::ShapeMismatch,
                               path + ": tensor " + ref.name + " has wrong rank");
        for (std::size_t i = 0; i < ref.dims.size(); ++i) {
            const std::uint32_t d = r.u32("dims of " + ref.name);
            if (d != ref.dims[i])
                throw WeightsError(WeightsError::Kind::ShapeMismatch,
                                   path + ": tensor " + ref.name + " has wrong shape");
        }
        for (auto& v : *ref.values) v = static_cast<T>(r.f32("values of " + ref.name));
    }
    if (!r.at_end())
        throw WeightsError(WeightsError::Kind::TrailingData, path + ": trailing data after tensors");
    return weights;
}

}  // namespace rose
