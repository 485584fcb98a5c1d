#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>

#include "rose/errors.hpp"
#include "rose/tensor.hpp"

namespace rose {

namespace detail {

inline int pgm_token(std::istream& in, const std::string& path) {
    // skip whitespace and '#' comment lines between header fields
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (!std::isspace(c)) {
            break;
        }
        c = in.get();
    }
    if (c == EOF || !std::isdigit(c)) throw IoError(path + ": malformed PGM header");
    int value = 0;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        if (value > 1 << 30) throw IoError(path + ": absurd PGM header value");
        c = in.get();
    }
    if (c != EOF) in.unget();
    return value;
}

}  // namespace detail

// Binary PGM (P5), maxval 255. Returns a 1-channel map normalized to [0, 1].
inline FeatureMap<float> read_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open image " + path);

    char m0 = 0, m1 = 0;
    f.get(m0);
    f.get(m1);
    if (!f || m0 != 'P' || m1 != '5') throw IoError(path + ": not a binary PGM (P5) file");

    const int w = detail::pgm_token(f, path);
    const int h = detail::pgm_token(f, path);
    const int maxval = detail::pgm_token(f, path);
    if (w <= 0 || h <= 0) throw IoError(path + ": bad PGM dimensions");
    if (maxval != 255) throw IoError(path + ": PGM maxval must be 255, got " + std::to_string(maxval));
    f.get();  // single whitespace byte before the raster

    std::string raster(static_cast<std::size_t>(w) * h, '\0');
    f.read(raster.data(), static_cast<std::streamsize>(raster.size()));
    if (f.gcount() != static_cast<std::streamsize>(raster.size()))
        throw IoError(path + ": truncated PGM raster");

    FeatureMap<float> img(1, h, w);
    for (std::size_t i = 0; i < raster.size(); ++i)
        img.values[i] = static_cast<float>(static_cast<std::uint8_t>(raster[i])) / 255.0f;
    return img;
}

// Writes a 1-channel map in [0, 1] as binary PGM with a fixed header layout,
// so identical maps give byte-identical files.
inline void write_pgm(const FeatureMap<float>& img, const std::string& path) {
    if (img.channels != 1) throw std::invalid_argument("write_pgm: image must have one channel");
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << "P5\n" << img.width << " " << img.height << "\n255\n";
    std::string raster(img.size(), '\0');
    for (std::size_t i = 0; i < img.size(); ++i) {
        float v = img.values[i];
        v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
        raster[i] = static_cast<char>(static_cast<std::uint8_t>(std::lround(v * 255.0f)));
    }
    f.write(raster.data(), static_cast<std::streamsize>(raster.size()));
    if (!f) throw IoError("short write to " + path);
}

}  // namespace rose
