#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "rose/points.hpp"
#include "rose/tensor.hpp"

namespace rose {

// Greedy peak extraction: repeatedly take the highest remaining pixel at or
// above min_value, emit it, and suppress everything within Euclidean distance
// <= radius. Ties go to the earliest pixel in row-major order, so the result
// is deterministic and already sorted by descending score.
template <typename T>
std::vector<SingularPoint> nms(const FeatureMap<T>& map, PointKind kind, double radius = 20.0,
                               double min_value = 0.2) {
    if (map.channels != 1) throw std::invalid_argument("nms: map must have one channel");
    if (radius < 0.0 || min_value < 0.0) throw std::invalid_argument("nms: negative parameter");

    const int h = map.height, w = map.width;
    const T* v = map.plane(0);
    std::vector<char> suppressed(map.plane_size(), 0);
    const int r = static_cast<int>(std::floor(radius));
    const double r2 = radius * radius;

    std::vector<SingularPoint> out;
    for (;;) {
        T best = T(0);
        std::size_t best_idx = 0;
        bool found = false;
        std::size_t idx = 0;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x, ++idx) {
                if (suppressed[idx]) continue;
                const T val = v[idx];
                if (static_cast<double>(val) < min_value) continue;
                if (!found || val > best) {
                    best = val;
                    best_idx = idx;
                    found = true;
                }
            }
        }
        if (!found) break;

        const int by = static_cast<int>(best_idx) / w;
        const int bx = static_cast<int>(best_idx) % w;
        out.push_back({bx, by, kind, static_cast<double>(best)});

        for (int y = std::max(0, by - r); y <= std::min(h - 1, by + r); ++y) {
            const double dy2 = static_cast<double>(y - by) * (y - by);
            for (int x = std::max(0, bx - r); x <= std::min(w - 1, bx + r); ++x) {
                const double dx = static_cast<double>(x - bx);
                if (dx * dx + dy2 <= r2) suppressed[static_cast<std::size_t>(y) * w + x] = 1;
            }
        }
    }
    return out;
}

}  // namespace rose
