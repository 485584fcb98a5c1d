#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "rose/points.hpp"
#include "rose/tensor.hpp"

namespace rose {

struct HeatmapConfig {
    double sigma = 6.0;           // Gaussian std dev in pixels
    double clamp_epsilon = 1e-6;  // predictions clamped into [eps, 1-eps] before logs

    void validate() const {
        if (sigma <= 0.0) throw std::invalid_argument("HeatmapConfig: sigma must be positive");
        if (clamp_epsilon <= 0.0 || clamp_epsilon >= 0.5)
            throw std::invalid_argument("HeatmapConfig: clamp_epsilon must be in (0, 0.5)");
    }
};

// Ground-truth heatmap: per pixel, the max over annotated points of
// exp(-d^2 / (2 sigma^2)). Points snap to their nearest pixel so the map is
// exactly 1 there; overlaps combine by max, keeping peaks at 1.
template <typename T>
FeatureMap<T> gaussian_heatmap(const std::vector<Point>& points, int h, int w,
                               const HeatmapConfig& cfg = {}) {
    cfg.validate();
    if (h <= 0 || w <= 0) throw std::invalid_argument("gaussian_heatmap: non-positive dims");

    std::vector<std::pair<int, int>> px;
    px.reserve(points.size());
    for (const Point& p : points) {
        if (!(p.x >= 0.0 && p.x < w && p.y >= 0.0 && p.y < h))
            throw std::invalid_argument("gaussian_heatmap: point (" + std::to_string(p.x) + ", " +
                                        std::to_string(p.y) + ") outside " + std::to_string(w) +
                                        "x" + std::to_string(h));
        int ix = static_cast<int>(std::lround(p.x));
        int iy = static_cast<int>(std::lround(p.y));
        px.emplace_back(std::min(ix, w - 1), std::min(iy, h - 1));
    }

    FeatureMap<T> map(1, h, w);
    const double inv = 1.0 / (2.0 * cfg.sigma * cfg.sigma);
    for (const auto& [cx, cy] : px) {
        T* v = map.plane(0);
        for (int y = 0; y < h; ++y) {
            const double dy2 = static_cast<double>(y - cy) * (y - cy);
            for (int x = 0; x < w; ++x) {
                const double d2 = static_cast<double>(x - cx) * (x - cx) + dy2;
                const T g = static_cast<T>(std::exp(-d2 * inv));
                T& cell = v[static_cast<std::size_t>(y) * w + x];
                if (g > cell) cell = g;
            }
        }
    }
    // exact peaks regardless of rounding in exp
    for (const auto& [cx, cy] : px) map.at(0, cy, cx) = T(1);
    return map;
}

namespace detail {

template <typename T>
void check_heatmap_pair(const FeatureMap<T>& y, const FeatureMap<T>& yhat) {
    if (y.channels != 1 || yhat.channels != 1)
        throw std::invalid_argument("focal loss: heatmaps must have one channel");
    if (!y.same_shape(yhat))
        throw std::invalid_argument("focal loss: dim mismatch " + y.shape_string() + " vs " +
                                    yhat.shape_string());
}

template <typename T>
std::size_t count_targets(const FeatureMap<T>& y) {
    std::size_t n = 0;
    for (T v : y.values)
        if (v == T(1)) ++n;
    return n;
}

}  // namespace detail

// Penalty-reduced focal loss over heatmaps:
//   L = (-1/N) sum [ y==1 : (1-yh)^2 log yh
//                    else : (1-y)^4 yh^2 log(1-yh) ]
// with N the number of exact-1 target pixels (at least 1).
template <typename T>
T vfocal_loss(const FeatureMap<T>& y, const FeatureMap<T>& yhat, const HeatmapConfig& cfg = {}) {
    cfg.validate();
    detail::check_heatmap_pair(y, yhat);
    const double eps = cfg.clamp_epsilon;
    const double n = static_cast<double>(std::max<std::size_t>(1, detail::count_targets(y)));

    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double t = static_cast<double>(y.values[i]);
        double p = static_cast<double>(yhat.values[i]);
        p = std::min(1.0 - eps, std::max(eps, p));
        if (t == 1.0) {
            acc += (1.0 - p) * (1.0 - p) * std::log(p);
        } else {
            const double w = (1.0 - t) * (1.0 - t);
            acc += w * w * p * p * std::log(1.0 - p);
        }
    }
    return static_cast<T>(-acc / n);
}

// Analytic dL/d yhat, evaluated at the clamped prediction. Inside
// [eps, 1-eps] the clamp is the identity; outside, using the boundary value
// keeps the recovery direction alive (a positive pixel stuck below eps still
// sees the ~1/eps pull upward) while the push further out stays O(eps^2).
// Zeroing clamped pixels instead makes a fully collapsed map an absorbing
// state under training.
template <typename T>
FeatureMap<T> vfocal_loss_grad(const FeatureMap<T>& y, const FeatureMap<T>& yhat,
                               const HeatmapConfig& cfg = {}) {
    cfg.validate();
    detail::check_heatmap_pair(y, yhat);
    const double eps = cfg.clamp_epsilon;
    const double inv_n =
        1.0 / static_cast<double>(std::max<std::size_t>(1, detail::count_targets(y)));

    FeatureMap<T> grad(1, y.height, y.width);
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double t = static_cast<double>(y.values[i]);
        double p = static_cast<double>(yhat.values[i]);
        p = std::min(1.0 - eps, std::max(eps, p));
        double d;
        if (t == 1.0) {
            d = 2.0 * (1.0 - p) * std::log(p) - (1.0 - p) * (1.0 - p) / p;
        } else {
            const double w = (1.0 - t) * (1.0 - t);
            d = -(w * w) * (2.0 * p * std::log(1.0 - p) - p * p / (1.0 - p));
        }
        grad.values[i] = static_cast<T>(d * inv_n);
    }
    return grad;
}

}  // namespace rose
