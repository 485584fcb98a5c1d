#pragma once

// Shared helpers for the test suites. The oracles here are intentionally
// written as straight loops, independent of the library's kernel code paths.

#include <cmath>
#include <cstdint>
#include <vector>

#include "rose/rng.hpp"
#include "rose/tensor.hpp"

namespace testutil {

template <typename T>
rose::FeatureMap<T> random_map(int c, int h, int w, rose::Rng& rng, double lo = -1.0,
                               double hi = 1.0) {
    rose::FeatureMap<T> m(c, h, w);
    for (auto& v : m.values) v = static_cast<T>(rng.uniform(lo, hi));
    return m;
}

template <typename T>
rose::ConvKernel<T> random_kernel(int oc, int ic, int kh, int kw, rose::Rng& rng,
                                  double scale = 0.5) {
    rose::ConvKernel<T> k(oc, ic, kh, kw);
    for (auto& v : k.weights) v = static_cast<T>(rng.uniform(-scale, scale));
    for (auto& v : k.bias) v = static_cast<T>(rng.uniform(-scale, scale));
    return k;
}

// Quadruple-loop cross-correlation with zero same-padding; the reference for
// conv2d.
template <typename T>
rose::FeatureMap<T> naive_conv2d(const rose::FeatureMap<T>& in, const rose::ConvKernel<T>& k) {
    const int py = k.kernel_h / 2, px = k.kernel_w / 2;
    rose::FeatureMap<T> out(k.out_channels, in.height, in.width);
    for (int oc = 0; oc < k.out_channels; ++oc)
        for (int y = 0; y < in.height; ++y)
            for (int x = 0; x < in.width; ++x) {
                double acc = static_cast<double>(k.bias[oc]);
                for (int ic = 0; ic < k.in_channels; ++ic)
                    for (int ky = 0; ky < k.kernel_h; ++ky)
                        for (int kx = 0; kx < k.kernel_w; ++kx) {
                            const int sy = y + ky - py, sx = x + kx - px;
                            if (sy < 0 || sy >= in.height || sx < 0 || sx >= in.width) continue;
                            acc += static_cast<double>(k.w(oc, ic, ky, kx)) *
                                   static_cast<double>(in.at(ic, sy, sx));
                        }
                out.at(oc, y, x) = static_cast<T>(acc);
            }
    return out;
}

// Central finite difference of f() with respect to the referenced scalar.
template <typename F>
double central_diff(double& x, F&& f, double h = 1e-4) {
    const double orig = x;
    x = orig + h;
    const double fp = f();
    x = orig - h;
    const double fm = f();
    x = orig;
    return (fp - fm) / (2.0 * h);
}

inline bool grad_close(double analytic, double numeric, double rtol, double atol = 1e-9) {
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    return std::abs(analytic - numeric) <= atol + rtol * scale;
}

template <typename T>
double weighted_sum(const rose::FeatureMap<T>& m, const rose::FeatureMap<T>& w) {
    double acc = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i)
        acc += static_cast<double>(m.values[i]) * static_cast<double>(w.values[i]);
    return acc;
}

}  // namespace testutil
