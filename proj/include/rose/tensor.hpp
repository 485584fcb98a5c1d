#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rose {

// Dense rank-3 activation array, row-major by (channel, row, column).
template <typename T>
struct FeatureMap {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<T> values;

    FeatureMap() = default;

    FeatureMap(int c, int h, int w, T fill = T(0)) : channels(c), height(h), width(w) {
        if (c <= 0 || h <= 0 || w <= 0)
            throw std::invalid_argument("FeatureMap: non-positive shape " + shape_string(c, h, w));
        values.assign(static_cast<std::size_t>(c) * h * w, fill);
    }

    static std::string shape_string(int c, int h, int w) {
        return std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
    }
    std::string shape_string() const { return shape_string(channels, height, width); }

    std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }
    std::size_t size() const { return values.size(); }
    bool empty() const { return values.empty(); }

    T* plane(int c) { return values.data() + static_cast<std::size_t>(c) * plane_size(); }
    const T* plane(int c) const { return values.data() + static_cast<std::size_t>(c) * plane_size(); }

    T& at(int c, int y, int x) {
        return values[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    const T& at(int c, int y, int x) const {
        return values[(static_cast<std::size_t>(c) * height + y) * width + x];
    }

    bool same_shape(const FeatureMap& o) const {
        return channels == o.channels && height == o.height && width == o.width;
    }
};

template <typename T>
bool all_finite(const FeatureMap<T>& m) {
    for (T v : m.values)
        if (!std::isfinite(v)) return false;
    return true;
}

template <typename T>
struct ConvKernel {
    int out_channels = 0;
    int in_channels = 0;
    int kernel_h = 0;
    int kernel_w = 0;
    std::vector<T> weights;  // (out_channel, in_channel, ky, kx)
    std::vector<T> bias;     // per out channel

    ConvKernel() = default;

    ConvKernel(int oc, int ic, int kh, int kw)
        : out_channels(oc), in_channels(ic), kernel_h(kh), kernel_w(kw) {
        if (oc <= 0 || ic <= 0 || kh <= 0 || kw <= 0)
            throw std::invalid_argument("ConvKernel: non-positive shape");
        weights.assign(static_cast<std::size_t>(oc) * ic * kh * kw, T(0));
        bias.assign(static_cast<std::size_t>(oc), T(0));
    }

    T& w(int oc, int ic, int ky, int kx) {
        return weights[((static_cast<std::size_t>(oc) * in_channels + ic) * kernel_h + ky) * kernel_w + kx];
    }
    const T& w(int oc, int ic, int ky, int kx) const {
        return weights[((static_cast<std::size_t>(oc) * in_channels + ic) * kernel_h + ky) * kernel_w + kx];
    }

    bool same_shape(const ConvKernel& o) const {
        return out_channels == o.out_channels && in_channels == o.in_channels &&
               kernel_h == o.kernel_h && kernel_w == o.kernel_w;
    }
};

namespace detail {

template <typename T>
void require_nonempty(const FeatureMap<T>& m, const char* op) {
    if (m.empty()) throw std::invalid_argument(std::string(op) + ": empty input");
}

template <typename T>
FeatureMap<T> pad_spatial(const FeatureMap<T>& in, int py, int px) {
    FeatureMap<T> out(in.channels, in.height + 2 * py, in.width + 2 * px);
    for (int c = 0; c < in.channels; ++c) {
        const T* src = in.plane(c);
        T* dst = out.plane(c) + static_cast<std::size_t>(py) * out.width + px;
        for (int y = 0; y < in.height; ++y)
            std::copy(src + static_cast<std::size_t>(y) * in.width,
                      src + static_cast<std::size_t>(y + 1) * in.width,
                      dst + static_cast<std::size_t>(y) * out.width);
    }
    return out;
}

// Dot product with eight fixed-order lane accumulators: vectorizes without
// -ffast-math and the summation order does not depend on the build.
template <typename T>
T dot(const T* a, const T* b, int n) {
    T acc[8] = {T(0), T(0), T(0), T(0), T(0), T(0), T(0), T(0)};
    int i = 0;
    for (; i + 8 <= n; i += 8)
        for (int l = 0; l < 8; ++l) acc[l] += a[i + l] * b[i + l];
    T s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

template <typename T>
T sum(const T* a, int n) {
    T acc[8] = {T(0), T(0), T(0), T(0), T(0), T(0), T(0), T(0)};
    int i = 0;
    for (; i + 8 <= n; i += 8)
        for (int l = 0; l < 8; ++l) acc[l] += a[i + l];
    T s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (; i < n; ++i) s += a[i];
    return s;
}

}  // namespace detail

// Cross-correlation (no kernel flip), stride 1, zero "same" padding: output
// keeps the input's spatial size for any odd kernel.
template <typename T>
FeatureMap<T> conv2d(const FeatureMap<T>& input, const ConvKernel<T>& kernel) {
    detail::require_nonempty(input, "conv2d");
    if (kernel.in_channels != input.channels)
        throw std::invalid_argument("conv2d: kernel expects " + std::to_string(kernel.in_channels) +
                                    " input channels, got " + std::to_string(input.channels));
    if (kernel.kernel_h % 2 == 0 || kernel.kernel_w % 2 == 0)
        throw std::invalid_argument("conv2d: kernel dims must be odd for same padding");

    const int kh = kernel.kernel_h, kw = kernel.kernel_w;
    const FeatureMap<T> padded = detail::pad_spatial(input, kh / 2, kw / 2);
    const int H = input.height, W = input.width, PW = padded.width;
    const int taps = input.channels * kh * kw;

    // Each output row accumulates in a hot buffer, four taps jammed per pass.
    // Tap order (ic, ky, kx) matches the per-out-channel weight layout, so the
    // weight pointer just walks the kernel.
    FeatureMap<T> out(kernel.out_channels, H, W);
    std::vector<const T*> src(static_cast<std::size_t>(taps));
    std::vector<T> row(static_cast<std::size_t>(W));

    for (int y = 0; y < H; ++y) {
        int t = 0;
        for (int ic = 0; ic < input.channels; ++ic)
            for (int ky = 0; ky < kh; ++ky)
                for (int kx = 0; kx < kw; ++kx)
                    src[static_cast<std::size_t>(t++)] =
                        padded.plane(ic) + static_cast<std::size_t>(y + ky) * PW + kx;

        for (int oc = 0; oc < kernel.out_channels; ++oc) {
            const T* w = kernel.weights.data() + static_cast<std::size_t>(oc) * taps;
            T* __restrict__ acc = row.data();
            std::fill(acc, acc + W, kernel.bias[static_cast<std::size_t>(oc)]);
            int k = 0;
            for (; k + 4 <= taps; k += 4) {
                const T w0 = w[k], w1 = w[k + 1], w2 = w[k + 2], w3 = w[k + 3];
                const T* __restrict__ s0 = src[static_cast<std::size_t>(k)];
                const T* __restrict__ s1 = src[static_cast<std::size_t>(k) + 1];
                const T* __restrict__ s2 = src[static_cast<std::size_t>(k) + 2];
                const T* __restrict__ s3 = src[static_cast<std::size_t>(k) + 3];
                for (int x = 0; x < W; ++x)
                    acc[x] += (w0 * s0[x] + w1 * s1[x]) + (w2 * s2[x] + w3 * s3[x]);
            }
            for (; k < taps; ++k) {
                const T wk = w[k];
                const T* __restrict__ s = src[static_cast<std::size_t>(k)];
                for (int x = 0; x < W; ++x) acc[x] += wk * s[x];
            }
            std::copy(row.begin(), row.end(), out.plane(oc) + static_cast<std::size_t>(y) * W);
        }
    }
    return out;
}

template <typename T>
struct ConvGrads {
    FeatureMap<T> input;   // dL/d input
    ConvKernel<T> kernel;  // dL/d weights and dL/d bias, in kernel layout
};

// Gradients of sum(grad_out * conv2d(input, kernel)) w.r.t. input, weights
// and bias. The input gradient is itself a same-padded cross-correlation of
// grad_out with the kernel flipped and its channel axes swapped; pass
// need_input_grad = false to skip it when the input is a graph source.
template <typename T>
ConvGrads<T> conv2d_backward(const FeatureMap<T>& input, const ConvKernel<T>& kernel,
                             const FeatureMap<T>& grad_out, bool need_input_grad = true) {
    detail::require_nonempty(input, "conv2d_backward");
    if (kernel.in_channels != input.channels)
        throw std::invalid_argument("conv2d_backward: kernel/input channel mismatch");
    if (grad_out.channels != kernel.out_channels || grad_out.height != input.height ||
        grad_out.width != input.width)
        throw std::invalid_argument("conv2d_backward: grad_out shape " + grad_out.shape_string() +
                                    " does not match conv output");

    const int kh = kernel.kernel_h, kw = kernel.kernel_w;
    const FeatureMap<T> padded = detail::pad_spatial(input, kh / 2, kw / 2);
    const int H = input.height, W = input.width, PW = padded.width;

    ConvGrads<T> g;
    g.kernel = ConvKernel<T>(kernel.out_channels, kernel.in_channels, kh, kw);

    // Weight gradients are tap-plane dot products. Copying each shifted tap
    // plane into a contiguous buffer once per input channel turns them into
    // long unstrided dots shared by every output channel.
    const int ktaps = kh * kw;
    const int plane = H * W;
    std::vector<T> cols(static_cast<std::size_t>(ktaps) * plane);
    for (int oc = 0; oc < kernel.out_channels; ++oc)
        g.kernel.bias[static_cast<std::size_t>(oc)] =
            detail::sum(grad_out.plane(oc), plane);
    for (int ic = 0; ic < input.channels; ++ic) {
        const T* pp = padded.plane(ic);
        for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
                T* dst = cols.data() + (static_cast<std::size_t>(ky) * kw + kx) * plane;
                for (int y = 0; y < H; ++y)
                    std::copy(pp + static_cast<std::size_t>(y + ky) * PW + kx,
                              pp + static_cast<std::size_t>(y + ky) * PW + kx + W,
                              dst + static_cast<std::size_t>(y) * W);
            }
        for (int oc = 0; oc < kernel.out_channels; ++oc) {
            const T* go = grad_out.plane(oc);
            T* wout = g.kernel.weights.data() +
                      (static_cast<std::size_t>(oc) * input.channels + ic) * ktaps;
            for (int t = 0; t < ktaps; ++t)
                wout[t] = detail::dot(go, cols.data() + static_cast<std::size_t>(t) * plane, plane);
        }
    }

    if (need_input_grad) {
        ConvKernel<T> flipped(kernel.in_channels, kernel.out_channels, kh, kw);
        for (int oc = 0; oc < kernel.out_channels; ++oc)
            for (int ic = 0; ic < kernel.in_channels; ++ic)
                for (int ky = 0; ky < kh; ++ky)
                    for (int kx = 0; kx < kw; ++kx)
                        flipped.w(ic, oc, kh - 1 - ky, kw - 1 - kx) = kernel.w(oc, ic, ky, kx);
        g.input = conv2d(grad_out, flipped);
    }
    return g;
}

template <typename T>
struct MaxPoolResult {
    FeatureMap<T> output;
    std::vector<std::int32_t> argmax;  // flat index into input.values per output cell
};

// 2x2 window, stride 2. Ties go to the first cell in row-major scan order of
// the window, so the backward route is deterministic.
template <typename T>
MaxPoolResult<T> maxpool2x2(const FeatureMap<T>& input) {
    detail::require_nonempty(input, "maxpool2x2");
    if (input.height % 2 != 0 || input.width % 2 != 0)
        throw std::invalid_argument("maxpool2x2: odd spatial dims " + input.shape_string());

    const int OH = input.height / 2, OW = input.width / 2;
    MaxPoolResult<T> r{FeatureMap<T>(input.channels, OH, OW),
                       std::vector<std::int32_t>(static_cast<std::size_t>(input.channels) * OH * OW)};
    std::size_t out_idx = 0;
    for (int c = 0; c < input.channels; ++c) {
        const T* ip = input.plane(c);
        const std::size_t base = static_cast<std::size_t>(c) * input.plane_size();
        for (int y = 0; y < OH; ++y) {
            for (int x = 0; x < OW; ++x) {
                const std::size_t i00 = static_cast<std::size_t>(2 * y) * input.width + 2 * x;
                const std::size_t cand[4] = {i00, i00 + 1, i00 + input.width, i00 + input.width + 1};
                std::size_t best = cand[0];
                for (int k = 1; k < 4; ++k)
                    if (ip[cand[k]] > ip[best]) best = cand[k];
                r.output.values[out_idx] = ip[best];
                r.argmax[out_idx] = static_cast<std::int32_t>(base + best);
                ++out_idx;
            }
        }
    }
    return r;
}

template <typename T>
FeatureMap<T> maxpool2x2_backward(const FeatureMap<T>& grad_out,
                                  const std::vector<std::int32_t>& argmax, int in_channels,
                                  int in_height, int in_width) {
    if (grad_out.size() != argmax.size())
        throw std::invalid_argument("maxpool2x2_backward: grad/argmax size mismatch");
    FeatureMap<T> grad_in(in_channels, in_height, in_width);
    for (std::size_t i = 0; i < argmax.size(); ++i)
        grad_in.values[static_cast<std::size_t>(argmax[i])] += grad_out.values[i];
    return grad_in;
}

// Per-pixel pooling along the channel axis: channel 0 is the mean, channel 1
// the max over input channels.
template <typename T>
FeatureMap<T> channel_pool(const FeatureMap<T>& input) {
    detail::require_nonempty(input, "channel_pool");
    FeatureMap<T> out(2, input.height, input.width);
    T* mean_p = out.plane(0);
    T* max_p = out.plane(1);
    const std::size_t n = input.plane_size();
    const T chans = static_cast<T>(input.channels);
    for (std::size_t p = 0; p < n; ++p) {
        T s = input.values[p];
        T m = input.values[p];
        for (int c = 1; c < input.channels; ++c) {
            const T v = input.values[static_cast<std::size_t>(c) * n + p];
            s += v;
            if (v > m) m = v;
        }
        mean_p[p] = s / chans;
        max_p[p] = m;
    }
    return out;
}

// Recomputes the per-pixel max channel (first max wins, matching forward).
template <typename T>
FeatureMap<T> channel_pool_backward(const FeatureMap<T>& input, const FeatureMap<T>& grad_out) {
    if (grad_out.channels != 2 || grad_out.height != input.height || grad_out.width != input.width)
        throw std::invalid_argument("channel_pool_backward: grad shape mismatch");
    FeatureMap<T> grad_in(input.channels, input.height, input.width);
    const std::size_t n = input.plane_size();
    const T chans = static_cast<T>(input.channels);
    const T* gmean = grad_out.plane(0);
    const T* gmax = grad_out.plane(1);
    for (std::size_t p = 0; p < n; ++p) {
        int arg = 0;
        T m = input.values[p];
        for (int c = 1; c < input.channels; ++c) {
            const T v = input.values[static_cast<std::size_t>(c) * n + p];
            if (v > m) {
                m = v;
                arg = c;
            }
        }
        const T gm = gmean[p] / chans;
        for (int c = 0; c < input.channels; ++c)
            grad_in.values[static_cast<std::size_t>(c) * n + p] = gm;
        grad_in.values[static_cast<std::size_t>(arg) * n + p] += gmax[p];
    }
    return grad_in;
}

// Saturation-safe on both tails: large negative inputs go through the
// exp(x)/(1+exp(x)) branch instead of overflowing exp(-x).
template <typename T>
FeatureMap<T> sigmoid(const FeatureMap<T>& input) {
    detail::require_nonempty(input, "sigmoid");
    FeatureMap<T> out(input.channels, input.height, input.width);
    for (std::size_t i = 0; i < input.size(); ++i) {
        const T x = input.values[i];
        if (x >= T(0)) {
            out.values[i] = T(1) / (T(1) + std::exp(-x));
        } else {
            const T e = std::exp(x);
            out.values[i] = e / (T(1) + e);
        }
    }
    return out;
}

// Takes the forward output, not the pre-activation: d sigmoid = s * (1 - s).
template <typename T>
FeatureMap<T> sigmoid_backward(const FeatureMap<T>& output, const FeatureMap<T>& grad_out) {
    if (!output.same_shape(grad_out))
        throw std::invalid_argument("sigmoid_backward: shape mismatch");
    FeatureMap<T> grad_in(output.channels, output.height, output.width);
    for (std::size_t i = 0; i < output.size(); ++i) {
        const T s = output.values[i];
        grad_in.values[i] = grad_out.values[i] * s * (T(1) - s);
    }
    return grad_in;
}

template <typename T>
FeatureMap<T> relu(const FeatureMap<T>& input) {
    detail::require_nonempty(input, "relu");
    FeatureMap<T> out(input.channels, input.height, input.width);
    for (std::size_t i = 0; i < input.size(); ++i)
        out.values[i] = input.values[i] > T(0) ? input.values[i] : T(0);
    return out;
}

// Subgradient 0 at the kink; output > 0 iff the pre-activation was > 0, so
// the forward output doubles as the mask.
template <typename T>
FeatureMap<T> relu_backward(const FeatureMap<T>& output, const FeatureMap<T>& grad_out) {
    if (!output.same_shape(grad_out))
        throw std::invalid_argument("relu_backward: shape mismatch");
    FeatureMap<T> grad_in(output.channels, output.height, output.width);
    for (std::size_t i = 0; i < output.size(); ++i)
        grad_in.values[i] = output.values[i] > T(0) ? grad_out.values[i] : T(0);
    return grad_in;
}

// Nearest-neighbor doubling: every pixel becomes a 2x2 block.
template <typename T>
FeatureMap<T> upsample2x(const FeatureMap<T>& input) {
    detail::require_nonempty(input, "upsample2x");
    FeatureMap<T> out(input.channels, input.height * 2, input.width * 2);
    for (int c = 0; c < input.channels; ++c) {
        const T* ip = input.plane(c);
        T* op = out.plane(c);
        for (int y = 0; y < input.height; ++y) {
            T* row0 = op + static_cast<std::size_t>(2 * y) * out.width;
            T* row1 = row0 + out.width;
            const T* src = ip + static_cast<std::size_t>(y) * input.width;
            for (int x = 0; x < input.width; ++x) {
                row0[2 * x] = src[x];
                row0[2 * x + 1] = src[x];
                row1[2 * x] = src[x];
                row1[2 * x + 1] = src[x];
            }
        }
    }
    return out;
}

template <typename T>
FeatureMap<T> upsample2x_backward(const FeatureMap<T>& grad_out) {
    detail::require_nonempty(grad_out, "upsample2x_backward");
    if (grad_out.height % 2 != 0 || grad_out.width % 2 != 0)
        throw std::invalid_argument("upsample2x_backward: odd grad dims");
    FeatureMap<T> grad_in(grad_out.channels, grad_out.height / 2, grad_out.width / 2);
    for (int c = 0; c < grad_out.channels; ++c) {
        const T* gp = grad_out.plane(c);
        T* ip = grad_in.plane(c);
        for (int y = 0; y < grad_in.height; ++y) {
            const T* row0 = gp + static_cast<std::size_t>(2 * y) * grad_out.width;
            const T* row1 = row0 + grad_out.width;
            T* dst = ip + static_cast<std::size_t>(y) * grad_in.width;
            for (int x = 0; x < grad_in.width; ++x)
                dst[x] = (row0[2 * x] + row0[2 * x + 1]) + (row1[2 * x] + row1[2 * x + 1]);
        }
    }
    return grad_in;
}

// Elementwise product; b may have a single channel, broadcast across a's
// channels (feature refinement by a spatial attention map).
template <typename T>
FeatureMap<T> multiply(const FeatureMap<T>& a, const FeatureMap<T>& b) {
    detail::require_nonempty(a, "multiply");
    if (a.height != b.height || a.width != b.width ||
        (b.channels != a.channels && b.channels != 1))
        throw std::invalid_argument("multiply: incompatible shapes " + a.shape_string() + " vs " +
                                    b.shape_string());
    FeatureMap<T> out(a.channels, a.height, a.width);
    if (b.channels == a.channels) {
        for (std::size_t i = 0; i < a.size(); ++i) out.values[i] = a.values[i] * b.values[i];
    } else {
        const T* bp = b.plane(0);
        const std::size_t n = a.plane_size();
        for (int c = 0; c < a.channels; ++c) {
            const T* ap = a.plane(c);
            T* op = out.plane(c);
            for (std::size_t p = 0; p < n; ++p) op[p] = ap[p] * bp[p];
        }
    }
    return out;
}

// grad_a = grad * b, grad_b = grad * a (summed over the broadcast axis when b
// has one channel).
template <typename T>
std::pair<FeatureMap<T>, FeatureMap<T>> multiply_backward(const FeatureMap<T>& a,
                                                          const FeatureMap<T>& b,
                                                          const FeatureMap<T>& grad_out) {
    if (!grad_out.same_shape(a))
        throw std::invalid_argument("multiply_backward: grad shape mismatch");
    if (a.height != b.height || a.width != b.width ||
        (b.channels != a.channels && b.channels != 1))
        throw std::invalid_argument("multiply_backward: incompatible shapes");

    FeatureMap<T> grad_a(a.channels, a.height, a.width);
    FeatureMap<T> grad_b(b.channels, b.height, b.width);
    if (b.channels == a.channels) {
        for (std::size_t i = 0; i < a.size(); ++i) {
            grad_a.values[i] = grad_out.values[i] * b.values[i];
            grad_b.values[i] = grad_out.values[i] * a.values[i];
        }
    } else {
        const T* bp = b.plane(0);
        T* gb = grad_b.plane(0);
        const std::size_t n = a.plane_size();
        for (int c = 0; c < a.channels; ++c) {
            const T* ap = a.plane(c);
            const T* gp = grad_out.plane(c);
            T* ga = grad_a.plane(c);
            for (std::size_t p = 0; p < n; ++p) {
                ga[p] = gp[p] * bp[p];
                gb[p] += gp[p] * ap[p];
            }
        }
    }
    return {std::move(grad_a), std::move(grad_b)};
}

}  // namespace rose
