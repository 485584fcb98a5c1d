#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rose/errors.hpp"
#include "rose/rng.hpp"
#include "rose/tensor.hpp"

namespace rose {

// Three-channel layout: a VGG-style extractor of five conv pairs, plus one
// core and one delta spatial-attention branch per scale. Spatial dims halve
// from one scale to the next.
struct NetworkConfig {
    static constexpr int scales = 5;

    int input_channels = 1;
    std::array<int, 10> feature_widths = {32, 32, 64, 64, 128, 128, 256, 256, 512, 512};
    int attention_kernel = 5;

    // The feature convs' activation; the paper fixes sigmoid only for the
    // attention conv, so this can be switched off for ablation.
    bool relu_features = true;

    // What feeds the four backbone max-pools: the core-refined maps alone, or
    // the average of core- and delta-refined maps.
    enum class PoolSource { core_refined, averaged };
    PoolSource pool_source = PoolSource::core_refined;

    void validate() const {
        if (input_channels <= 0) throw std::invalid_argument("NetworkConfig: input_channels <= 0");
        if (attention_kernel <= 0 || attention_kernel % 2 == 0)
            throw std::invalid_argument("NetworkConfig: attention_kernel must be odd and positive");
        for (int s = 0; s < scales; ++s) {
            if (feature_widths[2 * s] <= 0)
                throw std::invalid_argument("NetworkConfig: non-positive feature width");
            if (feature_widths[2 * s] != feature_widths[2 * s + 1])
                throw std::invalid_argument("NetworkConfig: widths must come in 5 equal pairs");
        }
    }

    int conv_in_channels(int i) const {  // i in [0, 10)
        return i == 0 ? input_channels : feature_widths[static_cast<std::size_t>(i - 1)];
    }
};

template <typename T>
struct NetworkWeights {
    std::array<ConvKernel<T>, 10> feature;    // 3x3 conv pairs, two per scale
    std::array<ConvKernel<T>, 5> core_att;    // 1 x 2 x k x k each
    std::array<ConvKernel<T>, 5> delta_att;

    static NetworkWeights zeros(const NetworkConfig& cfg) {
        cfg.validate();
        NetworkWeights w;
        for (int i = 0; i < 10; ++i)
            w.feature[static_cast<std::size_t>(i)] =
                ConvKernel<T>(cfg.feature_widths[static_cast<std::size_t>(i)],
                              cfg.conv_in_channels(i), 3, 3);
        for (int s = 0; s < 5; ++s) {
            w.core_att[static_cast<std::size_t>(s)] =
                ConvKernel<T>(1, 2, cfg.attention_kernel, cfg.attention_kernel);
            w.delta_att[static_cast<std::size_t>(s)] =
                ConvKernel<T>(1, 2, cfg.attention_kernel, cfg.attention_kernel);
        }
        return w;
    }
};

// Flat view over the 40 parameter tensors in serialization order: feature
// convs 1..10 (weight then bias), core attention 1..5, delta attention 1..5.
template <typename T, typename VecPtr>
struct BasicTensorRef {
    std::string name;
    VecPtr values;
    std::vector<std::uint32_t> dims;
};

template <typename T>
using TensorRef = BasicTensorRef<T, std::vector<T>*>;
template <typename T>
using ConstTensorRef = BasicTensorRef<T, const std::vector<T>*>;

namespace detail {

template <typename Ref, typename Weights>
std::vector<Ref> enumerate_tensors(Weights& w) {
    std::vector<Ref> refs;
    refs.reserve(40);
    auto add = [&refs](const std::string& base, auto& k) {
        refs.push_back({base + ".weight", &k.weights,
                        {static_cast<std::uint32_t>(k.out_channels),
                         static_cast<std::uint32_t>(k.in_channels),
                         static_cast<std::uint32_t>(k.kernel_h),
                         static_cast<std::uint32_t>(k.kernel_w)}});
        refs.push_back({base + ".bias", &k.bias, {static_cast<std::uint32_t>(k.out_channels)}});
    };
    for (int i = 0; i < 10; ++i) add("conv" + std::to_string(i + 1), w.feature[i]);
    for (int s = 0; s < 5; ++s) add("core_att" + std::to_string(s + 1), w.core_att[s]);
    for (int s = 0; s < 5; ++s) add("delta_att" + std::to_string(s + 1), w.delta_att[s]);
    return refs;
}

}  // namespace detail

template <typename T>
std::vector<TensorRef<T>> tensor_refs(NetworkWeights<T>& w) {
    return detail::enumerate_tensors<TensorRef<T>>(w);
}

template <typename T>
std::vector<ConstTensorRef<T>> tensor_refs(const NetworkWeights<T>& w) {
    return detail::enumerate_tensors<ConstTensorRef<T>>(w);
}

// Uniform fan-in rule: weights in +-sqrt(6 / (in_channels * kh * kw)), biases
// zero. Deterministic per seed.
template <typename T>
NetworkWeights<T> init_weights(const NetworkConfig& cfg, std::uint64_t seed) {
    NetworkWeights<T> w = NetworkWeights<T>::zeros(cfg);
    Rng rng(seed);
    auto fill = [&rng](ConvKernel<T>& k) {
        const double bound =
            std::sqrt(6.0 / (static_cast<double>(k.in_channels) * k.kernel_h * k.kernel_w));
        for (auto& v : k.weights) v = static_cast<T>(rng.uniform(-bound, bound));
    };
    for (auto& k : w.feature) fill(k);
    for (auto& k : w.core_att) fill(k);
    for (auto& k : w.delta_att) fill(k);
    return w;
}

template <typename T>
struct AttentionResult {
    FeatureMap<T> map;      // 1-channel sigmoid attention map
    FeatureMap<T> refined;  // input features scaled by the broadcast map
};

// Basic spatial attention: channel-wise mean/max pool -> k x k conv with one
// filter -> sigmoid; the refined maps are the features times the map.
template <typename T>
AttentionResult<T> spatial_attention(const FeatureMap<T>& features, const ConvKernel<T>& kernel) {
    if (kernel.out_channels != 1 || kernel.in_channels != 2)
        throw std::invalid_argument("spatial_attention: kernel must be 1 x 2 x k x k");
    FeatureMap<T> a = sigmoid(conv2d(channel_pool(features), kernel));
    FeatureMap<T> refined = multiply(features, a);
    return {std::move(a), std::move(refined)};
}

// Everything the backward pass needs, kept per scale. Refined maps are not
// stored: multiply and maxpool backward only need the factors and argmax.
template <typename T>
struct ForwardCache {
    NetworkConfig config;
    int in_h = 0, in_w = 0;
    std::array<FeatureMap<T>, 5> scale_input;  // X_s: image at s=1, pooled refined maps after
    std::array<FeatureMap<T>, 5> conv1_out;    // activation of the scale's first conv
    std::array<FeatureMap<T>, 5> features;     // F_s: activation of the second conv
    std::array<FeatureMap<T>, 5> pooled;       // channel_pool(F_s), shared by both branches
    std::array<FeatureMap<T>, 5> att_core;     // A_s^core
    std::array<FeatureMap<T>, 5> att_delta;    // A_s^delta
    std::array<std::vector<std::int32_t>, 4> pool_argmax;
    std::array<FeatureMap<T>, 5> up_core;      // A_s^core upsampled to input size
    std::array<FeatureMap<T>, 5> up_delta;
    std::array<FeatureMap<T>, 5> partial_core;  // running products of the upsampled maps
    std::array<FeatureMap<T>, 5> partial_delta;
    int upsample_count_core = 0;
    int upsample_count_delta = 0;
};

template <typename T>
struct ForwardResult {
    FeatureMap<T> core;   // fused core probability map, 1 x H x W
    FeatureMap<T> delta;  // fused delta probability map
    ForwardCache<T> cache;
};

namespace detail {

template <typename T>
void check_finite_layer(const FeatureMap<T>& m, const std::string& layer) {
    if (!all_finite(m)) throw NumericError("non-finite values in layer " + layer);
}

}  // namespace detail

// One image in, two fused probability maps out. H and W must be divisible by
// 2^(scales-1) so the four pools stay even-sized.
template <typename T>
ForwardResult<T> forward(const FeatureMap<T>& image, const NetworkWeights<T>& weights,
                         const NetworkConfig& cfg = {}) {
    cfg.validate();
    if (image.channels != cfg.input_channels)
        throw std::invalid_argument("forward: expected " + std::to_string(cfg.input_channels) +
                                    "-channel image, got " + std::to_string(image.channels));
    const int div = 1 << (NetworkConfig::scales - 1);
    if (image.height % div != 0 || image.width % div != 0 || image.height < div ||
        image.width < div)
        throw std::invalid_argument("forward: spatial dims must be positive multiples of " +
                                    std::to_string(div) + ", got " + image.shape_string());

    ForwardResult<T> r;
    ForwardCache<T>& c = r.cache;
    c.config = cfg;
    c.in_h = image.height;
    c.in_w = image.width;

    FeatureMap<T> x = image;
    for (int s = 0; s < 5; ++s) {
        const std::string tag = "scale" + std::to_string(s + 1);
        c.scale_input[s] = std::move(x);

        FeatureMap<T> h1 = conv2d(c.scale_input[s], weights.feature[2 * s]);
        c.conv1_out[s] = cfg.relu_features ? relu(h1) : std::move(h1);
        FeatureMap<T> h2 = conv2d(c.conv1_out[s], weights.feature[2 * s + 1]);
        c.features[s] = cfg.relu_features ? relu(h2) : std::move(h2);
        detail::check_finite_layer(c.features[s], tag + ".conv2");

        c.pooled[s] = channel_pool(c.features[s]);
        c.att_core[s] = sigmoid(conv2d(c.pooled[s], weights.core_att[s]));
        c.att_delta[s] = sigmoid(conv2d(c.pooled[s], weights.delta_att[s]));
        detail::check_finite_layer(c.att_core[s], tag + ".core_att");
        detail::check_finite_layer(c.att_delta[s], tag + ".delta_att");

        if (s < 4) {
            // Refined maps feed the backbone pools; C5 emits only its map.
            FeatureMap<T> pool_in = multiply(c.features[s], c.att_core[s]);
            if (cfg.pool_source == NetworkConfig::PoolSource::averaged) {
                FeatureMap<T> rd = multiply(c.features[s], c.att_delta[s]);
                for (std::size_t i = 0; i < pool_in.size(); ++i)
                    pool_in.values[i] = (pool_in.values[i] + rd.values[i]) * T(0.5);
            }
            MaxPoolResult<T> p = maxpool2x2(pool_in);
            c.pool_argmax[s] = std::move(p.argmax);
            x = std::move(p.output);
        }
    }

    // Unify every attention map to the input size, then fuse by product.
    for (int s = 0; s < 5; ++s) {
        c.up_core[s] = c.att_core[s];
        c.up_delta[s] = c.att_delta[s];
        for (int u = 0; u < s; ++u) {
            c.up_core[s] = upsample2x(c.up_core[s]);
            c.up_delta[s] = upsample2x(c.up_delta[s]);
            ++c.upsample_count_core;
            ++c.upsample_count_delta;
        }
        c.partial_core[s] = s == 0 ? c.up_core[s] : multiply(c.partial_core[s - 1], c.up_core[s]);
        c.partial_delta[s] =
            s == 0 ? c.up_delta[s] : multiply(c.partial_delta[s - 1], c.up_delta[s]);
    }
    r.core = c.partial_core[4];
    r.delta = c.partial_delta[4];
    detail::check_finite_layer(r.core, "fused_core");
    detail::check_finite_layer(r.delta, "fused_delta");
    return r;
}

namespace detail {

template <typename T>
void add_into(FeatureMap<T>& acc, const FeatureMap<T>& g) {
    if (acc.empty()) {
        acc = g;
        return;
    }
    for (std::size_t i = 0; i < acc.size(); ++i) acc.values[i] += g.values[i];
}

template <typename T>
void add_kernel_grads(ConvKernel<T>& acc, const ConvKernel<T>& g) {
    for (std::size_t i = 0; i < acc.weights.size(); ++i) acc.weights[i] += g.weights[i];
    for (std::size_t i = 0; i < acc.bias.size(); ++i) acc.bias[i] += g.bias[i];
}

}  // namespace detail

// Reverse pass over the whole graph; returns parameter gradients in
// NetworkWeights layout. Deterministic: fixed traversal and accumulation
// order.
template <typename T>
NetworkWeights<T> backward(const ForwardCache<T>& cache, const NetworkWeights<T>& weights,
                           const FeatureMap<T>& grad_core, const FeatureMap<T>& grad_delta) {
    const NetworkConfig& cfg = cache.config;
    if (grad_core.channels != 1 || grad_core.height != cache.in_h || grad_core.width != cache.in_w ||
        !grad_core.same_shape(grad_delta))
        throw std::invalid_argument("backward: gradient maps must be 1 x H x W of the cached input");

    NetworkWeights<T> grads = NetworkWeights<T>::zeros(cfg);

    // Product fusion backward through the cached partial products.
    std::array<FeatureMap<T>, 5> grad_up_core, grad_up_delta;
    auto fuse_back = [](const std::array<FeatureMap<T>, 5>& partial,
                        const std::array<FeatureMap<T>, 5>& up, const FeatureMap<T>& grad_out,
                        std::array<FeatureMap<T>, 5>& grad_up) {
        FeatureMap<T> g = grad_out;
        for (int s = 4; s >= 1; --s) {
            auto [gp, gu] = multiply_backward(partial[s - 1], up[s], g);
            grad_up[s] = std::move(gu);
            g = std::move(gp);
        }
        grad_up[0] = std::move(g);
    };
    fuse_back(cache.partial_core, cache.up_core, grad_core, grad_up_core);
    fuse_back(cache.partial_delta, cache.up_delta, grad_delta, grad_up_delta);

    // Down through the upsampling chains to each scale's resolution.
    std::array<FeatureMap<T>, 5> grad_att_core, grad_att_delta;
    for (int s = 0; s < 5; ++s) {
        FeatureMap<T> gc = std::move(grad_up_core[s]);
        FeatureMap<T> gd = std::move(grad_up_delta[s]);
        for (int u = 0; u < s; ++u) {
            gc = upsample2x_backward(gc);
            gd = upsample2x_backward(gd);
        }
        grad_att_core[s] = std::move(gc);
        grad_att_delta[s] = std::move(gd);
    }

    FeatureMap<T> grad_x;  // dL/dX_{s+1}, flows into the pool of scale s
    for (int s = 4; s >= 0; --s) {
        FeatureMap<T> grad_f(cache.features[s].channels, cache.features[s].height,
                             cache.features[s].width);

        if (s < 4) {
            FeatureMap<T> grad_pool_in =
                maxpool2x2_backward(grad_x, cache.pool_argmax[s], cache.features[s].channels,
                                    cache.features[s].height, cache.features[s].width);
            if (cfg.pool_source == NetworkConfig::PoolSource::averaged) {
                for (auto& v : grad_pool_in.values) v *= T(0.5);
                auto [gf_c, ga_c] =
                    multiply_backward(cache.features[s], cache.att_core[s], grad_pool_in);
                auto [gf_d, ga_d] =
                    multiply_backward(cache.features[s], cache.att_delta[s], grad_pool_in);
                detail::add_into(grad_f, gf_c);
                detail::add_into(grad_f, gf_d);
                detail::add_into(grad_att_core[s], ga_c);
                detail::add_into(grad_att_delta[s], ga_d);
            } else {
                auto [gf, ga] =
                    multiply_backward(cache.features[s], cache.att_core[s], grad_pool_in);
                detail::add_into(grad_f, gf);
                detail::add_into(grad_att_core[s], ga);
            }
        }

        // Both attention branches share channel_pool(F_s); sum their pooled
        // gradients before routing back through it.
        FeatureMap<T> grad_pooled(2, cache.pooled[s].height, cache.pooled[s].width);
        {
            FeatureMap<T> pre = sigmoid_backward(cache.att_core[s], grad_att_core[s]);
            ConvGrads<T> cg = conv2d_backward(cache.pooled[s], weights.core_att[s], pre);
            detail::add_kernel_grads(grads.core_att[s], cg.kernel);
            detail::add_into(grad_pooled, cg.input);
        }
        {
            FeatureMap<T> pre = sigmoid_backward(cache.att_delta[s], grad_att_delta[s]);
            ConvGrads<T> cg = conv2d_backward(cache.pooled[s], weights.delta_att[s], pre);
            detail::add_kernel_grads(grads.delta_att[s], cg.kernel);
            detail::add_into(grad_pooled, cg.input);
        }
        detail::add_into(grad_f, channel_pool_backward(cache.features[s], grad_pooled));

        FeatureMap<T> g2 = cfg.relu_features ? relu_backward(cache.features[s], grad_f)
                                             : std::move(grad_f);
        ConvGrads<T> c2 = conv2d_backward(cache.conv1_out[s], weights.feature[2 * s + 1], g2);
        grads.feature[2 * s + 1] = std::move(c2.kernel);

        FeatureMap<T> g1 = cfg.relu_features ? relu_backward(cache.conv1_out[s], c2.input)
                                             : std::move(c2.input);
        // the image itself needs no gradient, so skip it at scale 1
        ConvGrads<T> c1 = conv2d_backward(cache.scale_input[s], weights.feature[2 * s], g1, s > 0);
        grads.feature[2 * s] = std::move(c1.kernel);
        grad_x = std::move(c1.input);
    }

    return grads;
}

}  // namespace rose
