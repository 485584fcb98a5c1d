#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "rose/errors.hpp"
#include "rose/net.hpp"

namespace rose {

struct AdamConfig {
    double lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename T>
struct AdamState {
    AdamConfig config;
    std::int64_t t = 0;
    std::vector<std::vector<T>> m;  // first moments, tensor_refs order
    std::vector<std::vector<T>> v;  // second moments

    static AdamState init(const NetworkWeights<T>& weights, const AdamConfig& cfg = {}) {
        AdamState s;
        s.config = cfg;
        for (const auto& ref : tensor_refs(weights)) {
            s.m.emplace_back(ref.values->size(), T(0));
            s.v.emplace_back(ref.values->size(), T(0));
        }
        return s;
    }
};

// Standard Adam with bias correction. Gradients must be finite; a non-finite
// entry aborts naming the tensor.
template <typename T>
void adam_step(NetworkWeights<T>& weights, const NetworkWeights<T>& grads, AdamState<T>& state) {
    auto wrefs = tensor_refs(weights);
    auto grefs = tensor_refs(grads);
    if (state.m.size() != wrefs.size())
        throw std::invalid_argument("adam_step: state does not match weights");

    for (std::size_t k = 0; k < wrefs.size(); ++k) {
        if (wrefs[k].values->size() != grefs[k].values->size() ||
            wrefs[k].values->size() != state.m[k].size())
            throw std::invalid_argument("adam_step: shape mismatch in " + wrefs[k].name);
        for (T g : *grefs[k].values)
            if (!std::isfinite(g))
                throw NumericError("adam_step: non-finite gradient in " + grefs[k].name);
    }

    state.t += 1;
    const double b1 = state.config.beta1, b2 = state.config.beta2;
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
    const double lr = state.config.lr, eps = state.config.eps;

    for (std::size_t k = 0; k < wrefs.size(); ++k) {
        std::vector<T>& w = *wrefs[k].values;
        const std::vector<T>& g = *grefs[k].values;
        std::vector<T>& m = state.m[k];
        std::vector<T>& v = state.v[k];
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double gi = static_cast<double>(g[i]);
            const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * gi;
            const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * gi * gi;
            m[i] = static_cast<T>(mi);
            v[i] = static_cast<T>(vi);
            const double mhat = mi / corr1;
            const double vhat = vi / corr2;
            w[i] = static_cast<T>(static_cast<double>(w[i]) - lr * mhat / (std::sqrt(vhat) + eps));
        }
    }
}

}  // namespace rose
