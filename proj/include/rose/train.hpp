#pragma once

#include <cmath>
#include <cstdint>
#include <future>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "rose/adam.hpp"
#include "rose/dataset.hpp"
#include "rose/errors.hpp"
#include "rose/heatmap.hpp"
#include "rose/net.hpp"
#include "rose/rng.hpp"
#include "rose/weights_io.hpp"

namespace rose {

struct TrainConfig {
    int epochs = 1;
    int batch_size = 4;
    std::uint64_t seed = 0;
    double sigma = 6.0;          // ground-truth Gaussian std dev
    int checkpoint_interval = 0; // in batches; 0 disables checkpoints
    bool shuffle = true;
    int max_steps = 0;           // optimizer-step cap; 0 means no cap
    std::string checkpoint_path; // required when interval > 0; a "{step}"
                                 // marker expands to the batch counter
    AdamConfig adam;
    NetworkConfig net;

    void validate() const {
        if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
        if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
        if (checkpoint_interval > 0 && checkpoint_path.empty())
            throw std::invalid_argument("TrainConfig: checkpoint interval set without a path");
        net.validate();
    }
};

struct TrainResult {
    NetworkWeights<float> weights;
    std::vector<double> loss_history;  // mean per-image loss of each batch
};

namespace detail {

struct ImageGrads {
    NetworkWeights<float> grads;
    double loss = 0.0;
};

inline ImageGrads image_pass(const TrainingSample& sample, const FeatureMap<float>& y_core,
                             const FeatureMap<float>& y_delta, const NetworkWeights<float>& weights,
                             const NetworkConfig& net_cfg, const HeatmapConfig& hm_cfg) {
    ForwardResult<float> fwd = forward(sample.image, weights, net_cfg);
    ImageGrads out;
    out.loss = static_cast<double>(vfocal_loss(y_core, fwd.core, hm_cfg)) +
               static_cast<double>(vfocal_loss(y_delta, fwd.delta, hm_cfg));
    FeatureMap<float> gc = vfocal_loss_grad(y_core, fwd.core, hm_cfg);
    FeatureMap<float> gd = vfocal_loss_grad(y_delta, fwd.delta, hm_cfg);
    out.grads = backward(fwd.cache, weights, gc, gd);
    return out;
}

inline void accumulate(NetworkWeights<float>& acc, const NetworkWeights<float>& g) {
    auto arefs = tensor_refs(acc);
    auto grefs = tensor_refs(g);
    for (std::size_t k = 0; k < arefs.size(); ++k) {
        std::vector<float>& a = *arefs[k].values;
        const std::vector<float>& b = *grefs[k].values;
        for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    }
}

}  // namespace detail

// One forward/backward per image, gradients summed over the batch, one Adam
// step per batch. Weights are read-only while a batch's images run
// concurrently; gradients merge in image order, so runs are reproducible for
// a fixed seed regardless of thread scheduling.
inline TrainResult train(const std::vector<TrainingSample>& dataset, const TrainConfig& cfg) {
    cfg.validate();
    if (dataset.empty()) throw std::invalid_argument("train: empty dataset");

    HeatmapConfig hm_cfg;
    hm_cfg.sigma = cfg.sigma;

    // Ground-truth heatmaps are fixed; build them once.
    std::vector<FeatureMap<float>> y_core, y_delta;
    y_core.reserve(dataset.size());
    y_delta.reserve(dataset.size());
    for (const auto& s : dataset) {
        y_core.push_back(gaussian_heatmap<float>(s.cores, s.image.height, s.image.width, hm_cfg));
        y_delta.push_back(gaussian_heatmap<float>(s.deltas, s.image.height, s.image.width, hm_cfg));
    }

    TrainResult result;
    result.weights = init_weights<float>(cfg.net, cfg.seed);
    AdamState<float> adam = AdamState<float>::init(result.weights, cfg.adam);
    Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);

    std::vector<int> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);

    int batches_done = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.shuffle) shuffle_rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            if (cfg.max_steps > 0 && batches_done >= cfg.max_steps) return result;
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);

            std::vector<std::future<detail::ImageGrads>> jobs;
            jobs.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) {
                const int idx = order[i];
                jobs.push_back(std::async(std::launch::async, [&, idx] {
                    return detail::image_pass(dataset[static_cast<std::size_t>(idx)],
                                              y_core[static_cast<std::size_t>(idx)],
                                              y_delta[static_cast<std::size_t>(idx)],
                                              result.weights, cfg.net, hm_cfg);
                }));
            }

            NetworkWeights<float> batch_grads = NetworkWeights<float>::zeros(cfg.net);
            double batch_loss = 0.0;
            for (auto& job : jobs) {
                detail::ImageGrads g = job.get();
                detail::accumulate(batch_grads, g.grads);
                batch_loss += g.loss;
            }
            batch_loss /= static_cast<double>(end - start);
            if (!std::isfinite(batch_loss))
                throw NumericError("train: non-finite loss in batch " +
                                   std::to_string(batches_done));

            adam_step(result.weights, batch_grads, adam);
            result.loss_history.push_back(batch_loss);
            ++batches_done;

            if (cfg.checkpoint_interval > 0 && batches_done % cfg.checkpoint_interval == 0) {
                std::string path = cfg.checkpoint_path;
                const std::size_t mark = path.find("{step}");
                if (mark != std::string::npos)
                    path.replace(mark, 6, std::to_string(batches_done));
                save_weights(result.weights, path);
            }
        }
    }
    return result;
}

}  // namespace rose
