#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rose/dataset.hpp"
#include "rose/errors.hpp"
#include "rose/eval.hpp"
#include "rose/image_io.hpp"
#include "rose/net.hpp"
#include "rose/nms.hpp"
#include "rose/synth.hpp"
#include "rose/train.hpp"
#include "rose/weights_io.hpp"

namespace rose::cli {

// exit codes: 0 success, 1 runtime/I-O failure, 2 usage error
template <typename F>
int dispatch(F&& body, std::ostream& err = std::cerr) {
    try {
        body();
        return 0;
    } catch (const std::invalid_argument& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

struct SynthOptions {
    std::string out_dir;
    int count = 8;
    int size = 128;
    int cores = 1;
    int deltas = 1;
    std::uint64_t seed = 0;
    double ridge_frequency = 0.1;
    double noise = 0.1;
};

inline int run_synth(const SynthOptions& opt, std::ostream& out = std::cout,
                     std::ostream& err = std::cerr) {
    return dispatch(
        [&] {
            SynthSpec spec;
            spec.size = opt.size;
            spec.n_cores = opt.cores;
            spec.n_deltas = opt.deltas;
            spec.ridge_frequency = opt.ridge_frequency;
            spec.noise_level = opt.noise;
            const std::string ann = generate_dataset(opt.count, spec, opt.seed, opt.out_dir);
            out << "wrote " << opt.count << " images and " << ann << "\n";
        },
        err);
}

struct TrainOptions {
    std::string data_dir;
    std::string annotations;
    std::string out_weights;
    std::string loss_log;  // defaults to <out_weights>.loss.csv
    int epochs = 10;
    int batch = 4;
    int max_steps = 0;
    int checkpoint_interval = 0;
    double lr = 0.01;
    double sigma = 6.0;
    std::uint64_t seed = 0;
};

inline int run_train(const TrainOptions& opt, std::ostream& out = std::cout,
                     std::ostream& err = std::cerr) {
    return dispatch(
        [&] {
            const auto dataset = load_dataset(opt.annotations, opt.data_dir);
            TrainConfig cfg;
            cfg.epochs = opt.epochs;
            cfg.batch_size = opt.batch;
            cfg.seed = opt.seed;
            cfg.sigma = opt.sigma;
            cfg.max_steps = opt.max_steps;
            cfg.adam.lr = opt.lr;
            if (opt.checkpoint_interval > 0) {
                cfg.checkpoint_interval = opt.checkpoint_interval;
                cfg.checkpoint_path = opt.out_weights + ".ckpt-{step}";
            }

            const TrainResult result = train(dataset, cfg);
            save_weights(result.weights, opt.out_weights);

            const std::string log_path =
                opt.loss_log.empty() ? opt.out_weights + ".loss.csv" : opt.loss_log;
            std::ofstream log(log_path, std::ios::trunc);
            if (!log) throw IoError("cannot open " + log_path + " for writing");
            log << "step,loss\n";
            char buf[64];
            for (std::size_t i = 0; i < result.loss_history.size(); ++i) {
                std::snprintf(buf, sizeof buf, "%zu,%.9g\n", i + 1, result.loss_history[i]);
                log << buf;
            }
            if (!log) throw IoError("short write to " + log_path);

            out << "trained " << result.loss_history.size() << " steps, weights in "
                << opt.out_weights << ", loss log in " << log_path << "\n";
        },
        err);
}

// Forward + NMS on one already-padded image; detections outside the original
// frame (i.e. in the padding) are dropped.
inline ImageDetections detect_image(const FeatureMap<float>& padded,
                                    const NetworkWeights<float>& weights, int orig_h, int orig_w,
                                    double nms_radius, double nms_min,
                                    const NetworkConfig& cfg = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    ForwardResult<float> fwd = forward(padded, weights, cfg);
    std::vector<SingularPoint> points = nms(fwd.core, PointKind::core, nms_radius, nms_min);
    std::vector<SingularPoint> deltas = nms(fwd.delta, PointKind::delta, nms_radius, nms_min);
    points.insert(points.end(), deltas.begin(), deltas.end());
    const auto t1 = std::chrono::steady_clock::now();

    ImageDetections out;
    for (const SingularPoint& p : points)
        if (p.x < orig_w && p.y < orig_h) out.points.push_back(p);
    out.time_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    return out;
}

inline nlohmann::json detection_json(const std::string& image_path, const ImageDetections& det) {
    nlohmann::json points = nlohmann::json::array();
    for (const SingularPoint& p : det.points)
        points.push_back(
            {{"x", p.x}, {"y", p.y}, {"kind", to_string(p.kind)}, {"score", p.score}});
    return nlohmann::json{{"image", image_path}, {"points", points}, {"time_ms", det.time_ms}};
}

namespace detail {

inline void draw_square(FeatureMap<float>& img, int cx, int cy, int half, bool filled) {
    for (int y = cy - half; y <= cy + half; ++y) {
        if (y < 0 || y >= img.height) continue;
        for (int x = cx - half; x <= cx + half; ++x) {
            if (x < 0 || x >= img.width) continue;
            const bool edge =
                y == cy - half || y == cy + half || x == cx - half || x == cx + half;
            if (filled || edge) img.at(0, y, x) = 1.0f;
        }
    }
}

}  // namespace detail

struct DetectOptions {
    std::string weights;
    std::string image;
    std::string overlay;   // optional PGM with glyphs burned in
    std::string json_out;  // optional JSON copy of the stdout report
    double nms_radius = 20.0;
    double nms_min = 0.2;
};

inline int run_detect(const DetectOptions& opt, std::ostream& out = std::cout,
                      std::ostream& err = std::cerr) {
    return dispatch(
        [&] {
            if (opt.nms_min < 0.0 || opt.nms_min > 1.0)
                throw std::invalid_argument("--nms-min must be in [0, 1]");
            if (opt.nms_radius < 0.0) throw std::invalid_argument("--nms-radius must be >= 0");

            const NetworkWeights<float> weights = load_weights<float>(opt.weights);
            const FeatureMap<float> img = read_pgm(opt.image);
            const FeatureMap<float> padded = pad_to_multiple(img, 16);
            const ImageDetections det = detect_image(padded, weights, img.height, img.width,
                                                     opt.nms_radius, opt.nms_min);

            const nlohmann::json doc = detection_json(opt.image, det);
            out << doc.dump(2) << "\n";
            if (!opt.json_out.empty()) {
                std::ofstream jf(opt.json_out, std::ios::trunc);
                if (!jf) throw IoError("cannot open " + opt.json_out + " for writing");
                jf << doc.dump(2) << "\n";
            }
            if (!opt.overlay.empty()) {
                FeatureMap<float> marked = img;
                for (const SingularPoint& p : det.points)
                    detail::draw_square(marked, p.x, p.y, 5, p.kind == PointKind::core);
                write_pgm(marked, opt.overlay);
            }
        },
        err);
}

struct EvalOptions {
    std::string weights;
    std::string data_dir;
    std::string annotations;
    double match_radius = 20.0;
    double nms_radius = 20.0;
    double nms_min = 0.2;
};

inline EvalReport eval_dataset(const EvalOptions& opt) {
    if (opt.nms_min < 0.0 || opt.nms_min > 1.0)
        throw std::invalid_argument("--nms-min must be in [0, 1]");
    const NetworkWeights<float> weights = load_weights<float>(opt.weights);
    const auto dataset = load_dataset(opt.annotations, opt.data_dir);
    if (dataset.empty()) throw std::invalid_argument("empty dataset: nothing to evaluate");

    std::vector<ImageDetections> outputs;
    std::vector<AnnotationRecord> annotations;
    outputs.reserve(dataset.size());
    annotations.reserve(dataset.size());
    for (const TrainingSample& s : dataset) {
        outputs.push_back(detect_image(s.image, weights, s.orig_height, s.orig_width,
                                       opt.nms_radius, opt.nms_min));
        annotations.push_back({s.image_path, s.cores, s.deltas});
    }
    return evaluate(outputs, annotations, opt.match_radius);
}

inline int run_eval(const EvalOptions& opt, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
    return dispatch([&] { out << eval_dataset(opt).to_json().dump(2) << "\n"; }, err);
}

}  // namespace rose::cli
