#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "rose/dataset.hpp"
#include "rose/points.hpp"

namespace rose {

struct Matching {
    std::vector<std::pair<int, int>> pairs;  // (detection index, ground-truth index)
    std::vector<int> unmatched_detections;
    std::vector<int> unmatched_ground_truth;
};

// Greedy one-to-one matching by increasing pairwise distance; pairs farther
// than match_radius never match. Callers pass detections and ground truth of
// one kind.
inline Matching match_points(const std::vector<SingularPoint>& detections,
                             const std::vector<Point>& ground_truth, double match_radius) {
    struct Cand {
        double dist;
        int det;
        int gt;
    };
    std::vector<Cand> cands;
    for (int d = 0; d < static_cast<int>(detections.size()); ++d) {
        const Point dp{static_cast<double>(detections[static_cast<std::size_t>(d)].x),
                       static_cast<double>(detections[static_cast<std::size_t>(d)].y)};
        for (int g = 0; g < static_cast<int>(ground_truth.size()); ++g) {
            const double dist = distance(dp, ground_truth[static_cast<std::size_t>(g)]);
            if (dist <= match_radius) cands.push_back({dist, d, g});
        }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.dist != b.dist) return a.dist < b.dist;
        if (a.det != b.det) return a.det < b.det;
        return a.gt < b.gt;
    });

    Matching m;
    std::vector<char> det_used(detections.size(), 0), gt_used(ground_truth.size(), 0);
    for (const Cand& c : cands) {
        if (det_used[static_cast<std::size_t>(c.det)] || gt_used[static_cast<std::size_t>(c.gt)])
            continue;
        det_used[static_cast<std::size_t>(c.det)] = 1;
        gt_used[static_cast<std::size_t>(c.gt)] = 1;
        m.pairs.emplace_back(c.det, c.gt);
    }
    for (int d = 0; d < static_cast<int>(detections.size()); ++d)
        if (!det_used[static_cast<std::size_t>(d)]) m.unmatched_detections.push_back(d);
    for (int g = 0; g < static_cast<int>(ground_truth.size()); ++g)
        if (!gt_used[static_cast<std::size_t>(g)]) m.unmatched_ground_truth.push_back(g);
    return m;
}

struct KindCounts {
    int ground_truth = 0;
    int detected = 0;
    int matched = 0;
    int false_alarms = 0;
};

// detection_rate = matched / GT * 100; false_alarm_rate = unmatched
// detections / detections * 100. Zero denominators give 0.
struct EvalReport {
    double detection_rate_core = 0.0;
    double detection_rate_delta = 0.0;
    double false_alarm_rate_core = 0.0;
    double false_alarm_rate_delta = 0.0;
    double avg_time_ms = 0.0;
    KindCounts core;
    KindCounts delta;

    nlohmann::json to_json() const {
        auto counts = [](const KindCounts& c) {
            return nlohmann::json{{"ground_truth", c.ground_truth},
                                  {"detected", c.detected},
                                  {"matched", c.matched},
                                  {"false_alarms", c.false_alarms}};
        };
        return nlohmann::json{
            {"detection_rate", {{"core", detection_rate_core}, {"delta", detection_rate_delta}}},
            {"false_alarm_rate",
             {{"core", false_alarm_rate_core}, {"delta", false_alarm_rate_delta}}},
            {"avg_time_ms", avg_time_ms},
            {"counts", {{"core", counts(core)}, {"delta", counts(delta)}}}};
    }
};

// Per-image model output: detections of both kinds plus the forward+NMS wall
// time (image decode excluded).
struct ImageDetections {
    std::vector<SingularPoint> points;
    double time_ms = 0.0;
};

inline EvalReport evaluate(const std::vector<ImageDetections>& outputs,
                           const std::vector<AnnotationRecord>& annotations,
                           double match_radius = 20.0) {
    if (outputs.size() != annotations.size())
        throw std::invalid_argument("evaluate: outputs and annotations must align");

    EvalReport rep;
    double time_sum = 0.0;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        time_sum += outputs[i].time_ms;
        for (PointKind kind : {PointKind::core, PointKind::delta}) {
            std::vector<SingularPoint> dets;
            for (const auto& p : outputs[i].points)
                if (p.kind == kind) dets.push_back(p);
            const std::vector<Point>& gt =
                kind == PointKind::core ? annotations[i].cores : annotations[i].deltas;
            const Matching m = match_points(dets, gt, match_radius);

            KindCounts& c = kind == PointKind::core ? rep.core : rep.delta;
            c.ground_truth += static_cast<int>(gt.size());
            c.detected += static_cast<int>(dets.size());
            c.matched += static_cast<int>(m.pairs.size());
            c.false_alarms += static_cast<int>(m.unmatched_detections.size());
        }
    }

    auto rate = [](int num, int den) { return den > 0 ? 100.0 * num / den : 0.0; };
    rep.detection_rate_core = rate(rep.core.matched, rep.core.ground_truth);
    rep.detection_rate_delta = rate(rep.delta.matched, rep.delta.ground_truth);
    rep.false_alarm_rate_core = rate(rep.core.false_alarms, rep.core.detected);
    rep.false_alarm_rate_delta = rate(rep.delta.false_alarms, rep.delta.detected);
    rep.avg_time_ms = outputs.empty() ? 0.0 : time_sum / static_cast<double>(outputs.size());
    return rep;
}

}  // namespace rose
