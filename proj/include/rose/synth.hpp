#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "rose/dataset.hpp"
#include "rose/image_io.hpp"
#include "rose/points.hpp"
#include "rose/rng.hpp"
#include "rose/tensor.hpp"

namespace rose {

struct SynthSpec {
    int size = 128;               // square image side, multiple of 16
    int n_cores = 1;              // 0..2
    int n_deltas = 1;             // 0..2
    double ridge_frequency = 0.1; // cycles per pixel
    double noise_level = 0.1;     // in [0, 1]
    std::uint64_t seed = 0;
    int margin = 48;              // planted points keep this distance from borders
    int min_separation = 32;      // and this distance from each other

    void validate() const {
        if (size <= 0 || size % 16 != 0)
            throw std::invalid_argument("SynthSpec: size must be a positive multiple of 16");
        if (n_cores < 0 || n_cores > 2 || n_deltas < 0 || n_deltas > 2)
            throw std::invalid_argument("SynthSpec: core/delta counts must be 0..2");
        if (ridge_frequency <= 0.0 || ridge_frequency >= 0.5)
            throw std::invalid_argument("SynthSpec: ridge_frequency must be in (0, 0.5)");
        if (noise_level < 0.0 || noise_level > 1.0)
            throw std::invalid_argument("SynthSpec: noise_level must be in [0, 1]");
        if (margin < 0 || min_separation < 0)
            throw std::invalid_argument("SynthSpec: negative spacing");
        if (size - 2 * margin < 1)
            throw std::invalid_argument("SynthSpec: margin leaves no room for points");
    }
};

// Zero-pole orientation model: each core adds +1/2 arg(p - c), each delta
// subtracts 1/2 arg(p - d), on top of a constant background angle. Angles use
// y-up convention (a pixel visually above a core sees arg = pi/2) and wrap
// into [0, pi). Pixels exactly on a planted point copy a horizontal neighbor.
inline FeatureMap<double> orientation_field(const std::vector<Point>& cores,
                                            const std::vector<Point>& deltas, int h, int w,
                                            double theta0 = 0.0) {
    if (h <= 0 || w <= 0) throw std::invalid_argument("orientation_field: non-positive dims");
    auto inside = [h, w](const Point& p) { return p.x >= 0 && p.x < w && p.y >= 0 && p.y < h; };
    for (const Point& p : cores)
        if (!inside(p)) throw std::invalid_argument("orientation_field: core outside image");
    for (const Point& p : deltas)
        if (!inside(p)) throw std::invalid_argument("orientation_field: delta outside image");

    constexpr double kPi = 3.14159265358979323846;
    // NaN when the position coincides exactly with a planted point
    auto eval = [&](double px, double py) -> double {
        double t = theta0;
        for (const Point& c : cores) {
            const double dx = px - c.x, dy_up = c.y - py;
            if (dx == 0.0 && dy_up == 0.0) return std::nan("");
            t += 0.5 * std::atan2(dy_up, dx);
        }
        for (const Point& d : deltas) {
            const double dx = px - d.x, dy_up = d.y - py;
            if (dx == 0.0 && dy_up == 0.0) return std::nan("");
            t -= 0.5 * std::atan2(dy_up, dx);
        }
        t = std::fmod(t, kPi);
        if (t < 0.0) t += kPi;
        return t;
    };

    FeatureMap<double> theta(1, h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double t = eval(x, y);
            if (std::isnan(t)) {
                // singularity guard: borrow the nearest usable neighbor
                const int off[8][2] = {{1, 0}, {-1, 0}, {0, 1},  {0, -1},
                                       {1, 1}, {-1, 1}, {1, -1}, {-1, -1}};
                for (const auto& o : off) {
                    const int nx = x + o[0], ny = y + o[1];
                    if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
                    t = eval(nx, ny);
                    if (!std::isnan(t)) break;
                }
                if (std::isnan(t)) t = 0.0;
            }
            theta.at(0, y, x) = t;
        }
    }
    return theta;
}

struct RenderResult {
    FeatureMap<float> image;        // grayscale ridges in [0, 1]
    FeatureMap<double> orientation; // the field the ridges follow
    AnnotationRecord annotation;
};

namespace detail {

struct GaborBank {
    int radius;
    int bins;
    std::vector<double> taps;  // bins x (2r+1) x (2r+1)

    GaborBank(double frequency, int radius_, int bins_) : radius(radius_), bins(bins_) {
        constexpr double kPi = 3.14159265358979323846;
        const int side = 2 * radius + 1;
        const double sigma_along = 0.4 / frequency;   // smooth along the ridge flow
        const double sigma_across = 0.25 / frequency; // keep roughly one period across
        taps.assign(static_cast<std::size_t>(bins) * side * side, 0.0);
        for (int b = 0; b < bins; ++b) {
            const double th = kPi * b / bins;
            const double ct = std::cos(th), st = std::sin(th);
            double* k = taps.data() + static_cast<std::size_t>(b) * side * side;
            for (int dy = -radius; dy <= radius; ++dy) {
                for (int dx = -radius; dx <= radius; ++dx) {
                    const double ey = -dy;  // y-up
                    const double along = dx * ct + ey * st;
                    const double across = -dx * st + ey * ct;
                    const double env = std::exp(-(along * along / (2 * sigma_along * sigma_along) +
                                                  across * across / (2 * sigma_across * sigma_across)));
                    k[(dy + radius) * side + (dx + radius)] =
                        env * std::cos(2.0 * kPi * frequency * across);
                }
            }
        }
    }

    int bin_of(double theta) const {
        constexpr double kPi = 3.14159265358979323846;
        int b = static_cast<int>(std::floor(theta / kPi * bins)) % bins;
        return b < 0 ? b + bins : b;
    }
};

}  // namespace detail

// Ridge texture by iterated oriented filtering: seeded noise repeatedly
// convolved with a Gabor kernel aligned to the local orientation locks onto a
// ridge pattern that follows the field at the requested frequency.
inline FeatureMap<float> render_ridges(const FeatureMap<double>& theta, double frequency,
                                       double noise_level, Rng& rng) {
    const int h = theta.height, w = theta.width;
    const detail::GaborBank bank(frequency, 8, 36);
    const int side = 2 * bank.radius + 1;

    std::vector<double> img(static_cast<std::size_t>(h) * w);
    for (auto& v : img) v = rng.uniform(-1.0, 1.0);

    std::vector<double> next(img.size());
    std::vector<int> bin(img.size());
    for (std::size_t i = 0; i < bin.size(); ++i) bin[i] = bank.bin_of(theta.values[i]);

    for (int iter = 0; iter < 8; ++iter) {
        double peak = 0.0;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double* k =
                    bank.taps.data() +
                    static_cast<std::size_t>(bin[static_cast<std::size_t>(y) * w + x]) * side * side;
                double acc = 0.0;
                const int y0 = std::max(0, y - bank.radius), y1 = std::min(h - 1, y + bank.radius);
                const int x0 = std::max(0, x - bank.radius), x1 = std::min(w - 1, x + bank.radius);
                for (int yy = y0; yy <= y1; ++yy) {
                    const double* krow = k + (yy - y + bank.radius) * side + (x0 - x + bank.radius);
                    const double* irow = img.data() + static_cast<std::size_t>(yy) * w + x0;
                    for (int xx = 0; xx <= x1 - x0; ++xx) acc += krow[xx] * irow[xx];
                }
                next[static_cast<std::size_t>(y) * w + x] = acc;
                const double a = std::abs(acc);
                if (a > peak) peak = a;
            }
        }
        if (peak <= 0.0) break;
        for (std::size_t i = 0; i < img.size(); ++i) img[i] = next[i] / peak;
    }

    FeatureMap<float> out(1, h, w);
    for (std::size_t i = 0; i < img.size(); ++i) {
        double v = 0.5 + 0.5 * img[i];
        if (noise_level > 0.0) v += noise_level * (rng.unit() - 0.5);
        out.values[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
    return out;
}

// Deterministic per seed. Draw order: background angle, point placements,
// noise; placements are rejection-sampled under the margin and separation
// rules.
inline RenderResult render(const SynthSpec& spec) {
    spec.validate();
    constexpr double kPi = 3.14159265358979323846;
    Rng rng(spec.seed);
    const double theta0 = rng.uniform(0.0, kPi);

    // Joint rejection sampling: a bad first point can make the set
    // unplaceable, so failed attempts redraw every point.
    const int lo = spec.margin, hi = spec.size - 1 - spec.margin;
    const int n_points = spec.n_cores + spec.n_deltas;
    std::vector<Point> placed;
    for (int attempt = 0;; ++attempt) {
        if (attempt >= 100000)
            throw std::invalid_argument(
                "render: cannot place points under the margin/separation rules");
        placed.clear();
        bool ok = true;
        for (int i = 0; i < n_points && ok; ++i) {
            const Point cand{static_cast<double>(rng.uniform_int(lo, hi)),
                             static_cast<double>(rng.uniform_int(lo, hi))};
            for (const Point& p : placed)
                if (distance(p, cand) < spec.min_separation) {
                    ok = false;
                    break;
                }
            if (ok) placed.push_back(cand);
        }
        if (ok && static_cast<int>(placed.size()) == n_points) break;
    }

    RenderResult r;
    r.annotation.cores.assign(placed.begin(), placed.begin() + spec.n_cores);
    r.annotation.deltas.assign(placed.begin() + spec.n_cores, placed.end());

    r.orientation =
        orientation_field(r.annotation.cores, r.annotation.deltas, spec.size, spec.size, theta0);
    r.image = render_ridges(r.orientation, spec.ridge_frequency, spec.noise_level, rng);
    return r;
}

// Writes count PGM images plus one annotations.json; image i renders with
// seed base_seed + i. Returns the annotation file path.
inline std::string generate_dataset(int count, const SynthSpec& base, std::uint64_t base_seed,
                                    const std::string& out_dir) {
    if (count < 0) throw std::invalid_argument("generate_dataset: negative count");
    base.validate();
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create directory " + out_dir + ": " + ec.message());

    std::vector<AnnotationRecord> records;
    records.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        SynthSpec spec = base;
        spec.seed = base_seed + static_cast<std::uint64_t>(i);
        RenderResult r = render(spec);

        char name[32];
        std::snprintf(name, sizeof name, "synth_%04d.pgm", i);
        write_pgm(r.image, (std::filesystem::path(out_dir) / name).string());
        r.annotation.image_path = name;
        records.push_back(std::move(r.annotation));
    }
    const std::string ann_path = (std::filesystem::path(out_dir) / "annotations.json").string();
    save_annotations(records, ann_path);
    return ann_path;
}

}  // namespace rose
