#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rose/errors.hpp"
#include "rose/image_io.hpp"
#include "rose/points.hpp"
#include "rose/tensor.hpp"

namespace rose {

// One annotated image: relative path plus ground-truth core/delta positions.
struct AnnotationRecord {
    std::string image_path;
    std::vector<Point> cores;
    std::vector<Point> deltas;
};

// Annotation file: JSON array of
//   {"image": str, "cores": [[x, y], ...], "deltas": [[x, y], ...]}
// x = column, y = row, origin top-left; values may be integers or reals.
inline std::vector<AnnotationRecord> load_annotations(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open annotation file " + path);

    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(f);
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError(path + ": " + e.what());
    }
    if (!doc.is_array()) throw IoError(path + ": annotation root must be a JSON array");

    auto parse_points = [&path](const nlohmann::json& arr, const std::string& ctx) {
        std::vector<Point> pts;
        if (arr.is_null()) return pts;
        if (!arr.is_array()) throw IoError(path + ": " + ctx + " must be an array of [x, y] pairs");
        for (const auto& p : arr) {
            if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
                throw IoError(path + ": " + ctx + " entries must be numeric [x, y] pairs");
            pts.push_back({p[0].get<double>(), p[1].get<double>()});
        }
        return pts;
    };

    std::vector<AnnotationRecord> records;
    records.reserve(doc.size());
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto& rec = doc[i];
        const std::string ctx = "record " + std::to_string(i);
        if (!rec.is_object() || !rec.contains("image") || !rec["image"].is_string())
            throw IoError(path + ": " + ctx + " needs a string \"image\" field");
        AnnotationRecord out;
        out.image_path = rec["image"].get<std::string>();
        out.cores = parse_points(rec.value("cores", nlohmann::json::array()), ctx + " cores");
        out.deltas = parse_points(rec.value("deltas", nlohmann::json::array()), ctx + " deltas");
        records.push_back(std::move(out));
    }
    return records;
}

inline void save_annotations(const std::vector<AnnotationRecord>& records,
                             const std::string& path) {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& rec : records) {
        nlohmann::json cores = nlohmann::json::array();
        for (const auto& p : rec.cores) cores.push_back({p.x, p.y});
        nlohmann::json deltas = nlohmann::json::array();
        for (const auto& p : rec.deltas) deltas.push_back({p.x, p.y});
        doc.push_back({{"image", rec.image_path}, {"cores", cores}, {"deltas", deltas}});
    }
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << doc.dump(2) << "\n";
    if (!f) throw IoError("short write to " + path);
}

// Zero-pads right/bottom so both spatial dims are multiples of m. Annotated
// coordinates stay valid unchanged.
template <typename T>
FeatureMap<T> pad_to_multiple(const FeatureMap<T>& img, int m) {
    const int ph = (img.height + m - 1) / m * m;
    const int pw = (img.width + m - 1) / m * m;
    if (ph == img.height && pw == img.width) return img;
    FeatureMap<T> out(img.channels, ph, pw);
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < img.height; ++y)
            std::copy(img.plane(c) + static_cast<std::size_t>(y) * img.width,
                      img.plane(c) + static_cast<std::size_t>(y + 1) * img.width,
                      out.plane(c) + static_cast<std::size_t>(y) * pw);
    return out;
}

struct TrainingSample {
    FeatureMap<float> image;  // padded to a multiple of 16, values in [0, 1]
    std::vector<Point> cores;
    std::vector<Point> deltas;
    int orig_height = 0;
    int orig_width = 0;
    std::string image_path;
};

// Loads every record or none: any missing image or out-of-bounds annotation
// fails the whole call.
inline std::vector<TrainingSample> load_dataset(const std::string& annotation_file,
                                                const std::string& image_root) {
    const std::vector<AnnotationRecord> records = load_annotations(annotation_file);
    std::vector<TrainingSample> samples;
    samples.reserve(records.size());

    for (const auto& rec : records) {
        const std::filesystem::path img_path = std::filesystem::path(image_root) / rec.image_path;
        TrainingSample s;
        s.image_path = img_path.string();
        FeatureMap<float> img = read_pgm(s.image_path);
        s.orig_height = img.height;
        s.orig_width = img.width;

        auto check = [&rec, &img](const std::vector<Point>& pts, const char* kind) {
            for (const Point& p : pts)
                if (!(p.x >= 0.0 && p.x < img.width && p.y >= 0.0 && p.y < img.height))
                    throw IoError("annotation for " + rec.image_path + ": " + kind + " point (" +
                                  std::to_string(p.x) + ", " + std::to_string(p.y) +
                                  ") outside image");
        };
        check(rec.cores, "core");
        check(rec.deltas, "delta");

        s.image = pad_to_multiple(img, 16);
        s.cores = rec.cores;
        s.deltas = rec.deltas;
        samples.push_back(std::move(s));
    }
    return samples;
}

}  // namespace rose
