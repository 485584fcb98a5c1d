#pragma once

#include <cmath>
#include <string>
#include <vector>

namespace rose {

// (x, y) in pixels; x = column, y = row, origin top-left.
struct Point {
    double x = 0.0;
    double y = 0.0;
};

inline double distance(const Point& a, const Point& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

enum class PointKind { core, delta };

inline const char* to_string(PointKind k) { return k == PointKind::core ? "core" : "delta"; }

struct SingularPoint {
    int x = 0;
    int y = 0;
    PointKind kind = PointKind::core;
    double score = 0.0;
};

}  // namespace rose
