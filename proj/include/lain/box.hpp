#pragma once

#include <algorithm>

namespace lain {

// Axis-aligned box [x1, y1, x2, y2]. Detection and annotation boxes are in
// normalized image coordinates.
struct Box {
    double x1 = 0.0;
    double y1 = 0.0;
    double x2 = 0.0;
    double y2 = 0.0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const { return std::max(0.0, width()) * std::max(0.0, height()); }
    bool contains(double x, double y) const { return x >= x1 && x <= x2 && y >= y1 && y <= y2; }

    friend bool operator==(const Box&, const Box&) = default;
};

inline Box clamp_unit(const Box& b) {
    auto c = [](double v) { return std::clamp(v, 0.0, 1.0); };
    return {c(b.x1), c(b.y1), c(b.x2), c(b.y2)};
}

}  // namespace lain
