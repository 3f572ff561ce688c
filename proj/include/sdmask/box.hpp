// box.hpp - axis-aligned boxes in continuous pixel-edge coordinates
//
// Pixel (x, y) is the unit square [x, x+1) x [y, y+1); a box covering pixels
// 0..1 in both axes is {0, 0, 2, 2}.
#ifndef SDMASK_BOX_HPP_
#define SDMASK_BOX_HPP_

#include <algorithm>

namespace sdmask
{

struct Box
{
    double x1{0.0};
    double y1{0.0};
    double x2{0.0};
    double y2{0.0};

    [[nodiscard]] double width() const { return x2 - x1; }
    [[nodiscard]] double height() const { return y2 - y1; }
    [[nodiscard]] double area() const { return std::max(0.0, width()) * std::max(0.0, height()); }
    [[nodiscard]] bool degenerate() const { return !(x2 > x1) || !(y2 > y1); }

    bool operator==(const Box &) const = default;
};

inline double intersection_area(const Box &a, const Box &b)
{
    const double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    return w > 0.0 && h > 0.0 ? w * h : 0.0;
}

inline double iou(const Box &a, const Box &b)
{
    const double inter = intersection_area(a, b);
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

} // namespace sdmask

#endif
