#include "flowreg/render.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace flowreg {

namespace {

void draw_segment(Image& img, double y0, double x0, double y1, double x1) {
    const int H = img.shape.extents[0], W = img.shape.extents[1];
    int iy0 = static_cast<int>(std::lround(y0));
    int ix0 = static_cast<int>(std::lround(x0));
    const int iy1 = static_cast<int>(std::lround(y1));
    const int ix1 = static_cast<int>(std::lround(x1));

    // Bresenham with clipping at plot time
    const int dy = std::abs(iy1 - iy0), dx = std::abs(ix1 - ix0);
    const int sy = iy0 < iy1 ? 1 : -1, sx = ix0 < ix1 ? 1 : -1;
    int err = dx - dy;
    while (true) {
        if (iy0 >= 0 && iy0 < H && ix0 >= 0 && ix0 < W)
            img.values[static_cast<std::size_t>(iy0) * W + ix0] = 1.0;
        if (iy0 == iy1 && ix0 == ix1) break;
        const int e2 = 2 * err;
        if (e2 > -dy) {
            err -= dy;
            ix0 += sx;
        }
        if (e2 < dx) {
            err += dx;
            iy0 += sy;
        }
    }
}

std::vector<int> line_indices(int extent, int spacing) {
    std::vector<int> idx;
    for (int i = 0; i < extent; i += spacing) idx.push_back(i);
    if (idx.back() != extent - 1) idx.push_back(extent - 1);
    return idx;
}

}  // namespace

Image render_grid(const VoxelCloud& cloud, int spacing) {
    if (cloud.shape.dim() != 2) throw ShapeError("grid rendering supports 2D clouds only");
    if (spacing < 1) throw ParamError("grid spacing must be >= 1");
    const int H = cloud.shape.extents[0], W = cloud.shape.extents[1];
    Image img = make_image(cloud.shape, 0.0);
    const double* cy = cloud.plane(0);
    const double* cx = cloud.plane(1);
    auto at = [&](int y, int x) { return static_cast<std::int64_t>(y) * W + x; };

    for (int y : line_indices(H, spacing)) {
        for (int x = 0; x + 1 < W; ++x) {
            const auto i0 = at(y, x), i1 = at(y, x + 1);
            draw_segment(img, cy[i0], cx[i0], cy[i1], cx[i1]);
        }
    }
    for (int x : line_indices(W, spacing)) {
        for (int y = 0; y + 1 < H; ++y) {
            const auto i0 = at(y, x), i1 = at(y + 1, x);
            draw_segment(img, cy[i0], cx[i0], cy[i1], cx[i1]);
        }
    }
    return img;
}

Image jacobian_to_image(const JacobianMap& map) {
    if (map.shape.dim() != 2) throw ShapeError("Jacobian rendering supports 2D maps only");
    std::vector<double> sorted = map.dets;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double median = sorted[sorted.size() / 2];
    double span = 2.0 * median;
    if (!(span > 0.0)) {
        // degenerate field; fall back to the value range
        const auto [mn, mx] = std::minmax_element(map.dets.begin(), map.dets.end());
        span = (*mx - *mn) > 0 ? (*mx - *mn) : 1.0;
    }
    Image img = make_image(map.shape);
    for (std::size_t i = 0; i < map.dets.size(); ++i)
        img.values[i] = std::clamp(map.dets[i] / span, 0.0, 1.0);
    return img;
}

}  // namespace flowreg
