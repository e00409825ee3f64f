#include "flowreg/fixtures.hpp"

#include <algorithm>
#include <cmath>

namespace flowreg::demo {

namespace {

// blend an ellipse with a soft edge into the image
void paint_ellipse(Image& img, double cy, double cx, double ry, double rx, double value,
                   double edge = 0.1) {
    const int H = img.shape.extents[0], W = img.shape.extents[1];
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const double dy = (y - cy) / ry;
            const double dx = (x - cx) / rx;
            const double d = std::sqrt(dy * dy + dx * dx);
            const double s = std::clamp((1.0 - d) / edge, 0.0, 1.0);
            double& v = img.values[static_cast<std::size_t>(y) * W + x];
            v = v * (1.0 - s) + value * s;
        }
    }
}

void paint_box(Image& img, double cy, double cx, double hy, double hx, double value,
               double edge = 1.5) {
    const int H = img.shape.extents[0], W = img.shape.extents[1];
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const double dy = std::abs(y - cy) - hy;
            const double dx = std::abs(x - cx) - hx;
            const double d = std::max(dy, dx);  // signed box distance, axis aligned
            const double s = std::clamp(-d / edge + 0.5, 0.0, 1.0);
            double& v = img.values[static_cast<std::size_t>(y) * W + x];
            v = v * (1.0 - s) + value * s;
        }
    }
}

Image blank(int size) { return make_image(GridShape{{size, size}}, 0.0); }

Image circle_image(int size) {
    Image img = blank(size);
    const double c = (size - 1) / 2.0;
    paint_ellipse(img, c, c, 0.32 * size, 0.32 * size, 1.0);
    return img;
}

Image donut_image(int size) {
    Image img = blank(size);
    const double c = (size - 1) / 2.0;
    paint_ellipse(img, c, c, 0.32 * size, 0.32 * size, 1.0);
    paint_ellipse(img, c, c, 0.14 * size, 0.14 * size, 0.0, 0.2);
    return img;
}

Image square_image(int size) {
    Image img = blank(size);
    const double c = (size - 1) / 2.0;
    paint_box(img, c, c, 0.21 * size, 0.21 * size, 1.0);
    return img;
}

Image cross_image(int size) {
    Image img = blank(size);
    const double c = (size - 1) / 2.0;
    paint_box(img, c, c, 0.31 * size, 0.09 * size, 1.0);
    paint_box(img, c, c, 0.09 * size, 0.31 * size, 1.0);
    return img;
}

Image blobs_image(int size, double scale, double shift) {
    Image img = blank(size);
    const double q = size / 64.0;
    paint_ellipse(img, 20.0 * q + shift, 21.0 * q + shift, 7.5 * q * scale, 7.0 * q * scale, 1.0);
    paint_ellipse(img, 43.0 * q - shift, 42.0 * q - shift, 6.5 * q * scale, 7.5 * q * scale, 1.0);
    return img;
}

Image brain_image(int size, double head_scale, double vent_scale, double shift_y,
                  double shift_x) {
    Image img = blank(size);
    const double c = (size - 1) / 2.0;
    const double cy = c + shift_y, cx = c + shift_x;
    const double q = size / 64.0;
    // head with a brighter cortical rim
    paint_ellipse(img, cy, cx, 27.0 * q * head_scale, 22.0 * q * head_scale, 0.85, 0.06);
    paint_ellipse(img, cy, cx, 24.5 * q * head_scale, 19.5 * q * head_scale, 0.55, 0.08);
    // ventricles
    paint_ellipse(img, cy - 2.0 * q, cx - 5.0 * q, 8.0 * q * vent_scale, 3.2 * q * vent_scale,
                  0.08, 0.25);
    paint_ellipse(img, cy - 2.0 * q, cx + 5.0 * q, 8.0 * q * vent_scale, 3.2 * q * vent_scale,
                  0.08, 0.25);
    // deep gray structures
    paint_ellipse(img, cy + 9.0 * q, cx - 7.5 * q, 4.5 * q, 3.5 * q, 0.75, 0.3);
    paint_ellipse(img, cy + 9.0 * q, cx + 7.5 * q, 4.5 * q, 3.5 * q, 0.75, 0.3);
    paint_ellipse(img, cy - 14.0 * q, cx, 4.0 * q, 6.0 * q, 0.7, 0.3);
    return img;
}

}  // namespace

std::vector<std::string> pair_names() {
    return {"circle_donut", "square_cross", "blobs", "brain"};
}

DemoPair make_pair(const std::string& name, int size) {
    if (name == "circle_donut") return DemoPair{name, circle_image(size), donut_image(size)};
    if (name == "square_cross") return DemoPair{name, cross_image(size), square_image(size)};
    if (name == "blobs")
        return DemoPair{name, blobs_image(size, 1.0, 0.0), blobs_image(size, 1.25, 3.0)};
    if (name == "brain")
        return DemoPair{name, brain_image(size, 1.0, 1.0, 0.0, 0.0),
                        brain_image(size, 0.93, 1.35, 1.5, -1.0)};
    throw ParamError("unknown demo pair '" + name + "'");
}

}  // namespace flowreg::demo
