#include "flowreg/types.hpp"

#include <cmath>
#include <sstream>

namespace flowreg {

void validate_shape(const GridShape& shape) {
    if (shape.dim() != 2 && shape.dim() != 3)
        throw ShapeError("grid must be 2D or 3D, got dim " + std::to_string(shape.dim()));
    for (int e : shape.extents) {
        if (e < 2)
            throw ShapeError("every grid extent must be >= 2, got " + shape_to_string(shape));
    }
}

std::string shape_to_string(const GridShape& shape) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.extents.size(); ++i) {
        if (i) os << ",";
        os << shape.extents[i];
    }
    os << ")";
    return os.str();
}

Image make_image(const GridShape& shape, double fill) {
    validate_shape(shape);
    return Image{shape, std::vector<double>(static_cast<std::size_t>(shape.voxels()), fill)};
}

LabelMap make_labels(const GridShape& shape, std::uint16_t fill) {
    validate_shape(shape);
    return LabelMap{shape,
                    std::vector<std::uint16_t>(static_cast<std::size_t>(shape.voxels()), fill)};
}

VectorField make_field(const GridShape& shape, int channels, double fill) {
    validate_shape(shape);
    if (channels < 1) throw ParamError("field needs at least one channel");
    return VectorField{
        shape, channels,
        std::vector<double>(static_cast<std::size_t>(shape.voxels() * channels), fill)};
}

BoundaryMask make_face_mask(const GridShape& shape) {
    validate_shape(shape);
    const auto strides = row_major_strides(shape);
    const std::int64_t n = shape.voxels();
    BoundaryMask mask{shape, std::vector<double>(static_cast<std::size_t>(n), 1.0)};
    for (std::int64_t i = 0; i < n; ++i) {
        for (int a = 0; a < shape.dim(); ++a) {
            const int c = static_cast<int>((i / strides[a]) % shape.extents[a]);
            if (c == 0 || c == shape.extents[a] - 1) {
                mask.weights[static_cast<std::size_t>(i)] = 0.0;
                break;
            }
        }
    }
    return mask;
}

std::vector<std::int64_t> row_major_strides(const GridShape& shape) {
    std::vector<std::int64_t> strides(shape.extents.size(), 1);
    for (int a = shape.dim() - 2; a >= 0; --a)
        strides[a] = strides[a + 1] * shape.extents[a + 1];
    return strides;
}

bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace flowreg
