#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace flowreg {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid grid extents or mismatched shapes between operands.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Out-of-range parameter (sigma <= 0, even NCC window, ...).
class ParamError : public Error {
public:
    using Error::Error;
};

// An operation was asked for data its configuration did not retain.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Non-finite state encountered while integrating or sweeping.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, int step)
        : Error(what), step_(step) {}
    int step() const { return step_; }

private:
    int step_;
};

enum class IoFault {
    open_failed,
    malformed_header,
    truncated_payload,
    format_mismatch,
};

class IoError : public Error {
public:
    IoError(IoFault fault, const std::string& what) : Error(what), fault_(fault) {}
    IoFault fault() const { return fault_; }

private:
    IoFault fault_;
};

// ---------------------------------------------------------------------------
// Grids
// ---------------------------------------------------------------------------

// Extents of a scalar grid, slowest axis first: (H,W) in 2D, (D,H,W) in 3D.
// Row-major storage, last axis fastest.
struct GridShape {
    std::vector<int> extents;

    int dim() const { return static_cast<int>(extents.size()); }
    std::int64_t voxels() const {
        std::int64_t n = 1;
        for (int e : extents) n *= e;
        return n;
    }
    bool operator==(const GridShape&) const = default;
};

// Throws ShapeError unless dim is 2 or 3 and every extent >= 2.
void validate_shape(const GridShape& shape);

std::string shape_to_string(const GridShape& shape);

// Scalar image, one intensity per voxel.
struct Image {
    GridShape shape;
    std::vector<double> values;
};

Image make_image(const GridShape& shape, double fill = 0.0);

// Categorical segmentation carrier.
struct LabelMap {
    GridShape shape;
    std::vector<std::uint16_t> labels;
};

LabelMap make_labels(const GridShape& shape, std::uint16_t fill = 0);

// Per-voxel determinant of the deformation Jacobian.
struct JacobianMap {
    GridShape shape;
    std::vector<double> dets;
};

// Per-voxel coordinate vector, stored channel-planar: coords[a*N + i] is the
// component along axis a of voxel i. The final cloud of a flow IS the
// deformation field.
struct VoxelCloud {
    GridShape shape;
    std::vector<double> coords;

    double* plane(int axis) { return coords.data() + axis * shape.voxels(); }
    const double* plane(int axis) const { return coords.data() + axis * shape.voxels(); }
};

// Generic channel-planar field over a grid (velocities, activations,
// cotangents, matrix fields with dim*dim channels).
struct VectorField {
    GridShape shape;
    int channels = 0;
    std::vector<double> data;

    double* plane(int c) { return data.data() + static_cast<std::int64_t>(c) * shape.voxels(); }
    const double* plane(int c) const {
        return data.data() + static_cast<std::int64_t>(c) * shape.voxels();
    }
};

VectorField make_field(const GridShape& shape, int channels, double fill = 0.0);

// Velocity mask realizing hard boundary conditions: 1 on free voxels,
// 0 on constrained ones.
struct BoundaryMask {
    GridShape shape;
    std::vector<double> weights;
};

// Mask fixing every face voxel of the grid.
BoundaryMask make_face_mask(const GridShape& shape);

// Row-major strides, strides[dim-1] == 1.
std::vector<std::int64_t> row_major_strides(const GridShape& shape);

bool all_finite(const std::vector<double>& v);

}  // namespace flowreg
