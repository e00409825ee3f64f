#include "flowreg/grid.hpp"

#include <algorithm>
#include <cmath>

#include "flowreg/parallel.hpp"

namespace flowreg {

namespace {

void require_same_shape(const GridShape& a, const GridShape& b, const char* what) {
    if (!(a == b))
        throw ShapeError(std::string(what) + ": shape mismatch " + shape_to_string(a) + " vs " +
                         shape_to_string(b));
}

inline double clamp_coord(double c, int extent) {
    if (c < 0.0) return 0.0;
    const double hi = static_cast<double>(extent - 1);
    return c > hi ? hi : c;
}

struct Sample2D {
    double value;
    double dy, dx;
};

inline Sample2D sample2d(const double* img, int H, int W, double cy, double cx) {
    const double y = clamp_coord(cy, H);
    const double x = clamp_coord(cx, W);
    int y0 = static_cast<int>(y);
    int x0 = static_cast<int>(x);
    if (y0 > H - 2) y0 = H - 2;
    if (x0 > W - 2) x0 = W - 2;
    const double fy = y - y0;
    const double fx = x - x0;
    const double v00 = img[y0 * W + x0];
    const double v01 = img[y0 * W + x0 + 1];
    const double v10 = img[(y0 + 1) * W + x0];
    const double v11 = img[(y0 + 1) * W + x0 + 1];
    const double top = v00 + fx * (v01 - v00);
    const double bot = v10 + fx * (v11 - v10);
    Sample2D s;
    s.value = top + fy * (bot - top);
    const bool iny = cy >= 0.0 && cy <= static_cast<double>(H - 1);
    const bool inx = cx >= 0.0 && cx <= static_cast<double>(W - 1);
    s.dy = iny ? (bot - top) : 0.0;
    s.dx = inx ? ((v01 - v00) + fy * ((v11 - v10) - (v01 - v00))) : 0.0;
    return s;
}

struct Sample3D {
    double value;
    double dz, dy, dx;
};

inline Sample3D sample3d(const double* img, int D, int H, int W, double cz, double cy, double cx) {
    const double z = clamp_coord(cz, D);
    const double y = clamp_coord(cy, H);
    const double x = clamp_coord(cx, W);
    int z0 = static_cast<int>(z);
    int y0 = static_cast<int>(y);
    int x0 = static_cast<int>(x);
    if (z0 > D - 2) z0 = D - 2;
    if (y0 > H - 2) y0 = H - 2;
    if (x0 > W - 2) x0 = W - 2;
    const double fz = z - z0, fy = y - y0, fx = x - x0;
    const std::int64_t sz = static_cast<std::int64_t>(H) * W;
    const double* p0 = img + z0 * sz;
    const double* p1 = p0 + sz;
    auto bilin = [&](const double* p, double& ddy, double& ddx) {
        const double v00 = p[y0 * W + x0];
        const double v01 = p[y0 * W + x0 + 1];
        const double v10 = p[(y0 + 1) * W + x0];
        const double v11 = p[(y0 + 1) * W + x0 + 1];
        const double top = v00 + fx * (v01 - v00);
        const double bot = v10 + fx * (v11 - v10);
        ddy = bot - top;
        ddx = (v01 - v00) + fy * ((v11 - v10) - (v01 - v00));
        return top + fy * (bot - top);
    };
    double dy0, dx0, dy1, dx1;
    const double a = bilin(p0, dy0, dx0);
    const double b = bilin(p1, dy1, dx1);
    Sample3D s;
    s.value = a + fz * (b - a);
    const bool inz = cz >= 0.0 && cz <= static_cast<double>(D - 1);
    const bool iny = cy >= 0.0 && cy <= static_cast<double>(H - 1);
    const bool inx = cx >= 0.0 && cx <= static_cast<double>(W - 1);
    s.dz = inz ? (b - a) : 0.0;
    s.dy = iny ? (dy0 + fz * (dy1 - dy0)) : 0.0;
    s.dx = inx ? (dx0 + fz * (dx1 - dx0)) : 0.0;
    return s;
}

}  // namespace

VoxelCloud make_identity_grid(const GridShape& shape) {
    validate_shape(shape);
    const int dim = shape.dim();
    const std::int64_t n = shape.voxels();
    const auto strides = row_major_strides(shape);
    VoxelCloud cloud{shape, std::vector<double>(static_cast<std::size_t>(n * dim))};
    for (int a = 0; a < dim; ++a) {
        double* plane = cloud.plane(a);
        const std::int64_t stride = strides[a];
        const int extent = shape.extents[a];
        par::for_each(n, [&, plane, stride, extent](std::int64_t i) {
            plane[i] = static_cast<double>((i / stride) % extent);
        });
    }
    return cloud;
}

Image warp(const Image& image, const VoxelCloud& cloud) {
    require_same_shape(image.shape, cloud.shape, "warp");
    Image out = make_image(image.shape);
    const int dim = image.shape.dim();
    const double* img = image.values.data();
    if (dim == 2) {
        const int H = image.shape.extents[0], W = image.shape.extents[1];
        const double* cy = cloud.plane(0);
        const double* cx = cloud.plane(1);
        par::for_each(image.shape.voxels(), [&](std::int64_t i) {
            out.values[i] = sample2d(img, H, W, cy[i], cx[i]).value;
        });
    } else {
        const int D = image.shape.extents[0], H = image.shape.extents[1],
                  W = image.shape.extents[2];
        const double* cz = cloud.plane(0);
        const double* cy = cloud.plane(1);
        const double* cx = cloud.plane(2);
        par::for_each(image.shape.voxels(), [&](std::int64_t i) {
            out.values[i] = sample3d(img, D, H, W, cz[i], cy[i], cx[i]).value;
        });
    }
    return out;
}

WarpWithGrad warp_with_grad(const Image& image, const VoxelCloud& cloud) {
    require_same_shape(image.shape, cloud.shape, "warp");
    const int dim = image.shape.dim();
    WarpWithGrad r{make_image(image.shape), make_field(image.shape, dim)};
    const double* img = image.values.data();
    if (dim == 2) {
        const int H = image.shape.extents[0], W = image.shape.extents[1];
        const double* cy = cloud.plane(0);
        const double* cx = cloud.plane(1);
        double* g0 = r.grad.plane(0);
        double* g1 = r.grad.plane(1);
        par::for_each(image.shape.voxels(), [&](std::int64_t i) {
            const Sample2D s = sample2d(img, H, W, cy[i], cx[i]);
            r.warped.values[i] = s.value;
            g0[i] = s.dy;
            g1[i] = s.dx;
        });
    } else {
        const int D = image.shape.extents[0], H = image.shape.extents[1],
                  W = image.shape.extents[2];
        const double* cz = cloud.plane(0);
        const double* cy = cloud.plane(1);
        const double* cx = cloud.plane(2);
        double* g0 = r.grad.plane(0);
        double* g1 = r.grad.plane(1);
        double* g2 = r.grad.plane(2);
        par::for_each(image.shape.voxels(), [&](std::int64_t i) {
            const Sample3D s = sample3d(img, D, H, W, cz[i], cy[i], cx[i]);
            r.warped.values[i] = s.value;
            g0[i] = s.dz;
            g1[i] = s.dy;
            g2[i] = s.dx;
        });
    }
    return r;
}

LabelMap warp_labels(const LabelMap& labels, const VoxelCloud& cloud) {
    require_same_shape(labels.shape, cloud.shape, "warp_labels");
    LabelMap out = make_labels(labels.shape);
    const int dim = labels.shape.dim();
    const auto strides = row_major_strides(labels.shape);
    par::for_each(labels.shape.voxels(), [&](std::int64_t i) {
        std::int64_t src = 0;
        for (int a = 0; a < dim; ++a) {
            const double c = clamp_coord(cloud.plane(a)[i], labels.shape.extents[a]);
            int idx = static_cast<int>(std::floor(c + 0.5));
            idx = std::clamp(idx, 0, labels.shape.extents[a] - 1);
            src += idx * strides[a];
        }
        out.labels[i] = labels.labels[static_cast<std::size_t>(src)];
    });
    return out;
}

namespace {

// d psi_i / d x_a at linear index i, for a grid with the given strides.
inline double stencil_derivative(const double* plane, std::int64_t i, int coord, int extent,
                                 std::int64_t stride) {
    if (coord == 0) return plane[i + stride] - plane[i];
    if (coord == extent - 1) return plane[i] - plane[i - stride];
    return 0.5 * (plane[i + stride] - plane[i - stride]);
}

}  // namespace

VectorField spatial_gradient(const VoxelCloud& cloud) {
    validate_shape(cloud.shape);
    const int dim = cloud.shape.dim();
    const auto strides = row_major_strides(cloud.shape);
    VectorField g = make_field(cloud.shape, dim * dim);
    for (int i = 0; i < dim; ++i) {
        const double* plane = cloud.plane(i);
        for (int a = 0; a < dim; ++a) {
            double* out = g.plane(i * dim + a);
            const std::int64_t stride = strides[a];
            const int extent = cloud.shape.extents[a];
            par::for_each(cloud.shape.voxels(), [&, plane, out, stride, extent](std::int64_t v) {
                const int c = static_cast<int>((v / stride) % extent);
                out[v] = stencil_derivative(plane, v, c, extent, stride);
            });
        }
    }
    return g;
}

JacobianMap jacobian_det_map(const VoxelCloud& cloud) {
    validate_shape(cloud.shape);
    const int dim = cloud.shape.dim();
    const auto strides = row_major_strides(cloud.shape);
    const std::int64_t n = cloud.shape.voxels();
    JacobianMap jm{cloud.shape, std::vector<double>(static_cast<std::size_t>(n))};
    par::for_each(n, [&](std::int64_t v) {
        double m[3][3];
        for (int i = 0; i < dim; ++i) {
            const double* plane = cloud.plane(i);
            for (int a = 0; a < dim; ++a) {
                const int c = static_cast<int>((v / strides[a]) % cloud.shape.extents[a]);
                m[i][a] = stencil_derivative(plane, v, c, cloud.shape.extents[a], strides[a]);
            }
        }
        double det;
        if (dim == 2) {
            det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        } else {
            det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                  m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                  m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        }
        jm.dets[static_cast<std::size_t>(v)] = det;
    });
    return jm;
}

void add_spatial_gradient_transpose(const VectorField& P, VectorField& out) {
    validate_shape(P.shape);
    const int dim = P.shape.dim();
    if (P.channels != dim * dim) throw ShapeError("cotangent field must have dim*dim channels");
    require_same_shape(P.shape, out.shape, "spatial_gradient_transpose");
    if (out.channels != dim) throw ShapeError("output field must have dim channels");
    const auto strides = row_major_strides(P.shape);
    const std::int64_t n = P.shape.voxels();
    for (int i = 0; i < dim; ++i) {
        double* dst = out.plane(i);
        for (int a = 0; a < dim; ++a) {
            const double* c = P.plane(i * dim + a);
            const std::int64_t stride = strides[a];
            const int extent = P.shape.extents[a];
            // Gather form of the scatter: which stencil windows reference y.
            par::for_each(n, [&, dst, c, stride, extent](std::int64_t y) {
                const int ya = static_cast<int>((y / stride) % extent);
                double acc = 0.0;
                if (ya >= 1) {
                    const int xa = ya - 1;
                    acc += c[y - stride] * (xa == 0 ? 1.0 : 0.5);
                }
                if (ya <= extent - 2) {
                    const int xa = ya + 1;
                    acc -= c[y + stride] * (xa == extent - 1 ? 1.0 : 0.5);
                }
                if (ya == 0) acc -= c[y];
                if (ya == extent - 1) acc += c[y];
                dst[y] += acc;
            });
        }
    }
}

}  // namespace flowreg
