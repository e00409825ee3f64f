#include "flowreg/gaussian.hpp"

#include <cmath>

#include "flowreg/parallel.hpp"

namespace flowreg {

namespace {

std::vector<double> gaussian_taps(int radius, double sigma) {
    std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double w = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
        taps[static_cast<std::size_t>(i + radius)] = w;
        sum += w;
    }
    for (double& w : taps) w /= sum;
    return taps;
}

inline int reflect(int i, int n) {
    // symmetric half-sample reflection, iterated for tiny extents
    while (i < 0 || i >= n) {
        if (i < 0) i = -1 - i;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

// Decompose the grid into independent 1D lines along `axis`; base offset of
// line l is (l / stride)*stride*extent + (l % stride) with stride the
// row-major stride of that axis.
struct AxisLines {
    std::int64_t lines;
    std::int64_t stride;
    int extent;
};

AxisLines axis_lines(const GridShape& shape, int axis) {
    const auto strides = row_major_strides(shape);
    return AxisLines{shape.voxels() / shape.extents[axis], strides[axis], shape.extents[axis]};
}

void smooth_axis(const std::vector<double>& taps, int radius, const AxisLines& ax, const double* in,
                 double* out) {
    par::for_each(ax.lines, [&](std::int64_t l) {
        const std::int64_t base = (l / ax.stride) * ax.stride * ax.extent + (l % ax.stride);
        for (int i = 0; i < ax.extent; ++i) {
            double acc = 0.0;
            for (int j = -radius; j <= radius; ++j) {
                const int src = reflect(i + j, ax.extent);
                acc += taps[static_cast<std::size_t>(j + radius)] * in[base + src * ax.stride];
            }
            out[base + i * ax.stride] = acc;
        }
    });
}

void smooth_axis_transpose(const std::vector<double>& taps, int radius, const AxisLines& ax,
                           const double* in, double* out) {
    par::for_each(ax.lines, [&](std::int64_t l) {
        const std::int64_t base = (l / ax.stride) * ax.stride * ax.extent + (l % ax.stride);
        for (int i = 0; i < ax.extent; ++i) out[base + i * ax.stride] = 0.0;
        for (int i = 0; i < ax.extent; ++i) {
            const double v = in[base + i * ax.stride];
            for (int j = -radius; j <= radius; ++j) {
                const int dst = reflect(i + j, ax.extent);
                out[base + dst * ax.stride] += taps[static_cast<std::size_t>(j + radius)] * v;
            }
        }
    });
}

}  // namespace

GaussianKernel make_kernel(int radius, double sigma, int dim) {
    if (dim != 2 && dim != 3) throw ParamError("kernel dim must be 2 or 3");
    std::vector<int> r(static_cast<std::size_t>(dim), radius);
    std::vector<double> s(static_cast<std::size_t>(dim), sigma);
    return make_kernel(r, s);
}

GaussianKernel make_kernel(const std::vector<int>& radius, const std::vector<double>& sigma) {
    const int dim = static_cast<int>(radius.size());
    if (dim != 2 && dim != 3) throw ParamError("kernel dim must be 2 or 3");
    if (sigma.size() != radius.size()) throw ParamError("radius/sigma length mismatch");
    GaussianKernel k;
    k.dim = dim;
    for (int a = 0; a < dim; ++a) {
        if (radius[static_cast<std::size_t>(a)] < 0) throw ParamError("kernel radius must be >= 0");
        if (!(sigma[static_cast<std::size_t>(a)] > 0.0))
            throw ParamError("kernel sigma must be > 0");
        k.radius[static_cast<std::size_t>(a)] = radius[static_cast<std::size_t>(a)];
        k.sigma[static_cast<std::size_t>(a)] = sigma[static_cast<std::size_t>(a)];
        k.taps.push_back(gaussian_taps(radius[static_cast<std::size_t>(a)],
                                       sigma[static_cast<std::size_t>(a)]));
    }
    return k;
}

VectorField apply(const GaussianKernel& kernel, const VectorField& field) {
    validate_shape(field.shape);
    if (kernel.dim != field.shape.dim())
        throw ShapeError("kernel dim " + std::to_string(kernel.dim) + " vs field dim " +
                         std::to_string(field.shape.dim()));
    VectorField out = field;
    if (kernel.is_identity()) return out;
    VectorField tmp = make_field(field.shape, 1);
    const std::int64_t n = field.shape.voxels();
    for (int c = 0; c < field.channels; ++c) {
        const double* src = out.plane(c);
        double* a_buf = out.plane(c);
        double* b_buf = tmp.plane(0);
        // ping-pong between the channel plane and the scratch plane
        const double* cur = src;
        double* nxt = b_buf;
        for (int axis = 0; axis < kernel.dim; ++axis) {
            if (kernel.radius[static_cast<std::size_t>(axis)] == 0) continue;
            smooth_axis(kernel.taps[static_cast<std::size_t>(axis)],
                        kernel.radius[static_cast<std::size_t>(axis)], axis_lines(field.shape, axis),
                        cur, nxt);
            const double* done = nxt;
            nxt = (done == b_buf) ? a_buf : b_buf;
            cur = done;
        }
        if (cur != a_buf)
            for (std::int64_t i = 0; i < n; ++i) a_buf[i] = cur[i];
    }
    return out;
}

VectorField apply_transpose(const GaussianKernel& kernel, const VectorField& field) {
    validate_shape(field.shape);
    if (kernel.dim != field.shape.dim())
        throw ShapeError("kernel dim " + std::to_string(kernel.dim) + " vs field dim " +
                         std::to_string(field.shape.dim()));
    VectorField out = field;
    if (kernel.is_identity()) return out;
    VectorField tmp = make_field(field.shape, 1);
    const std::int64_t n = field.shape.voxels();
    for (int c = 0; c < field.channels; ++c) {
        double* a_buf = out.plane(c);
        double* b_buf = tmp.plane(0);
        const double* cur = a_buf;
        double* nxt = b_buf;
        // reverse axis order: transpose of K_{d-1}...K_0 is K_0^T...K_{d-1}^T
        for (int axis = kernel.dim - 1; axis >= 0; --axis) {
            if (kernel.radius[static_cast<std::size_t>(axis)] == 0) continue;
            smooth_axis_transpose(kernel.taps[static_cast<std::size_t>(axis)],
                                  kernel.radius[static_cast<std::size_t>(axis)],
                                  axis_lines(field.shape, axis), cur, nxt);
            const double* done = nxt;
            nxt = (done == b_buf) ? a_buf : b_buf;
            cur = done;
        }
        if (cur != a_buf)
            for (std::int64_t i = 0; i < n; ++i) a_buf[i] = cur[i];
    }
    return out;
}

}  // namespace flowreg
