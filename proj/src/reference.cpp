#include "flowreg/reference.hpp"

#include <algorithm>
#include <cmath>

namespace flowreg::ref {

namespace {

inline double clamp_coord(double c, int extent) {
    return std::clamp(c, 0.0, static_cast<double>(extent - 1));
}

inline int reflect(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -1 - i;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

}  // namespace

Image warp(const Image& image, const VoxelCloud& cloud) {
    if (!(image.shape == cloud.shape)) throw ShapeError("ref::warp shape mismatch");
    Image out = make_image(image.shape);
    const int dim = image.shape.dim();
    const auto strides = row_major_strides(image.shape);
    const std::int64_t n = image.shape.voxels();
    for (std::int64_t v = 0; v < n; ++v) {
        int base[3];
        double frac[3];
        for (int a = 0; a < dim; ++a) {
            const double c = clamp_coord(cloud.plane(a)[v], image.shape.extents[a]);
            int i0 = static_cast<int>(c);
            if (i0 > image.shape.extents[a] - 2) i0 = image.shape.extents[a] - 2;
            base[a] = i0;
            frac[a] = c - i0;
        }
        double acc = 0.0;
        for (int corner = 0; corner < (1 << dim); ++corner) {
            double wgt = 1.0;
            std::int64_t idx = 0;
            for (int a = 0; a < dim; ++a) {
                const int bit = (corner >> a) & 1;
                wgt *= bit ? frac[a] : 1.0 - frac[a];
                idx += (base[a] + bit) * strides[a];
            }
            acc += wgt * image.values[static_cast<std::size_t>(idx)];
        }
        out.values[static_cast<std::size_t>(v)] = acc;
    }
    return out;
}

VectorField smooth_dense(const GaussianKernel& kernel, const VectorField& field) {
    if (kernel.dim != field.shape.dim()) throw ShapeError("ref::smooth_dense dim mismatch");
    const int dim = field.shape.dim();
    const auto strides = row_major_strides(field.shape);
    const std::int64_t n = field.shape.voxels();
    VectorField out = make_field(field.shape, field.channels);

    int r[3];
    for (int a = 0; a < dim; ++a) r[a] = kernel.radius[static_cast<std::size_t>(a)];

    for (int c = 0; c < field.channels; ++c) {
        const double* src = field.plane(c);
        double* dst = out.plane(c);
        for (std::int64_t v = 0; v < n; ++v) {
            int pos[3];
            for (int a = 0; a < dim; ++a)
                pos[a] = static_cast<int>((v / strides[a]) % field.shape.extents[a]);
            double acc = 0.0;
            if (dim == 2) {
                for (int dy = -r[0]; dy <= r[0]; ++dy) {
                    for (int dx = -r[1]; dx <= r[1]; ++dx) {
                        const double w = kernel.taps[0][static_cast<std::size_t>(dy + r[0])] *
                                         kernel.taps[1][static_cast<std::size_t>(dx + r[1])];
                        const int y = reflect(pos[0] + dy, field.shape.extents[0]);
                        const int x = reflect(pos[1] + dx, field.shape.extents[1]);
                        acc += w * src[y * strides[0] + x];
                    }
                }
            } else {
                for (int dz = -r[0]; dz <= r[0]; ++dz) {
                    for (int dy = -r[1]; dy <= r[1]; ++dy) {
                        for (int dx = -r[2]; dx <= r[2]; ++dx) {
                            const double w =
                                kernel.taps[0][static_cast<std::size_t>(dz + r[0])] *
                                kernel.taps[1][static_cast<std::size_t>(dy + r[1])] *
                                kernel.taps[2][static_cast<std::size_t>(dx + r[2])];
                            const int z = reflect(pos[0] + dz, field.shape.extents[0]);
                            const int y = reflect(pos[1] + dy, field.shape.extents[1]);
                            const int x = reflect(pos[2] + dx, field.shape.extents[2]);
                            acc += w * src[z * strides[0] + y * strides[1] + x];
                        }
                    }
                }
            }
            dst[v] = acc;
        }
    }
    return out;
}

VectorField spatial_gradient(const VoxelCloud& cloud) {
    const int dim = cloud.shape.dim();
    const auto strides = row_major_strides(cloud.shape);
    const std::int64_t n = cloud.shape.voxels();
    VectorField g = make_field(cloud.shape, dim * dim);
    for (int i = 0; i < dim; ++i) {
        const double* plane = cloud.plane(i);
        for (int a = 0; a < dim; ++a) {
            double* out = g.plane(i * dim + a);
            for (std::int64_t v = 0; v < n; ++v) {
                const int c = static_cast<int>((v / strides[a]) % cloud.shape.extents[a]);
                if (c == 0)
                    out[v] = plane[v + strides[a]] - plane[v];
                else if (c == cloud.shape.extents[a] - 1)
                    out[v] = plane[v] - plane[v - strides[a]];
                else
                    out[v] = 0.5 * (plane[v + strides[a]] - plane[v - strides[a]]);
            }
        }
    }
    return g;
}

JacobianMap jacobian_det_map(const VoxelCloud& cloud) {
    const VectorField g = spatial_gradient(cloud);
    const int dim = cloud.shape.dim();
    const std::int64_t n = cloud.shape.voxels();
    JacobianMap jm{cloud.shape, std::vector<double>(static_cast<std::size_t>(n))};
    for (std::int64_t v = 0; v < n; ++v) {
        if (dim == 2) {
            jm.dets[static_cast<std::size_t>(v)] =
                g.plane(0)[v] * g.plane(3)[v] - g.plane(1)[v] * g.plane(2)[v];
        } else {
            const double a = g.plane(0)[v], b = g.plane(1)[v], c = g.plane(2)[v];
            const double d = g.plane(3)[v], e = g.plane(4)[v], f = g.plane(5)[v];
            const double gg = g.plane(6)[v], h = g.plane(7)[v], i = g.plane(8)[v];
            jm.dets[static_cast<std::size_t>(v)] =
                a * (e * i - f * h) - b * (d * i - f * gg) + c * (d * h - e * gg);
        }
    }
    return jm;
}

double ncc(const Image& fixed, const Image& moving, int window, double variance_floor) {
    if (!(fixed.shape == moving.shape)) throw ShapeError("ref::ncc shape mismatch");
    const int r = window / 2;
    const int dim = fixed.shape.dim();
    const auto strides = row_major_strides(fixed.shape);
    const std::int64_t n = fixed.shape.voxels();
    double total = 0.0;
    for (std::int64_t v = 0; v < n; ++v) {
        int pos[3];
        for (int a = 0; a < dim; ++a)
            pos[a] = static_cast<int>((v / strides[a]) % fixed.shape.extents[a]);
        int lo[3], hi[3];
        for (int a = 0; a < dim; ++a) {
            lo[a] = std::max(0, pos[a] - r);
            hi[a] = std::min(fixed.shape.extents[a] - 1, pos[a] + r);
        }
        std::vector<std::int64_t> members;
        if (dim == 2) {
            for (int y = lo[0]; y <= hi[0]; ++y)
                for (int x = lo[1]; x <= hi[1]; ++x) members.push_back(y * strides[0] + x);
        } else {
            for (int z = lo[0]; z <= hi[0]; ++z)
                for (int y = lo[1]; y <= hi[1]; ++y)
                    for (int x = lo[2]; x <= hi[2]; ++x)
                        members.push_back(z * strides[0] + y * strides[1] + x);
        }
        const double cnt = static_cast<double>(members.size());
        double mi = 0, mj = 0;
        for (auto idx : members) {
            mi += fixed.values[static_cast<std::size_t>(idx)];
            mj += moving.values[static_cast<std::size_t>(idx)];
        }
        mi /= cnt;
        mj /= cnt;
        double A = 0, B = 0, C = 0;
        for (auto idx : members) {
            const double di = fixed.values[static_cast<std::size_t>(idx)] - mi;
            const double dj = moving.values[static_cast<std::size_t>(idx)] - mj;
            A += di * dj;
            B += di * di;
            C += dj * dj;
        }
        if (B / cnt < variance_floor || C / cnt < variance_floor) continue;
        total += A / std::sqrt(B * C);
    }
    return total / static_cast<double>(n);
}

double mse(const Image& fixed, const Image& moving) {
    if (!(fixed.shape == moving.shape)) throw ShapeError("ref::mse shape mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < fixed.values.size(); ++i) {
        const double d = moving.values[i] - fixed.values[i];
        total += d * d;
    }
    return total / static_cast<double>(fixed.values.size());
}

double neg_jacobian_ratio(const VoxelCloud& cloud) {
    const JacobianMap jm = jacobian_det_map(cloud);
    std::int64_t bad = 0;
    for (double d : jm.dets)
        if (d <= 0.0) ++bad;
    return static_cast<double>(bad) / static_cast<double>(jm.dets.size());
}

}  // namespace flowreg::ref
