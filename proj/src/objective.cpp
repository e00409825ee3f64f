#include "flowreg/objective.hpp"

#include <cmath>

#include "flowreg/grid.hpp"
#include "flowreg/metrics.hpp"
#include "flowreg/parallel.hpp"

namespace flowreg {

namespace {

void require_same_shape(const GridShape& a, const GridShape& b, const char* what) {
    if (!(a == b))
        throw ShapeError(std::string(what) + ": shape mismatch " + shape_to_string(a) + " vs " +
                         shape_to_string(b));
}

struct WindowStats {
    double mean_fixed = 0.0;
    double mean_moving = 0.0;
    double inv_sqrt_bc = 0.0;  // 1/sqrt(B*C), 0 when floored
    double a_over = 0.0;       // A/(sqrt(B)*C^1.5), 0 when floored
    double rho = 0.0;
};

// Window sums around center x, truncated at borders. B belongs to the fixed
// image, C to the moving one.
template <class Body>
void for_each_window_voxel(const GridShape& shape, const std::vector<std::int64_t>& strides,
                           const int* center, int r, Body&& body) {
    const int dim = shape.dim();
    int lo[3], hi[3];
    for (int a = 0; a < dim; ++a) {
        lo[a] = std::max(0, center[a] - r);
        hi[a] = std::min(shape.extents[a] - 1, center[a] + r);
    }
    if (dim == 2) {
        for (int y = lo[0]; y <= hi[0]; ++y)
            for (int x = lo[1]; x <= hi[1]; ++x) body(y * strides[0] + x);
    } else {
        for (int z = lo[0]; z <= hi[0]; ++z)
            for (int y = lo[1]; y <= hi[1]; ++y)
                for (int x = lo[2]; x <= hi[2]; ++x)
                    body(z * strides[0] + y * strides[1] + x);
    }
}

WindowStats window_stats(const Image& fixed, const Image& moving,
                         const std::vector<std::int64_t>& strides, const int* center, int r,
                         double floor) {
    double si = 0, sj = 0, sii = 0, sjj = 0, sij = 0;
    std::int64_t cnt = 0;
    for_each_window_voxel(fixed.shape, strides, center, r, [&](std::int64_t idx) {
        const double vi = fixed.values[static_cast<std::size_t>(idx)];
        const double vj = moving.values[static_cast<std::size_t>(idx)];
        si += vi;
        sj += vj;
        sii += vi * vi;
        sjj += vj * vj;
        sij += vi * vj;
        ++cnt;
    });
    WindowStats ws;
    const double c = static_cast<double>(cnt);
    ws.mean_fixed = si / c;
    ws.mean_moving = sj / c;
    const double B = sii - c * ws.mean_fixed * ws.mean_fixed;
    const double C = sjj - c * ws.mean_moving * ws.mean_moving;
    const double A = sij - c * ws.mean_fixed * ws.mean_moving;
    if (B / c < floor || C / c < floor) return ws;  // flat window contributes 0
    ws.inv_sqrt_bc = 1.0 / std::sqrt(B * C);
    ws.a_over = A / (std::sqrt(B) * C * std::sqrt(C));
    ws.rho = A * ws.inv_sqrt_bc;
    return ws;
}

}  // namespace

void validate_loss_config(const LossConfig& config) {
    if (config.similarity == Similarity::ncc &&
        (config.ncc_window < 3 || config.ncc_window % 2 == 0))
        throw ParamError("NCC window must be odd and >= 3");
    if (config.lambda_jdet < 0 || config.lambda_mag < 0 || config.lambda_smt < 0)
        throw ParamError("loss weights must be non-negative");
    if (config.epsilon < 0) throw ParamError("epsilon must be >= 0");
    if (!(config.variance_floor >= 0)) throw ParamError("variance floor must be >= 0");
}

double ncc(const Image& fixed, const Image& moving, int window, double variance_floor) {
    require_same_shape(fixed.shape, moving.shape, "ncc");
    if (window < 3 || window % 2 == 0) throw ParamError("NCC window must be odd and >= 3");
    const int r = window / 2;
    const auto strides = row_major_strides(fixed.shape);
    const std::int64_t n = fixed.shape.voxels();
    const double sum = par::block_sum(n, [&](std::int64_t i) {
        int c[3];
        for (int a = 0; a < fixed.shape.dim(); ++a)
            c[a] = static_cast<int>((i / strides[a]) % fixed.shape.extents[a]);
        return window_stats(fixed, moving, strides, c, r, variance_floor).rho;
    });
    return sum / static_cast<double>(n);
}

VectorField ncc_grad_wrt_moving(const Image& fixed, const Image& moving, int window,
                                double variance_floor) {
    require_same_shape(fixed.shape, moving.shape, "ncc");
    if (window < 3 || window % 2 == 0) throw ParamError("NCC window must be odd and >= 3");
    const int r = window / 2;
    const int dim = fixed.shape.dim();
    const auto strides = row_major_strides(fixed.shape);
    const std::int64_t n = fixed.shape.voxels();

    // pass 1: per-window statistics
    std::vector<double> mean_f(static_cast<std::size_t>(n));
    std::vector<double> mean_m(static_cast<std::size_t>(n));
    std::vector<double> inv_bc(static_cast<std::size_t>(n));
    std::vector<double> a_over(static_cast<std::size_t>(n));
    par::for_each(n, [&](std::int64_t i) {
        int c[3];
        for (int a = 0; a < dim; ++a)
            c[a] = static_cast<int>((i / strides[a]) % fixed.shape.extents[a]);
        const WindowStats ws = window_stats(fixed, moving, strides, c, r, variance_floor);
        mean_f[static_cast<std::size_t>(i)] = ws.mean_fixed;
        mean_m[static_cast<std::size_t>(i)] = ws.mean_moving;
        inv_bc[static_cast<std::size_t>(i)] = ws.inv_sqrt_bc;
        a_over[static_cast<std::size_t>(i)] = ws.a_over;
    });

    // pass 2: each voxel gathers from every window containing it
    VectorField out = make_field(fixed.shape, 1);
    double* g = out.plane(0);
    par::for_each(n, [&](std::int64_t y) {
        int c[3];
        for (int a = 0; a < dim; ++a)
            c[a] = static_cast<int>((y / strides[a]) % fixed.shape.extents[a]);
        const double vi = fixed.values[static_cast<std::size_t>(y)];
        const double vj = moving.values[static_cast<std::size_t>(y)];
        double acc = 0.0;
        for_each_window_voxel(fixed.shape, strides, c, r, [&](std::int64_t x) {
            const std::size_t xi = static_cast<std::size_t>(x);
            acc += (vi - mean_f[xi]) * inv_bc[xi] - a_over[xi] * (vj - mean_m[xi]);
        });
        g[y] = acc / static_cast<double>(n);
    });
    return out;
}

double mse(const Image& fixed, const Image& moving) {
    require_same_shape(fixed.shape, moving.shape, "mse");
    const std::int64_t n = fixed.shape.voxels();
    const double sum = par::block_sum(n, [&](std::int64_t i) {
        const double d = moving.values[static_cast<std::size_t>(i)] -
                         fixed.values[static_cast<std::size_t>(i)];
        return d * d;
    });
    return sum / static_cast<double>(n);
}

double loss_jdet(const VoxelCloud& cloud, double epsilon) {
    const JacobianMap jm = jacobian_det_map(cloud);
    const std::int64_t n = cloud.shape.voxels();
    const double sum = par::block_sum(n, [&](std::int64_t i) {
        const double v = -(jm.dets[static_cast<std::size_t>(i)] + epsilon);
        return v > 0.0 ? v : 0.0;
    });
    return sum / static_cast<double>(n);
}

double loss_mag(const Trajectory& trajectory) {
    if (trajectory.velocity_sq_norms.empty())
        throw ConfigError("trajectory retains no velocity records; enable them to use the "
                          "magnitude regularizer");
    const double n = static_cast<double>(trajectory.initial().shape.voxels());
    double sum = 0.0;
    for (double sq : trajectory.velocity_sq_norms) sum += trajectory.step_size * sq;
    return sum / n;
}

double loss_smt(const VoxelCloud& cloud) {
    const VectorField g = spatial_gradient(cloud);
    const int dim = cloud.shape.dim();
    const std::int64_t n = cloud.shape.voxels();
    double total = 0.0;
    for (int i = 0; i < dim; ++i) {
        for (int a = 0; a < dim; ++a) {
            const double* plane = g.plane(i * dim + a);
            const double shift = (i == a) ? 1.0 : 0.0;  // displacement convention
            total += par::block_sum(n, [&, plane, shift](std::int64_t v) {
                const double d = plane[v] - shift;
                return d * d;
            });
        }
    }
    return total / static_cast<double>(n);
}

LossReport total_loss(const Image& fixed, const Image& moving, const Trajectory& trajectory,
                      const LossConfig& config) {
    validate_loss_config(config);
    require_same_shape(fixed.shape, moving.shape, "total_loss");
    const VoxelCloud& psi = trajectory.final_cloud();
    require_same_shape(fixed.shape, psi.shape, "total_loss");
    const Image warped = warp(moving, psi);

    LossReport report;
    if (config.similarity == Similarity::mse) {
        report.sim = mse(fixed, warped);
    } else {
        report.sim = 1.0 - ncc(fixed, warped, config.ncc_window, config.variance_floor);
    }
    report.jdet = loss_jdet(psi, config.epsilon);
    report.mag = config.lambda_mag > 0.0 ? loss_mag(trajectory) : 0.0;
    report.smt = loss_smt(psi);
    report.total = report.sim + config.lambda_jdet * report.jdet + config.lambda_mag * report.mag +
                   config.lambda_smt * report.smt;
    report.neg_jac_ratio = neg_jacobian_ratio(psi);
    return report;
}

VectorField grad_wrt_final_cloud(const Image& fixed, const Image& moving, const VoxelCloud& cloud,
                                 const LossConfig& config) {
    validate_loss_config(config);
    require_same_shape(fixed.shape, moving.shape, "grad_wrt_final_cloud");
    require_same_shape(fixed.shape, cloud.shape, "grad_wrt_final_cloud");
    const int dim = cloud.shape.dim();
    const std::int64_t n = cloud.shape.voxels();

    const WarpWithGrad wg = warp_with_grad(moving, cloud);

    // similarity chain: dSim/dwarped times dwarped/dcoords
    std::vector<double> gw(static_cast<std::size_t>(n));
    if (config.similarity == Similarity::mse) {
        par::for_each(n, [&](std::int64_t i) {
            gw[static_cast<std::size_t>(i)] = 2.0 *
                                              (wg.warped.values[static_cast<std::size_t>(i)] -
                                               fixed.values[static_cast<std::size_t>(i)]) /
                                              static_cast<double>(n);
        });
    } else {
        const VectorField nccg =
            ncc_grad_wrt_moving(fixed, wg.warped, config.ncc_window, config.variance_floor);
        const double* src = nccg.plane(0);
        par::for_each(n, [&, src](std::int64_t i) { gw[static_cast<std::size_t>(i)] = -src[i]; });
    }

    VectorField out = make_field(cloud.shape, dim);
    for (int a = 0; a < dim; ++a) {
        double* dst = out.plane(a);
        const double* wga = wg.grad.plane(a);
        par::for_each(n, [&, dst, wga](std::int64_t i) {
            dst[i] = gw[static_cast<std::size_t>(i)] * wga[i];
        });
    }

    // regularizer chain through the derivative stencil
    if (config.lambda_jdet > 0.0 || config.lambda_smt > 0.0) {
        const VectorField g = spatial_gradient(cloud);
        VectorField P = make_field(cloud.shape, dim * dim);
        const double jdet_scale = config.lambda_jdet / static_cast<double>(n);
        const double smt_scale = 2.0 * config.lambda_smt / static_cast<double>(n);
        par::for_each(n, [&](std::int64_t v) {
            double m[3][3];
            for (int i = 0; i < dim; ++i)
                for (int a = 0; a < dim; ++a) m[i][a] = g.plane(i * dim + a)[v];
            double det;
            double cof[3][3];
            if (dim == 2) {
                det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
                cof[0][0] = m[1][1];
                cof[0][1] = -m[1][0];
                cof[1][0] = -m[0][1];
                cof[1][1] = m[0][0];
            } else {
                cof[0][0] = m[1][1] * m[2][2] - m[1][2] * m[2][1];
                cof[0][1] = -(m[1][0] * m[2][2] - m[1][2] * m[2][0]);
                cof[0][2] = m[1][0] * m[2][1] - m[1][1] * m[2][0];
                cof[1][0] = -(m[0][1] * m[2][2] - m[0][2] * m[2][1]);
                cof[1][1] = m[0][0] * m[2][2] - m[0][2] * m[2][0];
                cof[1][2] = -(m[0][0] * m[2][1] - m[0][1] * m[2][0]);
                cof[2][0] = m[0][1] * m[1][2] - m[0][2] * m[1][1];
                cof[2][1] = -(m[0][0] * m[1][2] - m[0][2] * m[1][0]);
                cof[2][2] = m[0][0] * m[1][1] - m[0][1] * m[1][0];
                det = m[0][0] * cof[0][0] + m[0][1] * cof[0][1] + m[0][2] * cof[0][2];
            }
            const bool active = config.lambda_jdet > 0.0 && (det + config.epsilon) < 0.0;
            for (int i = 0; i < dim; ++i) {
                for (int a = 0; a < dim; ++a) {
                    double p = 0.0;
                    if (active) p -= jdet_scale * cof[i][a];
                    if (config.lambda_smt > 0.0)
                        p += smt_scale * (m[i][a] - (i == a ? 1.0 : 0.0));
                    P.plane(i * dim + a)[v] = p;
                }
            }
        });
        add_spatial_gradient_transpose(P, out);
    }
    return out;
}

}  // namespace flowreg
