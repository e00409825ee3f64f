#include "flowreg/flow.hpp"

#include <cmath>

#include "flowreg/parallel.hpp"

namespace flowreg {

BufferLedger& cloud_buffer_ledger() {
    static BufferLedger ledger;
    return ledger;
}

namespace {

void check_finite(const VoxelCloud& q, int step) {
    if (!all_finite(q.coords))
        throw DivergenceError("non-finite voxel cloud at step " + std::to_string(step), step);
}

double field_sq_norm(const VectorField& f) {
    return par::block_sum(static_cast<std::int64_t>(f.data.size()),
                          [&](std::int64_t i) { return f.data[i] * f.data[i]; });
}

// q += h * M .* u
void advance(VoxelCloud& q, const VectorField& u, double h, const BoundaryMask* mask) {
    const std::int64_t n = q.shape.voxels();
    for (int a = 0; a < q.shape.dim(); ++a) {
        double* dst = q.plane(a);
        const double* src = u.plane(a);
        if (mask) {
            const double* m = mask->weights.data();
            par::for_each(n, [&, dst, src, m](std::int64_t i) { dst[i] += h * m[i] * src[i]; });
        } else {
            par::for_each(n, [&, dst, src](std::int64_t i) { dst[i] += h * src[i]; });
        }
    }
}

}  // namespace

Trajectory integrate(const VelocityModel& model, const GaussianKernel& kernel,
                     const VoxelCloud& q0, const FlowConfig& config, const BoundaryMask* mask) {
    validate_shape(q0.shape);
    if (config.steps < 1) throw ParamError("integration needs at least one step");
    if (!(config.horizon > 0.0)) throw ParamError("horizon must be positive");
    if (!(q0.shape == model.grid())) throw ShapeError("initial cloud does not match model grid");
    if (mask && !(mask->shape == q0.shape)) throw ShapeError("mask shape does not match cloud");

    const int n = config.steps;
    const double s = config.horizon;
    const double h = s / n;
    const int dim = q0.shape.dim();

    Trajectory traj;
    traj.step_size = h;
    traj.full = config.keep_checkpoints;
    traj.times.reserve(static_cast<std::size_t>(n) + 1);
    traj.times.push_back(0.0);

    check_finite(q0, 0);
    VoxelCloud q = q0;
    traj.checkpoints.push_back(q0);
    cloud_buffer_ledger().add(1);

    for (int k = 0; k < n; ++k) {
        const double tk = s * k / n;
        if (config.scheme == Scheme::euler) {
            VectorField u = apply(kernel, model.eval(q, tk));
            traj.velocity_sq_norms.push_back(field_sq_norm(u));
            if (traj.full) {
                traj.velocities.push_back(u);
                cloud_buffer_ledger().add(1);
            }
            advance(q, u, h, mask);
        } else {
            // classic RK4; every stage is smoothed and masked
            auto slope = [&](const VoxelCloud& state, double t) {
                VectorField u = apply(kernel, model.eval(state, t));
                if (mask) {
                    const std::int64_t nv = state.shape.voxels();
                    for (int a = 0; a < dim; ++a) {
                        double* p = u.plane(a);
                        const double* m = mask->weights.data();
                        par::for_each(nv, [&, p, m](std::int64_t i) { p[i] *= m[i]; });
                    }
                }
                return u;
            };
            auto shifted = [&](const VoxelCloud& base, const VectorField& k1, double c) {
                VoxelCloud out = base;
                advance(out, k1, c, nullptr);  // stages already masked
                return out;
            };
            const VectorField k1 = slope(q, tk);
            const VectorField k2 = slope(shifted(q, k1, 0.5 * h), tk + 0.5 * h);
            const VectorField k3 = slope(shifted(q, k2, 0.5 * h), tk + 0.5 * h);
            const VectorField k4 = slope(shifted(q, k3, h), tk + h);
            VectorField combined = make_field(q.shape, dim);
            par::for_each(static_cast<std::int64_t>(combined.data.size()), [&](std::int64_t i) {
                combined.data[i] =
                    (k1.data[i] + 2.0 * k2.data[i] + 2.0 * k3.data[i] + k4.data[i]) / 6.0;
            });
            traj.velocity_sq_norms.push_back(field_sq_norm(combined));
            if (traj.full) {
                traj.velocities.push_back(combined);
                cloud_buffer_ledger().add(1);
            }
            advance(q, combined, h, nullptr);
        }
        check_finite(q, k + 1);
        traj.times.push_back(k + 1 == n ? s : s * (k + 1) / n);
        if (traj.full) {
            traj.checkpoints.push_back(q);
            cloud_buffer_ledger().add(1);
        }
    }
    if (!traj.full) {
        traj.checkpoints.push_back(std::move(q));
        cloud_buffer_ledger().add(1);
    }
    return traj;
}

double compose_check(const VelocityModel& model, const GaussianKernel& kernel,
                     const VoxelCloud& q0, const FlowConfig& config, const BoundaryMask* mask) {
    FlowConfig coarse = config;
    coarse.keep_checkpoints = false;
    FlowConfig fine = coarse;
    fine.steps = 2 * config.steps;
    const Trajectory a = integrate(model, kernel, q0, coarse, mask);
    const Trajectory b = integrate(model, kernel, q0, fine, mask);
    const auto& pa = a.final_cloud().coords;
    const auto& pb = b.final_cloud().coords;
    double m = 0.0;
    for (std::size_t i = 0; i < pa.size(); ++i) m = std::max(m, std::abs(pa[i] - pb[i]));
    return m;
}

}  // namespace flowreg
