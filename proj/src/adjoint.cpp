#include "flowreg/adjoint.hpp"

#include <cmath>

#include "flowreg/parallel.hpp"

namespace flowreg {

namespace {

void require_euler(const FlowConfig& config) {
    if (config.scheme != Scheme::euler)
        throw ConfigError("gradient sweeps support the euler scheme only");
}

// w = h * (mask .* lambda) + mag_scale * u, the cotangent fed into K^T.
VectorField velocity_cotangent(const VectorField& lambda, const VectorField& u, double h,
                               double mag_scale, const BoundaryMask* mask) {
    VectorField w = make_field(lambda.shape, lambda.channels);
    const std::int64_t n = lambda.shape.voxels();
    for (int c = 0; c < lambda.channels; ++c) {
        const double* lp = lambda.plane(c);
        const double* up = u.plane(c);
        double* wp = w.plane(c);
        if (mask) {
            const double* m = mask->weights.data();
            par::for_each(n, [&, lp, up, wp, m](std::int64_t i) {
                wp[i] = h * m[i] * lp[i] + mag_scale * up[i];
            });
        } else {
            par::for_each(n, [&, lp, up, wp](std::int64_t i) {
                wp[i] = h * lp[i] + mag_scale * up[i];
            });
        }
    }
    return w;
}

void axpy(VectorField& acc, const VectorField& x) {
    par::for_each(static_cast<std::int64_t>(acc.data.size()),
                  [&](std::int64_t i) { acc.data[i] += x.data[i]; });
}

void axpy(std::vector<double>& acc, const std::vector<double>& x) {
    par::for_each(static_cast<std::int64_t>(acc.size()),
                  [&](std::int64_t i) { acc[static_cast<std::size_t>(i)] +=
                                            x[static_cast<std::size_t>(i)]; });
}

void check_finite_adjoint(const VectorField& lambda, int step) {
    if (!all_finite(lambda.data))
        throw DivergenceError("non-finite adjoint state at step " + std::to_string(step), step);
}

struct LedgerScope {
    std::int64_t entry;
    LedgerScope() : entry(cloud_buffer_ledger().live) {}
    ~LedgerScope() { cloud_buffer_ledger().live = entry; }
};

}  // namespace

GradientResult adjoint_gradient(const VelocityModel& model, const GaussianKernel& kernel,
                                const VoxelCloud& q0, const FlowConfig& flow_config,
                                const Image& fixed, const Image& moving,
                                const LossConfig& loss_config, const BoundaryMask* mask,
                                AdjointMemory memory) {
    require_euler(flow_config);
    validate_loss_config(loss_config);
    LedgerScope scope;

    FlowConfig cfg = flow_config;
    cfg.keep_checkpoints = (memory == AdjointMemory::store_all);
    const Trajectory traj = integrate(model, kernel, q0, cfg, mask);

    GradientResult result;
    result.report = total_loss(fixed, moving, traj, loss_config);
    result.dtheta.assign(static_cast<std::size_t>(model.param_count()), 0.0);

    const int n = cfg.steps;
    const double h = traj.step_size;
    const double nvox = static_cast<double>(q0.shape.voxels());
    const double mag_scale = 2.0 * loss_config.lambda_mag * h / nvox;

    // terminal condition: lambda(s) = dL_end / d psi
    VectorField lambda = grad_wrt_final_cloud(fixed, moving, traj.final_cloud(), loss_config);
    cloud_buffer_ledger().add(1);

    VoxelCloud state = traj.final_cloud();  // used by the reintegrate mode
    if (memory == AdjointMemory::reintegrate) cloud_buffer_ledger().add(1);

    for (int k = n - 1; k >= 0; --k) {
        const double tk = cfg.horizon * k / n;
        const VoxelCloud* qk = nullptr;
        if (memory == AdjointMemory::store_all) {
            qk = &traj.checkpoints[static_cast<std::size_t>(k)];
        } else {
            // reconstruct q(t_k) by stepping the state equation backward
            const double tk1 = traj.times[static_cast<std::size_t>(k) + 1];
            cloud_buffer_ledger().add(1);
            VectorField u = apply(kernel, model.eval(state, tk1));
            const std::int64_t nv = state.shape.voxels();
            for (int a = 0; a < state.shape.dim(); ++a) {
                double* dst = state.plane(a);
                const double* up = u.plane(a);
                if (mask) {
                    const double* m = mask->weights.data();
                    par::for_each(nv, [&, dst, up, m](std::int64_t i) {
                        dst[i] -= h * m[i] * up[i];
                    });
                } else {
                    par::for_each(nv, [&, dst, up](std::int64_t i) { dst[i] -= h * up[i]; });
                }
            }
            cloud_buffer_ledger().sub(1);
            qk = &state;
        }

        cloud_buffer_ledger().add(3);  // u, w, and the state VJP below
        VectorField u_scratch;
        const VectorField* u;
        if (memory == AdjointMemory::store_all) {
            u = &traj.velocities[static_cast<std::size_t>(k)];
        } else {
            u_scratch = apply(kernel, model.eval(*qk, tk));
            u = &u_scratch;
        }
        const VectorField w = velocity_cotangent(lambda, *u, h, mag_scale, mask);
        const VectorField cot = apply_transpose(kernel, w);
        const VelocityModel::Vjp vjp = model.vjp(*qk, tk, cot);
        axpy(result.dtheta, vjp.params);
        axpy(lambda, vjp.state);
        check_finite_adjoint(lambda, k);
        cloud_buffer_ledger().sub(3);
    }
    return result;
}

GradientResult discrete_gradient(const VelocityModel& model, const GaussianKernel& kernel,
                                 const Trajectory& trajectory, const Image& fixed,
                                 const Image& moving, const LossConfig& loss_config,
                                 const BoundaryMask* mask) {
    if (!trajectory.full)
        throw ConfigError("discrete gradient needs a trajectory with retained checkpoints");
    validate_loss_config(loss_config);
    LedgerScope scope;

    GradientResult result;
    result.report = total_loss(fixed, moving, trajectory, loss_config);
    result.dtheta.assign(static_cast<std::size_t>(model.param_count()), 0.0);

    const int n = static_cast<int>(trajectory.velocities.size());
    const double h = trajectory.step_size;
    const double nvox = static_cast<double>(trajectory.initial().shape.voxels());
    const double mag_scale = 2.0 * loss_config.lambda_mag * h / nvox;

    // backpropagate through q_{k+1} = q_k + h * M .* (K v(q_k, t_k))
    VectorField cot_cloud =
        grad_wrt_final_cloud(fixed, moving, trajectory.final_cloud(), loss_config);
    cloud_buffer_ledger().add(1);
    for (int k = n - 1; k >= 0; --k) {
        cloud_buffer_ledger().add(2);
        const VectorField w = velocity_cotangent(cot_cloud, trajectory.velocities[static_cast<std::size_t>(k)],
                                                 h, mag_scale, mask);
        const VectorField cot_v = apply_transpose(kernel, w);
        const VelocityModel::Vjp vjp =
            model.vjp(trajectory.checkpoints[static_cast<std::size_t>(k)],
                      trajectory.times[static_cast<std::size_t>(k)], cot_v);
        axpy(result.dtheta, vjp.params);
        axpy(cot_cloud, vjp.state);
        check_finite_adjoint(cot_cloud, k);
        cloud_buffer_ledger().sub(2);
    }
    return result;
}

GradientResult discrete_gradient(const VelocityModel& model, const GaussianKernel& kernel,
                                 const VoxelCloud& q0, const FlowConfig& flow_config,
                                 const Image& fixed, const Image& moving,
                                 const LossConfig& loss_config, const BoundaryMask* mask) {
    require_euler(flow_config);
    FlowConfig cfg = flow_config;
    cfg.keep_checkpoints = true;
    const Trajectory traj = integrate(model, kernel, q0, cfg, mask);
    return discrete_gradient(model, kernel, traj, fixed, moving, loss_config, mask);
}

double scalar_ode_sensitivity(double theta, double z0, int steps) {
    if (steps < 1) throw ParamError("scalar diagnostic needs at least one step");
    const double h = 1.0 / steps;
    std::vector<double> z(static_cast<std::size_t>(steps) + 1);
    z[0] = z0;
    for (int k = 0; k < steps; ++k) z[static_cast<std::size_t>(k) + 1] =
        z[static_cast<std::size_t>(k)] * (1.0 + h * theta);

    // adjoint runs backward from lambda(1) = dL/dz = 2 z(1); the sensitivity
    // integrand lambda(t) * z(t) is integrated with the trapezoidal rule
    double lambda = 2.0 * z[static_cast<std::size_t>(steps)];
    double grad = 0.0;
    for (int k = steps - 1; k >= 0; --k) {
        const double integrand_right = lambda * z[static_cast<std::size_t>(k) + 1];
        lambda += h * theta * lambda;
        const double integrand_left = lambda * z[static_cast<std::size_t>(k)];
        grad += 0.5 * h * (integrand_left + integrand_right);
    }
    return grad;
}

}  // namespace flowreg
