#include "flowreg/optimizer.hpp"

#include <chrono>
#include <cmath>

#include "flowreg/grid.hpp"
#include "flowreg/parallel.hpp"

namespace flowreg {

void validate_optim_config(const OptimConfig& config) {
    if (config.iterations < 1) throw ParamError("optimizer needs at least one iteration");
    if (!(config.learning_rate > 0.0)) throw ParamError("learning rate must be positive");
    if (!(config.beta1 >= 0.0 && config.beta1 < 1.0) ||
        !(config.beta2 >= 0.0 && config.beta2 < 1.0))
        throw ParamError("Adam moment decays must lie in [0, 1)");
}

RegistrationResult run_registration(VelocityModel& model, const GaussianKernel& kernel,
                                    const Image& fixed, const Image& moving,
                                    const FlowConfig& flow_config, const LossConfig& loss_config,
                                    const OptimConfig& optim_config, const BoundaryMask* mask) {
    validate_optim_config(optim_config);
    validate_loss_config(loss_config);
    if (!(fixed.shape == moving.shape))
        throw ShapeError("fixed and moving images must share a shape");

    const VoxelCloud q0 = make_identity_grid(fixed.shape);
    model.set_params(model.init_params(optim_config.seed));

    const std::size_t p = static_cast<std::size_t>(model.param_count());
    std::vector<double> m(p, 0.0), v(p, 0.0);

    RegistrationResult result;
    result.log.reserve(static_cast<std::size_t>(optim_config.iterations));

    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();

    for (int it = 0; it < optim_config.iterations; ++it) {
        GradientResult grad;
        try {
            grad = optim_config.mode == GradientMode::adjoint
                       ? adjoint_gradient(model, kernel, q0, flow_config, fixed, moving,
                                          loss_config, mask, optim_config.memory)
                       : discrete_gradient(model, kernel, q0, flow_config, fixed, moving,
                                           loss_config, mask);
        } catch (const DivergenceError& e) {
            throw OptimDiverged(std::string("registration diverged at iteration ") +
                                    std::to_string(it) + ": " + e.what(),
                                it, model.params());
        }
        if (!std::isfinite(grad.report.total) || !all_finite(grad.dtheta))
            throw OptimDiverged("non-finite loss or gradient at iteration " + std::to_string(it),
                                it, model.params());

        const double wall_ms =
            std::chrono::duration<double, std::milli>(clock::now() - t0).count();
        result.log.push_back(IterationRecord{it, grad.report, wall_ms});

        // Adam step
        std::vector<double> theta = model.params();
        const double b1t = 1.0 - std::pow(optim_config.beta1, it + 1);
        const double b2t = 1.0 - std::pow(optim_config.beta2, it + 1);
        const double lr = optim_config.learning_rate;
        const double b1 = optim_config.beta1, b2 = optim_config.beta2;
        const double eps = optim_config.adam_eps;
        par::for_each(static_cast<std::int64_t>(p), [&](std::int64_t i) {
            const std::size_t j = static_cast<std::size_t>(i);
            const double g = grad.dtheta[j];
            m[j] = b1 * m[j] + (1.0 - b1) * g;
            v[j] = b2 * v[j] + (1.0 - b2) * g * g;
            const double mhat = m[j] / b1t;
            const double vhat = v[j] / b2t;
            theta[j] -= lr * mhat / (std::sqrt(vhat) + eps);
        });
        model.set_params(std::move(theta));
    }

    FlowConfig final_cfg = flow_config;
    final_cfg.keep_checkpoints = true;
    Trajectory traj = integrate(model, kernel, q0, final_cfg, mask);
    result.final = total_loss(fixed, moving, traj, loss_config);
    result.initial = result.log.empty() ? result.final : result.log.front().report;
    result.theta = model.params();
    result.deformation = traj.final_cloud();
    result.warped = warp(moving, result.deformation);
    return result;
}

}  // namespace flowreg
