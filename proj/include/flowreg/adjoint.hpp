#pragma once

#include <cstdint>
#include <vector>

#include "flowreg/flow.hpp"
#include "flowreg/objective.hpp"

namespace flowreg {

enum class GradientMode { adjoint, discrete };
enum class AdjointMemory { store_all, reintegrate };

struct GradientResult {
    std::vector<double> dtheta;
    LossReport report;
};

// dL/dtheta by the adjoint sweep: integrate forward, seed the adjoint with
// the final-cloud loss gradient, sweep backward over the same step grid
// pulling cotangents through the smoothing transpose and the model VJPs,
// and accumulate the velocity-magnitude contribution per step.
//
// store_all reuses the forward checkpoints; reintegrate reconstructs the
// state backward in time and keeps a constant number of cloud buffers
// regardless of the step count.
GradientResult adjoint_gradient(const VelocityModel& model, const GaussianKernel& kernel,
                                const VoxelCloud& q0, const FlowConfig& flow_config,
                                const Image& fixed, const Image& moving,
                                const LossConfig& loss_config, const BoundaryMask* mask = nullptr,
                                AdjointMemory memory = AdjointMemory::store_all);

// Exact gradient of the discretized objective by backpropagation through a
// stored full trajectory; memory grows linearly with the step count.
GradientResult discrete_gradient(const VelocityModel& model, const GaussianKernel& kernel,
                                 const Trajectory& trajectory, const Image& fixed,
                                 const Image& moving, const LossConfig& loss_config,
                                 const BoundaryMask* mask = nullptr);

// Convenience overload that integrates (retaining the full trajectory) first.
GradientResult discrete_gradient(const VelocityModel& model, const GaussianKernel& kernel,
                                 const VoxelCloud& q0, const FlowConfig& flow_config,
                                 const Image& fixed, const Image& moving,
                                 const LossConfig& loss_config, const BoundaryMask* mask = nullptr);

// Diagnostic for the adjoint machinery on dz/dt = theta*z with L = z(1)^2:
// forward Euler, backward adjoint sweep, trapezoidal evaluation of the
// sensitivity integral. Converges to 2*z(1)^2 = 2*exp(2*theta) for z0 = 1.
double scalar_ode_sensitivity(double theta, double z0, int steps);

}  // namespace flowreg
