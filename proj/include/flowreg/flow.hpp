#pragma once

#include <cstdint>
#include <vector>

#include "flowreg/gaussian.hpp"
#include "flowreg/types.hpp"
#include "flowreg/velocity.hpp"

namespace flowreg {

enum class Scheme { euler, rk4 };

struct FlowConfig {
    double horizon = 1.0;  // s
    int steps = 1;         // n, step size h = s/n
    Scheme scheme = Scheme::euler;
    // full trajectory (checkpoints + smoothed velocities) vs endpoints plus
    // per-step velocity norms only
    bool keep_checkpoints = true;
};

// Counts cloud-sized buffers retained by trajectory storage and the gradient
// sweeps; lets tests assert the constant-memory property of the adjoint path.
struct BufferLedger {
    std::int64_t live = 0;
    std::int64_t peak = 0;
    void add(std::int64_t n) {
        live += n;
        if (live > peak) peak = live;
    }
    void sub(std::int64_t n) { live -= n; }
    void reset() { live = peak = 0; }
};

BufferLedger& cloud_buffer_ledger();

struct Trajectory {
    std::vector<double> times;             // n+1 timestamps, t0 = 0, tn = s
    std::vector<VoxelCloud> checkpoints;   // n+1 clouds if full, else {q0, psi}
    std::vector<VectorField> velocities;   // smoothed K v at each step if full
    std::vector<double> velocity_sq_norms; // per-step sum of squared K v entries
    double step_size = 0.0;
    bool full = false;

    const VoxelCloud& initial() const { return checkpoints.front(); }
    const VoxelCloud& final_cloud() const { return checkpoints.back(); }
};

// Integrate dq/dt = M .* K v(q, t) from 0 to the horizon; the final
// checkpoint is the deformation field psi(q0). Throws DivergenceError naming
// the step if the state stops being finite.
Trajectory integrate(const VelocityModel& model, const GaussianKernel& kernel,
                     const VoxelCloud& q0, const FlowConfig& config,
                     const BoundaryMask* mask = nullptr);

// Max-norm difference between the final clouds computed with n and 2n steps;
// a self-convergence diagnostic.
double compose_check(const VelocityModel& model, const GaussianKernel& kernel,
                     const VoxelCloud& q0, const FlowConfig& config,
                     const BoundaryMask* mask = nullptr);

}  // namespace flowreg
