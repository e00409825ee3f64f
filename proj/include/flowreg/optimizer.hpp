#pragma once

#include <cstdint>
#include <vector>

#include "flowreg/adjoint.hpp"

namespace flowreg {

struct OptimConfig {
    int iterations = 250;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    GradientMode mode = GradientMode::adjoint;
    AdjointMemory memory = AdjointMemory::store_all;
    std::uint64_t seed = 0;
};

void validate_optim_config(const OptimConfig& config);

struct IterationRecord {
    int iter = 0;
    LossReport report;
    double wall_ms = 0.0;
};

struct RegistrationResult {
    std::vector<double> theta;
    VoxelCloud deformation;  // psi(q0)
    Image warped;
    LossReport initial;
    LossReport final;
    std::vector<IterationRecord> log;
};

// Raised when the run stops being finite; carries the last finite iterate.
class OptimDiverged : public DivergenceError {
public:
    OptimDiverged(const std::string& what, int iteration, std::vector<double> last_theta)
        : DivergenceError(what, iteration), last_theta(std::move(last_theta)) {}
    std::vector<double> last_theta;
};

// Adam loop over the configured iterations starting from init_params(seed);
// deterministic given the seed. The model's parameters hold theta* afterwards.
RegistrationResult run_registration(VelocityModel& model, const GaussianKernel& kernel,
                                    const Image& fixed, const Image& moving,
                                    const FlowConfig& flow_config, const LossConfig& loss_config,
                                    const OptimConfig& optim_config,
                                    const BoundaryMask* mask = nullptr);

}  // namespace flowreg
