#pragma once

#include "flowreg/flow.hpp"
#include "flowreg/types.hpp"

namespace flowreg {

enum class Similarity { ncc, mse };

struct LossConfig {
    Similarity similarity = Similarity::ncc;
    int ncc_window = 21;          // odd, >= 3
    double lambda_jdet = 1000.0;  // negative-determinant penalty weight
    double lambda_mag = 0.01;     // velocity-energy weight
    double lambda_smt = 0.5;      // displacement-gradient weight
    double epsilon = 1e-3;        // overcorrection added to determinants
    double variance_floor = 1e-8; // windows below this variance contribute 0
};

void validate_loss_config(const LossConfig& config);

struct LossReport {
    double total = 0.0;
    double sim = 0.0;
    double jdet = 0.0;
    double mag = 0.0;
    double smt = 0.0;
    double neg_jac_ratio = 0.0;
};

// Mean over all voxels of the local windowed correlation; windows are
// truncated at the borders and flat windows (variance below the floor)
// contribute zero.
double ncc(const Image& fixed, const Image& moving, int window, double variance_floor = 1e-8);

double mse(const Image& fixed, const Image& moving);

// (1/N) sum ReLU(-(det + epsilon)) over the Jacobian-determinant map.
double loss_jdet(const VoxelCloud& cloud, double epsilon);

// (1/N) sum_k h * |K v(t_k)|^2, the Riemann sum of the flow energy.
double loss_mag(const Trajectory& trajectory);

// (1/N) sum of squared Frobenius norms of the displacement gradient
// (gradients of psi - identity), so the identity cloud scores zero.
double loss_smt(const VoxelCloud& cloud);

// Assembles sim + lambda1*jdet + lambda2*mag + lambda3*smt plus the
// negative-Jacobian ratio of the final cloud.
LossReport total_loss(const Image& fixed, const Image& moving, const Trajectory& trajectory,
                      const LossConfig& config);

// Gradient of sim + lambda1*jdet + lambda3*smt with respect to the final
// cloud coordinates (the adjoint terminal condition). The mag term depends on
// the whole trajectory and is handled by the sweeps.
VectorField grad_wrt_final_cloud(const Image& fixed, const Image& moving, const VoxelCloud& cloud,
                                 const LossConfig& config);

// d ncc / d moving, needed by the similarity chain; exposed for tests.
VectorField ncc_grad_wrt_moving(const Image& fixed, const Image& moving, int window,
                                double variance_floor = 1e-8);

}  // namespace flowreg
