#pragma once

#include "flowreg/gaussian.hpp"
#include "flowreg/types.hpp"

namespace flowreg::ref {

// Plain single-threaded implementations kept as the baseline for tests and
// benchmarks. warp/spatial_gradient/jacobian_det_map mirror the parallel
// kernels stencil-for-stencil; smooth_dense is a non-separable direct
// convolution, and ncc sums every window from scratch.

Image warp(const Image& image, const VoxelCloud& cloud);

VectorField smooth_dense(const GaussianKernel& kernel, const VectorField& field);

VectorField spatial_gradient(const VoxelCloud& cloud);

JacobianMap jacobian_det_map(const VoxelCloud& cloud);

double ncc(const Image& fixed, const Image& moving, int window, double variance_floor = 1e-8);

double mse(const Image& fixed, const Image& moving);

double neg_jacobian_ratio(const VoxelCloud& cloud);

}  // namespace flowreg::ref
