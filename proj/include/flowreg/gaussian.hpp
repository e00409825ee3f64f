#pragma once

#include <array>
#include <vector>

#include "flowreg/types.hpp"

namespace flowreg {

// Separable normalized Gaussian smoothing operator. One tap vector per
// spatial axis; radius 0 encodes the identity (smoothing disabled).
struct GaussianKernel {
    int dim = 0;
    std::array<int, 3> radius{};
    std::array<double, 3> sigma{};
    std::vector<std::vector<double>> taps;  // per axis, size 2*radius+1, sums to 1

    bool is_identity() const {
        for (int a = 0; a < dim; ++a)
            if (radius[a] > 0) return false;
        return true;
    }
};

// Uniform radius/sigma across all axes. radius >= 0, sigma > 0.
GaussianKernel make_kernel(int radius, double sigma, int dim);

// Per-axis variant.
GaussianKernel make_kernel(const std::vector<int>& radius, const std::vector<double>& sigma);

// Channel-wise separable convolution with symmetric (reflect) boundary
// handling. Output shape equals input shape.
VectorField apply(const GaussianKernel& kernel, const VectorField& field);

// Exact linear transpose of apply() under the same boundary rule, i.e.
// <apply(K,u), w> == <u, apply_transpose(K,w)>.
VectorField apply_transpose(const GaussianKernel& kernel, const VectorField& field);

}  // namespace flowreg
