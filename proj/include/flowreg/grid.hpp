#pragma once

#include "flowreg/types.hpp"

namespace flowreg {

// Identity cloud: coords(x) = x on the integer lattice.
VoxelCloud make_identity_grid(const GridShape& shape);

// Resample `image` at the cloud coordinates with multilinear interpolation
// (bilinear in 2D, trilinear in 3D). Coordinates outside the index box are
// clamped to the border before sampling.
Image warp(const Image& image, const VoxelCloud& cloud);

// warp() plus the derivative of each sample with respect to its own
// coordinate; grad has dim channels, channel a = d(sample)/d(coord_a).
// The derivative is the in-cell interpolation slope, zero where the clamp is
// strictly active.
struct WarpWithGrad {
    Image warped;
    VectorField grad;
};
WarpWithGrad warp_with_grad(const Image& image, const VoxelCloud& cloud);

// Nearest-neighbor resampling of a categorical map.
LabelMap warp_labels(const LabelMap& labels, const VoxelCloud& cloud);

// Per-voxel matrix of spatial derivatives: channel i*dim + a holds
// d(psi_i)/d(x_a), central differences in the interior and one-sided at the
// faces.
VectorField spatial_gradient(const VoxelCloud& cloud);

// Determinant of the spatial_gradient matrix at each voxel.
JacobianMap jacobian_det_map(const VoxelCloud& cloud);

// Transpose of the spatial_gradient stencil: given per-voxel cotangents
// P (dim*dim channels, same layout as spatial_gradient output), accumulate
// sum_{x,i,a} P_{ia}(x) * d G_{ia}(x) / d psi into a cloud-shaped gradient.
// `out` must have dim channels; contributions are added in place.
void add_spatial_gradient_transpose(const VectorField& P, VectorField& out);

}  // namespace flowreg
