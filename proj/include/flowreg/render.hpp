#pragma once

#include "flowreg/types.hpp"

namespace flowreg {

// Render a 2D cloud as a deformed lattice: every spacing-th grid row and
// column (plus the last ones) is drawn as a polyline through the transformed
// lattice points, rasterized with integer-rounded 1-pixel lines, white on
// black.
Image render_grid(const VoxelCloud& cloud, int spacing = 4);

// Map a Jacobian-determinant map to [0,1] for quick PGM inspection,
// normalizing to [0, 2*median].
Image jacobian_to_image(const JacobianMap& map);

}  // namespace flowreg
