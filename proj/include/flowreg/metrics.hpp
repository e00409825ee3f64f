#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "flowreg/types.hpp"

namespace flowreg {

struct DiceResult {
    std::map<std::uint16_t, double> per_label;
    double mean = 0.0;
};

// Per-label 2|A∩B| / (|A|+|B|); labels absent from both maps are excluded
// from the unweighted mean.
DiceResult dice(const LabelMap& a, const LabelMap& b, const std::vector<std::uint16_t>& labels);

// Fraction of voxels whose Jacobian determinant is <= 0.
double neg_jacobian_ratio(const VoxelCloud& cloud);

}  // namespace flowreg
