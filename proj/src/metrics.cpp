#include "flowreg/metrics.hpp"

#include "flowreg/grid.hpp"
#include "flowreg/parallel.hpp"

namespace flowreg {

DiceResult dice(const LabelMap& a, const LabelMap& b, const std::vector<std::uint16_t>& labels) {
    if (!(a.shape == b.shape))
        throw ShapeError("dice: shape mismatch " + shape_to_string(a.shape) + " vs " +
                         shape_to_string(b.shape));
    if (labels.empty()) throw ParamError("dice: empty label list");

    DiceResult result;
    std::int64_t counted = 0;
    double sum = 0.0;
    for (std::uint16_t label : labels) {
        std::int64_t na = 0, nb = 0, overlap = 0;
        for (std::size_t i = 0; i < a.labels.size(); ++i) {
            const bool ia = a.labels[i] == label;
            const bool ib = b.labels[i] == label;
            na += ia;
            nb += ib;
            overlap += ia && ib;
        }
        if (na + nb == 0) continue;  // absent from both maps
        const double d = 2.0 * static_cast<double>(overlap) / static_cast<double>(na + nb);
        result.per_label[label] = d;
        sum += d;
        ++counted;
    }
    result.mean = counted ? sum / static_cast<double>(counted) : 0.0;
    return result;
}

double neg_jacobian_ratio(const VoxelCloud& cloud) {
    const JacobianMap jm = jacobian_det_map(cloud);
    const std::int64_t n = cloud.shape.voxels();
    std::int64_t violations = 0;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) reduction(+ : violations)
#endif
    for (std::int64_t i = 0; i < n; ++i)
        if (jm.dets[static_cast<std::size_t>(i)] <= 0.0) ++violations;
    return static_cast<double>(violations) / static_cast<double>(n);
}

}  // namespace flowreg
