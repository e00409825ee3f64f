#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "flowreg/grid.hpp"
#include "flowreg/types.hpp"

namespace testsup {

// deterministic generator for test data
struct Rng {
    std::uint64_t state;
    explicit Rng(std::uint64_t seed) : state(seed ^ 0x9e3779b97f4a7c15ULL) {}
    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
};

inline flowreg::Image random_image(const flowreg::GridShape& shape, std::uint64_t seed,
                                   double lo = 0.0, double hi = 1.0) {
    flowreg::Image img = flowreg::make_image(shape);
    Rng rng(seed);
    for (double& v : img.values) v = rng.uniform(lo, hi);
    return img;
}

// identity plus a bounded random displacement on every coordinate
inline flowreg::VoxelCloud random_cloud(const flowreg::GridShape& shape, std::uint64_t seed,
                                        double amplitude) {
    flowreg::VoxelCloud cloud = flowreg::make_identity_grid(shape);
    Rng rng(seed);
    for (double& c : cloud.coords) c += rng.uniform(-amplitude, amplitude);
    return cloud;
}

inline flowreg::VectorField random_field(const flowreg::GridShape& shape, int channels,
                                         std::uint64_t seed, double amplitude = 1.0) {
    flowreg::VectorField f = flowreg::make_field(shape, channels);
    Rng rng(seed);
    for (double& v : f.data) v = rng.uniform(-amplitude, amplitude);
    return f;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline double l2(const std::vector<double>& a) {
    double s = 0.0;
    for (double v : a) s += v * v;
    return std::sqrt(s);
}

inline double rel_l2_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        num += d * d;
        den += b[i] * b[i];
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

}  // namespace testsup
