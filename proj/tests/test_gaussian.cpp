#include <doctest.h>

#include <cmath>

#include "flowreg/gaussian.hpp"
#include "flowreg/reference.hpp"
#include "test_support.hpp"

using namespace flowreg;

TEST_CASE("kernel construction") {
    SUBCASE("radius 0 is the identity tap") {
        const GaussianKernel k = make_kernel(0, 1.0, 2);
        for (int a = 0; a < 2; ++a) {
            REQUIRE(k.taps[a].size() == 1);
            CHECK(k.taps[a][0] == doctest::Approx(1.0));
        }
        CHECK(k.is_identity());
    }
    SUBCASE("huge sigma approaches the uniform average") {
        const GaussianKernel k = make_kernel(1, 1e6, 2);
        for (double t : k.taps[0]) CHECK(t == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
    }
    SUBCASE("radius 2 sigma 1 matches the formula") {
        const GaussianKernel k = make_kernel(2, 1.0, 2);
        const double raw[5] = {std::exp(-2.0), std::exp(-0.5), 1.0, std::exp(-0.5),
                               std::exp(-2.0)};
        double norm = 0.0;
        for (double r : raw) norm += r;
        for (int i = 0; i < 5; ++i)
            CHECK(k.taps[0][static_cast<std::size_t>(i)] ==
                  doctest::Approx(raw[i] / norm).epsilon(1e-12));
    }
    SUBCASE("taps sum to one and are symmetric") {
        const GaussianKernel k = make_kernel(3, 1.7, 3);
        for (int a = 0; a < 3; ++a) {
            double sum = 0.0;
            for (double t : k.taps[a]) sum += t;
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
            for (std::size_t i = 0; i < k.taps[a].size(); ++i)
                CHECK(k.taps[a][i] == k.taps[a][k.taps[a].size() - 1 - i]);
        }
    }
    SUBCASE("invalid parameters") {
        CHECK_THROWS_AS(make_kernel(2, 0.0, 2), ParamError);
        CHECK_THROWS_AS(make_kernel(2, -1.0, 2), ParamError);
        CHECK_THROWS_AS(make_kernel(-1, 1.0, 2), ParamError);
    }
}

TEST_CASE("constant fields pass through unchanged") {
    const GridShape s{{6, 5}};
    const GaussianKernel k = make_kernel(2, 1.0, 2);
    const VectorField c = make_field(s, 2, 3.25);
    const VectorField out = apply(k, c);
    for (double v : out.data) CHECK(v == doctest::Approx(3.25).epsilon(1e-13));
}

TEST_CASE("an interior delta spreads as the outer product of taps") {
    const GridShape s{{9, 9}};
    const GaussianKernel k = make_kernel(2, 1.0, 2);
    VectorField f = make_field(s, 1, 0.0);
    f.plane(0)[4 * 9 + 4] = 1.0;
    const VectorField out = apply(k, f);
    for (int dy = -2; dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx)
            CHECK(out.plane(0)[(4 + dy) * 9 + (4 + dx)] ==
                  doctest::Approx(k.taps[0][static_cast<std::size_t>(dy + 2)] *
                                  k.taps[1][static_cast<std::size_t>(dx + 2)])
                      .epsilon(1e-12));
}

TEST_CASE("separable smoothing matches the dense convolution oracle") {
    for (auto shape : {GridShape{{8, 11}}, GridShape{{5, 6, 7}}}) {
        const int dim = shape.dim();
        const GaussianKernel k = make_kernel(2, 1.3, dim);
        const VectorField f = testsup::random_field(shape, dim, 81);
        const VectorField fast = apply(k, f);
        const VectorField dense = ref::smooth_dense(k, f);
        CHECK(testsup::max_abs_diff(fast.data, dense.data) < 1e-10);
    }
}

TEST_CASE("transpose equals forward away from the boundary and on symmetric content") {
    const GridShape s{{12, 12}};
    const GaussianKernel k = make_kernel(2, 1.0, 2);
    VectorField f = make_field(s, 1, 0.0);
    f.plane(0)[6 * 12 + 5] = 1.0;  // support far from the faces
    const VectorField a = apply(k, f);
    const VectorField b = apply_transpose(k, f);
    CHECK(testsup::max_abs_diff(a.data, b.data) < 1e-14);
}

TEST_CASE("transpose satisfies the bilinear identity") {
    const GridShape s{{8, 8}};
    for (int radius : {0, 1, 3}) {
        const GaussianKernel k = make_kernel(radius, 1.1, 2);
        const VectorField u = testsup::random_field(s, 2, 91);
        const VectorField w = testsup::random_field(s, 2, 92);
        const VectorField ku = apply(k, u);
        const VectorField ktw = apply_transpose(k, w);
        double lhs = 0.0, rhs = 0.0;
        for (std::size_t i = 0; i < u.data.size(); ++i) {
            lhs += ku.data[i] * w.data[i];
            rhs += u.data[i] * ktw.data[i];
        }
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
    }
}

TEST_CASE("transpose with radius 0 is the identity") {
    const GridShape s{{4, 5}};
    const VectorField f = testsup::random_field(s, 2, 101);
    const VectorField out = apply_transpose(make_kernel(0, 2.0, 2), f);
    CHECK(testsup::max_abs_diff(out.data, f.data) == 0.0);
}

TEST_CASE("3D bilinear identity holds too") {
    const GridShape s{{4, 5, 6}};
    const GaussianKernel k = make_kernel(2, 0.9, 3);
    const VectorField u = testsup::random_field(s, 3, 111);
    const VectorField w = testsup::random_field(s, 3, 112);
    const VectorField ku = apply(k, u);
    const VectorField ktw = apply_transpose(k, w);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < u.data.size(); ++i) {
        lhs += ku.data[i] * w.data[i];
        rhs += u.data[i] * ktw.data[i];
    }
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("smoothing does not amplify the maximum") {
    const GridShape s{{10, 10}};
    const GaussianKernel k = make_kernel(3, 1.5, 2);
    const VectorField f = testsup::random_field(s, 2, 121, 2.0);
    const VectorField out = apply(k, f);
    double in_max = 0.0, out_max = 0.0;
    for (double v : f.data) in_max = std::max(in_max, std::abs(v));
    for (double v : out.data) out_max = std::max(out_max, std::abs(v));
    CHECK(out_max <= in_max + 1e-12);
}

TEST_CASE("total variation does not increase") {
    const GridShape s{{16, 16}};
    const GaussianKernel k = make_kernel(2, 1.0, 2);
    const VectorField f = testsup::random_field(s, 1, 131, 1.0);
    const VectorField out = apply(k, f);
    auto tv = [&](const VectorField& g) {
        double sum = 0.0;
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x) {
                if (x + 1 < 16)
                    sum += std::abs(g.plane(0)[y * 16 + x + 1] - g.plane(0)[y * 16 + x]);
                if (y + 1 < 16)
                    sum += std::abs(g.plane(0)[(y + 1) * 16 + x] - g.plane(0)[y * 16 + x]);
            }
        return sum;
    };
    CHECK(tv(out) <= tv(f) + 1e-12);
}

TEST_CASE("smoothing is linear") {
    const GridShape s{{9, 8}};
    const GaussianKernel k = make_kernel(2, 1.2, 2);
    const VectorField u = testsup::random_field(s, 2, 141);
    const VectorField w = testsup::random_field(s, 2, 142);
    VectorField combo = make_field(s, 2);
    for (std::size_t i = 0; i < combo.data.size(); ++i)
        combo.data[i] = 1.5 * u.data[i] - 0.25 * w.data[i];
    const VectorField ku = apply(k, u);
    const VectorField kw = apply(k, w);
    const VectorField kc = apply(k, combo);
    for (std::size_t i = 0; i < kc.data.size(); ++i)
        CHECK(kc.data[i] ==
              doctest::Approx(1.5 * ku.data[i] - 0.25 * kw.data[i]).epsilon(1e-12));
}

TEST_CASE("shape mismatch raises") {
    const GaussianKernel k = make_kernel(1, 1.0, 3);
    const VectorField f = testsup::random_field(GridShape{{4, 4}}, 2, 151);
    CHECK_THROWS_AS(apply(k, f), ShapeError);
    CHECK_THROWS_AS(apply_transpose(k, f), ShapeError);
}
