#include <doctest.h>

#include <cmath>

#include "flowreg/grid.hpp"
#include "flowreg/reference.hpp"
#include "test_support.hpp"

using namespace flowreg;

TEST_CASE("identity grid enumerates lattice coordinates") {
    const VoxelCloud c = make_identity_grid(GridShape{{2, 2}});
    // plane 0 = row coordinate, plane 1 = column coordinate
    CHECK(c.plane(0)[0] == 0.0);
    CHECK(c.plane(1)[0] == 0.0);
    CHECK(c.plane(0)[1] == 0.0);
    CHECK(c.plane(1)[1] == 1.0);
    CHECK(c.plane(0)[2] == 1.0);
    CHECK(c.plane(1)[2] == 0.0);
    CHECK(c.plane(0)[3] == 1.0);
    CHECK(c.plane(1)[3] == 1.0);
}

TEST_CASE("identity grid in 3D matches index triples") {
    const GridShape s{{2, 2, 2}};
    const VoxelCloud c = make_identity_grid(s);
    const auto strides = row_major_strides(s);
    for (std::int64_t i = 0; i < s.voxels(); ++i) {
        for (int a = 0; a < 3; ++a)
            CHECK(c.plane(a)[i] == static_cast<double>((i / strides[a]) % 2));
    }
}

TEST_CASE("degenerate extents are rejected") {
    CHECK_THROWS_AS(make_identity_grid(GridShape{{3, 1}}), ShapeError);
    CHECK_THROWS_AS(make_identity_grid(GridShape{{4}}), ShapeError);
}

TEST_CASE("warp with the identity grid reproduces the image") {
    const GridShape s{{7, 9}};
    const Image img = testsup::random_image(s, 11);
    const Image out = warp(img, make_identity_grid(s));
    CHECK(testsup::max_abs_diff(out.values, img.values) == 0.0);
}

TEST_CASE("warping a linear ramp by half a voxel shifts values by half") {
    const GridShape s{{4, 8}};
    Image ramp = make_image(s);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 8; ++x) ramp.values[static_cast<std::size_t>(y) * 8 + x] = x;
    VoxelCloud c = make_identity_grid(s);
    for (std::int64_t i = 0; i < s.voxels(); ++i) c.plane(1)[i] += 0.5;
    const Image out = warp(ramp, c);
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 7; ++x)  // the last column samples the clamped border
            CHECK(out.values[static_cast<std::size_t>(y) * 8 + x] ==
                  doctest::Approx(x + 0.5).epsilon(1e-12));
        CHECK(out.values[static_cast<std::size_t>(y) * 8 + 7] == doctest::Approx(7.0));
    }
}

TEST_CASE("coordinates far outside the box sample the clamped corner") {
    const GridShape s{{4, 4}};
    const Image img = testsup::random_image(s, 3);
    VoxelCloud c = make_identity_grid(s);
    c.plane(0)[5] = -3.0;
    c.plane(1)[5] = -3.0;
    const Image out = warp(img, c);
    CHECK(out.values[5] == img.values[0]);
}

TEST_CASE("warp shape mismatch raises") {
    const Image img = testsup::random_image(GridShape{{4, 4}}, 1);
    CHECK_THROWS_AS(warp(img, make_identity_grid(GridShape{{4, 5}})), ShapeError);
}

TEST_CASE("warp is linear in image values") {
    const GridShape s{{8, 8}};
    const Image a = testsup::random_image(s, 21);
    const Image b = testsup::random_image(s, 22);
    const VoxelCloud c = testsup::random_cloud(s, 23, 1.5);
    Image combo = make_image(s);
    for (std::size_t i = 0; i < combo.values.size(); ++i)
        combo.values[i] = 2.0 * a.values[i] - 0.5 * b.values[i];
    const Image wa = warp(a, c);
    const Image wb = warp(b, c);
    const Image wc = warp(combo, c);
    for (std::size_t i = 0; i < wc.values.size(); ++i)
        CHECK(wc.values[i] == doctest::Approx(2.0 * wa.values[i] - 0.5 * wb.values[i])
                                  .epsilon(1e-12));
}

TEST_CASE("warp agrees with the serial reference") {
    for (auto shape : {GridShape{{9, 7}}, GridShape{{5, 6, 4}}}) {
        const Image img = testsup::random_image(shape, 31);
        const VoxelCloud c = testsup::random_cloud(shape, 32, 2.0);
        const Image a = warp(img, c);
        const Image b = ref::warp(img, c);
        CHECK(testsup::max_abs_diff(a.values, b.values) < 1e-12);
    }
}

TEST_CASE("label warping: identity, rounding, and mismatch") {
    const GridShape s{{4, 4}};
    LabelMap labels = make_labels(s);
    for (std::size_t i = 0; i < labels.labels.size(); ++i)
        labels.labels[i] = static_cast<std::uint16_t>(i);

    CHECK(warp_labels(labels, make_identity_grid(s)).labels == labels.labels);

    VoxelCloud c = make_identity_grid(s);
    c.plane(0)[0] = 0.4;
    c.plane(1)[0] = 0.4;
    CHECK(warp_labels(labels, c).labels[0] == labels.labels[0]);
    c.plane(0)[0] = 0.6;
    c.plane(1)[0] = 0.6;
    CHECK(warp_labels(labels, c).labels[0] == labels.labels[5]);

    CHECK_THROWS_AS(warp_labels(labels, make_identity_grid(GridShape{{5, 4}})), ShapeError);
}

TEST_CASE("spatial gradient of the identity is the identity matrix") {
    const GridShape s{{5, 6}};
    const VectorField g = spatial_gradient(make_identity_grid(s));
    for (std::int64_t i = 0; i < s.voxels(); ++i) {
        CHECK(g.plane(0)[i] == doctest::Approx(1.0));
        CHECK(g.plane(1)[i] == doctest::Approx(0.0));
        CHECK(g.plane(2)[i] == doctest::Approx(0.0));
        CHECK(g.plane(3)[i] == doctest::Approx(1.0));
    }
}

TEST_CASE("spatial gradient of a scaled cloud scales the matrix") {
    const GridShape s{{5, 5}};
    VoxelCloud c = make_identity_grid(s);
    for (double& v : c.coords) v *= 2.0;
    const VectorField g = spatial_gradient(c);
    for (std::int64_t i = 0; i < s.voxels(); ++i) {
        CHECK(g.plane(0)[i] == doctest::Approx(2.0));
        CHECK(g.plane(3)[i] == doctest::Approx(2.0));
    }
}

TEST_CASE("spatial gradient matches the reference stencil exactly") {
    for (auto shape : {GridShape{{6, 7}}, GridShape{{4, 5, 3}}}) {
        const VoxelCloud c = testsup::random_cloud(shape, 41, 1.0);
        const VectorField a = spatial_gradient(c);
        const VectorField b = ref::spatial_gradient(c);
        CHECK(testsup::max_abs_diff(a.data, b.data) == 0.0);
    }
}

TEST_CASE("spatial gradient is linear in the cloud") {
    const GridShape s{{6, 6}};
    const VoxelCloud a = testsup::random_cloud(s, 51, 1.0);
    const VoxelCloud b = testsup::random_cloud(s, 52, 1.0);
    VoxelCloud sum{s, a.coords};
    for (std::size_t i = 0; i < sum.coords.size(); ++i) sum.coords[i] += b.coords[i];
    const VectorField ga = spatial_gradient(a);
    const VectorField gb = spatial_gradient(b);
    const VectorField gs = spatial_gradient(sum);
    for (std::size_t i = 0; i < gs.data.size(); ++i)
        CHECK(gs.data[i] == doctest::Approx(ga.data[i] + gb.data[i]).epsilon(1e-12));
}

TEST_CASE("jacobian determinants: identity, scaling, rotation") {
    const GridShape s{{8, 8}};
    for (double d : jacobian_det_map(make_identity_grid(s)).dets) CHECK(d == doctest::Approx(1.0));

    VoxelCloud doubled = make_identity_grid(s);
    for (double& v : doubled.coords) v *= 2.0;
    for (double d : jacobian_det_map(doubled).dets) CHECK(d == doctest::Approx(4.0));

    // 90-degree rotation about the grid center is volume preserving
    VoxelCloud rot = make_identity_grid(s);
    const double c0 = 3.5;
    for (std::int64_t i = 0; i < s.voxels(); ++i) {
        const double y = rot.plane(0)[i] - c0;
        const double x = rot.plane(1)[i] - c0;
        rot.plane(0)[i] = c0 - x;
        rot.plane(1)[i] = c0 + y;
    }
    for (double d : jacobian_det_map(rot).dets) CHECK(d == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("interior determinants of an affine cloud equal det(A)") {
    const GridShape s{{7, 6, 5}};
    VoxelCloud c = make_identity_grid(s);
    const double A[3][3] = {{1.2, 0.3, -0.1}, {0.0, 0.9, 0.2}, {0.4, -0.2, 1.1}};
    const double b[3] = {0.7, -1.0, 0.25};
    const std::int64_t n = s.voxels();
    std::vector<double> orig = c.coords;
    for (std::int64_t i = 0; i < n; ++i) {
        for (int r = 0; r < 3; ++r) {
            double v = b[r];
            for (int k = 0; k < 3; ++k) v += A[r][k] * orig[static_cast<std::size_t>(k * n + i)];
            c.plane(r)[i] = v;
        }
    }
    const double detA = A[0][0] * (A[1][1] * A[2][2] - A[1][2] * A[2][1]) -
                        A[0][1] * (A[1][0] * A[2][2] - A[1][2] * A[2][0]) +
                        A[0][2] * (A[1][0] * A[2][1] - A[1][1] * A[2][0]);
    const JacobianMap jm = jacobian_det_map(c);
    const auto strides = row_major_strides(s);
    for (std::int64_t i = 0; i < n; ++i) {
        bool interior = true;
        for (int a = 0; a < 3; ++a) {
            const int pos = static_cast<int>((i / strides[a]) % s.extents[a]);
            if (pos == 0 || pos == s.extents[a] - 1) interior = false;
        }
        if (interior)
            CHECK(jm.dets[static_cast<std::size_t>(i)] == doctest::Approx(detA).epsilon(1e-10));
    }
}

TEST_CASE("jacobian map matches the serial reference") {
    const GridShape s{{6, 5, 4}};
    const VoxelCloud c = testsup::random_cloud(s, 61, 0.8);
    const JacobianMap a = jacobian_det_map(c);
    const JacobianMap b = ref::jacobian_det_map(c);
    CHECK(testsup::max_abs_diff(a.dets, b.dets) < 1e-13);
}

TEST_CASE("stencil transpose satisfies the inner-product identity") {
    // <P, G(psi)> == <G^T(P), psi> over random fields
    for (auto shape : {GridShape{{6, 7}}, GridShape{{4, 3, 5}}}) {
        const int dim = shape.dim();
        const VoxelCloud psi = testsup::random_cloud(shape, 71, 1.0);
        const VectorField P = testsup::random_field(shape, dim * dim, 72);
        const VectorField g = spatial_gradient(psi);
        double lhs = 0.0;
        for (std::size_t i = 0; i < g.data.size(); ++i) lhs += P.data[i] * g.data[i];
        VectorField gt = make_field(shape, dim);
        add_spatial_gradient_transpose(P, gt);
        double rhs = 0.0;
        for (std::size_t i = 0; i < gt.data.size(); ++i) rhs += gt.data[i] * psi.coords[i];
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
    }
}
