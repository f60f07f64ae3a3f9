#include "tomo/interp.hpp"

#include <doctest.h>

#include <cmath>

#include "test_util.hpp"

using namespace tomo;
using test::urand;

TEST_SUITE_BEGIN("interp");

TEST_CASE("kernel values match the piecewise formulas") {
    CHECK(eval_kernel(Kernel::linear, 0.0) == 1.0);
    CHECK(eval_kernel(Kernel::linear, 0.5) == 0.5);
    CHECK(eval_kernel(Kernel::linear, 1.5) == 0.0);
    CHECK(eval_kernel(Kernel::cubic, 0.0) == 1.0);
    CHECK(eval_kernel(Kernel::cubic, 0.5) == doctest::Approx(0.5625).epsilon(1e-15));
    CHECK(eval_kernel(Kernel::cubic, 1.5) == doctest::Approx(-0.0625).epsilon(1e-15));
    CHECK(eval_kernel(Kernel::cubic, 1.0) == 0.0);   // both pieces agree at the knot
    CHECK(eval_kernel(Kernel::cubic, 2.0) == 0.0);
    CHECK(eval_kernel(Kernel::cubic, -0.5) == doctest::Approx(0.5625));
}

TEST_CASE("cubic kernel and derivative are continuous at the knots") {
    const double d = 1e-8;
    for (double knot : {0.0, 1.0, 2.0, -1.0, -2.0}) {
        for (bool deriv : {false, true}) {
            const double a = eval_kernel(Kernel::cubic, knot - d, deriv);
            const double b = eval_kernel(Kernel::cubic, knot + d, deriv);
            CHECK(std::abs(a - b) <= 10 * d);
        }
    }
}

TEST_CASE("cubic kernel derivative matches finite differences") {
    std::mt19937_64 rng(1);
    for (int k = 0; k < 200; ++k) {
        const double x = urand(rng, -2.5, 2.5);
        const double h = 1e-6;
        const double fd = (eval_kernel(Kernel::cubic, x + h) - eval_kernel(Kernel::cubic, x - h)) / (2 * h);
        CHECK(eval_kernel(Kernel::cubic, x, true) == doctest::Approx(fd).epsilon(1e-4));
    }
}

TEST_CASE("linear kernel derivative takes right-sided values at knots") {
    CHECK(eval_kernel(Kernel::linear, 0.0, true) == -1.0);
    CHECK(eval_kernel(Kernel::linear, 1.0, true) == 0.0);
    CHECK(eval_kernel(Kernel::linear, -1.0, true) == 1.0);
    CHECK(eval_kernel(Kernel::linear, 0.5, true) == -1.0);
    CHECK(eval_kernel(Kernel::linear, -0.5, true) == 1.0);
}

TEST_CASE("build_plane_weights: grid nodes reduce to a single unit weight") {
    for (Kernel k : {Kernel::linear, Kernel::cubic}) {
        std::vector<Vec2> pts;
        for (int j = 0; j < 6; ++j)
            for (int i = 0; i < 6; ++i) pts.push_back({double(i), double(j)});
        const SparseWeights w = build_plane_weights(pts, {6, 6}, k);
        for (int r = 0; r < w.n_out; ++r) {
            REQUIRE(w.row_ptr[r + 1] - w.row_ptr[r] == 1);
            CHECK(w.val[w.row_ptr[r]] == 1.0);
            CHECK(w.col[w.row_ptr[r]] == r);
        }
    }
}

TEST_CASE("build_plane_weights: edge midpoint with the linear kernel") {
    const SparseWeights w = build_plane_weights({{0.5, 0.0}}, {4, 4}, Kernel::linear);
    REQUIRE(w.row_ptr[1] == 2);
    CHECK(w.val[0] == 0.5);
    CHECK(w.val[1] == 0.5);
}

TEST_CASE("build_plane_weights: partition of unity for interior points") {
    std::mt19937_64 rng(11);
    for (Kernel k : {Kernel::linear, Kernel::cubic}) {
        std::vector<Vec2> pts;
        for (int i = 0; i < 1000; ++i) pts.push_back({urand(rng, 2.0, 13.0), urand(rng, 2.0, 13.0)});
        const SparseWeights w = build_plane_weights(pts, {16, 16}, k);
        for (int r = 0; r < w.n_out; ++r) {
            double s = 0;
            for (int i = w.row_ptr[r]; i < w.row_ptr[r + 1]; ++i) s += w.val[i];
            CHECK(std::abs(s - 1.0) <= 1e-12);
        }
        const int per_dim = k == Kernel::linear ? 2 : 4;
        for (int r = 0; r < w.n_out; ++r)
            CHECK(w.row_ptr[r + 1] - w.row_ptr[r] <= per_dim * per_dim);
    }
}

TEST_CASE("resample: zero parameters return the input bit-identically") {
    std::mt19937_64 rng(2);
    const Volume u = test::random_volume(rng, 9);
    for (auto scheme : {trilinear_scheme(), bicubic_scheme(),
                        InterpScheme{Kernel::cubic, Decomposition::direct3d},
                        InterpScheme{Kernel::linear, Decomposition::plane2d}}) {
        const Volume v = resample(u, AlignParams{}, scheme);
        REQUIRE(v.size() == u.size());
        for (int64_t i = 0; i < u.size(); ++i) CHECK(v.data[i] == u.data[i]);
    }
}

TEST_CASE("resample: integer shift moves a unit voxel exactly") {
    for (auto scheme : {trilinear_scheme(), bicubic_scheme()}) {
        Volume u(9, 9, 9);
        u.at(4, 4, 4) = 1.0;
        AlignParams a;
        a.sx = 1.0;
        const Volume v = resample(u, a, scheme);
        CHECK(v.at(5, 4, 4) == doctest::Approx(1.0).epsilon(1e-14));
        double total = 0;
        for (double x : v.data) total += std::abs(x);
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("resample: four quarter tomographic rotations approximate the identity") {
    std::mt19937_64 rng(3);
    const int n = 16;
    const Volume u = test::smooth_volume(rng, n, 4, 3);
    AlignParams a;
    a.theta_zx = M_PI / 2;
    Volume v = u;
    for (int k = 0; k < 4; ++k) v = resample(v, a, trilinear_scheme());
    // compare on an interior ball
    double num = 0, den = 0;
    const double c = 0.5 * (n - 1);
    for (int z = 0; z < n; ++z)
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) {
                const double r2 = (x - c) * (x - c) + (y - c) * (y - c) + (z - c) * (z - c);
                if (r2 > (n / 3.0) * (n / 3.0)) continue;
                num += (v.at(x, y, z) - u.at(x, y, z)) * (v.at(x, y, z) - u.at(x, y, z));
                den += u.at(x, y, z) * u.at(x, y, z);
            }
    CHECK(std::sqrt(num / den) <= 0.05);
}

TEST_CASE("plane2d and direct3d agree on pure single-plane transforms") {
    std::mt19937_64 rng(4);
    const Volume u = test::smooth_volume(rng, 12, 4, 2);
    for (Kernel k : {Kernel::linear, Kernel::cubic}) {
        AlignParams a;
        a.theta_zx = 0.37;
        const Volume v1 = resample(u, a, {k, Decomposition::plane2d});
        const Volume v2 = resample(u, a, {k, Decomposition::direct3d});
        double m = 0;
        for (int64_t i = 0; i < u.size(); ++i) m = std::max(m, std::abs(v1.data[i] - v2.data[i]));
        CHECK(m <= 1e-12);

        AlignParams b;
        b.sx = 0.7;
        b.sy = -1.3;
        b.theta_xy = 0.21;
        const Volume w1 = resample(u, b, {k, Decomposition::plane2d});
        const Volume w2 = resample(u, b, {k, Decomposition::direct3d});
        m = 0;
        for (int64_t i = 0; i < u.size(); ++i) m = std::max(m, std::abs(w1.data[i] - w2.data[i]));
        CHECK(m <= 1e-12);
    }
}

TEST_CASE("interpolation identity on grid points for generic transforms") {
    // A transform mapping the grid onto itself (integer shift) must copy
    // exactly even with the cubic kernel.
    Volume u(8, 8, 8);
    std::mt19937_64 rng(5);
    for (auto& x : u.data) x = urand(rng, -1, 1);
    AlignParams a;
    a.sx = 2.0;
    a.sy = -1.0;
    const Volume v = resample(u, a, bicubic_scheme());
    for (int z = 0; z < 8; ++z)
        for (int y = 1; y < 7; ++y)
            for (int x = 2; x < 8; ++x)
                CHECK(v.at(x, y, z) == doctest::Approx(u.at(x - 2, y + 1, z)).epsilon(1e-14));
}

TEST_CASE("resample_param_derivative: constant volume has zero derivative") {
    // The zero extension creates boundary gradients; each plane factor
    // contaminates a band of kernel support plus displacement, so only the
    // deep interior is checked (plane2d passes through three factors).
    Volume u(18, 18, 18);
    u.fill(3.5);
    std::mt19937_64 rng(6);
    const AlignParams a = test::random_params(rng, 0.2, 0.015);
    for (auto scheme : {bicubic_scheme(), InterpScheme{Kernel::cubic, Decomposition::direct3d}}) {
        const int lo = scheme.decomposition == Decomposition::plane2d ? 8 : 4;
        const int hi = scheme.decomposition == Decomposition::plane2d ? 9 : 13;
        for (int j = 0; j < 6; ++j) {
            const Volume d = resample_param_derivative(u, a, scheme, j);
            for (int z = lo; z <= hi; ++z)
                for (int y = lo; y <= hi; ++y)
                    for (int x = lo; x <= hi; ++x) CHECK(std::abs(d.at(x, y, z)) <= 1e-10);
        }
    }
}

TEST_CASE("resample_param_derivative matches central differences (cubic)") {
    std::mt19937_64 rng(7);
    const Volume u = test::smooth_volume(rng, 12, 4, 3);
    const double eps = 1e-4;
    for (auto scheme : {bicubic_scheme(), InterpScheme{Kernel::cubic, Decomposition::direct3d}}) {
        for (int trial = 0; trial < 3; ++trial) {
            const AlignParams a = test::random_params(rng, 1.0, 0.1);
            for (int j = 0; j < 6; ++j) {
                const Volume d = resample_param_derivative(u, a, scheme, j);
                Vec6 ap = a.to_array(), am = a.to_array();
                ap[j] += eps;
                am[j] -= eps;
                const Volume fp = resample(u, AlignParams::from_array(ap), scheme);
                const Volume fm = resample(u, AlignParams::from_array(am), scheme);
                std::vector<double> fd(u.size());
                for (int64_t i = 0; i < u.size(); ++i) fd[i] = (fp.data[i] - fm.data[i]) / (2 * eps);
                CHECK(test::rel_l2(d.data, fd) <= 1e-4);
            }
        }
    }
}

TEST_CASE("s_z derivative sums to zero along the beam") {
    // Discretely exact whenever the s_z motion stays axis-aligned in the
    // factor that applies it (plane2d: theta_yz = 0; direct3d: no rotation);
    // under generic rotations it holds to interpolation accuracy. Needs the
    // object supported away from the z-boundary (full kernel columns cancel).
    std::mt19937_64 rng(8);
    const int n = 20;
    const Volume u = test::smooth_volume(rng, n, 4, 6);
    auto max_colsum = [&](const Volume& d) {
        double m = 0;
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) {
                double s = 0;
                for (int z = 0; z < n; ++z) s += d.at(x, y, z);
                m = std::max(m, std::abs(s));
            }
        return m;
    };

    AlignParams a = test::random_params(rng, 0.5, 0.05);
    a.theta_yz = 0.0;  // exact case for the factored scheme, any tomographic angle
    a.theta_zx = 0.9;
    CHECK(max_colsum(resample_param_derivative(u, a, bicubic_scheme(), kSz)) <= 1e-10);

    AlignParams b = test::random_params(rng, 0.5, 0.0);  // shifts only
    CHECK(max_colsum(resample_param_derivative(
              u, b, {Kernel::cubic, Decomposition::direct3d}, kSz)) <= 1e-10);

    const AlignParams c = test::random_params(rng, 0.3, 0.02);
    for (auto scheme : {bicubic_scheme(), InterpScheme{Kernel::cubic, Decomposition::direct3d}})
        CHECK(max_colsum(resample_param_derivative(u, c, scheme, kSz)) <= 1e-4);
}

TEST_CASE("resample_direction_derivative equals the sum of single-parameter derivatives") {
    std::mt19937_64 rng(9);
    const Volume u = test::smooth_volume(rng, 10, 3, 2);
    const AlignParams a = test::random_params(rng, 0.5, 0.1);
    const Vec6 da{0.3, -0.2, 0.15, 0.05, -0.08, 0.11};
    for (auto scheme : {bicubic_scheme(), InterpScheme{Kernel::cubic, Decomposition::direct3d}}) {
        const Volume d = resample_direction_derivative(u, a, scheme, da);
        std::vector<double> want(u.size(), 0.0);
        for (int j = 0; j < 6; ++j) {
            const Volume dj = resample_param_derivative(u, a, scheme, j);
            for (int64_t i = 0; i < u.size(); ++i) want[i] += da[j] * dj.data[i];
        }
        CHECK(test::rel_l2(d.data, want) <= 1e-12);
    }
}

TEST_CASE("sparse transpose is an exact algebraic transpose") {
    std::mt19937_64 rng(10);
    std::vector<Vec2> pts;
    for (int i = 0; i < 64; ++i) pts.push_back({urand(rng, -1.0, 8.0), urand(rng, -1.0, 8.0)});
    const SparseWeights w = build_plane_weights(pts, {8, 8}, Kernel::cubic);
    const SparseWeights wt = w.transposed();
    std::vector<double> x(w.n_in), y(w.n_out);
    for (auto& v : x) v = urand(rng, -1, 1);
    for (auto& v : y) v = urand(rng, -1, 1);
    double lhs = 0;
    for (int r = 0; r < w.n_out; ++r)
        for (int k = w.row_ptr[r]; k < w.row_ptr[r + 1]; ++k) lhs += y[r] * w.val[k] * x[w.col[k]];
    double rhs = 0;
    for (int r = 0; r < wt.n_out; ++r)
        for (int k = wt.row_ptr[r]; k < wt.row_ptr[r + 1]; ++k) rhs += x[r] * wt.val[k] * y[wt.col[k]];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-14));
}

TEST_SUITE_END();
