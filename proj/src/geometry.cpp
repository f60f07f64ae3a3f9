#include "tomo/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace tomo {

namespace {

Mat3 rot_xy(double t) { return plane_rotation(0, 1, t); }
Mat3 rot_yz(double t) { return plane_rotation(1, 2, t); }
Mat3 rot_zx(double t) { return plane_rotation(2, 0, t); }

}  // namespace

AffineMap affine_map(const AlignParams& a, const std::array<int, 3>& grid_shape) {
    const Vec3 c = grid_center(grid_shape);
    const Vec3 s{a.sx, a.sy, a.sz};
    const Mat3 rxy = rot_xy(a.theta_xy);
    const Mat3 linear = mul(rxy, mul(rot_yz(a.theta_yz), rot_zx(a.theta_zx)));
    // A(q) = L(q - c) + R_xy s + c  =  L q + offset
    const Vec3 offset = c - mul(linear, c) + mul(rxy, s);
    return AffineMap{linear, offset, c};
}

std::array<Vec3, 6> map_param_jacobian(const AlignParams& a, const Vec3& x,
                                       const std::array<int, 3>& grid_shape) {
    const Vec3 c = grid_center(grid_shape);
    const Vec3 s{a.sx, a.sy, a.sz};

    // A^-1(x) = c + M1 M2 (M3 (x - c) - s) with M1 = R_zx(-t_zx), etc.
    const Mat3 m1 = rot_zx(-a.theta_zx);
    const Mat3 m2 = rot_yz(-a.theta_yz);
    const Mat3 m3 = rot_xy(-a.theta_xy);
    const Vec3 y0 = x - c;
    const Vec3 w = mul(m3, y0) - s;
    const Mat3 m12 = mul(m1, m2);

    std::array<Vec3, 6> rows;
    for (int j = 0; j < 3; ++j) rows[j] = {-m12[0][j], -m12[1][j], -m12[2][j]};
    rows[kThetaXY] = mul(m12, mul(plane_rotation_deriv(0, 1, -a.theta_xy), -1.0 * y0));
    rows[kThetaYZ] = mul(m1, mul(plane_rotation_deriv(1, 2, -a.theta_yz), -1.0 * w));
    rows[kThetaZX] = mul(plane_rotation_deriv(2, 0, -a.theta_zx), -1.0 * mul(m2, w));
    return rows;
}

AlignStack remove_trivial_modes(const AlignStack& a) {
    const int n = a.n_proj();
    if (n < 2) throw std::invalid_argument("remove_trivial_modes: need at least 2 projections");

    // Redundant-mode basis on the stacked parameter vector (6n entries,
    // projection-major), sinusoids evaluated at the nominal angles:
    //   b0: theta_zx = 1
    //   b1: (theta_xy, theta_yz) = (sin phi, cos phi)
    //   b2: (theta_xy, theta_yz) = (cos phi, -sin phi)
    //   b3: s_x = sin phi
    //   b4: s_x = cos phi
    //   b5: s_y = 1
    const int m = 6;
    std::vector<std::vector<double>> basis(m, std::vector<double>(size_t(6) * n, 0.0));
    for (int i = 0; i < n; ++i) {
        const double phi = a.nominal_angles[i];
        const double sp = std::sin(phi), cp = std::cos(phi);
        basis[0][6 * i + kThetaZX] = 1.0;
        basis[1][6 * i + kThetaXY] = sp;
        basis[1][6 * i + kThetaYZ] = cp;
        basis[2][6 * i + kThetaXY] = cp;
        basis[2][6 * i + kThetaYZ] = -sp;
        basis[3][6 * i + kSx] = sp;
        basis[4][6 * i + kSx] = cp;
        basis[5][6 * i + kSy] = 1.0;
    }

    std::vector<double> v(size_t(6) * n);
    for (int i = 0; i < n; ++i) {
        const Vec6 p = a.params[i].to_array();
        for (int j = 0; j < 6; ++j) v[6 * i + j] = p[j];
    }

    // Solve the 6x6 normal equations (B^T B) c = B^T v and subtract B c.
    std::array<std::array<double, 7>, 6> sys{};
    for (int r = 0; r < m; ++r) {
        for (int col = 0; col <= r; ++col) {
            double s = 0;
            for (size_t k = 0; k < v.size(); ++k) s += basis[r][k] * basis[col][k];
            sys[r][col] = sys[col][r] = s;
        }
        double s = 0;
        for (size_t k = 0; k < v.size(); ++k) s += basis[r][k] * v[k];
        sys[r][m] = s;
    }
    // Gaussian elimination with partial pivoting.
    for (int col = 0; col < m; ++col) {
        int piv = col;
        for (int r = col + 1; r < m; ++r)
            if (std::abs(sys[r][col]) > std::abs(sys[piv][col])) piv = r;
        std::swap(sys[piv], sys[col]);
        if (std::abs(sys[col][col]) < 1e-12)
            throw std::runtime_error("remove_trivial_modes: degenerate mode basis (angles too clustered)");
        for (int r = 0; r < m; ++r) {
            if (r == col) continue;
            const double f = sys[r][col] / sys[col][col];
            for (int k = col; k <= m; ++k) sys[r][k] -= f * sys[col][k];
        }
    }
    std::array<double, 6> coef{};
    for (int r = 0; r < m; ++r) coef[r] = sys[r][m] / sys[r][r];

    for (int r = 0; r < m; ++r)
        for (size_t k = 0; k < v.size(); ++k) v[k] -= coef[r] * basis[r][k];

    AlignStack out = a;
    for (int i = 0; i < n; ++i) {
        Vec6 p;
        for (int j = 0; j < 6; ++j) p[j] = v[6 * i + j];
        p[kSz] = 0.0;  // shifts along the beam never affect parallel projections
        out.params[i] = AlignParams::from_array(p);
    }
    return out;
}

}  // namespace tomo
