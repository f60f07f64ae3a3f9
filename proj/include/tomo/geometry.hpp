#pragma once

#include <array>
#include <vector>

#include "tomo/math3.hpp"

namespace tomo {

// Parameter indices in the stacked 6-vector per projection.
enum ParamIndex : int { kSx = 0, kSy = 1, kSz = 2, kThetaXY = 3, kThetaYZ = 4, kThetaZX = 5 };

/// Rigid-motion parameters of one projection: shifts in voxels, rotation
/// angles in radians (in-plane, pitch, tomographic).
struct AlignParams {
    double sx = 0, sy = 0, sz = 0;
    double theta_xy = 0, theta_yz = 0, theta_zx = 0;

    Vec6 to_array() const { return {sx, sy, sz, theta_xy, theta_yz, theta_zx}; }
    static AlignParams from_array(const Vec6& v) { return {v[0], v[1], v[2], v[3], v[4], v[5]}; }

    double operator[](int j) const { return to_array()[j]; }
};

inline AlignParams operator+(const AlignParams& a, const AlignParams& b) {
    return {a.sx + b.sx, a.sy + b.sy, a.sz + b.sz,
            a.theta_xy + b.theta_xy, a.theta_yz + b.theta_yz, a.theta_zx + b.theta_zx};
}
inline AlignParams operator-(const AlignParams& a, const AlignParams& b) {
    return {a.sx - b.sx, a.sy - b.sy, a.sz - b.sz,
            a.theta_xy - b.theta_xy, a.theta_yz - b.theta_yz, a.theta_zx - b.theta_zx};
}
inline AlignParams operator*(double s, const AlignParams& a) {
    return {s * a.sx, s * a.sy, s * a.sz, s * a.theta_xy, s * a.theta_yz, s * a.theta_zx};
}

/// Per-projection rigid perturbations plus the nominal tomographic angles
/// they perturb. nominal_angles must be strictly increasing.
struct AlignStack {
    std::vector<AlignParams> params;
    std::vector<double> nominal_angles;  // radians

    AlignStack() = default;
    explicit AlignStack(std::vector<double> angles)
        : params(angles.size()), nominal_angles(std::move(angles)) {}

    int n_proj() const { return static_cast<int>(params.size()); }
};

/// Affine map x -> linear*x + offset with the rotation center it was built
/// around. linear is a product of plane rotations, hence orthogonal.
struct AffineMap {
    Mat3 linear;
    Vec3 offset;
    Vec3 center;

    Vec3 apply(const Vec3& x) const { return mul(linear, x) + offset; }
    Vec3 apply_inverse(const Vec3& x) const { return mul(transpose(linear), x - offset); }
};

/// Geometric center of the voxel grid, the rotation center of all maps.
inline Vec3 grid_center(const std::array<int, 3>& shape) {
    return {0.5 * (shape[0] - 1), 0.5 * (shape[1] - 1), 0.5 * (shape[2] - 1)};
}

/// Composed forward rigid map of one projection. Applies, in order:
/// tomographic rotation (z-x), pitch rotation (y-z), shifts, in-plane
/// rotation (x-y), all about the grid center c:
///   A(q) = c + R_xy(R_yz(R_zx(q - c)) + s)
AffineMap affine_map(const AlignParams& a, const std::array<int, 3>& grid_shape);

/// Rows j = 0..5: derivative of the inverse-mapped point A(a)^-1(x) with
/// respect to parameter j, evaluated analytically.
std::array<Vec3, 6> map_param_jacobian(const AlignParams& a, const Vec3& x,
                                       const std::array<int, 3>& grid_shape);

/// Subtracts the orthogonal projection onto the redundant alignment modes
/// (constant theta_zx, sin/cos tilt pair in (theta_xy, theta_yz), sin/cos
/// lateral pair in s_x, constant s_y, evaluated at the nominal angles) and
/// zeroes s_z. Linear and idempotent. Requires n_proj >= 2.
AlignStack remove_trivial_modes(const AlignStack& a);

}  // namespace tomo
