#pragma once

#include <array>
#include <cmath>

namespace tomo {

using Vec2 = std::array<double, 2>;
using Vec3 = std::array<double, 3>;
using Vec6 = std::array<double, 6>;
using Mat2 = std::array<std::array<double, 2>, 2>;
using Mat3 = std::array<std::array<double, 3>, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

inline Mat3 mat3_identity() {
    return {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
}

inline Vec3 mul(const Mat3& m, const Vec3& v) {
    return {m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2]};
}

inline Mat3 mul(const Mat3& a, const Mat3& b) {
    Mat3 r{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
    return r;
}

inline Mat3 transpose(const Mat3& m) {
    Mat3 r{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            r[i][j] = m[j][i];
    return r;
}

// Rotation in the ordered coordinate plane (p, q): positive angles move the
// p-axis towards the q-axis (right-handed about the plane normal p x q).
// Plane index pairs: xy = (0,1), yz = (1,2), zx = (2,0).
inline Mat3 plane_rotation(int p, int q, double theta) {
    Mat3 r = mat3_identity();
    const double c = std::cos(theta), s = std::sin(theta);
    r[p][p] = c;
    r[p][q] = -s;
    r[q][p] = s;
    r[q][q] = c;
    return r;
}

// d/dtheta of plane_rotation at the given angle.
inline Mat3 plane_rotation_deriv(int p, int q, double theta) {
    Mat3 r{};
    const double c = std::cos(theta), s = std::sin(theta);
    r[p][p] = -s;
    r[p][q] = -c;
    r[q][p] = c;
    r[q][q] = -s;
    return r;
}

inline Vec2 mul(const Mat2& m, const Vec2& v) {
    return {m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]};
}

inline Mat2 rot2(double theta) {
    const double c = std::cos(theta), s = std::sin(theta);
    return {{{c, -s}, {s, c}}};
}

inline Mat2 rot2_deriv(double theta) {
    const double c = std::cos(theta), s = std::sin(theta);
    return {{{-s, -c}, {c, -s}}};
}

}  // namespace tomo
