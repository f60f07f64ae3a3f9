#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

namespace tomo {

/// Scalar density on a unit-spaced voxel grid, x-fastest storage order.
struct Volume {
    std::array<int, 3> shape{0, 0, 0};
    std::vector<double> data;

    Volume() = default;
    explicit Volume(std::array<int, 3> s) : shape(s), data(size_t(s[0]) * s[1] * s[2], 0.0) {}
    Volume(int nx, int ny, int nz) : Volume(std::array<int, 3>{nx, ny, nz}) {}

    int nx() const { return shape[0]; }
    int ny() const { return shape[1]; }
    int nz() const { return shape[2]; }
    int64_t size() const { return static_cast<int64_t>(data.size()); }

    int64_t idx(int x, int y, int z) const {
        return x + static_cast<int64_t>(shape[0]) * (y + static_cast<int64_t>(shape[1]) * z);
    }
    double& at(int x, int y, int z) { return data[idx(x, y, z)]; }
    double at(int x, int y, int z) const { return data[idx(x, y, z)]; }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

/// One detector image.
struct Image {
    int nx = 0, ny = 0;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h) : nx(w), ny(h), data(size_t(w) * h, 0.0) {}
    int64_t idx(int x, int y) const { return x + static_cast<int64_t>(nx) * y; }
    double& at(int x, int y) { return data[idx(x, y)]; }
    double at(int x, int y) const { return data[idx(x, y)]; }
};

/// Rectangular detector window: offsets into the full detector plus extents.
struct Roi {
    int x0 = 0, y0 = 0;
    int px = 0, py = 0;
};

/// Centered window of extents (px, py) in a full detector (full_px, full_py).
inline Roi centered_roi(int px, int py, int full_px, int full_py) {
    return Roi{(full_px - px) / 2, (full_py - py) / 2, px, py};
}

/// Detector images of one tilt series, with per-projection nominal angles.
/// Images are (px, py), x-fastest; when roi is set they are roi-truncated
/// views of the full detector whose extents the roi records implicitly.
struct ProjectionStack {
    int n_proj = 0;
    int px = 0, py = 0;
    std::vector<double> nominal_angles;  // radians
    std::optional<Roi> roi;
    std::vector<double> data;  // n_proj * px * py

    ProjectionStack() = default;
    ProjectionStack(int n, int w, int h) : n_proj(n), px(w), py(h), nominal_angles(n, 0.0), data(size_t(n) * w * h, 0.0) {}

    int64_t image_size() const { return static_cast<int64_t>(px) * py; }
    double* image(int i) { return data.data() + image_size() * i; }
    const double* image(int i) const { return data.data() + image_size() * i; }
    int64_t size() const { return static_cast<int64_t>(data.size()); }
};

// Dense vector helpers shared by the solvers.
inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

inline void axpy(double alpha, const std::vector<double>& x, std::vector<double>& y) {
    for (size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline void check_finite(const std::vector<double>& v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x)) throw std::runtime_error(std::string(what) + ": non-finite value encountered");
}

}  // namespace tomo
