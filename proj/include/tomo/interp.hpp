#pragma once

#include <array>
#include <vector>

#include "tomo/geometry.hpp"
#include "tomo/math3.hpp"
#include "tomo/volume.hpp"

namespace tomo {

enum class Kernel { linear, cubic };
enum class Decomposition { direct3d, plane2d };

/// Interpolation scheme of the projector. plane2d+cubic is the "bicubic"
/// scheme, direct3d+linear the "trilinear" one.
struct InterpScheme {
    Kernel kernel = Kernel::cubic;
    Decomposition decomposition = Decomposition::plane2d;
};

inline InterpScheme trilinear_scheme() { return {Kernel::linear, Decomposition::direct3d}; }
inline InterpScheme bicubic_scheme() { return {Kernel::cubic, Decomposition::plane2d}; }

/// Piecewise-polynomial interpolation kernel value, or its derivative when
/// derivative = true. The linear-kernel derivative takes the right-sided
/// value at |x| in {0, 1}.
double eval_kernel(Kernel kind, double x, bool derivative = false);

/// Row-stochastic sparse interpolation matrix of one plane transform,
/// compressed row storage. Rows are output samples, columns input samples,
/// both indexed q1-fastest within the plane grid.
struct SparseWeights {
    int n_out = 0, n_in = 0;
    std::vector<int> row_ptr;  // n_out + 1
    std::vector<int> col;
    std::vector<double> val;

    SparseWeights() = default;
    SparseWeights(int rows, int cols) : n_out(rows), n_in(cols), row_ptr(rows + 1, 0) {}

    SparseWeights transposed() const;
};

/// Kernel-footprint weights for arbitrary 2D sample coordinates on a
/// (grid[0], grid[1]) node grid. Out-of-grid source nodes are dropped (zero
/// extension); weights below 1e-15 are dropped.
SparseWeights build_plane_weights(const std::vector<Vec2>& points, const std::array<int, 2>& grid,
                                  Kernel kernel);

/// Same sparsity logic for the derivative of the weights along a per-point
/// motion direction d_points[i] = d(points[i])/d(param).
SparseWeights build_plane_deriv_weights(const std::vector<Vec2>& points,
                                        const std::vector<Vec2>& d_points,
                                        const std::array<int, 2>& grid, Kernel kernel);

// ---------------------------------------------------------------------------
// Plane-decomposed rigid transforms. A full rigid resampling factors into
// three plane transforms applied in the order zx, yz, xy; each interpolates
// only within its coordinate plane and shares the weights across the third
// axis.

enum class PlaneFactor { zx = 0, yz = 1, xy = 2 };

struct PlaneAxes {
    int q1, q2, shared;  // volume axis indices of the plane and shared axis
};
PlaneAxes plane_axes(PlaneFactor f);

/// Global parameter indices handled by one factor (zx: theta_zx; yz: s_z,
/// theta_yz; xy: s_x, s_y, theta_xy).
const std::vector<int>& plane_factor_params(PlaneFactor f);

/// Inverse-mapped 2D sample points of one factor over its plane grid, plus
/// (optionally) their derivatives with respect to the factor's parameters.
struct PlanePoints {
    std::array<int, 2> extents;
    std::vector<Vec2> points;
    std::vector<std::vector<Vec2>> derivs;  // one vector per factor parameter
};
PlanePoints plane_factor_points(PlaneFactor f, const AlignParams& a,
                                const std::array<int, 3>& grid_shape, bool with_derivs);

/// Applies plane-transform weights to a volume: every slab along the shared
/// axis is multiplied by the same sparse matrix. out is fully overwritten.
void apply_plane_weights(const SparseWeights& w, PlaneFactor f, const Volume& in, Volume& out);

/// Assembled transform of one projection for fixed parameters, reusable
/// across many volumes (transposes serve the adjoint).
struct ResamplePlan {
    std::array<int, 3> grid_shape;
    Kernel kernel;
    struct Factor {
        bool active = false;
        SparseWeights w;
        SparseWeights wt;
    };
    std::array<Factor, 3> factors;  // indexed by PlaneFactor, applied in order zx, yz, xy
};

ResamplePlan make_resample_plan(const AlignParams& a, const std::array<int, 3>& grid_shape,
                                Kernel kernel, bool with_transpose);
void apply_plan(const ResamplePlan& plan, const Volume& in, Volume& out);
void apply_plan_transpose(const ResamplePlan& plan, const Volume& in, Volume& out);

// ---------------------------------------------------------------------------
// Direct 3D evaluation.

Volume resample_direct(const Volume& u, const AffineMap& map, Kernel kernel);
/// Exact algebraic transpose of resample_direct (scatter with identical weights).
Volume resample_direct_adjoint(const Volume& p, const AffineMap& map, Kernel kernel);

// ---------------------------------------------------------------------------
// Public resampling entry points.

/// R(a)(u): rigid resampling with the scheme's kernel and decomposition.
/// Zero parameters return u bit-identically.
Volume resample(const Volume& u, const AlignParams& a, const InterpScheme& scheme);

/// d R(a)(u) / d a_j, consistent with the scheme used by resample (for
/// plane2d this differentiates the factored transform by the product rule).
/// Warns (non-fatal) for the linear kernel, whose derivative is discontinuous.
Volume resample_param_derivative(const Volume& u, const AlignParams& a, const InterpScheme& scheme,
                                 int j);

/// Directional derivative sum_j da[j] * dR(a)(u)/da_j in a single sweep.
Volume resample_direction_derivative(const Volume& u, const AlignParams& a,
                                     const InterpScheme& scheme, const Vec6& da);

}  // namespace tomo
