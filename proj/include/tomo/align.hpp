#pragma once

#include <optional>

#include "tomo/projector.hpp"

namespace tomo {

/// Weights mapping parameter increments to voxel-equivalent motion:
/// (1, 1, 1, w_xy, w_yz, w_zx), rotational entries in voxels per radian.
struct AlignWeights {
    Vec6 w{1, 1, 1, 1, 1, 1};
};

/// w_plane = mean over support voxels of the in-plane distance to the
/// rotation center; floored at 1e-6 for degenerate supports.
AlignWeights compute_align_weights(const Volume& support_mask);

/// Voxel-equivalent max-norm of a parameter increment.
double weighted_max_abs(const AlignParams& d, const AlignWeights& w);
/// Voxel-equivalent RMS over a whole stack difference.
double weighted_rms(const std::vector<AlignParams>& d, const AlignWeights& w);

/// Gradient of a_i -> 1/2 ||W_i(a_i) u - p_i||^2: the Jacobian block applied
/// to the residual.
Vec6 align_gradient(const Volume& u, const AlignStack& a, const ProjectionStack& p, int i,
                    const InterpScheme& scheme);

struct LineSearchResult {
    AlignParams params;     // updated a_i
    double gamma = 0;       // accepted step length
    int n_halvings = 0;
    bool stalled = false;   // 30 halvings failed to decrease the residual
    Vec6 gradient{};        // data-term gradient at the incoming a_i
    double residual_sq_before = 0;
    double residual_sq_after = 0;
};

/// One gradient step per projection. The search direction is the gradient
/// measured in a curvature-equalized metric, d_j = s_j / ||G_i e_j||^2
/// (shift and rotation sensitivities differ by orders of magnitude in raw
/// units; equalizing them is what makes plain per-projection descent
/// converge), followed by the exact line search for the quadratic model,
/// gamma = <s, d> / ||G_i d||^2, with gamma halved until the data residual
/// does not increase. The optional g_reg is an additive smooth-regularizer
/// gradient (it steers the direction; the safeguard still tests the data
/// residual). Components flagged in freeze are removed from the direction.
/// The weights argument is accepted for interface uniformity with the
/// stopping rule and metrics; the step itself derives its metric from the
/// per-projection curvature.
LineSearchResult line_search_update(const Volume& u, const AlignStack& a,
                                    const ProjectionStack& p, int i, const AlignWeights& weights,
                                    const InterpScheme& scheme,
                                    const std::optional<Vec6>& g_reg = {},
                                    const std::optional<std::array<bool, 6>>& freeze = {});

/// Componentwise clamp of every projection's parameters to [lo, hi]: the
/// proximal map of the box indicator (independent of gamma).
AlignStack prox_box(const AlignStack& a, const Vec6& lo, const Vec6& hi, double gamma);

/// Shifts that move every image's center of mass onto the detector center
/// (all rotations zero). These are correction shifts: applied to the images
/// they recenter them; negate to initialize projector parameters.
AlignStack com_prealign(const ProjectionStack& p);

}  // namespace tomo
