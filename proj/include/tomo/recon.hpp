#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "tomo/projector.hpp"
#include "tomo/volume.hpp"

namespace tomo {

/// Reconstruction settings at fixed alignment.
struct ReconConfig {
    enum class Method { cg, kaczmarz };
    double alpha = 1.0;      // gradient-penalty weight, > 0
    double epsilon = 1e-4;   // relative gradient tolerance (vs the zero volume)
    int max_iter = 500;
    Method method = Method::cg;
    bool nonneg = false;     // kaczmarz only: clamp negatives after each block
    int inner_iter = 10;     // kaczmarz per-block CG steps
    bool warm_start = true;
};

struct ReconDivergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Acquisition geometry at nominal alignment, the input to choose_alpha.
struct ProjectionGeometry {
    std::array<int, 3> grid_shape;
    std::vector<double> angles;  // radians
    InterpScheme scheme;
    std::optional<Roi> roi;
};

// Forward differences with zero-flux (replicate) boundary, and friends.
struct GradField {
    Volume x, y, z;
};
GradField discrete_gradient(const Volume& u);
Volume discrete_gradient_adjoint(const GradField& g);
/// out += alpha * (grad^T grad) u, fused.
void laplacian_add(const Volume& u, double alpha, Volume& out);
double gradient_penalty_sq(const Volume& u);  // ||grad u||^2

/// Angular binary-subdivision processing order; equals bit-reversal when n
/// is a power of two.
std::vector<int> multilevel_order(int n);

/// Block visit sequence of one symmetric Kaczmarz cycle: the multilevel
/// order followed by its reverse (each block exactly twice).
std::vector<int> kaczmarz_block_sequence(int n_proj);

/// Regularization weight balancing data fidelity against the gradient
/// penalty for a Fourier mode at the misalignment length scale delta_a
/// (voxels), averaged over the three axis-aligned mode orientations.
/// delta_a below 2 voxels is clamped to 2.
double choose_alpha(double delta_a, const ProjectionGeometry& geom);

struct ReconResult {
    Volume u;
    double achieved_rel = 0;  // ||normal-eq residual|| / ||gradient at zero||
    int iterations = 0;
    bool converged = false;
};

/// Conjugate gradients on the normal equations of
///   min ||W(a) u - p||^2 + alpha ||grad u||^2,
/// stopping when the normal-equation residual falls below
/// epsilon * (gradient norm at the zero volume). The monitor, when set, is
/// called with every iterate (tests use it to track the quadratic energy).
ReconResult solve_tikhonov_cg(const ProjectionStack& p, const AlignStack& a,
                              const ReconConfig& cfg, const Volume& u0,
                              const std::array<int, 3>& grid, const InterpScheme& scheme,
                              const std::function<void(int, const Volume&)>& monitor = {});

/// One symmetric Kaczmarz cycle of per-projection proximal subproblems
///   min ||W_i u - p_i||^2 + (alpha/2) ||grad(u - u_prev)||^2,
/// each solved by inner_iter CG steps; optional non-negativity clamp after
/// every block. The observer, when set, sees every block update before and
/// after the clamp (diagnostics and tests).
using KaczmarzObserver = std::function<void(int block, const Volume& before_clamp,
                                            const Volume& after_clamp)>;
Volume kaczmarz_cycle(const ProjectionStack& p, const AlignStack& a, const ReconConfig& cfg,
                      const Volume& u0, const std::array<int, 3>& grid,
                      const InterpScheme& scheme, const KaczmarzObserver& observer = {});

/// Norm of the gradient of the Tikhonov objective at u (the reconstruct
/// contract quantity): || W^T(Wu - p) + alpha grad^T grad u ||.
double tikhonov_gradient_norm(const ProjectionStack& p, const AlignStack& a, double alpha,
                              const Volume& u, const InterpScheme& scheme);

}  // namespace tomo
