#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "tomo/align.hpp"
#include "tomo/phantom.hpp"
#include "tomo/recon.hpp"

namespace tomo {

struct EpsilonSchedule {
    enum class Type { fixed, geometric };
    Type type = Type::fixed;
    double eps0 = 1e-4;
    double rate = 0.5;  // geometric only, in (0, 1]

    double at(int k) const {
        return type == Type::fixed ? eps0 : eps0 * std::pow(rate, k);
    }
};

struct DriverConfig {
    enum class Algorithm { smooth, prox, alternating };
    Algorithm algorithm = Algorithm::smooth;
    int n_align = 1;  // alternating: inner alignment steps per outer iteration
    EpsilonSchedule epsilon_schedule;
    int max_outer = 30;
    double stop_increment = 0.05;  // voxels, max-norm over voxel-equivalent increments
    ReconConfig recon;
    InterpScheme scheme = bicubic_scheme();
    Vec6 box_lo{-1e30, -1e30, -1e30, -1e30, -1e30, -1e30};  // prox only
    Vec6 box_hi{1e30, 1e30, 1e30, 1e30, 1e30, 1e30};
    double tether_lambda = 0;  // smooth only: g(a) = lambda/2 ||a - a0||^2
    bool fit_tomo_angle = true;
    enum class ModeRemoval { metrics_only, iterates };
    ModeRemoval mode_removal = ModeRemoval::metrics_only;
    PhantomSpec::Support weight_support = PhantomSpec::Support::cube;
};

/// Alignment error statistics, computed after trivial-mode removal on both
/// stacks. Shift RMS in voxels, angle RMS per plane in radians, weighted RMS
/// in voxel-equivalent units.
struct AlignErrors {
    double shift_rms = 0;
    double xy_rms = 0;
    double yz_rms = 0;
    double zx_rms = 0;
    double weighted_rms = 0;
};

AlignErrors alignment_errors(const AlignStack& estimate, const AlignStack& truth,
                             const AlignWeights& weights);

struct Truth {
    AlignStack align;
    Volume volume;
};

struct MetricsRow {
    int iter = 0;
    double epsilon = 0;
    double optimality = 0;   // || stacked per-projection gradients ||_2
    double residual = 0;     // || W(a) u - p ||_2 at the pre-update alignment
    double alpha = 0;
    int recon_iterations = 0;
    int halvings = 0;
    int stalled = 0;
    double increment = 0;    // voxel-equivalent max-norm alignment change
    // with ground truth only (NaN otherwise):
    double recon_rel_err = std::numeric_limits<double>::quiet_NaN();
    double shift_rms = std::numeric_limits<double>::quiet_NaN();
    double xy_rms = std::numeric_limits<double>::quiet_NaN();
    double yz_rms = std::numeric_limits<double>::quiet_NaN();
    double zx_rms = std::numeric_limits<double>::quiet_NaN();
    double weighted_rms = std::numeric_limits<double>::quiet_NaN();
};

struct RunReport {
    std::vector<MetricsRow> rows;
    AlignStack final_align;
    Volume final_volume;
    bool stopped_by_increment = false;
    bool aborted = false;
    std::string abort_reason;
};

/// Error metrics of one state against an optional ground truth.
MetricsRow compute_metrics(const AlignStack& estimate, const Volume& u_estimate,
                           const std::optional<Truth>& truth, const AlignWeights& weights);

/// Called after every completed outer iteration with the fresh state.
using DriverObserver =
    std::function<void(const MetricsRow& row, const AlignStack& a, const Volume& u)>;

/// Outer loop: reconstruct to tolerance eps_k, update every projection's
/// alignment (one line-search step for smooth/prox, n_align for
/// alternating, box projection for prox), stop on max_outer or when the
/// voxel-equivalent alignment increment drops below stop_increment.
RunReport run_joint(const ProjectionStack& p, const AlignStack& a0, const DriverConfig& cfg,
                    const std::array<int, 3>& grid, const std::optional<Truth>& truth = {},
                    const DriverObserver& observer = {});

}  // namespace tomo
