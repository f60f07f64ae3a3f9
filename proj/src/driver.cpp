#include "tomo/driver.hpp"

#include <algorithm>
#include <cmath>

#include "tomo/log.hpp"
#include "tomo/parallel.hpp"

namespace tomo {

AlignErrors alignment_errors(const AlignStack& estimate, const AlignStack& truth,
                             const AlignWeights& weights) {
    if (estimate.n_proj() != truth.n_proj())
        throw std::invalid_argument("alignment_errors: stack size mismatch");
    const AlignStack de = remove_trivial_modes(estimate);
    const AlignStack dt = remove_trivial_modes(truth);
    const int n = de.n_proj();
    AlignErrors e;
    double wsum = 0;
    for (int i = 0; i < n; ++i) {
        const Vec6 d = (de.params[i] - dt.params[i]).to_array();
        e.shift_rms += d[kSx] * d[kSx] + d[kSy] * d[kSy];
        e.xy_rms += d[kThetaXY] * d[kThetaXY];
        e.yz_rms += d[kThetaYZ] * d[kThetaYZ];
        e.zx_rms += d[kThetaZX] * d[kThetaZX];
        for (int j = 0; j < 6; ++j) wsum += weights.w[j] * d[j] * (weights.w[j] * d[j]);
    }
    e.shift_rms = std::sqrt(e.shift_rms / (2.0 * n));
    e.xy_rms = std::sqrt(e.xy_rms / n);
    e.yz_rms = std::sqrt(e.yz_rms / n);
    e.zx_rms = std::sqrt(e.zx_rms / n);
    e.weighted_rms = std::sqrt(wsum / (6.0 * n));
    return e;
}

MetricsRow compute_metrics(const AlignStack& estimate, const Volume& u_estimate,
                           const std::optional<Truth>& truth, const AlignWeights& weights) {
    MetricsRow row;
    if (!truth) return row;
    const AlignErrors e = alignment_errors(estimate, truth->align, weights);
    row.shift_rms = e.shift_rms;
    row.xy_rms = e.xy_rms;
    row.yz_rms = e.yz_rms;
    row.zx_rms = e.zx_rms;
    row.weighted_rms = e.weighted_rms;
    if (truth->volume.size() > 0 && truth->volume.shape == u_estimate.shape) {
        double num = 0, den = 0;
        for (int64_t i = 0; i < u_estimate.size(); ++i) {
            const double d = u_estimate.data[i] - truth->volume.data[i];
            num += d * d;
            den += truth->volume.data[i] * truth->volume.data[i];
        }
        row.recon_rel_err = std::sqrt(num / std::max(den, 1e-300));
    }
    return row;
}

RunReport run_joint(const ProjectionStack& p, const AlignStack& a0, const DriverConfig& cfg,
                    const std::array<int, 3>& grid, const std::optional<Truth>& truth,
                    const DriverObserver& observer) {
    if (a0.n_proj() != p.n_proj) throw std::invalid_argument("run_joint: alignment/data size mismatch");
    for (int i = 1; i < p.n_proj; ++i)
        if (!(p.nominal_angles[i] > p.nominal_angles[i - 1]))
            throw std::invalid_argument("run_joint: nominal angles must be strictly increasing");

    RunReport report;
    report.final_align = a0;

    const AlignWeights weights =
        compute_align_weights(support_mask(grid[0], cfg.weight_support, 0));

    std::optional<std::array<bool, 6>> freeze;
    if (!cfg.fit_tomo_angle) {
        freeze = std::array<bool, 6>{};
        (*freeze)[kThetaZX] = true;
    }

    AlignStack a = a0;
    Volume u(grid);
    const bool use_tether =
        cfg.algorithm == DriverConfig::Algorithm::smooth && cfg.tether_lambda > 0;

    for (int k = 0; k < cfg.max_outer; ++k) {
        const double eps_k = cfg.epsilon_schedule.at(k);
        ReconConfig rc = cfg.recon;
        rc.epsilon = eps_k;

        MetricsRow row;
        row.iter = k;
        row.epsilon = eps_k;
        row.alpha = rc.alpha;

        try {
            Volume zero_start;
            const Volume* start = &u;
            if (!rc.warm_start) {
                zero_start = Volume(grid);
                start = &zero_start;
            }
            if (rc.method == ReconConfig::Method::cg) {
                ReconResult res = solve_tikhonov_cg(p, a, rc, *start, grid, cfg.scheme);
                u = std::move(res.u);
                row.recon_iterations = res.iterations;
                if (!res.converged)
                    log_info("outer " + std::to_string(k) + ": cg hit max_iter, achieved " +
                             std::to_string(res.achieved_rel));
            } else {
                u = kaczmarz_cycle(p, a, rc, *start, grid, cfg.scheme);
                row.recon_iterations = 2 * p.n_proj;
            }
        } catch (const ReconDivergence& e) {
            report.aborted = true;
            report.abort_reason = e.what();
            log_error(std::string("run_joint aborted: ") + e.what());
            break;
        }

        const AlignStack a_prev = a;
        const int passes = cfg.algorithm == DriverConfig::Algorithm::alternating
                               ? std::max(1, cfg.n_align)
                               : 1;
        double optimality_sq = 0, residual_sq = 0;
        int halvings = 0, stalled = 0;
        for (int t = 0; t < passes; ++t) {
            std::vector<LineSearchResult> results(p.n_proj);
            parallel_for(p.n_proj, [&](int64_t i) {
                std::optional<Vec6> g_reg;
                if (use_tether) {
                    Vec6 g{};
                    const Vec6 d = (a.params[i] - a0.params[i]).to_array();
                    for (int j = 0; j < 6; ++j) g[j] = cfg.tether_lambda * d[j];
                    g_reg = g;
                }
                results[i] =
                    line_search_update(u, a, p, static_cast<int>(i), weights, cfg.scheme, g_reg, freeze);
            });
            for (int i = 0; i < p.n_proj; ++i) {
                a.params[i] = results[i].params;
                halvings += results[i].n_halvings;
                stalled += results[i].stalled ? 1 : 0;
                if (t == 0) {
                    residual_sq += results[i].residual_sq_before;
                    Vec6 s = results[i].gradient;
                    if (freeze)
                        for (int j = 0; j < 6; ++j)
                            if ((*freeze)[j]) s[j] = 0;
                    for (int j = 0; j < 6; ++j) optimality_sq += s[j] * s[j];
                }
            }
            if (cfg.algorithm == DriverConfig::Algorithm::prox)
                a = prox_box(a, cfg.box_lo, cfg.box_hi, 1.0);
        }
        if (cfg.mode_removal == DriverConfig::ModeRemoval::iterates)
            a = remove_trivial_modes(a);

        double increment = 0;
        for (int i = 0; i < p.n_proj; ++i)
            increment = std::max(increment, weighted_max_abs(a.params[i] - a_prev.params[i], weights));

        MetricsRow err = compute_metrics(a, u, truth, weights);
        row.optimality = std::sqrt(optimality_sq);
        row.residual = std::sqrt(residual_sq);
        row.halvings = halvings;
        row.stalled = stalled;
        row.increment = increment;
        row.recon_rel_err = err.recon_rel_err;
        row.shift_rms = err.shift_rms;
        row.xy_rms = err.xy_rms;
        row.yz_rms = err.yz_rms;
        row.zx_rms = err.zx_rms;
        row.weighted_rms = err.weighted_rms;
        report.rows.push_back(row);
        if (observer) observer(row, a, u);

        if (increment < cfg.stop_increment) {
            report.stopped_by_increment = true;
            break;
        }
    }

    report.final_align = a;
    report.final_volume = std::move(u);
    return report;
}

}  // namespace tomo
