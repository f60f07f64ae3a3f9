// Command-line driver: synthetic experiment generation, joint
// alignment-reconstruction runs, and metrics/plot-data export.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

#include "tomo/config.hpp"
#include "tomo/io.hpp"
#include "tomo/log.hpp"
#include "tomo/parallel.hpp"
#include "tomo/recon.hpp"

namespace fs = std::filesystem;
using namespace tomo;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "out";
    int threads = -1;           // -1: from config
    bool deterministic = false;
    long long seed = -1;        // -1: from config
    std::string scheme;         // empty: from config
};

void add_common(CLI::App* cmd, CommonOpts& o, bool needs_config) {
    auto* pos = cmd->add_option("config,--config", o.config_path, "experiment config (JSON)");
    if (needs_config) pos->required();
    cmd->add_option("--out", o.out_dir, "output directory");
    cmd->add_option("--threads", o.threads, "worker threads (0 = auto)");
    cmd->add_flag("--deterministic", o.deterministic, "fixed-order reductions (always on; recorded)");
    cmd->add_option("--seed", o.seed, "override all seeds (phantom, misalign, noise)");
    cmd->add_option("--scheme", o.scheme, "reconstruction scheme override")
        ->check(CLI::IsMember({"trilinear", "bicubic", "bilinear", "tricubic"}));
}

ExperimentConfig load_with_overrides(const CommonOpts& o) {
    ExperimentConfig cfg = load_experiment_config(o.config_path);
    if (o.threads >= 0) cfg.threads = o.threads;
    if (o.seed >= 0) {
        cfg.phantom.seed = static_cast<uint64_t>(o.seed);
        cfg.misalign.seed = static_cast<uint64_t>(o.seed) + 1;
        cfg.noise_seed = static_cast<uint64_t>(o.seed) + 2;
    }
    if (!o.scheme.empty()) {
        InterpScheme s = bicubic_scheme();
        if (o.scheme == "trilinear") s = trilinear_scheme();
        if (o.scheme == "bilinear") s = {Kernel::linear, Decomposition::plane2d};
        if (o.scheme == "tricubic") s = {Kernel::cubic, Decomposition::direct3d};
        cfg.recon_scheme = s;
        cfg.driver.scheme = s;
    }
    if (o.deterministic) cfg.deterministic = true;
    set_thread_count(cfg.threads);
    return cfg;
}

struct Generated {
    Volume phantom;
    AlignStack truth;
    ProjectionStack data;
};

Generated generate(const ExperimentConfig& cfg) {
    Generated g;
    g.phantom = make_phantom(cfg.phantom);
    g.truth = make_misalignment(cfg.angles(), cfg.misalign);
    g.data = simulate_data(g.phantom, g.truth, cfg.sim_scheme, cfg.noise_sigma, cfg.roi(),
                           cfg.noise_seed);
    return g;
}

int cmd_phantom(const CommonOpts& o) {
    const ExperimentConfig cfg = load_with_overrides(o);
    fs::create_directories(o.out_dir);
    const Volume v = make_phantom(cfg.phantom);
    write_volume((fs::path(o.out_dir) / "phantom").string(), v);
    write_manifest((fs::path(o.out_dir) / "manifest.json").string(), experiment_config_json(cfg));
    log_info("phantom written to " + o.out_dir);
    return 0;
}

int cmd_simulate(const CommonOpts& o) {
    const ExperimentConfig cfg = load_with_overrides(o);
    fs::create_directories(o.out_dir);
    const Generated g = generate(cfg);
    const fs::path dir(o.out_dir);
    write_volume((dir / "phantom").string(), g.phantom);
    write_projections((dir / "projections").string(), g.data);
    write_align_csv((dir / "align_true.csv").string(), g.truth);
    write_manifest((dir / "manifest.json").string(), experiment_config_json(cfg));
    log_info("simulated data written to " + o.out_dir);
    return 0;
}

int cmd_run(const CommonOpts& o) {
    ExperimentConfig cfg = load_with_overrides(o);
    fs::create_directories(o.out_dir);
    const fs::path dir(o.out_dir);
    const Generated g = generate(cfg);

    if (cfg.alpha_delta) {
        const ProjectionGeometry geom{g.phantom.shape, cfg.angles(), cfg.recon_scheme, cfg.roi()};
        cfg.recon.alpha = choose_alpha(*cfg.alpha_delta, geom);
        log_info("alpha heuristic: delta=" + std::to_string(*cfg.alpha_delta) +
                 " -> alpha=" + std::to_string(cfg.recon.alpha));
    }
    cfg.driver.recon = cfg.recon;

    AlignStack a0(cfg.angles());
    if (cfg.init == ExperimentConfig::Init::com) {
        // COM shifts are corrections that recenter the images; the projector
        // initialization is their negation.
        AlignStack com = com_prealign(g.data);
        for (int i = 0; i < com.n_proj(); ++i) {
            a0.params[i].sx = -com.params[i].sx;
            a0.params[i].sy = -com.params[i].sy;
        }
    }

    const std::optional<Truth> truth = Truth{g.truth, g.phantom};
    const RunReport report =
        run_joint(g.data, a0, cfg.driver, g.phantom.shape, truth,
                  [](const MetricsRow& row, const AlignStack&, const Volume&) {
                      log_info("iter " + std::to_string(row.iter) +
                               ": optimality=" + std::to_string(row.optimality) +
                               " increment=" + std::to_string(row.increment));
                  });

    const std::string cfg_json = experiment_config_json(cfg);
    write_manifest((dir / "manifest.json").string(), cfg_json);
    write_report_json((dir / "report.json").string(), report, cfg_json);
    write_metrics_csv((dir / "metrics.csv").string(), report.rows);
    write_align_csv((dir / "align_final.csv").string(), report.final_align, &g.truth);
    if (cfg.save_volume) write_volume((dir / "volume_final").string(), report.final_volume);
    if (cfg.save_projections) write_projections((dir / "projections").string(), g.data);
    if (cfg.save_truth) {
        write_align_csv((dir / "align_true.csv").string(), g.truth);
        write_volume((dir / "phantom").string(), g.phantom);
    }
    if (report.aborted) {
        log_error("run aborted: " + report.abort_reason);
        return kExitNumeric;
    }
    log_info("run complete: " + std::to_string(report.rows.size()) + " iterations, outputs in " +
             o.out_dir);
    return 0;
}

int cmd_metrics(const std::string& report_path) {
    const LoadedReport rep = read_report_json(report_path);
    std::printf("%4s %10s %12s %12s %10s %6s %6s %10s %10s %10s\n", "iter", "epsilon", "optimality",
                "residual", "increment", "cg", "halv", "shift_rms", "xy_rms", "yz_rms");
    for (const auto& r : rep.rows)
        std::printf("%4d %10.2e %12.4e %12.4e %10.4f %6d %6d %10.4f %10.6f %10.6f\n", r.iter,
                    r.epsilon, r.optimality, r.residual, r.increment, r.recon_iterations,
                    r.halvings, r.shift_rms, r.xy_rms, r.yz_rms);
    if (rep.aborted) std::printf("status: ABORTED (%s)\n", rep.abort_reason.c_str());
    else if (rep.stopped_by_increment) std::printf("status: stopped by increment rule\n");
    else std::printf("status: reached max iterations\n");
    return 0;
}

int cmd_export_plots(const std::string& report_path, const std::string& out_dir) {
    const LoadedReport rep = read_report_json(report_path);
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    // one CSV per figure family: metric-vs-iteration, parameters-vs-projection
    write_metrics_csv((dir / "metrics_vs_iteration.csv").string(), rep.rows);
    write_align_csv((dir / "alignment_parameters.csv").string(), rep.final_align);
    log_info("plot data written to " + out_dir);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tomoalign: joint tomographic alignment and reconstruction (parallel beam)"};
    app.require_subcommand(1);

    CommonOpts phantom_opts, sim_opts, run_opts;
    auto* c_phantom = app.add_subcommand("phantom", "generate the phantom volume");
    add_common(c_phantom, phantom_opts, true);
    auto* c_sim = app.add_subcommand("simulate", "generate phantom, misalignment and projection data");
    add_common(c_sim, sim_opts, true);
    auto* c_run = app.add_subcommand("run", "run the joint alignment-reconstruction experiment");
    add_common(c_run, run_opts, true);

    std::string report_path, plots_out = "plots";
    auto* c_metrics = app.add_subcommand("metrics", "print the per-iteration metrics of a report");
    c_metrics->add_option("--report", report_path, "report.json from a run")->required();
    auto* c_export = app.add_subcommand("export-plots", "export plot-ready CSV files from a report");
    c_export->add_option("--report", report_path, "report.json from a run")->required();
    c_export->add_option("--out", plots_out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (c_phantom->parsed()) return cmd_phantom(phantom_opts);
        if (c_sim->parsed()) return cmd_simulate(sim_opts);
        if (c_run->parsed()) return cmd_run(run_opts);
        if (c_metrics->parsed()) return cmd_metrics(report_path);
        if (c_export->parsed()) return cmd_export_plots(report_path, plots_out);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kExitConfig;
    } catch (const ReconDivergence& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return kExitNumeric;
    } catch (const IoError& e) {
        std::fprintf(stderr, "i/o failure: %s\n", e.what());
        return kExitIo;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumeric;
    }
    return 0;
}
