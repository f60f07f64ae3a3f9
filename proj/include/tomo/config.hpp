#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include "tomo/driver.hpp"

namespace tomo {

/// Configuration file violation; message names the offending path.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// One experiment, fully specified: phantom, misalignment, data simulation,
/// reconstruction and driver settings. Angles in config files are degrees;
/// everything here is already converted to radians.
struct ExperimentConfig {
    int grid_n = 48;
    int angle_count = 48;
    double angle_start = 0;  // radians
    double angle_end = M_PI;

    PhantomSpec phantom;
    MisalignSpec misalign;

    InterpScheme sim_scheme = trilinear_scheme();
    double noise_sigma = 0;
    uint64_t noise_seed = 3;

    bool roi_enabled = false;
    int roi_px = 0, roi_py = 0;
    std::optional<int> roi_x0, roi_y0;  // default: centered

    ReconConfig recon;
    std::optional<double> alpha_delta;  // when set, alpha = choose_alpha(delta)

    DriverConfig driver;
    InterpScheme recon_scheme = bicubic_scheme();

    enum class Init { zero, com };
    Init init = Init::zero;

    int threads = 0;
    bool deterministic = true;
    bool save_volume = true;
    bool save_projections = false;
    bool save_truth = true;

    std::vector<double> angles() const;
    std::optional<Roi> roi() const;
};

/// Parses and validates a config file. Unknown keys, wrong types and
/// violated invariants throw ConfigError naming the path.
ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig parse_experiment_config(const std::string& json_text);

/// Canonical JSON echo of the effective configuration (manifest payload).
std::string experiment_config_json(const ExperimentConfig& cfg);

}  // namespace tomo
