#pragma once

#include <cstdint>
#include <optional>

#include "tomo/projector.hpp"

namespace tomo {

/// Seeded random-ellipsoid phantom inside a cube or cylinder support.
struct PhantomSpec {
    int n = 48;
    int n_ellipsoids = 8;
    double density_min = 0.2;
    double density_max = 1.0;
    enum class Support { cube, cylinder };
    Support support = Support::cylinder;
    int margin = 3;  // voxels kept clear of the support boundary
    uint64_t seed = 1;
};

/// Per-family misalignment magnitudes plus the split between a smooth
/// sinusoidal drift over the projection index and i.i.d. jitter.
struct MisalignSpec {
    double shift_scale = 1.5;                  // voxels (s_x, s_y)
    double inplane_scale = M_PI / 180.0;       // radians (theta_xy)
    double pitch_scale = M_PI / 180.0;         // radians (theta_yz)
    double tomo_scale = 0.5 * M_PI / 180.0;    // radians (theta_zx)
    double systematic = 0.7;
    double random = 0.3;
    uint64_t seed = 2;
};

/// Binary support mask of the phantom's declared region.
Volume support_mask(int n, PhantomSpec::Support support, int margin);

Volume make_phantom(const PhantomSpec& spec);

/// Seeded perturbations with the redundant modes already removed, so the
/// ground truth is identifiable. Linear in the magnitude scales.
AlignStack make_misalignment(const std::vector<double>& nominal_angles, const MisalignSpec& spec);

/// p = project(u, a_true) plus i.i.d. Gaussian detector noise.
ProjectionStack simulate_data(const Volume& u, const AlignStack& a_true,
                              const InterpScheme& scheme, double noise_sigma,
                              std::optional<Roi> roi, uint64_t noise_seed);

}  // namespace tomo
