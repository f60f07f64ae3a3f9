#include "tomo/phantom.hpp"

#include <algorithm>
#include <cmath>

#include "tomo/geometry.hpp"
#include "tomo/rng.hpp"

namespace tomo {

Volume support_mask(int n, PhantomSpec::Support support, int margin) {
    Volume m(n, n, n);
    const double c = 0.5 * (n - 1);
    const double r = 0.5 * n - margin;
    for (int z = 0; z < n; ++z)
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) {
                bool inside;
                if (support == PhantomSpec::Support::cube) {
                    inside = std::abs(x - c) <= r && std::abs(y - c) <= r && std::abs(z - c) <= r;
                } else {
                    // cylinder about the tomographic (y) axis
                    const double rad = std::hypot(x - c, z - c);
                    inside = rad <= r && std::abs(y - c) <= r;
                }
                m.at(x, y, z) = inside ? 1.0 : 0.0;
            }
    return m;
}

Volume make_phantom(const PhantomSpec& spec) {
    const int n = spec.n;
    Volume v(n, n, n);
    Rng rng(spec.seed);
    const double c = 0.5 * (n - 1);
    const double region = 0.5 * n - spec.margin;

    for (int k = 0; k < spec.n_ellipsoids; ++k) {
        const double ax = rng.uniform(0.06, 0.16) * n;
        const double ay = rng.uniform(0.06, 0.16) * n;
        const double az = rng.uniform(0.06, 0.16) * n;
        const double rmax = std::max({ax, ay, az});
        const double room = region - rmax;

        // Center drawn so the ellipsoid's bounding ball stays inside the
        // support (rejection sampling for the cylinder cross-section).
        Vec3 ctr;
        if (spec.support == PhantomSpec::Support::cube || room <= 0) {
            const double slack = std::max(room, 0.0);
            ctr = {c + rng.uniform(-slack, slack), c + rng.uniform(-slack, slack),
                   c + rng.uniform(-slack, slack)};
        } else {
            double px, pz;
            do {
                px = rng.uniform(-room, room);
                pz = rng.uniform(-room, room);
            } while (px * px + pz * pz > room * room);
            ctr = {c + px, c + rng.uniform(-room, room), c + pz};
        }

        const Mat3 rot = mul(plane_rotation(0, 1, rng.uniform(0, 2 * M_PI)),
                             mul(plane_rotation(1, 2, rng.uniform(0, 2 * M_PI)),
                                 plane_rotation(2, 0, rng.uniform(0, 2 * M_PI))));
        const double density = rng.uniform(spec.density_min, spec.density_max);

        const int x0 = std::max(0, static_cast<int>(std::floor(ctr[0] - rmax)));
        const int x1 = std::min(n - 1, static_cast<int>(std::ceil(ctr[0] + rmax)));
        const int y0 = std::max(0, static_cast<int>(std::floor(ctr[1] - rmax)));
        const int y1 = std::min(n - 1, static_cast<int>(std::ceil(ctr[1] + rmax)));
        const int z0 = std::max(0, static_cast<int>(std::floor(ctr[2] - rmax)));
        const int z1 = std::min(n - 1, static_cast<int>(std::ceil(ctr[2] + rmax)));
        for (int z = z0; z <= z1; ++z)
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x) {
                    const Vec3 d{x - ctr[0], y - ctr[1], z - ctr[2]};
                    const Vec3 q = mul(transpose(rot), d);
                    const double e = (q[0] / ax) * (q[0] / ax) + (q[1] / ay) * (q[1] / ay) +
                                     (q[2] / az) * (q[2] / az);
                    if (e <= 1.0) v.at(x, y, z) += density;
                }
    }
    return v;
}

AlignStack make_misalignment(const std::vector<double>& nominal_angles, const MisalignSpec& spec) {
    const int n = static_cast<int>(nominal_angles.size());
    if (n < 2) throw std::invalid_argument("make_misalignment: need at least 2 projections");
    AlignStack out(nominal_angles);
    Rng rng(spec.seed);

    // One smooth sinusoid plus jitter per parameter family; draws are
    // independent of the magnitude scales so scaling stays linear.
    const double scales[6] = {spec.shift_scale,   spec.shift_scale, 0.0,
                              spec.inplane_scale, spec.pitch_scale, spec.tomo_scale};
    std::vector<Vec6> values(n, Vec6{});
    for (int j = 0; j < 6; ++j) {
        const double harmonic = 2.0 + std::floor(rng.uniform() * 2.0);  // 2 or 3
        const double phase = rng.uniform(0, 2 * M_PI);
        for (int i = 0; i < n; ++i) {
            const double t = static_cast<double>(i) / n;
            const double sys = std::sin(2 * M_PI * harmonic * t + phase);
            const double jit = rng.uniform(-1, 1);
            values[i][j] = scales[j] * (spec.systematic * sys + spec.random * jit);
        }
    }
    for (int i = 0; i < n; ++i) out.params[i] = AlignParams::from_array(values[i]);
    return remove_trivial_modes(out);
}

ProjectionStack simulate_data(const Volume& u, const AlignStack& a_true,
                              const InterpScheme& scheme, double noise_sigma,
                              std::optional<Roi> roi, uint64_t noise_seed) {
    ProjectionStack p = project(u, a_true, scheme, roi);
    if (noise_sigma > 0) {
        Rng rng(noise_seed);
        for (auto& v : p.data) v += noise_sigma * rng.gaussian();
    }
    return p;
}

}  // namespace tomo
