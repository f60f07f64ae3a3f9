#include "tomo/align.hpp"

#include <cmath>
#include <stdexcept>

namespace tomo {

AlignWeights compute_align_weights(const Volume& support_mask) {
    const int nx = support_mask.nx(), ny = support_mask.ny(), nz = support_mask.nz();
    const Vec3 c = grid_center(support_mask.shape);
    double sxy = 0, syz = 0, szx = 0;
    int64_t count = 0;
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) {
                if (support_mask.at(x, y, z) <= 0.5) continue;
                ++count;
                const double dx = x - c[0], dy = y - c[1], dz = z - c[2];
                sxy += std::sqrt(dx * dx + dy * dy);
                syz += std::sqrt(dy * dy + dz * dz);
                szx += std::sqrt(dz * dz + dx * dx);
            }
    if (count == 0) throw std::invalid_argument("compute_align_weights: empty support mask");
    AlignWeights out;
    constexpr double kFloor = 1e-6;
    out.w[kThetaXY] = std::max(kFloor, sxy / count);
    out.w[kThetaYZ] = std::max(kFloor, syz / count);
    out.w[kThetaZX] = std::max(kFloor, szx / count);
    return out;
}

double weighted_max_abs(const AlignParams& d, const AlignWeights& w) {
    const Vec6 v = d.to_array();
    double m = 0;
    for (int j = 0; j < 6; ++j) m = std::max(m, w.w[j] * std::abs(v[j]));
    return m;
}

double weighted_rms(const std::vector<AlignParams>& d, const AlignWeights& w) {
    if (d.empty()) return 0;
    double s = 0;
    for (const auto& p : d) {
        const Vec6 v = p.to_array();
        for (int j = 0; j < 6; ++j) s += w.w[j] * v[j] * (w.w[j] * v[j]);
    }
    return std::sqrt(s / (6.0 * d.size()));
}

namespace {

Image stack_image(const ProjectionStack& p, int i) {
    Image img(p.px, p.py);
    std::copy(p.image(i), p.image(i) + p.image_size(), img.data.begin());
    return img;
}

double residual_sq(const ProjectionTransform& t, const Volume& u, const Image& pi, Image& r) {
    r = t.forward(u);
    double s = 0;
    for (size_t k = 0; k < r.data.size(); ++k) {
        r.data[k] -= pi.data[k];
        s += r.data[k] * r.data[k];
    }
    return s;
}

}  // namespace

Vec6 align_gradient(const Volume& u, const AlignStack& a, const ProjectionStack& p, int i,
                    const InterpScheme& scheme) {
    const ProjectionTransform t(u.shape, total_params(a, i), scheme, p.roi);
    const Image pi = stack_image(p, i);
    Image r;
    residual_sq(t, u, pi, r);
    return t.jacobian_vjp(u, r);
}

LineSearchResult line_search_update(const Volume& u, const AlignStack& a,
                                    const ProjectionStack& p, int i,
                                    const AlignWeights& /*weights*/, const InterpScheme& scheme,
                                    const std::optional<Vec6>& g_reg,
                                    const std::optional<std::array<bool, 6>>& freeze) {
    LineSearchResult out;
    out.params = a.params[i];

    const ProjectionTransform t(u.shape, total_params(a, i), scheme, p.roi);
    const Image pi = stack_image(p, i);
    Image r;
    out.residual_sq_before = residual_sq(t, u, pi, r);
    out.residual_sq_after = out.residual_sq_before;
    out.gradient = t.jacobian_vjp(u, r);

    Vec6 s = out.gradient;
    if (g_reg)
        for (int j = 0; j < 6; ++j) s[j] += (*g_reg)[j];
    if (freeze)
        for (int j = 0; j < 6; ++j)
            if ((*freeze)[j]) s[j] = 0.0;

    double s_norm_sq = 0;
    for (int j = 0; j < 6; ++j) s_norm_sq += s[j] * s[j];
    if (s_norm_sq == 0.0 || out.residual_sq_before == 0.0) return out;

    // Search direction: the gradient in the curvature-equalized metric,
    // d_j = s_j / ||G_i e_j||^2. Raw parameters mix voxels with radians and
    // carry strongly unequal sensitivities; equalizing per-parameter
    // curvature keeps the step commensurate across the six components.
    Vec6 h{};
    double h_max = 0;
    for (int j = 0; j < 6; ++j) {
        if (s[j] == 0.0) continue;
        Vec6 e{};
        e[j] = 1.0;
        const Image ge = t.jacobian_tvp(u, e);
        h[j] = dot(ge.data, ge.data);
        h_max = std::max(h_max, h[j]);
    }
    Vec6 dir{};
    double num = 0;
    for (int j = 0; j < 6; ++j) {
        // floor keeps near-null parameters (s_z) from exploding the direction
        const double hjj = std::max(h[j], 1e-6 * h_max);
        if (s[j] == 0.0 || !(hjj > 0)) continue;
        dir[j] = s[j] / hjj;
        num += s[j] * dir[j];
    }

    const Image gs = t.jacobian_tvp(u, dir);
    const double denom = dot(gs.data, gs.data);
    if (!(num > 0) || !(denom > 0) || !std::isfinite(denom)) {
        out.stalled = true;
        return out;
    }

    // Exact line search for the quadratic model along dir.
    double gamma = num / denom;
    const Vec6 v0 = a.params[i].to_array();
    AlignStack trial = a;
    Image rt;
    for (int h = 0; h <= 30; ++h) {
        Vec6 nv;
        for (int j = 0; j < 6; ++j) nv[j] = v0[j] - gamma * dir[j];
        const AlignParams cand = AlignParams::from_array(nv);
        trial.params[i] = cand;
        const ProjectionTransform tt(u.shape, total_params(trial, i), scheme, p.roi);
        const double rsq = residual_sq(tt, u, pi, rt);
        if (rsq <= out.residual_sq_before) {
            out.params = cand;
            out.gamma = gamma;
            out.n_halvings = h;
            out.residual_sq_after = rsq;
            return out;
        }
        gamma *= 0.5;
    }
    out.stalled = true;
    out.n_halvings = 30;
    return out;
}

AlignStack prox_box(const AlignStack& a, const Vec6& lo, const Vec6& hi, double /*gamma*/) {
    for (int j = 0; j < 6; ++j)
        if (lo[j] > hi[j]) throw std::invalid_argument("prox_box: lo exceeds hi");
    AlignStack out = a;
    for (auto& p : out.params) {
        Vec6 v = p.to_array();
        for (int j = 0; j < 6; ++j) v[j] = std::min(hi[j], std::max(lo[j], v[j]));
        p = AlignParams::from_array(v);
    }
    return out;
}

AlignStack com_prealign(const ProjectionStack& p) {
    AlignStack out(p.nominal_angles);
    const double cx = 0.5 * (p.px - 1), cy = 0.5 * (p.py - 1);
    for (int i = 0; i < p.n_proj; ++i) {
        const double* img = p.image(i);
        double mass = 0, mx = 0, my = 0;
        for (int y = 0; y < p.py; ++y)
            for (int x = 0; x < p.px; ++x) {
                const double v = img[y * p.px + x];
                mass += v;
                mx += v * x;
                my += v * y;
            }
        if (!(mass > 0)) throw std::invalid_argument("com_prealign: image has non-positive mass");
        out.params[i].sx = cx - mx / mass;
        out.params[i].sy = cy - my / mass;
    }
    return out;
}

}  // namespace tomo
