#include "tomo/recon.hpp"

#include <algorithm>
#include <cmath>

#include "tomo/log.hpp"

namespace tomo {

GradField discrete_gradient(const Volume& u) {
    GradField g{Volume(u.shape), Volume(u.shape), Volume(u.shape)};
    const int nx = u.nx(), ny = u.ny(), nz = u.nz();
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) {
                const double c = u.at(x, y, z);
                if (x < nx - 1) g.x.at(x, y, z) = u.at(x + 1, y, z) - c;
                if (y < ny - 1) g.y.at(x, y, z) = u.at(x, y + 1, z) - c;
                if (z < nz - 1) g.z.at(x, y, z) = u.at(x, y, z + 1) - c;
            }
    return g;
}

Volume discrete_gradient_adjoint(const GradField& g) {
    const int nx = g.x.nx(), ny = g.x.ny(), nz = g.x.nz();
    Volume out(g.x.shape);
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) {
                double v = 0;
                if (x > 0) v += g.x.at(x - 1, y, z);
                if (x < nx - 1) v -= g.x.at(x, y, z);
                if (y > 0) v += g.y.at(x, y - 1, z);
                if (y < ny - 1) v -= g.y.at(x, y, z);
                if (z > 0) v += g.z.at(x, y, z - 1);
                if (z < nz - 1) v -= g.z.at(x, y, z);
                out.at(x, y, z) = v;
            }
    return out;
}

void laplacian_add(const Volume& u, double alpha, Volume& out) {
    const int nx = u.nx(), ny = u.ny(), nz = u.nz();
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) {
                const double c = u.at(x, y, z);
                double v = 0;
                if (x > 0) v += c - u.at(x - 1, y, z);
                if (x < nx - 1) v += c - u.at(x + 1, y, z);
                if (y > 0) v += c - u.at(x, y - 1, z);
                if (y < ny - 1) v += c - u.at(x, y + 1, z);
                if (z > 0) v += c - u.at(x, y, z - 1);
                if (z < nz - 1) v += c - u.at(x, y, z + 1);
                out.at(x, y, z) += alpha * v;
            }
}

double gradient_penalty_sq(const Volume& u) {
    const GradField g = discrete_gradient(u);
    return dot(g.x.data, g.x.data) + dot(g.y.data, g.y.data) + dot(g.z.data, g.z.data);
}

std::vector<int> multilevel_order(int n) {
    if (n < 1) throw std::invalid_argument("multilevel_order: n must be >= 1");
    if (n == 1) return {0};
    std::vector<int> evens, odds;
    for (int i = 0; i < n; i += 2) evens.push_back(i);
    for (int i = 1; i < n; i += 2) odds.push_back(i);
    std::vector<int> out;
    out.reserve(n);
    for (int k : multilevel_order(static_cast<int>(evens.size()))) out.push_back(evens[k]);
    for (int k : multilevel_order(static_cast<int>(odds.size()))) out.push_back(odds[k]);
    return out;
}

std::vector<int> kaczmarz_block_sequence(int n_proj) {
    std::vector<int> seq = multilevel_order(n_proj);
    const std::vector<int> fwd = seq;
    seq.insert(seq.end(), fwd.rbegin(), fwd.rend());
    return seq;
}

double choose_alpha(double delta_a, const ProjectionGeometry& geom) {
    if (!(delta_a > 0)) throw std::invalid_argument("choose_alpha: delta_a must be positive");
    const double delta = std::max(delta_a, 2.0);
    const double xi = M_PI / delta;
    AlignStack nominal(geom.angles);
    const Projector w(geom.grid_shape, nominal, geom.scheme, geom.roi);
    double sum = 0;
    for (int axis = 0; axis < 3; ++axis) {
        Volume mode(geom.grid_shape);
        const int nx = geom.grid_shape[0], ny = geom.grid_shape[1], nz = geom.grid_shape[2];
        for (int z = 0; z < nz; ++z)
            for (int y = 0; y < ny; ++y)
                for (int x = 0; x < nx; ++x) {
                    const int c = axis == 0 ? x : axis == 1 ? y : z;
                    mode.at(x, y, z) = std::cos(xi * c);
                }
        const ProjectionStack wm = w.forward(mode);
        const double num = dot(wm.data, wm.data);
        const double den = gradient_penalty_sq(mode);
        sum += num / den;
    }
    return sum / 3.0;
}

namespace {

// Normal-equation operator of the Tikhonov functional: W^T W x + alpha L x.
void apply_normal_op(const Projector& w, double alpha, const Volume& x, ProjectionStack& ws,
                     Volume& out) {
    w.forward_into(x, ws);
    out = w.adjoint(ws);
    laplacian_add(x, alpha, out);
}

struct CgOutcome {
    int iterations = 0;
    double rel = 0;
    bool converged = false;
};

// Plain CG on B u = b with a fixed absolute threshold; u holds the start and
// the result.
CgOutcome run_cg(const Projector& w, double alpha, const std::vector<double>& b, Volume& u,
                 double stop_abs, int max_iter, double ref,
                 const std::function<void(int, const Volume&)>& monitor) {
    const auto ext = w.image_extents();
    ProjectionStack ws(w.n_proj(), ext[0], ext[1]);
    Volume q(u.shape);

    apply_normal_op(w, alpha, u, ws, q);
    std::vector<double> r(b.size());
    for (size_t i = 0; i < r.size(); ++i) r[i] = b[i] - q.data[i];
    double rho = dot(r, r);
    CgOutcome res;
    res.rel = std::sqrt(rho) / ref;
    if (std::sqrt(rho) <= stop_abs) {
        res.converged = true;
        return res;
    }
    Volume d(u.shape);
    d.data = r;
    for (int k = 1; k <= max_iter; ++k) {
        apply_normal_op(w, alpha, d, ws, q);
        const double dq = dot(d.data, q.data);
        if (!(dq > 0) || !std::isfinite(dq))
            throw ReconDivergence("cg: operator curvature is not positive (diverged or invalid data)");
        const double gamma = rho / dq;
        axpy(gamma, d.data, u.data);
        axpy(-gamma, q.data, r);
        const double rho_new = dot(r, r);
        if (!std::isfinite(rho_new)) throw ReconDivergence("cg: residual became non-finite");
        if (monitor) monitor(k, u);
        res.iterations = k;
        res.rel = std::sqrt(rho_new) / ref;
        if (std::sqrt(rho_new) <= stop_abs) {
            res.converged = true;
            return res;
        }
        const double beta = rho_new / rho;
        rho = rho_new;
        for (size_t i = 0; i < d.data.size(); ++i) d.data[i] = r[i] + beta * d.data[i];
    }
    return res;
}

}  // namespace

ReconResult solve_tikhonov_cg(const ProjectionStack& p, const AlignStack& a,
                              const ReconConfig& cfg, const Volume& u0,
                              const std::array<int, 3>& grid, const InterpScheme& scheme,
                              const std::function<void(int, const Volume&)>& monitor) {
    if (cfg.method != ReconConfig::Method::cg)
        throw std::invalid_argument("solve_tikhonov_cg: config method is not cg");
    if (!(cfg.alpha > 0)) throw std::invalid_argument("solve_tikhonov_cg: alpha must be positive");
    check_finite(p.data, "solve_tikhonov_cg: projection data");

    const Projector w(grid, a, scheme, p.roi);
    const Volume b = w.adjoint(p);

    ReconResult out;
    out.u = (u0.shape == grid) ? u0 : Volume(grid);
    // Reference gradient norm at the zero volume: ||W^T p||. Fixed so the
    // tolerance keeps its meaning under warm starting.
    const double ref = norm2(b.data);
    if (ref == 0.0) {
        out.u = Volume(grid);
        out.converged = true;
        return out;
    }
    const CgOutcome r = run_cg(w, cfg.alpha, b.data, out.u, cfg.epsilon * ref, cfg.max_iter, ref, monitor);
    out.achieved_rel = r.rel;
    out.iterations = r.iterations;
    out.converged = r.converged;
    return out;
}

Volume kaczmarz_cycle(const ProjectionStack& p, const AlignStack& a, const ReconConfig& cfg,
                      const Volume& u0, const std::array<int, 3>& grid,
                      const InterpScheme& scheme, const KaczmarzObserver& observer) {
    if (cfg.method != ReconConfig::Method::kaczmarz)
        throw std::invalid_argument("kaczmarz_cycle: config method is not kaczmarz");
    if (!(cfg.alpha > 0)) throw std::invalid_argument("kaczmarz_cycle: alpha must be positive");
    check_finite(p.data, "kaczmarz_cycle: projection data");

    const Projector w(grid, a, scheme, p.roi);
    Volume u = (u0.shape == grid) ? u0 : Volume(grid);

    const double half_alpha = 0.5 * cfg.alpha;
    Volume delta(grid), q(grid), d(grid);
    for (int idx : kaczmarz_block_sequence(p.n_proj)) {
        const ProjectionTransform& blk = w.block(idx);
        Image pi(p.px, p.py);
        std::copy(p.image(idx), p.image(idx) + p.image_size(), pi.data.begin());
        // residual rhs = W_i^T (p_i - W_i u)
        Image wu = blk.forward(u);
        for (size_t k = 0; k < wu.data.size(); ++k) wu.data[k] = pi.data[k] - wu.data[k];
        const Volume rhs = blk.adjoint(wu);

        // inner_iter CG steps on (W_i^T W_i + alpha/2 L) delta = rhs
        delta.fill(0.0);
        std::vector<double> r = rhs.data;
        double rho = dot(r, r);
        if (rho > 0) {
            d.data = r;
            for (int it = 0; it < cfg.inner_iter; ++it) {
                const Image wd = blk.forward(d);
                q = blk.adjoint(wd);
                laplacian_add(d, half_alpha, q);
                const double dq = dot(d.data, q.data);
                if (!(dq > 0) || !std::isfinite(dq))
                    throw ReconDivergence("kaczmarz: block subproblem lost positivity");
                const double gamma = rho / dq;
                axpy(gamma, d.data, delta.data);
                axpy(-gamma, q.data, r);
                const double rho_new = dot(r, r);
                if (!std::isfinite(rho_new)) throw ReconDivergence("kaczmarz: non-finite residual");
                if (rho_new <= 1e-28 * dot(rhs.data, rhs.data)) break;
                const double beta = rho_new / rho;
                rho = rho_new;
                for (size_t i = 0; i < d.data.size(); ++i) d.data[i] = r[i] + beta * d.data[i];
            }
        }
        for (int64_t i = 0; i < u.size(); ++i) u.data[i] += delta.data[i];
        if (observer && cfg.nonneg) {
            Volume before = u;
            for (auto& v : u.data) v = std::max(0.0, v);
            observer(idx, before, u);
        } else {
            if (cfg.nonneg)
                for (auto& v : u.data) v = std::max(0.0, v);
            if (observer) observer(idx, u, u);
        }
    }
    return u;
}

double tikhonov_gradient_norm(const ProjectionStack& p, const AlignStack& a, double alpha,
                              const Volume& u, const InterpScheme& scheme) {
    const Projector w(u.shape, a, scheme, p.roi);
    ProjectionStack r = w.forward(u);
    for (size_t i = 0; i < r.data.size(); ++i) r.data[i] -= p.data[i];
    Volume g = w.adjoint(r);
    laplacian_add(u, alpha, g);
    return norm2(g.data);
}

}  // namespace tomo
