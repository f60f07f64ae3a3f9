#include "tomo/interp.hpp"

#include <cmath>
#include <stdexcept>

#include "tomo/log.hpp"
#include "tomo/parallel.hpp"

namespace tomo {

double eval_kernel(Kernel kind, double x, bool derivative) {
    const double ax = std::abs(x);
    if (kind == Kernel::linear) {
        if (!derivative) return ax <= 1.0 ? 1.0 - ax : 0.0;
        // Right-sided value at the knots |x| in {0, 1}.
        if (x >= 0.0) return x < 1.0 ? -1.0 : 0.0;
        return x >= -1.0 ? 1.0 : 0.0;
    }
    if (!derivative) {
        if (ax <= 1.0) return (1.5 * ax - 2.5) * ax * ax + 1.0;
        if (ax <= 2.0) return ((-0.5 * ax + 2.5) * ax - 4.0) * ax + 2.0;
        return 0.0;
    }
    const double s = x < 0.0 ? -1.0 : 1.0;
    if (ax <= 1.0) return s * (4.5 * ax - 5.0) * ax;
    if (ax <= 2.0) return s * ((-1.5 * ax + 5.0) * ax - 4.0);
    return 0.0;
}

namespace {

constexpr double kWeightDropTol = 1e-15;

struct Taps1D {
    int count = 0;
    int idx[4];
    double w[4];
};

Taps1D taps_1d(Kernel kind, double v, int extent, bool derivative) {
    Taps1D t;
    const double fl = std::floor(v);
    const int i0 = static_cast<int>(fl);
    const double f = v - fl;
    const int lo = kind == Kernel::linear ? 0 : -1;
    const int hi = kind == Kernel::linear ? 1 : 2;
    for (int o = lo; o <= hi; ++o) {
        const int i = i0 + o;
        if (i < 0 || i >= extent) continue;
        const double w = eval_kernel(kind, f - o, derivative);
        if (std::abs(w) < kWeightDropTol) continue;
        t.idx[t.count] = i;
        t.w[t.count] = w;
        ++t.count;
    }
    return t;
}

}  // namespace

SparseWeights SparseWeights::transposed() const {
    SparseWeights t(n_in, n_out);
    t.col.resize(col.size());
    t.val.resize(val.size());
    for (int c : col) ++t.row_ptr[c + 1];
    for (int r = 0; r < n_in; ++r) t.row_ptr[r + 1] += t.row_ptr[r];
    std::vector<int> cursor(t.row_ptr.begin(), t.row_ptr.end() - 1);
    for (int r = 0; r < n_out; ++r) {
        for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
            const int pos = cursor[col[k]]++;
            t.col[pos] = r;
            t.val[pos] = val[k];
        }
    }
    return t;
}

namespace {

template <class WeightFn>
SparseWeights assemble_plane(const std::vector<Vec2>& points, const std::array<int, 2>& grid,
                             WeightFn&& weight) {
    const int n1 = grid[0], n2 = grid[1];
    SparseWeights w(static_cast<int>(points.size()), n1 * n2);
    w.col.reserve(points.size() * 4);
    w.val.reserve(points.size() * 4);
    for (size_t r = 0; r < points.size(); ++r) {
        weight(r, points[r], n1, n2, w);
        w.row_ptr[r + 1] = static_cast<int>(w.col.size());
    }
    return w;
}

}  // namespace

SparseWeights build_plane_weights(const std::vector<Vec2>& points, const std::array<int, 2>& grid,
                                  Kernel kernel) {
    return assemble_plane(points, grid,
                          [kernel](size_t, const Vec2& p, int n1, int n2, SparseWeights& w) {
                              const Taps1D t1 = taps_1d(kernel, p[0], n1, false);
                              const Taps1D t2 = taps_1d(kernel, p[1], n2, false);
                              for (int b = 0; b < t2.count; ++b) {
                                  for (int a = 0; a < t1.count; ++a) {
                                      const double v = t1.w[a] * t2.w[b];
                                      if (std::abs(v) < kWeightDropTol) continue;
                                      w.col.push_back(t1.idx[a] + n1 * t2.idx[b]);
                                      w.val.push_back(v);
                                  }
                              }
                          });
}

SparseWeights build_plane_deriv_weights(const std::vector<Vec2>& points,
                                        const std::vector<Vec2>& d_points,
                                        const std::array<int, 2>& grid, Kernel kernel) {
    if (points.size() != d_points.size())
        throw std::invalid_argument("build_plane_deriv_weights: size mismatch");
    return assemble_plane(
        points, grid, [kernel, &d_points](size_t r, const Vec2& p, int n1, int n2, SparseWeights& w) {
            const Vec2 d = d_points[r];
            const Taps1D v1 = taps_1d(kernel, p[0], n1, false);
            const Taps1D v2 = taps_1d(kernel, p[1], n2, false);
            const Taps1D g1 = taps_1d(kernel, p[0], n1, true);
            const Taps1D g2 = taps_1d(kernel, p[1], n2, true);
            // Footprints of value and derivative taps can differ (a zero value
            // with a nonzero slope); merge over the union via dense scratch.
            double acc[4][4] = {};
            int idx1[4], idx2[4];
            int c1 = 0, c2 = 0;
            auto slot = [](int* idx, int& c, int i) {
                for (int k = 0; k < c; ++k)
                    if (idx[k] == i) return k;
                idx[c] = i;
                return c++;
            };
            for (int a = 0; a < g1.count; ++a)
                for (int b = 0; b < v2.count; ++b)
                    acc[slot(idx1, c1, g1.idx[a])][slot(idx2, c2, v2.idx[b])] +=
                        d[0] * g1.w[a] * v2.w[b];
            for (int a = 0; a < v1.count; ++a)
                for (int b = 0; b < g2.count; ++b)
                    acc[slot(idx1, c1, v1.idx[a])][slot(idx2, c2, g2.idx[b])] +=
                        d[1] * v1.w[a] * g2.w[b];
            for (int a = 0; a < c1; ++a) {
                for (int b = 0; b < c2; ++b) {
                    if (std::abs(acc[a][b]) < kWeightDropTol) continue;
                    w.col.push_back(idx1[a] + n1 * idx2[b]);
                    w.val.push_back(acc[a][b]);
                }
            }
        });
}

PlaneAxes plane_axes(PlaneFactor f) {
    switch (f) {
        case PlaneFactor::zx: return {2, 0, 1};
        case PlaneFactor::yz: return {1, 2, 0};
        default: return {0, 1, 2};
    }
}

const std::vector<int>& plane_factor_params(PlaneFactor f) {
    static const std::vector<int> zx{kThetaZX};
    static const std::vector<int> yz{kSz, kThetaYZ};
    static const std::vector<int> xy{kSx, kSy, kThetaXY};
    switch (f) {
        case PlaneFactor::zx: return zx;
        case PlaneFactor::yz: return yz;
        default: return xy;
    }
}

PlanePoints plane_factor_points(PlaneFactor f, const AlignParams& a,
                                const std::array<int, 3>& grid_shape, bool with_derivs) {
    const PlaneAxes ax = plane_axes(f);
    const int n1 = grid_shape[ax.q1], n2 = grid_shape[ax.q2];
    const Vec2 c{0.5 * (n1 - 1), 0.5 * (n2 - 1)};

    double theta = 0;
    Vec2 t{0, 0};
    switch (f) {
        case PlaneFactor::zx: theta = a.theta_zx; break;
        case PlaneFactor::yz: theta = a.theta_yz; t = {0, a.sz}; break;
        case PlaneFactor::xy: theta = a.theta_xy; t = {a.sx, a.sy}; break;
    }
    const Mat2 rinv = rot2(-theta);
    const Mat2 rdinv = rot2_deriv(-theta);

    PlanePoints out;
    out.extents = {n1, n2};
    out.points.resize(size_t(n1) * n2);
    const size_t n_params = plane_factor_params(f).size();
    if (with_derivs) out.derivs.assign(n_params, std::vector<Vec2>(out.points.size()));

    for (int i2 = 0; i2 < n2; ++i2) {
        for (int i1 = 0; i1 < n1; ++i1) {
            const size_t r = size_t(i1) + size_t(n1) * i2;
            const Vec2 v{double(i1), double(i2)};
            Vec2 rel{v[0] - c[0], v[1] - c[1]};
            Vec2 src;
            switch (f) {
                case PlaneFactor::zx:
                    // inv(v) = c + R(-t)(v - c)
                    src = {c[0] + rinv[0][0] * rel[0] + rinv[0][1] * rel[1],
                           c[1] + rinv[1][0] * rel[0] + rinv[1][1] * rel[1]};
                    if (with_derivs) {
                        out.derivs[0][r] = {-(rdinv[0][0] * rel[0] + rdinv[0][1] * rel[1]),
                                            -(rdinv[1][0] * rel[0] + rdinv[1][1] * rel[1])};
                    }
                    break;
                case PlaneFactor::yz: {
                    // inv(v) = c + R(-t)(v - c - t)
                    const Vec2 q{rel[0] - t[0], rel[1] - t[1]};
                    src = {c[0] + rinv[0][0] * q[0] + rinv[0][1] * q[1],
                           c[1] + rinv[1][0] * q[0] + rinv[1][1] * q[1]};
                    if (with_derivs) {
                        out.derivs[0][r] = {-rinv[0][1], -rinv[1][1]};  // d/ds_z
                        out.derivs[1][r] = {-(rdinv[0][0] * q[0] + rdinv[0][1] * q[1]),
                                            -(rdinv[1][0] * q[0] + rdinv[1][1] * q[1])};
                    }
                    break;
                }
                case PlaneFactor::xy:
                    // inv(v) = c - t + R(-t)(v - c)
                    src = {c[0] - t[0] + rinv[0][0] * rel[0] + rinv[0][1] * rel[1],
                           c[1] - t[1] + rinv[1][0] * rel[0] + rinv[1][1] * rel[1]};
                    if (with_derivs) {
                        out.derivs[0][r] = {-1.0, 0.0};
                        out.derivs[1][r] = {0.0, -1.0};
                        out.derivs[2][r] = {-(rdinv[0][0] * rel[0] + rdinv[0][1] * rel[1]),
                                            -(rdinv[1][0] * rel[0] + rdinv[1][1] * rel[1])};
                    }
                    break;
            }
            out.points[r] = src;
        }
    }
    return out;
}

void apply_plane_weights(const SparseWeights& w, PlaneFactor f, const Volume& in, Volume& out) {
    if (&in == &out) throw std::invalid_argument("apply_plane_weights: in and out must differ");
    if (out.shape != in.shape) out = Volume(in.shape);
    const PlaneAxes ax = plane_axes(f);
    const auto& shape = in.shape;
    const int n1 = shape[ax.q1], n2 = shape[ax.q2], n_sh = shape[ax.shared];
    if (w.n_out != n1 * n2 || w.n_in != n1 * n2)
        throw std::invalid_argument("apply_plane_weights: weight shape does not match volume");
    const int64_t strides[3] = {1, shape[0], int64_t(shape[0]) * shape[1]};
    const int64_t s1 = strides[ax.q1], s2 = strides[ax.q2], ssh = strides[ax.shared];

    std::vector<int64_t> base(size_t(n1) * n2);
    for (int i2 = 0; i2 < n2; ++i2)
        for (int i1 = 0; i1 < n1; ++i1) base[size_t(i1) + size_t(n1) * i2] = i1 * s1 + i2 * s2;

    const double* src = in.data.data();
    double* dst = out.data.data();
    const int n_rows = w.n_out;
    parallel_for_chunks(n_sh, [&](int64_t sb, int64_t se) {
        for (int64_t s = sb; s < se; ++s) {
            const int64_t off = s * ssh;
            for (int r = 0; r < n_rows; ++r) {
                double acc = 0.0;
                for (int k = w.row_ptr[r]; k < w.row_ptr[r + 1]; ++k)
                    acc += w.val[k] * src[base[w.col[k]] + off];
                dst[base[r] + off] = acc;
            }
        }
    });
}

namespace {

bool factor_active(PlaneFactor f, const AlignParams& a) {
    switch (f) {
        case PlaneFactor::zx: return a.theta_zx != 0.0;
        case PlaneFactor::yz: return a.sz != 0.0 || a.theta_yz != 0.0;
        default: return a.sx != 0.0 || a.sy != 0.0 || a.theta_xy != 0.0;
    }
}

}  // namespace

ResamplePlan make_resample_plan(const AlignParams& a, const std::array<int, 3>& grid_shape,
                                Kernel kernel, bool with_transpose) {
    ResamplePlan plan;
    plan.grid_shape = grid_shape;
    plan.kernel = kernel;
    for (int fi = 0; fi < 3; ++fi) {
        const auto f = static_cast<PlaneFactor>(fi);
        if (!factor_active(f, a)) continue;
        auto& slot = plan.factors[fi];
        slot.active = true;
        const PlanePoints pts = plane_factor_points(f, a, grid_shape, false);
        slot.w = build_plane_weights(pts.points, pts.extents, kernel);
        if (with_transpose) slot.wt = slot.w.transposed();
    }
    return plan;
}

namespace {

// Runs the active factors of a plan through ping-pong buffers. `order` lists
// factor indices in application order; `weights` picks forward or transposed
// matrices. in and out must be distinct objects.
void run_plan_factors(const ResamplePlan& plan, const std::vector<int>& order,
                      bool use_transpose, const Volume& in, Volume& out) {
    std::vector<int> active;
    for (int fi : order)
        if (plan.factors[fi].active) active.push_back(fi);
    if (active.empty()) {
        out = in;
        return;
    }
    Volume bufs[2];
    const Volume* cur = &in;
    for (size_t k = 0; k < active.size(); ++k) {
        const int fi = active[k];
        Volume* dst;
        if (k + 1 == active.size()) {
            if (out.shape != plan.grid_shape) out = Volume(plan.grid_shape);
            dst = &out;
        } else {
            Volume* t = (cur == &bufs[0]) ? &bufs[1] : &bufs[0];
            if (t->shape != plan.grid_shape) *t = Volume(plan.grid_shape);
            dst = t;
        }
        const SparseWeights& w = use_transpose ? plan.factors[fi].wt : plan.factors[fi].w;
        if (w.n_out == 0) throw std::logic_error("resample plan is missing assembled weights");
        apply_plane_weights(w, static_cast<PlaneFactor>(fi), *cur, *dst);
        cur = dst;
    }
}

}  // namespace

void apply_plan(const ResamplePlan& plan, const Volume& in, Volume& out) {
    run_plan_factors(plan, {0, 1, 2}, false, in, out);
}

void apply_plan_transpose(const ResamplePlan& plan, const Volume& in, Volume& out) {
    run_plan_factors(plan, {2, 1, 0}, true, in, out);
}

Volume resample_direct(const Volume& u, const AffineMap& map, Kernel kernel) {
    Volume out(u.shape);
    const int nx = u.nx(), ny = u.ny(), nz = u.nz();
    parallel_for_chunks(nz, [&](int64_t zb, int64_t ze) {
        for (int z = static_cast<int>(zb); z < ze; ++z) {
            for (int y = 0; y < ny; ++y) {
                for (int x = 0; x < nx; ++x) {
                    const Vec3 s = map.apply_inverse({double(x), double(y), double(z)});
                    const Taps1D tx = taps_1d(kernel, s[0], nx, false);
                    const Taps1D ty = taps_1d(kernel, s[1], ny, false);
                    const Taps1D tz = taps_1d(kernel, s[2], nz, false);
                    double acc = 0.0;
                    for (int c = 0; c < tz.count; ++c) {
                        const int64_t oz = u.idx(0, 0, tz.idx[c]);
                        for (int b = 0; b < ty.count; ++b) {
                            const int64_t oy = oz + int64_t(ty.idx[b]) * nx;
                            double row = 0.0;
                            for (int a = 0; a < tx.count; ++a)
                                row += tx.w[a] * u.data[oy + tx.idx[a]];
                            acc += ty.w[b] * tz.w[c] * row;
                        }
                    }
                    out.at(x, y, z) = acc;
                }
            }
        }
    });
    return out;
}

Volume resample_direct_adjoint(const Volume& p, const AffineMap& map, Kernel kernel) {
    Volume out(p.shape);
    const int nx = p.nx(), ny = p.ny(), nz = p.nz();
    // Scatter with exactly the forward weights; sequential for determinism.
    for (int z = 0; z < nz; ++z) {
        for (int y = 0; y < ny; ++y) {
            for (int x = 0; x < nx; ++x) {
                const double v = p.at(x, y, z);
                if (v == 0.0) continue;
                const Vec3 s = map.apply_inverse({double(x), double(y), double(z)});
                const Taps1D tx = taps_1d(kernel, s[0], nx, false);
                const Taps1D ty = taps_1d(kernel, s[1], ny, false);
                const Taps1D tz = taps_1d(kernel, s[2], nz, false);
                for (int c = 0; c < tz.count; ++c) {
                    const int64_t oz = out.idx(0, 0, tz.idx[c]);
                    for (int b = 0; b < ty.count; ++b) {
                        const int64_t oy = oz + int64_t(ty.idx[b]) * nx;
                        const double wyz = ty.w[b] * tz.w[c] * v;
                        for (int a = 0; a < tx.count; ++a)
                            out.data[oy + tx.idx[a]] += tx.w[a] * wyz;
                    }
                }
            }
        }
    }
    return out;
}

Volume resample(const Volume& u, const AlignParams& a, const InterpScheme& scheme) {
    if (scheme.decomposition == Decomposition::plane2d) {
        const ResamplePlan plan = make_resample_plan(a, u.shape, scheme.kernel, false);
        Volume out(u.shape);
        apply_plan(plan, u, out);
        return out;
    }
    return resample_direct(u, affine_map(a, u.shape), scheme.kernel);
}

namespace {

void warn_linear_derivative(Kernel k) {
    if (k == Kernel::linear)
        log_warn("parameter derivative requested with the linear kernel; it is discontinuous");
}

PlaneFactor factor_of_param(int j) {
    switch (j) {
        case kThetaZX: return PlaneFactor::zx;
        case kSz:
        case kThetaYZ: return PlaneFactor::yz;
        default: return PlaneFactor::xy;
    }
}

int param_slot_in_factor(PlaneFactor f, int j) {
    const auto& ps = plane_factor_params(f);
    for (size_t k = 0; k < ps.size(); ++k)
        if (ps[k] == j) return static_cast<int>(k);
    throw std::logic_error("param_slot_in_factor");
}

// Chain for the plane-decomposed derivative: factors before `df` are applied
// with value weights, then the derivative factor, then the remaining value
// factors. Value factors at identity are skipped.
Volume apply_plane_derivative_chain(const Volume& u, const AlignParams& a, Kernel kernel,
                                    PlaneFactor df, const SparseWeights& dweights) {
    Volume cur = u;
    Volume buf(u.shape);
    const int dfi = static_cast<int>(df);
    for (int fi = 0; fi < dfi; ++fi) {
        const auto f = static_cast<PlaneFactor>(fi);
        if (!factor_active(f, a)) continue;
        const PlanePoints pts = plane_factor_points(f, a, u.shape, false);
        apply_plane_weights(build_plane_weights(pts.points, pts.extents, kernel), f, cur, buf);
        std::swap(cur, buf);
    }
    apply_plane_weights(dweights, df, cur, buf);
    std::swap(cur, buf);
    for (int fi = dfi + 1; fi < 3; ++fi) {
        const auto f = static_cast<PlaneFactor>(fi);
        if (!factor_active(f, a)) continue;
        const PlanePoints pts = plane_factor_points(f, a, u.shape, false);
        apply_plane_weights(build_plane_weights(pts.points, pts.extents, kernel), f, cur, buf);
        std::swap(cur, buf);
    }
    return cur;
}

// Affine representation rows_j(x) = P_j x + q_j of the inverse-map parameter
// Jacobian; shared by the direct3d derivative sweeps.
struct AffineJacobian {
    std::array<Mat3, 6> p;
    std::array<Vec3, 6> q;

    Vec3 row(int j, const Vec3& x) const { return mul(p[j], x) + q[j]; }
};

AffineJacobian affine_param_jacobian(const AlignParams& a, const std::array<int, 3>& shape) {
    AffineJacobian out;
    const Vec3 c = grid_center(shape);
    const Vec3 s{a.sx, a.sy, a.sz};
    const Mat3 m1 = plane_rotation(2, 0, -a.theta_zx);
    const Mat3 m2 = plane_rotation(1, 2, -a.theta_yz);
    const Mat3 m3 = plane_rotation(0, 1, -a.theta_xy);
    const Mat3 m12 = mul(m1, m2);
    const Mat3 zero{};
    for (int j = 0; j < 3; ++j) {
        out.p[j] = zero;
        out.q[j] = {-m12[0][j], -m12[1][j], -m12[2][j]};
    }
    const Mat3 dxy = plane_rotation_deriv(0, 1, -a.theta_xy);
    const Mat3 dyz = plane_rotation_deriv(1, 2, -a.theta_yz);
    const Mat3 dzx = plane_rotation_deriv(2, 0, -a.theta_zx);

    auto neg = [](const Mat3& m) {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r[i][j] = -m[i][j];
        return r;
    };
    // theta_xy: -M1 M2 R'_xy(-t) (x - c)
    out.p[kThetaXY] = neg(mul(m12, dxy));
    out.q[kThetaXY] = -1.0 * mul(out.p[kThetaXY], c);
    // theta_yz: -M1 R'_yz(-t) (M3 (x - c) - s)
    out.p[kThetaYZ] = neg(mul(m1, mul(dyz, m3)));
    out.q[kThetaYZ] = -1.0 * mul(out.p[kThetaYZ], c) + mul(m1, mul(dyz, s));
    // theta_zx: -R'_zx(-t) M2 (M3 (x - c) - s)
    out.p[kThetaZX] = neg(mul(dzx, mul(m2, m3)));
    out.q[kThetaZX] = -1.0 * mul(out.p[kThetaZX], c) + mul(dzx, mul(m2, s));
    return out;
}

// Interpolant gradient at an arbitrary point (zero extension outside).
Vec3 gradient_at(const Volume& u, const Vec3& s, Kernel kernel) {
    const Taps1D vx = taps_1d(kernel, s[0], u.nx(), false);
    const Taps1D vy = taps_1d(kernel, s[1], u.ny(), false);
    const Taps1D vz = taps_1d(kernel, s[2], u.nz(), false);
    const Taps1D gx = taps_1d(kernel, s[0], u.nx(), true);
    const Taps1D gy = taps_1d(kernel, s[1], u.ny(), true);
    const Taps1D gz = taps_1d(kernel, s[2], u.nz(), true);
    Vec3 g{0, 0, 0};
    auto accum = [&u](const Taps1D& tx, const Taps1D& ty, const Taps1D& tz) {
        double acc = 0.0;
        for (int c = 0; c < tz.count; ++c) {
            const int64_t oz = u.idx(0, 0, tz.idx[c]);
            for (int b = 0; b < ty.count; ++b) {
                const int64_t oy = oz + int64_t(ty.idx[b]) * u.nx();
                double row = 0.0;
                for (int a = 0; a < tx.count; ++a) row += tx.w[a] * u.data[oy + tx.idx[a]];
                acc += ty.w[b] * tz.w[c] * row;
            }
        }
        return acc;
    };
    g[0] = accum(gx, vy, vz);
    g[1] = accum(vx, gy, vz);
    g[2] = accum(vx, vy, gz);
    return g;
}

}  // namespace

Volume resample_param_derivative(const Volume& u, const AlignParams& a, const InterpScheme& scheme,
                                 int j) {
    if (j < 0 || j > 5) throw std::invalid_argument("resample_param_derivative: bad parameter index");
    warn_linear_derivative(scheme.kernel);
    if (scheme.decomposition == Decomposition::plane2d) {
        const PlaneFactor f = factor_of_param(j);
        const PlanePoints pts = plane_factor_points(f, a, u.shape, true);
        const SparseWeights dw = build_plane_deriv_weights(
            pts.points, pts.derivs[param_slot_in_factor(f, j)], pts.extents, scheme.kernel);
        return apply_plane_derivative_chain(u, a, scheme.kernel, f, dw);
    }
    const AffineMap map = affine_map(a, u.shape);
    const AffineJacobian jac = affine_param_jacobian(a, u.shape);
    Volume out(u.shape);
    const int nx = u.nx(), ny = u.ny(), nz = u.nz();
    parallel_for_chunks(nz, [&](int64_t zb, int64_t ze) {
        for (int z = static_cast<int>(zb); z < ze; ++z)
            for (int y = 0; y < ny; ++y)
                for (int x = 0; x < nx; ++x) {
                    const Vec3 xs{double(x), double(y), double(z)};
                    const Vec3 src = map.apply_inverse(xs);
                    out.at(x, y, z) = dot(jac.row(j, xs), gradient_at(u, src, scheme.kernel));
                }
    });
    return out;
}

Volume resample_direction_derivative(const Volume& u, const AlignParams& a,
                                     const InterpScheme& scheme, const Vec6& da) {
    warn_linear_derivative(scheme.kernel);
    if (scheme.decomposition == Decomposition::plane2d) {
        Volume out(u.shape);
        Volume chain;
        for (int fi = 0; fi < 3; ++fi) {
            const auto f = static_cast<PlaneFactor>(fi);
            const auto& params = plane_factor_params(f);
            bool touched = false;
            for (int p : params) touched |= da[p] != 0.0;
            if (!touched) continue;
            const PlanePoints pts = plane_factor_points(f, a, u.shape, true);
            std::vector<Vec2> dir(pts.points.size(), Vec2{0, 0});
            for (size_t k = 0; k < params.size(); ++k) {
                const double c = da[params[k]];
                if (c == 0.0) continue;
                for (size_t r = 0; r < dir.size(); ++r) {
                    dir[r][0] += c * pts.derivs[k][r][0];
                    dir[r][1] += c * pts.derivs[k][r][1];
                }
            }
            const SparseWeights dw = build_plane_deriv_weights(pts.points, dir, pts.extents, scheme.kernel);
            chain = apply_plane_derivative_chain(u, a, scheme.kernel, f, dw);
            for (int64_t i = 0; i < out.size(); ++i) out.data[i] += chain.data[i];
        }
        return out;
    }
    const AffineMap map = affine_map(a, u.shape);
    const AffineJacobian jac = affine_param_jacobian(a, u.shape);
    Volume out(u.shape);
    const int nx = u.nx(), ny = u.ny(), nz = u.nz();
    parallel_for_chunks(nz, [&](int64_t zb, int64_t ze) {
        for (int z = static_cast<int>(zb); z < ze; ++z)
            for (int y = 0; y < ny; ++y)
                for (int x = 0; x < nx; ++x) {
                    const Vec3 xs{double(x), double(y), double(z)};
                    Vec3 v{0, 0, 0};
                    for (int j = 0; j < 6; ++j) {
                        if (da[j] == 0.0) continue;
                        v = v + da[j] * jac.row(j, xs);
                    }
                    const Vec3 src = map.apply_inverse(xs);
                    out.at(x, y, z) = dot(v, gradient_at(u, src, scheme.kernel));
                }
    });
    return out;
}

}  // namespace tomo
