#include "tomo/projector.hpp"

#include <cmath>
#include <stdexcept>

#include "tomo/parallel.hpp"

namespace tomo {

Image sum_z(const Volume& v) {
    Image img(v.nx(), v.ny());
    const int64_t plane = int64_t(v.nx()) * v.ny();
    for (int z = 0; z < v.nz(); ++z) {
        const double* src = v.data.data() + plane * z;
        for (int64_t i = 0; i < plane; ++i) img.data[i] += src[i];
    }
    return img;
}

Volume broadcast_z(const Image& img, int nz) {
    Volume v(img.nx, img.ny, nz);
    const int64_t plane = int64_t(img.nx) * img.ny;
    for (int z = 0; z < nz; ++z)
        std::copy(img.data.begin(), img.data.end(), v.data.begin() + plane * z);
    return v;
}

Image truncate_roi(const Image& full, const Roi& roi) {
    Image out(roi.px, roi.py);
    for (int y = 0; y < roi.py; ++y)
        for (int x = 0; x < roi.px; ++x) out.at(x, y) = full.at(roi.x0 + x, roi.y0 + y);
    return out;
}

Image embed_roi(const Image& img, const Roi& roi, int full_nx, int full_ny) {
    Image out(full_nx, full_ny);
    for (int y = 0; y < roi.py; ++y)
        for (int x = 0; x < roi.px; ++x) out.at(roi.x0 + x, roi.y0 + y) = img.at(x, y);
    return out;
}

double dot_zsum(const Volume& v, const Image& img) {
    const int64_t plane = int64_t(v.nx()) * v.ny();
    double s = 0.0;
    for (int z = 0; z < v.nz(); ++z) {
        const double* src = v.data.data() + plane * z;
        for (int64_t i = 0; i < plane; ++i) s += src[i] * img.data[i];
    }
    return s;
}

void apply_image_weights(const SparseWeights& w, const Image& in, Image& out) {
    if (w.n_in != in.nx * in.ny) throw std::invalid_argument("apply_image_weights: shape mismatch");
    if (out.nx != in.nx || out.ny != in.ny) out = Image(in.nx, in.ny);
    for (int r = 0; r < w.n_out; ++r) {
        double acc = 0.0;
        for (int k = w.row_ptr[r]; k < w.row_ptr[r + 1]; ++k) acc += w.val[k] * in.data[w.col[k]];
        out.data[r] = acc;
    }
}

namespace {

AlignParams strip_inplane(const AlignParams& a) {
    AlignParams b = a;
    b.sx = b.sy = 0.0;
    b.theta_xy = 0.0;
    return b;
}

bool has_inplane(const AlignParams& a) {
    return a.sx != 0.0 || a.sy != 0.0 || a.theta_xy != 0.0;
}

}  // namespace

ProjectionTransform::ProjectionTransform(const std::array<int, 3>& grid, const AlignParams& total,
                                         const InterpScheme& scheme, std::optional<Roi> roi)
    : grid_(grid), total_(total), scheme_(scheme), roi_(roi) {
    if (roi_ && (roi_->x0 < 0 || roi_->y0 < 0 || roi_->x0 + roi_->px > grid[0] ||
                 roi_->y0 + roi_->py > grid[1]))
        throw std::invalid_argument("ProjectionTransform: roi exceeds detector");
    if (scheme.decomposition == Decomposition::plane2d) {
        zx_yz_ = make_resample_plan(strip_inplane(total), grid, scheme.kernel, true);
        if (has_inplane(total)) {
            has_xy_ = true;
            const PlanePoints pts = plane_factor_points(PlaneFactor::xy, total, grid, false);
            xy2d_ = build_plane_weights(pts.points, pts.extents, scheme.kernel);
            xy2d_t_ = xy2d_.transposed();
        }
    } else {
        map_ = affine_map(total, grid);
    }
}

std::array<int, 2> ProjectionTransform::image_extents() const {
    if (roi_) return {roi_->px, roi_->py};
    return {grid_[0], grid_[1]};
}

Image ProjectionTransform::finish_forward(Image full) const {
    if (has_xy_) {
        Image rotated(full.nx, full.ny);
        apply_image_weights(xy2d_, full, rotated);
        full = std::move(rotated);
    }
    if (roi_) return truncate_roi(full, *roi_);
    return full;
}

Image ProjectionTransform::forward_full_plane(const Volume& u) const {
    if (scheme_.decomposition == Decomposition::plane2d) {
        bool any = false;
        for (const auto& f : zx_yz_.factors) any |= f.active;
        if (!any) return sum_z(u);
        Volume tmp;
        apply_plan(zx_yz_, u, tmp);
        return sum_z(tmp);
    }
    return sum_z(resample_direct(u, map_, scheme_.kernel));
}

Image ProjectionTransform::forward(const Volume& u) const {
    if (u.shape != grid_) throw std::invalid_argument("ProjectionTransform::forward: grid mismatch");
    return finish_forward(forward_full_plane(u));
}

Volume ProjectionTransform::adjoint(const Image& img) const {
    Image full = roi_ ? embed_roi(img, *roi_, grid_[0], grid_[1]) : img;
    if (scheme_.decomposition == Decomposition::plane2d) {
        if (has_xy_) {
            Image back(full.nx, full.ny);
            apply_image_weights(xy2d_t_, full, back);
            full = std::move(back);
        }
        const Volume b = broadcast_z(full, grid_[2]);
        bool any = false;
        for (const auto& f : zx_yz_.factors) any |= f.active;
        if (!any) return b;
        Volume out;
        apply_plan_transpose(zx_yz_, b, out);
        return out;
    }
    return resample_direct_adjoint(broadcast_z(full, grid_[2]), map_, scheme_.kernel);
}

Image ProjectionTransform::jacobian_tvp(const Volume& u, const Vec6& da) const {
    if (scheme_.decomposition != Decomposition::plane2d) {
        const Volume d = resample_direction_derivative(u, total_, scheme_, da);
        Image img = sum_z(d);
        if (roi_) return truncate_roi(img, *roi_);
        return img;
    }
    // S_z (W_xy W_yz D_zx + W_xy D_yz W_zx + D_xy W_yz W_zx) u, with the xy
    // factor moved to the detector plane.
    const bool want_zx = da[kThetaZX] != 0.0;
    const bool want_yz = da[kSz] != 0.0 || da[kThetaYZ] != 0.0;
    const bool want_xy = da[kSx] != 0.0 || da[kSy] != 0.0 || da[kThetaXY] != 0.0;

    const auto& zx = zx_yz_.factors[int(PlaneFactor::zx)];
    const auto& yz = zx_yz_.factors[int(PlaneFactor::yz)];

    Volume v1;  // W_zx u
    const Volume* v1p = &u;
    if (zx.active) {
        apply_plane_weights(zx.w, PlaneFactor::zx, u, v1);
        v1p = &v1;
    }

    Volume acc3d(grid_);  // sum of 3D derivative parts, before S_z
    bool acc_used = false;
    Volume tmp;
    if (want_zx) {
        const PlanePoints pts = plane_factor_points(PlaneFactor::zx, total_, grid_, true);
        std::vector<Vec2> dir(pts.points.size());
        for (size_t r = 0; r < dir.size(); ++r)
            dir[r] = {da[kThetaZX] * pts.derivs[0][r][0], da[kThetaZX] * pts.derivs[0][r][1]};
        const SparseWeights dzx = build_plane_deriv_weights(pts.points, dir, pts.extents,
                                                            scheme_.kernel);
        apply_plane_weights(dzx, PlaneFactor::zx, u, acc3d);
        if (yz.active) {
            apply_plane_weights(yz.w, PlaneFactor::yz, acc3d, tmp);
            std::swap(acc3d, tmp);
        }
        acc_used = true;
    }
    if (want_yz) {
        const PlanePoints pts = plane_factor_points(PlaneFactor::yz, total_, grid_, true);
        std::vector<Vec2> dir(pts.points.size(), Vec2{0, 0});
        const auto& params = plane_factor_params(PlaneFactor::yz);
        for (size_t k = 0; k < params.size(); ++k)
            if (da[params[k]] != 0.0)
                for (size_t r = 0; r < dir.size(); ++r) {
                    dir[r][0] += da[params[k]] * pts.derivs[k][r][0];
                    dir[r][1] += da[params[k]] * pts.derivs[k][r][1];
                }
        const SparseWeights dyz = build_plane_deriv_weights(pts.points, dir, pts.extents, scheme_.kernel);
        Volume part;
        apply_plane_weights(dyz, PlaneFactor::yz, *v1p, part);
        if (acc_used) {
            for (int64_t i = 0; i < acc3d.size(); ++i) acc3d.data[i] += part.data[i];
        } else {
            acc3d = std::move(part);
            acc_used = true;
        }
    }

    Image img(grid_[0], grid_[1]);
    if (acc_used) {
        img = sum_z(acc3d);
        if (has_xy_) {
            Image rot(img.nx, img.ny);
            apply_image_weights(xy2d_, img, rot);
            img = std::move(rot);
        }
    }
    if (want_xy) {
        Volume v2;  // W_yz W_zx u
        const Volume* v2p = v1p;
        if (yz.active) {
            apply_plane_weights(yz.w, PlaneFactor::yz, *v1p, v2);
            v2p = &v2;
        }
        const Image img2 = sum_z(*v2p);
        const PlanePoints pts = plane_factor_points(PlaneFactor::xy, total_, grid_, true);
        std::vector<Vec2> dir(pts.points.size(), Vec2{0, 0});
        const auto& params = plane_factor_params(PlaneFactor::xy);
        for (size_t k = 0; k < params.size(); ++k)
            if (da[params[k]] != 0.0)
                for (size_t r = 0; r < dir.size(); ++r) {
                    dir[r][0] += da[params[k]] * pts.derivs[k][r][0];
                    dir[r][1] += da[params[k]] * pts.derivs[k][r][1];
                }
        const SparseWeights dxy = build_plane_deriv_weights(pts.points, dir, pts.extents, scheme_.kernel);
        Image dimg(img2.nx, img2.ny);
        apply_image_weights(dxy, img2, dimg);
        for (size_t i = 0; i < img.data.size(); ++i) img.data[i] += dimg.data[i];
    }
    if (roi_) return truncate_roi(img, *roi_);
    return img;
}

Vec6 ProjectionTransform::jacobian_vjp(const Volume& u, const Image& r) const {
    Vec6 g{0, 0, 0, 0, 0, 0};
    const Image remb = roi_ ? embed_roi(r, *roi_, grid_[0], grid_[1]) : r;

    if (scheme_.decomposition != Decomposition::plane2d) {
        for (int j = 0; j < 6; ++j) {
            const Volume d = resample_param_derivative(u, total_, scheme_, j);
            g[j] = dot_zsum(d, remb);
        }
        return g;
    }

    const auto& zx = zx_yz_.factors[int(PlaneFactor::zx)];
    const auto& yz = zx_yz_.factors[int(PlaneFactor::yz)];

    Volume v1;
    const Volume* v1p = &u;
    if (zx.active) {
        apply_plane_weights(zx.w, PlaneFactor::zx, u, v1);
        v1p = &v1;
    }
    Volume v2;
    const Volume* v2p = v1p;
    if (yz.active) {
        apply_plane_weights(yz.w, PlaneFactor::yz, *v1p, v2);
        v2p = &v2;
    }

    // Pull the residual back through the in-plane factor once.
    Image t2d = remb;
    if (has_xy_) {
        Image back(remb.nx, remb.ny);
        apply_image_weights(xy2d_t_, remb, back);
        t2d = std::move(back);
    }

    // xy parameters act on the z-summed image.
    {
        const Image img2 = sum_z(*v2p);
        const PlanePoints pts = plane_factor_points(PlaneFactor::xy, total_, grid_, true);
        const auto& params = plane_factor_params(PlaneFactor::xy);
        Image dimg(img2.nx, img2.ny);
        for (size_t k = 0; k < params.size(); ++k) {
            const SparseWeights dxy =
                build_plane_deriv_weights(pts.points, pts.derivs[k], pts.extents, scheme_.kernel);
            apply_image_weights(dxy, img2, dimg);
            double s = 0.0;
            for (size_t i = 0; i < dimg.data.size(); ++i) s += dimg.data[i] * remb.data[i];
            g[params[k]] = s;
        }
    }
    // yz parameters: <D_yz v1, broadcast t2d>.
    {
        const PlanePoints pts = plane_factor_points(PlaneFactor::yz, total_, grid_, true);
        const auto& params = plane_factor_params(PlaneFactor::yz);
        Volume d;
        for (size_t k = 0; k < params.size(); ++k) {
            const SparseWeights dyz =
                build_plane_deriv_weights(pts.points, pts.derivs[k], pts.extents, scheme_.kernel);
            apply_plane_weights(dyz, PlaneFactor::yz, *v1p, d);
            g[params[k]] = dot_zsum(d, t2d);
        }
    }
    // theta_zx: <D_zx u, W_yz^T broadcast t2d>.
    {
        const PlanePoints pts = plane_factor_points(PlaneFactor::zx, total_, grid_, true);
        const SparseWeights dzx =
            build_plane_deriv_weights(pts.points, pts.derivs[0], pts.extents, scheme_.kernel);
        Volume d;
        apply_plane_weights(dzx, PlaneFactor::zx, u, d);
        if (yz.active) {
            const Volume t3 = broadcast_z(t2d, grid_[2]);
            Volume tyz;
            apply_plane_weights(yz.wt, PlaneFactor::yz, t3, tyz);
            g[kThetaZX] = dot(d.data, tyz.data);
        } else {
            g[kThetaZX] = dot_zsum(d, t2d);
        }
    }
    return g;
}

Projector::Projector(const std::array<int, 3>& grid, const AlignStack& a,
                     const InterpScheme& scheme, std::optional<Roi> roi)
    : grid_(grid), roi_(roi), angles_(a.nominal_angles) {
    blocks_.resize(a.n_proj());
    parallel_for(a.n_proj(), [&](int64_t i) {
        blocks_[i] = ProjectionTransform(grid, total_params(a, static_cast<int>(i)), scheme, roi);
    });
}

std::array<int, 2> Projector::image_extents() const {
    if (roi_) return {roi_->px, roi_->py};
    return {grid_[0], grid_[1]};
}

ProjectionStack Projector::forward(const Volume& u) const {
    const auto ext = image_extents();
    ProjectionStack out(n_proj(), ext[0], ext[1]);
    out.nominal_angles = angles_;
    out.roi = roi_;
    forward_into(u, out);
    return out;
}

void Projector::forward_into(const Volume& u, ProjectionStack& out) const {
    parallel_for(n_proj(), [&](int64_t i) {
        const Image img = blocks_[i].forward(u);
        std::copy(img.data.begin(), img.data.end(), out.image(static_cast<int>(i)));
    });
}

Volume Projector::adjoint(const ProjectionStack& p) const {
    if (p.n_proj != n_proj()) throw std::invalid_argument("Projector::adjoint: stack size mismatch");
    const auto ext = image_extents();
    if (p.px != ext[0] || p.py != ext[1])
        throw std::invalid_argument("Projector::adjoint: image extents mismatch");
    if (adjoint_parts_.size() != blocks_.size()) adjoint_parts_.resize(blocks_.size());
    parallel_for(n_proj(), [&](int64_t i) {
        Image img(p.px, p.py);
        std::copy(p.image(static_cast<int>(i)), p.image(static_cast<int>(i)) + p.image_size(),
                  img.data.begin());
        adjoint_parts_[i] = blocks_[i].adjoint(img);
    });
    Volume out(grid_);
    for (const Volume& part : adjoint_parts_)
        for (int64_t i = 0; i < out.size(); ++i) out.data[i] += part.data[i];
    return out;
}

ProjectionStack project(const Volume& u, const AlignStack& a, const InterpScheme& scheme,
                        std::optional<Roi> roi) {
    if (a.n_proj() == 0) throw std::invalid_argument("project: empty alignment stack");
    Projector proj(u.shape, a, scheme, roi);
    return proj.forward(u);
}

Volume backproject(const ProjectionStack& p, const AlignStack& a, const InterpScheme& scheme,
                   const std::array<int, 3>& grid_shape) {
    if (a.n_proj() != p.n_proj) throw std::invalid_argument("backproject: stack size mismatch");
    Projector proj(grid_shape, a, scheme, p.roi);
    return proj.adjoint(p);
}

ProjectionStack jacobian_tvp(const AlignStack& a, const Volume& u, const AlignStack& da,
                             const InterpScheme& scheme, std::optional<Roi> roi) {
    if (a.n_proj() != da.n_proj()) throw std::invalid_argument("jacobian_tvp: direction size mismatch");
    const int n = a.n_proj();
    const int px = roi ? roi->px : u.nx();
    const int py = roi ? roi->py : u.ny();
    ProjectionStack out(n, px, py);
    out.nominal_angles = a.nominal_angles;
    out.roi = roi;
    parallel_for(n, [&](int64_t i) {
        const ProjectionTransform t(u.shape, total_params(a, static_cast<int>(i)), scheme, roi);
        const Image img = t.jacobian_tvp(u, da.params[i].to_array());
        std::copy(img.data.begin(), img.data.end(), out.image(static_cast<int>(i)));
    });
    return out;
}

std::vector<Vec6> jacobian_vjp(const AlignStack& a, const Volume& u, const ProjectionStack& r,
                               const InterpScheme& scheme) {
    if (a.n_proj() != r.n_proj) throw std::invalid_argument("jacobian_vjp: stack size mismatch");
    std::vector<Vec6> out(a.n_proj());
    parallel_for(a.n_proj(), [&](int64_t i) {
        const ProjectionTransform t(u.shape, total_params(a, static_cast<int>(i)), scheme, r.roi);
        Image img(r.px, r.py);
        std::copy(r.image(static_cast<int>(i)), r.image(static_cast<int>(i)) + r.image_size(),
                  img.data.begin());
        out[i] = t.jacobian_vjp(u, img);
    });
    return out;
}

}  // namespace tomo
