#pragma once

#include <optional>
#include <vector>

#include "tomo/geometry.hpp"
#include "tomo/interp.hpp"
#include "tomo/volume.hpp"

namespace tomo {

// Detector-plane primitives. The detector grid coincides with the (x, y)
// voxel grid before roi truncation.

Image sum_z(const Volume& v);
Volume broadcast_z(const Image& img, int nz);
Image truncate_roi(const Image& full, const Roi& roi);
Image embed_roi(const Image& img, const Roi& roi, int full_nx, int full_ny);
/// <S_z v, img> without materializing the broadcast volume.
double dot_zsum(const Volume& v, const Image& img);

/// Applies plane weights to a detector image (2D analogue of
/// apply_plane_weights for the xy factor).
void apply_image_weights(const SparseWeights& w, const Image& in, Image& out);

/// One projection of the parallel-beam operator for fixed total parameters
/// (nominal tomographic angle already folded into theta_zx):
///   W_i = T_roi S_z R(a_i^total).
/// For the plane2d scheme the in-plane factor commutes with S_z and is
/// applied on the detector, so volumes pass through at most two 3D factors.
class ProjectionTransform {
  public:
    ProjectionTransform() = default;
    ProjectionTransform(const std::array<int, 3>& grid, const AlignParams& total,
                        const InterpScheme& scheme, std::optional<Roi> roi);

    Image forward(const Volume& u) const;
    /// Exact algebraic transpose: roi-sized image -> volume.
    Volume adjoint(const Image& img) const;

    /// G_i * da: directional parameter derivative of i -> W_i(a_i) u.
    Image jacobian_tvp(const Volume& u, const Vec6& da) const;
    /// G_i^T r for a roi-sized residual image; entry s_z is structurally 0
    /// for objects supported away from the z-boundary.
    Vec6 jacobian_vjp(const Volume& u, const Image& r) const;

    const AlignParams& total_params() const { return total_; }
    const std::optional<Roi>& roi() const { return roi_; }
    const std::array<int, 3>& grid() const { return grid_; }
    std::array<int, 2> image_extents() const;

  private:
    std::array<int, 3> grid_{};
    AlignParams total_;
    InterpScheme scheme_;
    std::optional<Roi> roi_;
    // plane2d path
    ResamplePlan zx_yz_;
    SparseWeights xy2d_, xy2d_t_;
    bool has_xy_ = false;
    // direct3d path
    AffineMap map_;

    Image finish_forward(Image full) const;
    Image forward_full_plane(const Volume& u) const;
    friend class Projector;
};

/// The block operator W(a) with per-projection transforms assembled once and
/// reused across applications (one reconstruction solve builds it once).
class Projector {
  public:
    Projector(const std::array<int, 3>& grid, const AlignStack& a, const InterpScheme& scheme,
              std::optional<Roi> roi);

    int n_proj() const { return static_cast<int>(blocks_.size()); }
    const ProjectionTransform& block(int i) const { return blocks_[i]; }
    std::array<int, 2> image_extents() const;

    ProjectionStack forward(const Volume& u) const;
    void forward_into(const Volume& u, ProjectionStack& out) const;
    Volume adjoint(const ProjectionStack& p) const;

  private:
    std::array<int, 3> grid_;
    std::optional<Roi> roi_;
    std::vector<double> angles_;
    std::vector<ProjectionTransform> blocks_;
    mutable std::vector<Volume> adjoint_parts_;  // per-projection partials, fixed-order reduce
};

/// Total parameters of projection i: nominal tomographic angle composed with
/// the perturbation about the same axis.
inline AlignParams total_params(const AlignStack& a, int i) {
    AlignParams t = a.params[i];
    t.theta_zx += a.nominal_angles[i];
    return t;
}

// Free-function entry points over whole stacks.

ProjectionStack project(const Volume& u, const AlignStack& a, const InterpScheme& scheme,
                        std::optional<Roi> roi = {});
Volume backproject(const ProjectionStack& p, const AlignStack& a, const InterpScheme& scheme,
                   const std::array<int, 3>& grid_shape);
ProjectionStack jacobian_tvp(const AlignStack& a, const Volume& u, const AlignStack& da,
                             const InterpScheme& scheme, std::optional<Roi> roi = {});
std::vector<Vec6> jacobian_vjp(const AlignStack& a, const Volume& u, const ProjectionStack& r,
                               const InterpScheme& scheme);

}  // namespace tomo
