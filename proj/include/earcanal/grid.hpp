#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "earcanal/errors.hpp"
#include "earcanal/trimesh.hpp"

namespace earcanal {

// Regular voxel grid; samples live at origin + index * spacing.
struct GridSpec {
    Vec3 origin = Vec3::Zero();
    Vec3 spacing = Vec3::Constant(0.5); // mm, mirrors the coarsest scan axis
    std::array<int, 3> dims = {2, 2, 2};

    std::size_t num_voxels() const {
        return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    }
    std::size_t index(int i, int j, int k) const {
        return static_cast<std::size_t>(i) + static_cast<std::size_t>(dims[0]) * (j + static_cast<std::size_t>(dims[1]) * k);
    }
    Vec3 position(int i, int j, int k) const {
        return origin + Vec3(i * spacing[0], j * spacing[1], k * spacing[2]);
    }
    Vec3 max_corner() const { return position(dims[0] - 1, dims[1] - 1, dims[2] - 1); }
    double voxel_diagonal() const { return spacing.norm(); }

    void validate() const {
        for (int a = 0; a < 3; ++a) {
            if (spacing[a] <= 0.0) throw InvalidSpec("grid spacing must be positive");
            if (dims[a] < 2) throw InvalidSpec("grid dims must be >= 2 per axis");
        }
    }
    bool same_as(const GridSpec& o, double tol = 1e-9) const {
        return dims == o.dims && (origin - o.origin).cwiseAbs().maxCoeff() <= tol &&
               (spacing - o.spacing).cwiseAbs().maxCoeff() <= tol;
    }
};

struct ScalarField {
    GridSpec grid;
    std::vector<double> values;

    double at(int i, int j, int k) const { return values[grid.index(i, j, k)]; }
    double& at(int i, int j, int k) { return values[grid.index(i, j, k)]; }

    // Trilinear interpolation at a world position, clamped to the grid box.
    double sample(const Vec3& p) const {
        int i0[3];
        double t[3];
        locate(p, i0, t);
        double v = 0.0;
        for (int dz = 0; dz < 2; ++dz)
            for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx) {
                    double w = (dx ? t[0] : 1 - t[0]) * (dy ? t[1] : 1 - t[1]) * (dz ? t[2] : 1 - t[2]);
                    v += w * at(i0[0] + dx, i0[1] + dy, i0[2] + dz);
                }
        return v;
    }

    // Value and spatial gradient of the trilinear interpolant. The gradient is
    // the analytic derivative of the interpolant (zero along clamped axes at
    // the border, matching the clamped sample()).
    double sample_with_gradient(const Vec3& p, Vec3& grad) const {
        int i0[3];
        double t[3];
        bool clamped[3];
        locate(p, i0, t, clamped);
        double v = 0.0;
        grad.setZero();
        for (int dz = 0; dz < 2; ++dz)
            for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx) {
                    double wx = dx ? t[0] : 1 - t[0], wy = dy ? t[1] : 1 - t[1], wz = dz ? t[2] : 1 - t[2];
                    double gx = dx ? 1.0 : -1.0, gy = dy ? 1.0 : -1.0, gz = dz ? 1.0 : -1.0;
                    double c = at(i0[0] + dx, i0[1] + dy, i0[2] + dz);
                    v += wx * wy * wz * c;
                    grad[0] += gx * wy * wz * c;
                    grad[1] += wx * gy * wz * c;
                    grad[2] += wx * wy * gz * c;
                }
        for (int a = 0; a < 3; ++a) grad[a] = clamped[a] ? 0.0 : grad[a] / grid.spacing[a];
        return v;
    }

private:
    void locate(const Vec3& p, int* i0, double* t, bool* clamped = nullptr) const {
        for (int a = 0; a < 3; ++a) {
            double u = (p[a] - grid.origin[a]) / grid.spacing[a];
            // snap to the lattice so sampling at voxel centers is exact
            double r = std::round(u);
            if (std::abs(u - r) < 1e-9) u = r;
            bool clamp = false;
            if (u <= 0.0) {
                u = 0.0;
                clamp = true;
            } else if (u >= grid.dims[a] - 1) {
                u = grid.dims[a] - 1;
                clamp = true;
            }
            int i = static_cast<int>(std::floor(u));
            if (i > grid.dims[a] - 2) i = grid.dims[a] - 2;
            i0[a] = i;
            t[a] = u - i;
            if (clamped) clamped[a] = clamp;
        }
    }
};

inline void validate_field(const ScalarField& f) {
    f.grid.validate();
    if (f.values.size() != f.grid.num_voxels()) throw InvalidSpec("field value count does not match grid dims");
    for (double v : f.values)
        if (!std::isfinite(v)) throw InvalidSpec("field contains non-finite values");
}

// Separable Gaussian smoothing; sigma in mm, kernel truncated at 3 sigma.
// sigma <= 0 returns the input unchanged.
inline ScalarField gaussian_smooth(const ScalarField& field, double sigma_mm) {
    if (sigma_mm <= 0.0) return field;
    ScalarField out = field;
    ScalarField tmp = field;
    const GridSpec& g = field.grid;
    for (int axis = 0; axis < 3; ++axis) {
        double sigma_vox = sigma_mm / g.spacing[axis];
        int radius = static_cast<int>(std::ceil(3.0 * sigma_vox));
        if (radius < 1) continue;
        std::vector<double> kernel(2 * radius + 1);
        double sum = 0.0;
        for (int r = -radius; r <= radius; ++r) {
            kernel[r + radius] = std::exp(-0.5 * (r / sigma_vox) * (r / sigma_vox));
            sum += kernel[r + radius];
        }
        for (double& k : kernel) k /= sum;

        const ScalarField& src = out;
        for (int k = 0; k < g.dims[2]; ++k)
            for (int j = 0; j < g.dims[1]; ++j)
                for (int i = 0; i < g.dims[0]; ++i) {
                    int idx[3] = {i, j, k};
                    double acc = 0.0;
                    for (int r = -radius; r <= radius; ++r) {
                        int q = std::clamp(idx[axis] + r, 0, g.dims[axis] - 1);
                        acc += kernel[r + radius] *
                               src.values[src.grid.index(axis == 0 ? q : i, axis == 1 ? q : j, axis == 2 ? q : k)];
                    }
                    tmp.values[tmp.grid.index(i, j, k)] = acc;
                }
        std::swap(out.values, tmp.values);
    }
    return out;
}

// Halves resolution along each axis (2x2x2 box average over available
// samples). Used for the registration pyramid.
inline ScalarField downsample2(const ScalarField& field) {
    const GridSpec& g = field.grid;
    GridSpec coarse;
    coarse.origin = g.origin;
    coarse.spacing = g.spacing * 2.0;
    for (int a = 0; a < 3; ++a) coarse.dims[a] = std::max(2, (g.dims[a] + 1) / 2);
    ScalarField out;
    out.grid = coarse;
    out.values.assign(coarse.num_voxels(), 0.0);
    for (int k = 0; k < coarse.dims[2]; ++k)
        for (int j = 0; j < coarse.dims[1]; ++j)
            for (int i = 0; i < coarse.dims[0]; ++i) {
                double acc = 0.0;
                int n = 0;
                for (int dz = 0; dz < 2; ++dz)
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            int x = 2 * i + dx, y = 2 * j + dy, z = 2 * k + dz;
                            if (x < g.dims[0] && y < g.dims[1] && z < g.dims[2]) {
                                acc += field.at(x, y, z);
                                ++n;
                            }
                        }
                out.at(i, j, k) = acc / n;
            }
    return out;
}

} // namespace earcanal
