#pragma once

#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "earcanal/errors.hpp"
#include "earcanal/trimesh.hpp"

namespace earcanal {

// x -> matrix * x + translation, orientation preserving.
struct AffineTransform {
    Eigen::Matrix3d matrix = Eigen::Matrix3d::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& x) const { return matrix * x + translation; }

    void validate() const {
        if (matrix.determinant() <= 0.0) throw InvalidSpec("affine matrix must have positive determinant");
    }

    static AffineTransform identity() { return {}; }
};

namespace detail {

// cubic uniform B-spline basis on [0,1)
inline void bspline_weights(double t, double w[4]) {
    double t2 = t * t, t3 = t2 * t;
    w[0] = (1.0 - 3.0 * t + 3.0 * t2 - t3) / 6.0;
    w[1] = (4.0 - 6.0 * t2 + 3.0 * t3) / 6.0;
    w[2] = (1.0 + 3.0 * t + 3.0 * t2 - 3.0 * t3) / 6.0;
    w[3] = t3 / 6.0;
}

} // namespace detail

// Free-form deformation: displacement field spanned by a lattice of cubic
// B-spline control points. Control points outside the lattice are treated
// as zero displacement.
struct FfdTransform {
    Vec3 lattice_origin = Vec3::Zero();
    Vec3 lattice_spacing = Vec3::Constant(8.0);
    std::array<int, 3> lattice_dims = {4, 4, 4};
    std::vector<Vec3> displacements; // x-fastest layout

    std::size_t num_control_points() const {
        return static_cast<std::size_t>(lattice_dims[0]) * lattice_dims[1] * lattice_dims[2];
    }
    std::size_t index(int i, int j, int k) const {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(lattice_dims[0]) * (j + static_cast<std::size_t>(lattice_dims[1]) * k);
    }

    void validate() const {
        for (int a = 0; a < 3; ++a) {
            if (lattice_dims[a] < 4) throw InvalidSpec("lattice dims must be >= 4");
            if (lattice_spacing[a] <= 0.0) throw InvalidSpec("lattice spacing must be positive");
        }
        if (displacements.size() != num_control_points())
            throw InvalidSpec("displacement count does not match lattice dims");
        for (const Vec3& d : displacements)
            if (!d.allFinite()) throw InvalidSpec("non-finite control displacement");
    }

    // Per-axis support of the point x: base control index and 4 weights.
    void support(const Vec3& x, int base[3], double w[3][4]) const {
        for (int a = 0; a < 3; ++a) {
            double u = (x[a] - lattice_origin[a]) / lattice_spacing[a];
            double fl = std::floor(u);
            base[a] = static_cast<int>(fl) - 1;
            detail::bspline_weights(u - fl, w[a]);
        }
    }

    Vec3 displacement(const Vec3& x) const {
        int base[3];
        double w[3][4];
        support(x, base, w);
        Vec3 d = Vec3::Zero();
        for (int c = 0; c < 4; ++c) {
            int k = base[2] + c;
            if (k < 0 || k >= lattice_dims[2]) continue;
            for (int b = 0; b < 4; ++b) {
                int j = base[1] + b;
                if (j < 0 || j >= lattice_dims[1]) continue;
                double wcb = w[2][c] * w[1][b];
                for (int a = 0; a < 4; ++a) {
                    int i = base[0] + a;
                    if (i < 0 || i >= lattice_dims[0]) continue;
                    d += (wcb * w[0][a]) * displacements[index(i, j, k)];
                }
            }
        }
        return d;
    }

    Vec3 apply(const Vec3& x) const { return x + displacement(x); }

    // Least lattice whose proper cubic support covers [lo, hi].
    static FfdTransform covering(const Vec3& lo, const Vec3& hi, const Vec3& spacing) {
        FfdTransform f;
        f.lattice_origin = lo - spacing;
        f.lattice_spacing = spacing;
        for (int a = 0; a < 3; ++a)
            f.lattice_dims[a] = static_cast<int>(std::ceil((hi[a] - lo[a]) / spacing[a])) + 4;
        f.displacements.assign(f.num_control_points(), Vec3::Zero());
        return f;
    }
};

// Total registration map: affine applied after the FFD displacement.
inline Vec3 apply_transform(const AffineTransform& affine, const FfdTransform& ffd, const Vec3& x) {
    return affine.apply(ffd.apply(x));
}

// Dyadic refinement: a lattice at half spacing representing the identical
// displacement field (exact wherever the coarse lattice had proper support;
// out-of-lattice coarse controls count as zero).
inline FfdTransform subdivide(const FfdTransform& coarse) {
    FfdTransform fine;
    fine.lattice_origin = coarse.lattice_origin;
    fine.lattice_spacing = coarse.lattice_spacing / 2.0;
    for (int a = 0; a < 3; ++a) fine.lattice_dims[a] = 2 * coarse.lattice_dims[a] - 1;
    fine.displacements.assign(fine.num_control_points(), Vec3::Zero());

    auto coarse_at = [&](int i, int j, int k) -> Vec3 {
        if (i < 0 || j < 0 || k < 0 || i >= coarse.lattice_dims[0] || j >= coarse.lattice_dims[1] ||
            k >= coarse.lattice_dims[2])
            return Vec3::Zero();
        return coarse.displacements[coarse.index(i, j, k)];
    };
    // separable even/odd masks: even (1,6,1)/8, odd (1,1)/2, applied per axis
    auto refined_1d = [](int fine_idx, auto&& fetch) -> Vec3 {
        int i = fine_idx / 2;
        if (fine_idx % 2 == 0) return (fetch(i - 1) + 6.0 * fetch(i) + fetch(i + 1)) / 8.0;
        return (fetch(i) + fetch(i + 1)) / 2.0;
    };
    for (int k = 0; k < fine.lattice_dims[2]; ++k)
        for (int j = 0; j < fine.lattice_dims[1]; ++j)
            for (int i = 0; i < fine.lattice_dims[0]; ++i) {
                Vec3 d = refined_1d(i, [&](int ci) {
                    return refined_1d(j, [&](int cj) {
                        return refined_1d(k, [&](int ck) { return coarse_at(ci, cj, ck); });
                    });
                });
                fine.displacements[fine.index(i, j, k)] = d;
            }
    return fine;
}

// Discrete thin-plate bending energy of the control lattice: mean over
// control points of squared second index differences (pure terms once,
// mixed terms twice). Zero for any displacement field linear in position.
inline double bending_energy(const FfdTransform& ffd) {
    const auto& dims = ffd.lattice_dims;
    auto at = [&](int i, int j, int k) -> const Vec3& { return ffd.displacements[ffd.index(i, j, k)]; };
    double e = 0.0;
    for (int k = 0; k < dims[2]; ++k)
        for (int j = 0; j < dims[1]; ++j)
            for (int i = 0; i < dims[0]; ++i) {
                if (i >= 1 && i + 1 < dims[0])
                    e += (at(i - 1, j, k) - 2.0 * at(i, j, k) + at(i + 1, j, k)).squaredNorm();
                if (j >= 1 && j + 1 < dims[1])
                    e += (at(i, j - 1, k) - 2.0 * at(i, j, k) + at(i, j + 1, k)).squaredNorm();
                if (k >= 1 && k + 1 < dims[2])
                    e += (at(i, j, k - 1) - 2.0 * at(i, j, k) + at(i, j, k + 1)).squaredNorm();
                if (i >= 1 && i + 1 < dims[0] && j >= 1 && j + 1 < dims[1])
                    e += 2.0 * (0.25 * (at(i + 1, j + 1, k) - at(i + 1, j - 1, k) - at(i - 1, j + 1, k) +
                                        at(i - 1, j - 1, k)))
                                   .squaredNorm();
                if (i >= 1 && i + 1 < dims[0] && k >= 1 && k + 1 < dims[2])
                    e += 2.0 * (0.25 * (at(i + 1, j, k + 1) - at(i + 1, j, k - 1) - at(i - 1, j, k + 1) +
                                        at(i - 1, j, k - 1)))
                                   .squaredNorm();
                if (j >= 1 && j + 1 < dims[1] && k >= 1 && k + 1 < dims[2])
                    e += 2.0 * (0.25 * (at(i, j + 1, k + 1) - at(i, j + 1, k - 1) - at(i, j - 1, k + 1) +
                                        at(i, j - 1, k - 1)))
                                   .squaredNorm();
            }
    return e / static_cast<double>(ffd.num_control_points());
}

// Gradient of bending_energy with respect to every control displacement.
inline std::vector<Vec3> bending_energy_gradient(const FfdTransform& ffd) {
    const auto& dims = ffd.lattice_dims;
    std::vector<Vec3> grad(ffd.num_control_points(), Vec3::Zero());
    auto at = [&](int i, int j, int k) -> const Vec3& { return ffd.displacements[ffd.index(i, j, k)]; };
    auto add = [&](int i, int j, int k, const Vec3& g) { grad[ffd.index(i, j, k)] += g; };
    double norm = 1.0 / static_cast<double>(ffd.num_control_points());
    for (int k = 0; k < dims[2]; ++k)
        for (int j = 0; j < dims[1]; ++j)
            for (int i = 0; i < dims[0]; ++i) {
                if (i >= 1 && i + 1 < dims[0]) {
                    Vec3 r = 2.0 * norm * (at(i - 1, j, k) - 2.0 * at(i, j, k) + at(i + 1, j, k));
                    add(i - 1, j, k, r);
                    add(i, j, k, -2.0 * r);
                    add(i + 1, j, k, r);
                }
                if (j >= 1 && j + 1 < dims[1]) {
                    Vec3 r = 2.0 * norm * (at(i, j - 1, k) - 2.0 * at(i, j, k) + at(i, j + 1, k));
                    add(i, j - 1, k, r);
                    add(i, j, k, -2.0 * r);
                    add(i, j + 1, k, r);
                }
                if (k >= 1 && k + 1 < dims[2]) {
                    Vec3 r = 2.0 * norm * (at(i, j, k - 1) - 2.0 * at(i, j, k) + at(i, j, k + 1));
                    add(i, j, k - 1, r);
                    add(i, j, k, -2.0 * r);
                    add(i, j, k + 1, r);
                }
                if (i >= 1 && i + 1 < dims[0] && j >= 1 && j + 1 < dims[1]) {
                    Vec3 d = 0.25 * (at(i + 1, j + 1, k) - at(i + 1, j - 1, k) - at(i - 1, j + 1, k) +
                                     at(i - 1, j - 1, k));
                    Vec3 r = 2.0 * 2.0 * norm * 0.25 * d;
                    add(i + 1, j + 1, k, r);
                    add(i + 1, j - 1, k, -r);
                    add(i - 1, j + 1, k, -r);
                    add(i - 1, j - 1, k, r);
                }
                if (i >= 1 && i + 1 < dims[0] && k >= 1 && k + 1 < dims[2]) {
                    Vec3 d = 0.25 * (at(i + 1, j, k + 1) - at(i + 1, j, k - 1) - at(i - 1, j, k + 1) +
                                     at(i - 1, j, k - 1));
                    Vec3 r = 2.0 * 2.0 * norm * 0.25 * d;
                    add(i + 1, j, k + 1, r);
                    add(i + 1, j, k - 1, -r);
                    add(i - 1, j, k + 1, -r);
                    add(i - 1, j, k - 1, r);
                }
                if (j >= 1 && j + 1 < dims[1] && k >= 1 && k + 1 < dims[2]) {
                    Vec3 d = 0.25 * (at(i, j + 1, k + 1) - at(i, j + 1, k - 1) - at(i, j - 1, k + 1) +
                                     at(i, j - 1, k - 1));
                    Vec3 r = 2.0 * 2.0 * norm * 0.25 * d;
                    add(i, j + 1, k + 1, r);
                    add(i, j + 1, k - 1, -r);
                    add(i, j - 1, k + 1, -r);
                    add(i, j - 1, k - 1, r);
                }
            }
    return grad;
}

} // namespace earcanal
