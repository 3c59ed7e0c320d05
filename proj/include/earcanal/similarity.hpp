#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "earcanal/grid.hpp"
#include "earcanal/transforms.hpp"

namespace earcanal {

struct RegistrationConfig {
    double lambda = 0.01;            // weight of the bending term
    double narrowband_width = 4.0;   // mm, band around the subject surface
    int pyramid_levels = 3;
    int max_iterations = 80;         // optimizer iterations per level
    double gradient_tolerance = 1e-5;
    double smoothing_sigma = 1.0;    // mm, intensity scale of both fields
    double ffd_spacing = 2.0;        // mm, finest lattice spacing (doubles per level)

    void validate() const {
        if (lambda < 0.0) throw InvalidSpec("lambda must be >= 0");
        if (narrowband_width <= 0.0) throw InvalidSpec("narrowband_width must be positive");
        if (pyramid_levels < 1) throw InvalidSpec("pyramid_levels must be >= 1");
        if (smoothing_sigma < 0.0) throw InvalidSpec("smoothing_sigma must be >= 0");
        if (ffd_spacing <= 0.0) throw InvalidSpec("ffd_spacing must be positive");
    }
};

// Pre-smoothed field pair plus the narrow band of the subject; the workhorse
// behind the l1 similarity and its gradients at one pyramid level.
struct SimilarityContext {
    ScalarField subject;   // smoothed, the fixed field whose band integrates M
    ScalarField reference; // smoothed, sampled through the transform
    std::vector<Vec3> band;

    static SimilarityContext build(const ScalarField& subject_raw, const ScalarField& reference_raw,
                                   const RegistrationConfig& config, bool presmoothed = false) {
        if (!subject_raw.grid.same_as(reference_raw.grid))
            throw GridMismatch("similarity fields must share a grid");
        SimilarityContext ctx;
        ctx.subject = presmoothed ? subject_raw : gaussian_smooth(subject_raw, config.smoothing_sigma);
        ctx.reference = presmoothed ? reference_raw : gaussian_smooth(reference_raw, config.smoothing_sigma);
        const GridSpec& g = ctx.subject.grid;
        for (int k = 0; k < g.dims[2]; ++k)
            for (int j = 0; j < g.dims[1]; ++j)
                for (int i = 0; i < g.dims[0]; ++i)
                    if (std::abs(ctx.subject.at(i, j, k)) < config.narrowband_width)
                        ctx.band.push_back(g.position(i, j, k));
        if (ctx.band.empty()) throw EmptyNarrowband("no voxel within the narrow band");
        return ctx;
    }

    // M = mean over the band of |S(x) - R(phi(x))|, phi = affine after FFD.
    double value(const AffineTransform& affine, const FfdTransform* ffd = nullptr) const {
        double sum = 0.0;
        for (const Vec3& x : band) {
            Vec3 y = ffd ? ffd->apply(x) : x;
            sum += std::abs(subject.sample(x) - reference.sample(affine.apply(y)));
        }
        return sum / static_cast<double>(band.size());
    }

    // Value plus gradient in the centered affine parameterization
    // phi(x) = Mc (x + u(x) - c) + c + t; layout: 9 row-major matrix entries
    // then 3 translations.
    double value_and_gradient_affine(const Eigen::Matrix3d& mc, const Vec3& t, const Vec3& center,
                                     const FfdTransform* ffd, Eigen::Matrix<double, 12, 1>& grad) const {
        grad.setZero();
        double sum = 0.0;
        for (const Vec3& x : band) {
            Vec3 y = (ffd ? ffd->apply(x) : x) - center;
            Vec3 phi = mc * y + center + t;
            Vec3 gref;
            double r = subject.sample(x) - reference.sample_with_gradient(phi, gref);
            sum += std::abs(r);
            double s = r > 0.0 ? -1.0 : (r < 0.0 ? 1.0 : 0.0); // d|r| = -sign(r) dR
            for (int a = 0; a < 3; ++a) {
                for (int m = 0; m < 3; ++m) grad[3 * a + m] += s * gref[a] * y[m];
                grad[9 + a] += s * gref[a];
            }
        }
        double inv = 1.0 / static_cast<double>(band.size());
        grad *= inv;
        return sum * inv;
    }

    // Value plus gradient with respect to every FFD control displacement,
    // with the affine held fixed.
    double value_and_gradient_ffd(const AffineTransform& affine, const FfdTransform& ffd,
                                  std::vector<Vec3>& grad) const {
        grad.assign(ffd.num_control_points(), Vec3::Zero());
        double sum = 0.0;
        for (const Vec3& x : band) {
            Vec3 phi = affine.apply(ffd.apply(x));
            Vec3 gref;
            double r = subject.sample(x) - reference.sample_with_gradient(phi, gref);
            sum += std::abs(r);
            double s = r > 0.0 ? -1.0 : (r < 0.0 ? 1.0 : 0.0);
            if (s == 0.0) continue;
            Vec3 g = affine.matrix.transpose() * gref * s;
            int base[3];
            double w[3][4];
            ffd.support(x, base, w);
            for (int c = 0; c < 4; ++c) {
                int kk = base[2] + c;
                if (kk < 0 || kk >= ffd.lattice_dims[2]) continue;
                for (int b = 0; b < 4; ++b) {
                    int jj = base[1] + b;
                    if (jj < 0 || jj >= ffd.lattice_dims[1]) continue;
                    double wcb = w[2][c] * w[1][b];
                    for (int a = 0; a < 4; ++a) {
                        int ii = base[0] + a;
                        if (ii < 0 || ii >= ffd.lattice_dims[0]) continue;
                        grad[ffd.index(ii, jj, kk)] += (wcb * w[0][a]) * g;
                    }
                }
            }
        }
        double inv = 1.0 / static_cast<double>(band.size());
        for (Vec3& g : grad) g *= inv;
        return sum * inv;
    }
};

// Spec operation: narrow-band l1 similarity of two SDFs under a transform.
inline double similarity_l1(const ScalarField& subject, const ScalarField& reference,
                            const AffineTransform& affine, const RegistrationConfig& config) {
    config.validate();
    return SimilarityContext::build(subject, reference, config).value(affine);
}

inline double similarity_l1(const ScalarField& subject, const ScalarField& reference, const AffineTransform& affine,
                            const FfdTransform& ffd, const RegistrationConfig& config) {
    config.validate();
    return SimilarityContext::build(subject, reference, config).value(affine, &ffd);
}

// Resamples the field through the registration map: out(x) = field(phi(x)),
// trilinear with border clamp, phi = affine applied after the FFD.
inline ScalarField resample_through_transform(const ScalarField& field, const AffineTransform* affine,
                                              const FfdTransform* ffd) {
    ScalarField out;
    out.grid = field.grid;
    out.values.assign(field.grid.num_voxels(), 0.0);
    const GridSpec& g = out.grid;
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i) {
                Vec3 x = g.position(i, j, k);
                if (ffd) x = ffd->apply(x);
                if (affine) x = affine->apply(x);
                out.at(i, j, k) = field.sample(x);
            }
    return out;
}

inline ScalarField resample_through_transform(const ScalarField& field, const AffineTransform& affine) {
    return resample_through_transform(field, &affine, nullptr);
}

inline ScalarField resample_through_transform(const ScalarField& field, const FfdTransform& ffd) {
    return resample_through_transform(field, nullptr, &ffd);
}

inline ScalarField resample_through_transform(const ScalarField& field, const AffineTransform& affine,
                                              const FfdTransform& ffd) {
    return resample_through_transform(field, &affine, &ffd);
}

} // namespace earcanal
