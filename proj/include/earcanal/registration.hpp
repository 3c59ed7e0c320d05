#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "earcanal/similarity.hpp"

namespace earcanal {

namespace detail {

struct DescentOptions {
    int max_iterations = 80;
    double gradient_tolerance = 1e-5;
    double initial_step = 1.0;
    Eigen::VectorXd preconditioner; // diagonal scaling of the step; empty = identity
};

struct DescentResult {
    Eigen::VectorXd x;
    double objective = 0.0;
    int accepted_steps = 0;
    std::vector<double> history; // objective after each accepted step
};

// Plain gradient descent with Armijo backtracking. The objective callback
// fills the gradient and returns the value. Accepted steps never increase
// the objective.
inline DescentResult minimize(Eigen::VectorXd x,
                              const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>& objective,
                              const DescentOptions& opts) {
    DescentResult res;
    Eigen::VectorXd grad(x.size()), trial_grad(x.size());
    double f = objective(x, grad);
    res.history.push_back(f);
    double step = opts.initial_step;
    const double c1 = 1e-4;
    for (int it = 0; it < opts.max_iterations; ++it) {
        Eigen::VectorXd dir = opts.preconditioner.size() ? (opts.preconditioner.asDiagonal() * grad).eval() : grad;
        double slope = grad.dot(dir);
        if (slope <= 0.0 || grad.lpNorm<Eigen::Infinity>() < opts.gradient_tolerance) break;
        bool accepted = false;
        for (int bt = 0; bt < 40; ++bt) {
            Eigen::VectorXd trial = x - step * dir;
            double ft = objective(trial, trial_grad);
            if (ft <= f - c1 * step * slope) {
                x = std::move(trial);
                grad = trial_grad;
                if (bt == 0) step *= 1.5;
                double drop = f - ft;
                f = ft;
                res.history.push_back(f);
                ++res.accepted_steps;
                accepted = true;
                if (drop < 1e-14 * (1.0 + std::abs(f))) it = opts.max_iterations; // stagnated
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
    }
    res.x = std::move(x);
    res.objective = f;
    return res;
}

// Smoothed multiresolution pyramid, finest last.
inline std::vector<std::pair<ScalarField, ScalarField>> field_pyramid(const ScalarField& subject,
                                                                      const ScalarField& reference,
                                                                      const RegistrationConfig& config) {
    std::vector<std::pair<ScalarField, ScalarField>> levels(config.pyramid_levels);
    levels.back() = {gaussian_smooth(subject, config.smoothing_sigma),
                     gaussian_smooth(reference, config.smoothing_sigma)};
    for (int l = config.pyramid_levels - 2; l >= 0; --l)
        levels[l] = {downsample2(levels[l + 1].first), downsample2(levels[l + 1].second)};
    return levels;
}

} // namespace detail

// Affine registration of two SDFs sharing a grid: multiresolution gradient
// descent on the narrow-band l1 similarity over the 12 affine parameters.
// The returned transform satisfies M(result) <= M(identity).
inline AffineTransform register_affine(const ScalarField& subject, const ScalarField& reference,
                                       const RegistrationConfig& config,
                                       std::vector<double>* objective_history = nullptr) {
    config.validate();
    if (!subject.grid.same_as(reference.grid)) throw GridMismatch("register_affine fields must share a grid");
    auto pyramid = detail::field_pyramid(subject, reference, config);

    Vec3 center = 0.5 * (subject.grid.origin + subject.grid.max_corner());
    Eigen::VectorXd params = Eigen::VectorXd::Zero(12); // Mc - I (9), t (3)

    for (int level = 0; level < config.pyramid_levels; ++level) {
        SimilarityContext ctx = SimilarityContext::build(pyramid[level].first, pyramid[level].second, config,
                                                         /*presmoothed=*/true);
        double s2 = 0.0;
        for (const Vec3& x : ctx.band) s2 += (x - center).squaredNorm();
        s2 /= static_cast<double>(ctx.band.size());

        Eigen::VectorXd precond(12);
        precond.head(9).setConstant(3.0 / s2); // matrix entries see |x-c|^2 leverage
        precond.tail(3).setConstant(1.0);

        auto objective = [&](const Eigen::VectorXd& p, Eigen::VectorXd& grad) {
            Eigen::Matrix3d mc = Eigen::Matrix3d::Identity() + Eigen::Map<const Eigen::Matrix3d>(p.data()).transpose();
            Vec3 t(p[9], p[10], p[11]);
            Eigen::Matrix<double, 12, 1> g12;
            double f = ctx.value_and_gradient_affine(mc, t, center, nullptr, g12);
            grad = g12;
            return f;
        };

        detail::DescentOptions opts;
        opts.max_iterations = config.max_iterations;
        opts.gradient_tolerance = config.gradient_tolerance;
        opts.preconditioner = precond;
        detail::DescentResult res = detail::minimize(params, objective, opts);
        if (level == 0 && res.accepted_steps == 0 && res.history.front() > 1e-9) {
            Eigen::VectorXd g(12);
            objective(params, g);
            if (g.lpNorm<Eigen::Infinity>() > 10.0 * config.gradient_tolerance)
                throw NoDescent("affine optimizer cannot reduce M at the coarsest level");
        }
        if (objective_history)
            objective_history->insert(objective_history->end(), res.history.begin(), res.history.end());
        params = res.x;
    }

    Eigen::Matrix3d mc = Eigen::Matrix3d::Identity() + Eigen::Map<const Eigen::Matrix3d>(params.data()).transpose();
    Vec3 t(params[9], params[10], params[11]);
    AffineTransform out;
    out.matrix = mc;
    out.translation = center + t - mc * center;

    // contract: never worse than the identity on the finest level
    SimilarityContext fine = SimilarityContext::build(pyramid.back().first, pyramid.back().second, config, true);
    if (fine.value(out) > fine.value(AffineTransform::identity())) return AffineTransform::identity();
    return out;
}

// Nonrigid registration: minimizes M + lambda * bending_energy over the
// control displacements of a B-spline lattice, multiresolution in both grid
// and lattice spacing (halving each level), starting from the given affine.
inline FfdTransform register_ffd(const ScalarField& subject, const ScalarField& reference,
                                 const AffineTransform& init, const RegistrationConfig& config,
                                 std::vector<double>* objective_history = nullptr) {
    config.validate();
    if (!subject.grid.same_as(reference.grid)) throw GridMismatch("register_ffd fields must share a grid");
    auto pyramid = detail::field_pyramid(subject, reference, config);

    Vec3 lo = subject.grid.origin, hi = subject.grid.max_corner();
    double coarsest = config.ffd_spacing * std::pow(2.0, config.pyramid_levels - 1);
    FfdTransform ffd = FfdTransform::covering(lo, hi, Vec3::Constant(coarsest));

    for (int level = 0; level < config.pyramid_levels; ++level) {
        if (level > 0) ffd = subdivide(ffd);
        SimilarityContext ctx =
            SimilarityContext::build(pyramid[level].first, pyramid[level].second, config, true);

        std::size_t n = ffd.num_control_points();
        auto objective = [&](const Eigen::VectorXd& p, Eigen::VectorXd& grad) {
            FfdTransform trial = ffd;
            for (std::size_t c = 0; c < n; ++c) trial.displacements[c] = p.segment<3>(3 * c);
            std::vector<Vec3> gm;
            double m = ctx.value_and_gradient_ffd(init, trial, gm);
            double bend = bending_energy(trial);
            std::vector<Vec3> gb = bending_energy_gradient(trial);
            grad.resize(p.size());
            for (std::size_t c = 0; c < n; ++c)
                grad.segment<3>(3 * c) = gm[c] + config.lambda * gb[c];
            return m + config.lambda * bend;
        };

        Eigen::VectorXd p0(3 * n);
        for (std::size_t c = 0; c < n; ++c) p0.segment<3>(3 * c) = ffd.displacements[c];

        detail::DescentOptions opts;
        opts.max_iterations = config.max_iterations;
        opts.gradient_tolerance = config.gradient_tolerance;
        opts.initial_step = ffd.lattice_spacing[0]; // step in mm per unit gradient
        detail::DescentResult res = detail::minimize(p0, objective, opts);
        if (level == 0 && res.accepted_steps == 0 && res.history.front() > 1e-9) {
            Eigen::VectorXd g(3 * n);
            objective(p0, g);
            if (g.lpNorm<Eigen::Infinity>() > 10.0 * config.gradient_tolerance)
                throw NoDescent("ffd optimizer cannot reduce the objective at the coarsest level");
        }
        if (objective_history)
            objective_history->insert(objective_history->end(), res.history.begin(), res.history.end());
        for (std::size_t c = 0; c < n; ++c) ffd.displacements[c] = res.x.segment<3>(3 * c);
    }

    // contract: final objective never exceeds the affine-only start
    SimilarityContext fine = SimilarityContext::build(pyramid.back().first, pyramid.back().second, config, true);
    FfdTransform zero = ffd;
    for (Vec3& d : zero.displacements) d.setZero();
    double f_final = fine.value(init, &ffd) + config.lambda * bending_energy(ffd);
    double f_zero = fine.value(init, &zero);
    return f_final <= f_zero ? ffd : zero;
}

} // namespace earcanal
