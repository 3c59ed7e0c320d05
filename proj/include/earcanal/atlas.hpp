#pragma once

#include <functional>
#include <limits>
#include <mutex>
#include <string>
#include <vector>

#include "earcanal/parallel.hpp"
#include "earcanal/registration.hpp"
#include "earcanal/sdf.hpp"
#include "earcanal/trimesh.hpp"

namespace earcanal {

struct AtlasConfig {
    RegistrationConfig registration;
    double grid_spacing = 0.5;      // mm, common SDF grid
    int max_outer_iterations = 10;
    double vertex_tolerance = 0.05; // mm, mean template vertex update
};

struct AtlasResult {
    TriMesh template_mesh;
    std::vector<AffineTransform> per_subject_affine;
    std::vector<FfdTransform> per_subject_ffd;
    std::vector<double> convergence_history; // mean vertex update per iteration, mm
};

// One groupwise update: maps every template vertex through each subject's
// transform and replaces it by the population mean, which zeroes the mean
// displacement at every vertex by construction.
struct GroupwiseUpdate {
    std::vector<Vec3> new_vertices;
    std::vector<std::vector<Vec3>> mapped; // [subject][vertex]
    double mean_update = 0.0;              // mm
};

inline GroupwiseUpdate groupwise_vertex_update(const std::vector<Vec3>& vertices,
                                               const std::vector<AffineTransform>& affines,
                                               const std::vector<FfdTransform>& ffds) {
    GroupwiseUpdate up;
    std::size_t n_subj = affines.size();
    up.mapped.resize(n_subj);
    for (std::size_t i = 0; i < n_subj; ++i) {
        up.mapped[i].resize(vertices.size());
        for (std::size_t v = 0; v < vertices.size(); ++v)
            up.mapped[i][v] = apply_transform(affines[i], ffds[i], vertices[v]);
    }
    up.new_vertices.resize(vertices.size());
    for (std::size_t v = 0; v < vertices.size(); ++v) {
        Vec3 mean = Vec3::Zero();
        for (std::size_t i = 0; i < n_subj; ++i) mean += up.mapped[i][v];
        mean /= static_cast<double>(n_subj);
        up.new_vertices[v] = mean;
        up.mean_update += (mean - vertices[v]).norm();
    }
    up.mean_update /= static_cast<double>(vertices.size());
    return up;
}

// Iterative groupwise template construction. The template starts as the
// (capped) first subject; each outer iteration registers it to every
// subject (affine, then FFD), moves every template vertex to the population
// mean of its mapped positions, and rebuilds the template SDF. Stops when
// the mean vertex update drops below tolerance.
inline AtlasResult build_atlas(const std::vector<TriMesh>& surfaces, const AtlasConfig& config,
                               const std::function<void(const std::string&)>& log = {}) {
    if (surfaces.size() < 2) throw InvalidSpec("atlas needs a population of at least 2 surfaces");
    config.registration.validate();

    std::vector<TriMesh> capped(surfaces.size());
    for (std::size_t i = 0; i < surfaces.size(); ++i) capped[i] = cap_open_boundaries(surfaces[i]);

    // one grid for the whole population, wide enough for band + smoothing
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::max());
    Vec3 hi = Vec3::Constant(std::numeric_limits<double>::lowest());
    for (const TriMesh& m : capped) {
        Vec3 l, h;
        m.bounding_box(l, h);
        lo = lo.cwiseMin(l);
        hi = hi.cwiseMax(h);
    }
    double margin_mm = config.registration.narrowband_width + 3.0 * config.registration.smoothing_sigma +
                       2.0 * config.grid_spacing;
    GridSpec grid;
    grid.spacing = Vec3::Constant(config.grid_spacing);
    grid.origin = lo - Vec3::Constant(margin_mm);
    for (int a = 0; a < 3; ++a)
        grid.dims[a] = static_cast<int>(std::ceil((hi[a] - lo[a] + 2.0 * margin_mm) / config.grid_spacing)) + 1;

    std::vector<ScalarField> subject_sdf(capped.size());
    for (std::size_t i = 0; i < capped.size(); ++i) subject_sdf[i] = signed_distance_field(capped[i], grid);

    AtlasResult result;
    result.template_mesh = capped[0];
    result.per_subject_affine.resize(capped.size());
    result.per_subject_ffd.resize(capped.size());

    ScalarField template_sdf = subject_sdf[0];
    double prev_update = std::numeric_limits<double>::max();
    int growth_streak = 0;

    for (int outer = 0; outer < config.max_outer_iterations; ++outer) {
        // register template to every subject; subjects are independent
        std::vector<AffineTransform> affines(capped.size());
        std::vector<FfdTransform> ffds(capped.size());
        std::exception_ptr failure;
        std::mutex failure_mutex;
        parallel_for(
            capped.size(),
            [&](std::size_t i) {
                try {
                    affines[i] = register_affine(template_sdf, subject_sdf[i], config.registration);
                    ffds[i] = register_ffd(template_sdf, subject_sdf[i], affines[i], config.registration);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            },
            1);
        if (failure) std::rethrow_exception(failure);

        GroupwiseUpdate up = groupwise_vertex_update(result.template_mesh.vertices, affines, ffds);
        result.template_mesh.vertices = up.new_vertices;
        result.per_subject_affine = std::move(affines);
        result.per_subject_ffd = std::move(ffds);
        result.convergence_history.push_back(up.mean_update);
        if (log) log("atlas_iter=" + std::to_string(outer) + " mean_update_mm=" + std::to_string(up.mean_update));

        if (up.mean_update < config.vertex_tolerance) break;
        if (up.mean_update > prev_update) {
            if (++growth_streak >= 2) throw Diverged("mean vertex update grew twice in a row");
        } else {
            growth_streak = 0;
        }
        prev_update = up.mean_update;

        if (static_cast<std::size_t>(outer) + 1 < static_cast<std::size_t>(config.max_outer_iterations))
            template_sdf = signed_distance_field(result.template_mesh, grid);
    }
    return result;
}

} // namespace earcanal
