#pragma once

#include <cmath>

#include "earcanal/aabb_tree.hpp"
#include "earcanal/grid.hpp"
#include "earcanal/parallel.hpp"
#include "earcanal/trimesh.hpp"

namespace earcanal {

// Least grid that covers the mesh with the given margin (in voxels) at the
// given isotropic spacing.
inline GridSpec grid_around(const TriMesh& mesh, double spacing_mm, int margin_voxels = 4) {
    Vec3 lo, hi;
    mesh.bounding_box(lo, hi);
    GridSpec g;
    g.spacing = Vec3::Constant(spacing_mm);
    g.origin = lo - Vec3::Constant(margin_voxels * spacing_mm);
    Vec3 span = hi + Vec3::Constant(margin_voxels * spacing_mm) - g.origin;
    for (int a = 0; a < 3; ++a) g.dims[a] = static_cast<int>(std::ceil(span[a] / spacing_mm)) + 1;
    return g;
}

// Signed distance to a closed mesh, sampled at every voxel center. Distance
// is the exact point-to-triangle Euclidean distance, negative inside. The
// inside test is ray parity along three skew directions with majority vote.
inline ScalarField signed_distance_field(const TriMesh& mesh, const GridSpec& grid) {
    grid.validate();
    if (!is_closed(mesh)) throw MeshNotClosed("signed_distance_field requires a closed mesh");
    Vec3 lo, hi;
    mesh.bounding_box(lo, hi);
    Vec3 margin = 2.0 * grid.spacing;
    if ((grid.origin.array() > (lo - margin).array()).any() ||
        (grid.max_corner().array() < (hi + margin).array()).any())
        throw GridTooSmall("grid must contain the mesh with a margin of at least 2 voxels");

    AabbTree tree(mesh);
    // Skew directions avoid rays grazing the axis-aligned features of
    // lattice-like meshes.
    const Vec3 ray_dirs[3] = {Vec3(0.976, 0.173, 0.131).normalized(), Vec3(0.152, 0.965, 0.212).normalized(),
                              Vec3(0.118, 0.204, 0.972).normalized()};

    ScalarField field;
    field.grid = grid;
    field.values.assign(grid.num_voxels(), 0.0);
    std::size_t nx = grid.dims[0], nxy = nx * grid.dims[1];
    parallel_for(grid.num_voxels(), [&](std::size_t idx) {
        int k = static_cast<int>(idx / nxy);
        int j = static_cast<int>((idx - k * nxy) / nx);
        int i = static_cast<int>(idx - k * nxy - j * nx);
        Vec3 p = grid.position(i, j, k);
        double d = tree.closest_point(p).distance;
        int votes = 0;
        for (const Vec3& dir : ray_dirs)
            if (tree.count_ray_hits(p, dir) % 2 == 1) ++votes;
        field.values[idx] = votes >= 2 ? -d : d;
    });
    return field;
}

} // namespace earcanal
