#pragma once

#include <cstdint>
#include <unordered_map>

#include "earcanal/grid.hpp"
#include "earcanal/marching_cubes_tables.hpp"
#include "earcanal/trimesh.hpp"

namespace earcanal {

namespace detail {

// Cell corner offsets (Bourke numbering).
inline constexpr int kMcCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                        {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};

// For each of the 12 cell edges: the lattice edge it lies on, as the offset
// of the edge's lower corner plus the edge axis. Shared edges get one key,
// so vertices are computed once and the mesh is crack-free.
inline constexpr int kMcEdgeOrigin[12][4] = {
    {0, 0, 0, 0}, {1, 0, 0, 1}, {0, 1, 0, 0}, {0, 0, 0, 1}, {0, 0, 1, 0}, {1, 0, 1, 1},
    {0, 1, 1, 0}, {0, 0, 1, 1}, {0, 0, 0, 2}, {1, 0, 0, 2}, {1, 1, 0, 2}, {0, 1, 0, 2},
};

} // namespace detail

// Marching-cubes triangulation of the given level set. Output triangles are
// wound so face normals point toward increasing field values (outward for a
// signed distance field).
inline TriMesh extract_isosurface(const ScalarField& field, double level) {
    const GridSpec& g = field.grid;
    double lo = *std::min_element(field.values.begin(), field.values.end());
    double hi = *std::max_element(field.values.begin(), field.values.end());
    if (level <= lo || level >= hi) throw EmptyLevelSet("level " + std::to_string(level) + " outside field range");

    TriMesh mesh;
    std::unordered_map<std::uint64_t, int> edge_vertex;
    auto edge_id = [&](int i, int j, int k, int axis) {
        return ((static_cast<std::uint64_t>(i) * 2048 + j) * 2048 + k) * 4 + axis;
    };
    auto vertex_on_edge = [&](int i, int j, int k, int axis) {
        std::uint64_t id = edge_id(i, j, k, axis);
        auto it = edge_vertex.find(id);
        if (it != edge_vertex.end()) return it->second;
        double v0 = field.at(i, j, k);
        int i1 = i + (axis == 0), j1 = j + (axis == 1), k1 = k + (axis == 2);
        double v1 = field.at(i1, j1, k1);
        double t = (level - v0) / (v1 - v0);
        t = std::clamp(t, 0.0, 1.0);
        Vec3 p = g.position(i, j, k) * (1.0 - t) + g.position(i1, j1, k1) * t;
        int idx = mesh.num_vertices();
        mesh.vertices.push_back(p);
        edge_vertex.emplace(id, idx);
        return idx;
    };

    double corner[8];
    int edge_vert[12];
    for (int k = 0; k + 1 < g.dims[2]; ++k)
        for (int j = 0; j + 1 < g.dims[1]; ++j)
            for (int i = 0; i + 1 < g.dims[0]; ++i) {
                int cube = 0;
                for (int c = 0; c < 8; ++c) {
                    corner[c] = field.at(i + detail::kMcCorner[c][0], j + detail::kMcCorner[c][1],
                                         k + detail::kMcCorner[c][2]);
                    if (corner[c] < level) cube |= 1 << c;
                }
                int edges = detail::kMcEdgeTable[cube];
                if (edges == 0) continue;
                for (int e = 0; e < 12; ++e)
                    if (edges & (1 << e))
                        edge_vert[e] = vertex_on_edge(i + detail::kMcEdgeOrigin[e][0], j + detail::kMcEdgeOrigin[e][1],
                                                      k + detail::kMcEdgeOrigin[e][2], detail::kMcEdgeOrigin[e][3]);
                for (const int* t = detail::kMcTriTable[cube]; *t != -1; t += 3) {
                    int a = edge_vert[t[0]], b = edge_vert[t[1]], c = edge_vert[t[2]];
                    if (a == b || b == c || a == c) continue; // collapsed sliver
                    mesh.faces.push_back({a, c, b});          // outward for value<level inside
                }
            }
    if (mesh.faces.empty()) throw EmptyLevelSet("no cell crosses the requested level");
    return mesh;
}

} // namespace earcanal
