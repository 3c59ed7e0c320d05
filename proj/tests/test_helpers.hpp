#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "earcanal/aabb_tree.hpp"
#include "earcanal/trimesh.hpp"

namespace testutil {

using earcanal::Face;
using earcanal::TriMesh;
using earcanal::Vec3;

inline double urand(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline TriMesh make_uv_sphere(const Vec3& center, double radius, int slices = 32, int stacks = 16) {
    TriMesh m;
    m.vertices.push_back(center + Vec3(0, 0, radius)); // north pole
    for (int s = 1; s < stacks; ++s) {
        double phi = std::numbers::pi * s / stacks;
        for (int t = 0; t < slices; ++t) {
            double theta = 2.0 * std::numbers::pi * t / slices;
            m.vertices.push_back(center + radius * Vec3(std::sin(phi) * std::cos(theta),
                                                        std::sin(phi) * std::sin(theta), std::cos(phi)));
        }
    }
    m.vertices.push_back(center + Vec3(0, 0, -radius)); // south pole
    auto ring = [&](int s, int t) { return 1 + (s - 1) * slices + (t % slices); };
    for (int t = 0; t < slices; ++t) m.faces.push_back({0, ring(1, t), ring(1, t + 1)});
    for (int s = 1; s + 1 < stacks; ++s)
        for (int t = 0; t < slices; ++t) {
            m.faces.push_back({ring(s, t), ring(s + 1, t), ring(s, t + 1)});
            m.faces.push_back({ring(s, t + 1), ring(s + 1, t), ring(s + 1, t + 1)});
        }
    int south = m.num_vertices() - 1;
    for (int t = 0; t < slices; ++t) m.faces.push_back({south, ring(stacks - 1, t + 1), ring(stacks - 1, t)});
    return m;
}

// open tube along +z, no caps (two boundary loops)
inline TriMesh make_open_cylinder(double radius, double length, int slices = 24, int rings = 12) {
    TriMesh m;
    for (int r = 0; r <= rings; ++r)
        for (int t = 0; t < slices; ++t) {
            double theta = 2.0 * std::numbers::pi * t / slices;
            m.vertices.push_back(
                Vec3(radius * std::cos(theta), radius * std::sin(theta), length * r / rings));
        }
    auto idx = [&](int r, int t) { return r * slices + (t % slices); };
    for (int r = 0; r < rings; ++r)
        for (int t = 0; t < slices; ++t) {
            m.faces.push_back({idx(r, t), idx(r, t + 1), idx(r + 1, t)});
            m.faces.push_back({idx(r, t + 1), idx(r + 1, t + 1), idx(r + 1, t)});
        }
    return m;
}

inline earcanal::ClosestPointResult brute_force_closest(const TriMesh& mesh, const Vec3& q) {
    earcanal::ClosestPointResult best;
    double best_d2 = std::numeric_limits<double>::max();
    for (int f = 0; f < mesh.num_faces(); ++f) {
        const Face& t = mesh.faces[f];
        Vec3 cp = earcanal::closest_point_on_triangle(q, mesh.vertices[t[0]], mesh.vertices[t[1]],
                                                      mesh.vertices[t[2]]);
        double d2 = (cp - q).squaredNorm();
        if (d2 < best_d2) {
            best_d2 = d2;
            best.face = f;
            best.point = cp;
        }
    }
    best.distance = std::sqrt(best_d2);
    return best;
}

// Independent inside test: single-ray parity by scanning every triangle.
inline bool brute_force_inside(const TriMesh& mesh, const Vec3& p, const Vec3& dir) {
    int hits = 0;
    for (const Face& f : mesh.faces) {
        const Vec3 &a = mesh.vertices[f[0]], &b = mesh.vertices[f[1]], &c = mesh.vertices[f[2]];
        Vec3 e1 = b - a, e2 = c - a, pv = dir.cross(e2);
        double det = e1.dot(pv);
        if (std::abs(det) < 1e-14) continue;
        double inv = 1.0 / det;
        Vec3 tv = p - a;
        double u = tv.dot(pv) * inv;
        if (u < 0.0 || u > 1.0) continue;
        Vec3 qv = tv.cross(e1);
        double v = dir.dot(qv) * inv;
        if (v < 0.0 || u + v > 1.0) continue;
        if (e2.dot(qv) * inv > 0.0) ++hits;
    }
    return hits % 2 == 1;
}

// max over sample vertices of distance to the other mesh, both directions
inline double sampled_hausdorff(const TriMesh& a, const TriMesh& b) {
    earcanal::AabbTree ta(a), tb(b);
    double h = 0.0;
    for (const Vec3& v : a.vertices) h = std::max(h, tb.closest_point(v).distance);
    for (const Vec3& v : b.vertices) h = std::max(h, ta.closest_point(v).distance);
    return h;
}

inline double signed_volume(const TriMesh& m) {
    double v6 = 0.0;
    for (const Face& f : m.faces)
        v6 += m.vertices[f[0]].dot(m.vertices[f[1]].cross(m.vertices[f[2]]));
    return v6 / 6.0;
}

} // namespace testutil
