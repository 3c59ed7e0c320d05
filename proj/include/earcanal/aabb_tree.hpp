#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "earcanal/trimesh.hpp"

namespace earcanal {

struct ClosestPointResult {
    Vec3 point;
    int face = -1;
    double distance = 0.0;
};

// Closest point on triangle (a, b, c) to p. Ericson's region test.
inline Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    Vec3 ab = b - a, ac = c - a, ap = p - a;
    double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return a;

    Vec3 bp = p - b;
    double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return b;

    double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;

    Vec3 cp = p - c;
    double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return c;

    double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;

    double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
        return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);

    double denom = 1.0 / (va + vb + vc);
    return a + ab * (vb * denom) + ac * (vc * denom);
}

// Static axis-aligned BVH over mesh triangles. Median split on the longest
// axis of centroid extents, flat node storage, iterative traversal.
class AabbTree {
public:
    explicit AabbTree(const TriMesh& mesh) : mesh_(&mesh) {
        if (mesh.faces.empty()) throw EmptyMesh("AabbTree over empty mesh");
        order_.resize(mesh.faces.size());
        std::iota(order_.begin(), order_.end(), 0);
        centroids_.resize(mesh.faces.size());
        for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
            const Face& t = mesh.faces[f];
            centroids_[f] = (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]) / 3.0;
        }
        nodes_.reserve(2 * mesh.faces.size());
        build(0, static_cast<int>(order_.size()));
    }

    // Exact argmin over faces of point-triangle distance; ties go to the
    // lowest face index, matching a sequential exhaustive scan.
    ClosestPointResult closest_point(const Vec3& query) const {
        ClosestPointResult best;
        double best_d2 = std::numeric_limits<double>::max();
        int stack[64];
        int top = 0;
        stack[top++] = 0;
        while (top > 0) {
            const Node& node = nodes_[stack[--top]];
            if (box_distance2(node, query) > best_d2) continue;
            if (node.count > 0) {
                for (int i = node.begin; i < node.begin + node.count; ++i) {
                    int f = order_[i];
                    const Face& t = mesh_->faces[f];
                    Vec3 cp = closest_point_on_triangle(query, mesh_->vertices[t[0]], mesh_->vertices[t[1]],
                                                        mesh_->vertices[t[2]]);
                    double d2 = (cp - query).squaredNorm();
                    if (d2 < best_d2 || (d2 == best_d2 && f < best.face)) {
                        best_d2 = d2;
                        best.face = f;
                        best.point = cp;
                    }
                }
            } else {
                // visit nearer child first
                int l = node.left, r = node.begin;
                double dl = box_distance2(nodes_[l], query), dr = box_distance2(nodes_[r], query);
                if (dl > dr) std::swap(l, r);
                stack[top++] = r;
                stack[top++] = l;
            }
        }
        best.distance = std::sqrt(best_d2);
        return best;
    }

    // Number of triangles hit by the ray origin + t*dir, t > 0.
    int count_ray_hits(const Vec3& origin, const Vec3& dir) const {
        int hits = 0;
        Vec3 inv_dir(1.0 / dir[0], 1.0 / dir[1], 1.0 / dir[2]);
        int stack[64];
        int top = 0;
        stack[top++] = 0;
        while (top > 0) {
            const Node& node = nodes_[stack[--top]];
            if (!ray_hits_box(node, origin, inv_dir)) continue;
            if (node.count > 0) {
                for (int i = node.begin; i < node.begin + node.count; ++i) {
                    const Face& t = mesh_->faces[order_[i]];
                    if (ray_hits_triangle(origin, dir, mesh_->vertices[t[0]], mesh_->vertices[t[1]],
                                          mesh_->vertices[t[2]]))
                        ++hits;
                }
            } else {
                stack[top++] = node.left;
                stack[top++] = node.begin;
            }
        }
        return hits;
    }

private:
    struct Node {
        Vec3 lo, hi;
        int begin = 0; // leaf: face range start; inner: right child index
        int count = 0; // 0 for inner nodes
        int left = 0;  // inner: left child index (always this node + 1)
    };

    int build(int begin, int end) {
        int idx = static_cast<int>(nodes_.size());
        nodes_.push_back({});
        Vec3 lo = Vec3::Constant(std::numeric_limits<double>::max());
        Vec3 hi = Vec3::Constant(std::numeric_limits<double>::lowest());
        Vec3 clo = lo, chi = hi;
        for (int i = begin; i < end; ++i) {
            const Face& t = mesh_->faces[order_[i]];
            for (int k = 0; k < 3; ++k) {
                lo = lo.cwiseMin(mesh_->vertices[t[k]]);
                hi = hi.cwiseMax(mesh_->vertices[t[k]]);
            }
            clo = clo.cwiseMin(centroids_[order_[i]]);
            chi = chi.cwiseMax(centroids_[order_[i]]);
        }
        nodes_[idx].lo = lo;
        nodes_[idx].hi = hi;
        if (end - begin <= 4) {
            nodes_[idx].begin = begin;
            nodes_[idx].count = end - begin;
            return idx;
        }
        int axis = 0;
        Vec3 ext = chi - clo;
        if (ext[1] > ext[axis]) axis = 1;
        if (ext[2] > ext[axis]) axis = 2;
        int mid = (begin + end) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                         [&](int a, int b) { return centroids_[a][axis] < centroids_[b][axis]; });
        int l = build(begin, mid);
        int r = build(mid, end);
        nodes_[idx].left = l;
        nodes_[idx].begin = r;
        nodes_[idx].count = 0;
        return idx;
    }

    double box_distance2(const Node& n, const Vec3& p) const {
        double d2 = 0.0;
        for (int k = 0; k < 3; ++k) {
            double d = std::max({n.lo[k] - p[k], 0.0, p[k] - n.hi[k]});
            d2 += d * d;
        }
        return d2;
    }

    bool ray_hits_box(const Node& n, const Vec3& o, const Vec3& inv_dir) const {
        double tmin = 0.0, tmax = std::numeric_limits<double>::max();
        for (int k = 0; k < 3; ++k) {
            double t0 = (n.lo[k] - o[k]) * inv_dir[k];
            double t1 = (n.hi[k] - o[k]) * inv_dir[k];
            if (t0 > t1) std::swap(t0, t1);
            tmin = std::max(tmin, t0);
            tmax = std::min(tmax, t1);
            if (tmin > tmax) return false;
        }
        return true;
    }

    static bool ray_hits_triangle(const Vec3& o, const Vec3& d, const Vec3& a, const Vec3& b, const Vec3& c) {
        // Moller-Trumbore, no culling; near-parallel rays count as misses.
        Vec3 e1 = b - a, e2 = c - a;
        Vec3 pv = d.cross(e2);
        double det = e1.dot(pv);
        if (std::abs(det) < 1e-14) return false;
        double inv = 1.0 / det;
        Vec3 tv = o - a;
        double u = tv.dot(pv) * inv;
        if (u < 0.0 || u > 1.0) return false;
        Vec3 qv = tv.cross(e1);
        double v = d.dot(qv) * inv;
        if (v < 0.0 || u + v > 1.0) return false;
        double t = e2.dot(qv) * inv;
        return t > 0.0;
    }

    const TriMesh* mesh_;
    std::vector<int> order_;
    std::vector<Vec3> centroids_;
    std::vector<Node> nodes_;
};

// Spec operation: closest point on a mesh. Accelerated, with results
// identical to exhaustive search (same face, same distance).
inline ClosestPointResult closest_point(const TriMesh& mesh, const Vec3& query) {
    if (mesh.faces.empty()) throw EmptyMesh("closest_point on empty mesh");
    AabbTree tree(mesh);
    return tree.closest_point(query);
}

} // namespace earcanal
