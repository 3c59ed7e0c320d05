#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "earcanal/errors.hpp"
#include "earcanal/trimesh.hpp"

namespace earcanal {

// Cross-sectional area along the centerline, in SI units (m, m^2).
struct AreaFunction {
    std::vector<double> arc_length; // m, strictly increasing from 0
    std::vector<double> area;       // m^2

    void validate() const {
        if (arc_length.size() < 2 || arc_length.size() != area.size())
            throw InvalidSpec("area function needs >= 2 aligned samples");
        if (std::abs(arc_length.front()) > 1e-12) throw InvalidSpec("arc length must start at 0");
        for (std::size_t i = 1; i < arc_length.size(); ++i)
            if (arc_length[i] <= arc_length[i - 1]) throw InvalidSpec("arc length must be strictly increasing");
        for (double a : area)
            if (a <= 0.0) throw InvalidSpec("area must be positive");
    }

    double total_length() const { return arc_length.back(); }

    // piecewise-linear area lookup, clamped at the ends
    double area_at(double s) const {
        if (s <= arc_length.front()) return area.front();
        if (s >= arc_length.back()) return area.back();
        auto it = std::upper_bound(arc_length.begin(), arc_length.end(), s);
        std::size_t i = static_cast<std::size_t>(it - arc_length.begin());
        double t = (s - arc_length[i - 1]) / (arc_length[i] - arc_length[i - 1]);
        return area[i - 1] * (1.0 - t) + area[i] * t;
    }

    static AreaFunction uniform_tube(double length_m, double area_m2) {
        AreaFunction f;
        f.arc_length = {0.0, length_m};
        f.area = {area_m2, area_m2};
        return f;
    }
};

inline void save_area_csv(const AreaFunction& f, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw FileNotFound("cannot open " + path.string() + " for writing");
    out << "arclength_m,area_m2\n";
    char buf[80];
    for (std::size_t i = 0; i < f.arc_length.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", f.arc_length[i], f.area[i]);
        out << buf;
    }
}

inline AreaFunction load_area_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FileNotFound(path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("arclength_m,area_m2", 0) != 0)
        throw ParseError(path.string() + ": expected header arclength_m,area_m2");
    AreaFunction f;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        double s, a;
        if (std::sscanf(line.c_str(), "%lf,%lf", &s, &a) != 2)
            throw ParseError(path.string() + ":" + std::to_string(lineno));
        f.arc_length.push_back(s);
        f.area.push_back(a);
    }
    f.validate();
    return f;
}

namespace detail {

struct SectionLoop {
    std::vector<Vec3> points;
    Vec3 centroid = Vec3::Zero();
    double area = 0.0; // mm^2
};

// All closed polygons cut by the plane (point p, unit normal n) from faces
// whose vertices lie within `radius` of p.
inline std::vector<SectionLoop> slice_mesh(const TriMesh& mesh, const Vec3& p, const Vec3& n, double radius) {
    double offset = 0.0;
    std::vector<double> dist(mesh.vertices.size());
    for (int attempt = 0; attempt < 5; ++attempt) {
        bool on_plane = false;
        for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
            dist[i] = (mesh.vertices[i] - p).dot(n) - offset;
            if (std::abs(dist[i]) < 1e-9) on_plane = true;
        }
        if (!on_plane) break;
        offset += 1e-6 * radius; // nudge off exact vertex hits
    }

    double r2 = radius * radius;
    std::map<detail::EdgeKey, Vec3> crossing;
    std::map<detail::EdgeKey, std::vector<detail::EdgeKey>> adjacency;
    for (const Face& f : mesh.faces) {
        bool local = false;
        for (int k = 0; k < 3 && !local; ++k) local = (mesh.vertices[f[k]] - p).squaredNorm() < r2;
        if (!local) continue;
        detail::EdgeKey cut[3];
        int ncut = 0;
        for (int e = 0; e < 3; ++e) {
            int u = f[e], v = f[(e + 1) % 3];
            if ((dist[u] < 0) != (dist[v] < 0)) {
                detail::EdgeKey key = detail::edge_key(u, v);
                double t = dist[u] / (dist[u] - dist[v]);
                crossing.emplace(key, mesh.vertices[u] + t * (mesh.vertices[v] - mesh.vertices[u]));
                cut[ncut++] = key;
            }
        }
        if (ncut == 2) {
            adjacency[cut[0]].push_back(cut[1]);
            adjacency[cut[1]].push_back(cut[0]);
        }
    }

    // chain crossings into loops
    std::vector<SectionLoop> loops;
    std::map<detail::EdgeKey, bool> used;
    Vec3 u_axis = n.cross(std::abs(n[0]) < 0.9 ? Vec3::UnitX() : Vec3::UnitY()).normalized();
    Vec3 v_axis = n.cross(u_axis);
    for (const auto& [start, start_nb] : adjacency) {
        if (used[start]) continue;
        if (start_nb.size() != 2) continue; // open chain or non-manifold cut
        std::vector<detail::EdgeKey> chain;
        detail::EdgeKey prev = start;
        detail::EdgeKey cur = start;
        bool closed = false;
        while (true) {
            used[cur] = true;
            chain.push_back(cur);
            const auto& nb = adjacency[cur];
            if (nb.size() != 2) break;
            detail::EdgeKey next = nb[0] == prev ? nb[1] : nb[0];
            if (next == start) {
                closed = chain.size() >= 3;
                break;
            }
            if (used[next]) break;
            prev = cur;
            cur = next;
        }
        if (!closed) continue;
        SectionLoop loop;
        loop.points.reserve(chain.size());
        for (const auto& key : chain) loop.points.push_back(crossing[key]);
        // shoelace in the (u,v) plane basis
        double a2 = 0.0, cx = 0.0, cy = 0.0;
        std::vector<Eigen::Vector2d> q(chain.size());
        for (std::size_t i = 0; i < chain.size(); ++i)
            q[i] = {(loop.points[i] - p).dot(u_axis), (loop.points[i] - p).dot(v_axis)};
        for (std::size_t i = 0; i < q.size(); ++i) {
            const auto& a = q[i];
            const auto& b = q[(i + 1) % q.size()];
            double w = a[0] * b[1] - b[0] * a[1];
            a2 += w;
            cx += (a[0] + b[0]) * w;
            cy += (a[1] + b[1]) * w;
        }
        if (std::abs(a2) < 1e-12) continue;
        loop.area = 0.5 * std::abs(a2);
        cx /= 3.0 * a2;
        cy /= 3.0 * a2;
        loop.centroid = p + u_axis * cx + v_axis * cy;
        loops.push_back(std::move(loop));
    }
    return loops;
}

} // namespace detail

// Extracts the centerline and cross-sectional area of a capped tubular mesh
// by marching planes perpendicular to the running tangent from the entrance
// cap to the drum cap. The entrance is the larger-area end. Output in SI.
inline AreaFunction centerline_and_area(const TriMesh& mesh, int stations = 50,
                                        std::vector<Vec3>* centerline_mm = nullptr) {
    if (mesh.faces.empty()) throw EmptyMesh("centerline_and_area");

    // rough axis from vertex PCA
    Vec3 mean = Vec3::Zero();
    for (const Vec3& v : mesh.vertices) mean += v;
    mean /= mesh.num_vertices();
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const Vec3& v : mesh.vertices) cov += (v - mean) * (v - mean).transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    Vec3 axis = eig.eigenvectors().col(2); // largest eigenvalue
    int maxc = 0;
    axis.cwiseAbs().maxCoeff(&maxc);
    if (axis[maxc] < 0) axis = -axis; // deterministic sign

    double smin = std::numeric_limits<double>::max(), smax = std::numeric_limits<double>::lowest();
    for (const Vec3& v : mesh.vertices) {
        double s = (v - mean).dot(axis);
        smin = std::min(smin, s);
        smax = std::max(smax, s);
    }
    double extent = smax - smin;
    auto end_centroid = [&](bool low) {
        Vec3 c = Vec3::Zero();
        int n = 0;
        for (const Vec3& v : mesh.vertices) {
            double s = (v - mean).dot(axis);
            if (low ? (s < smin + 0.02 * extent) : (s > smax - 0.02 * extent)) {
                c += v;
                ++n;
            }
        }
        return Vec3(c / std::max(1, n));
    };
    Vec3 end_lo = end_centroid(true), end_hi = end_centroid(false);

    // probe both ends to decide which is the (larger) entrance
    double probe_r = 0.5 * extent;
    auto probe_area = [&](const Vec3& c, const Vec3& dir) {
        auto loops = detail::slice_mesh(mesh, c + dir * (0.05 * extent), dir, probe_r);
        double best_d = std::numeric_limits<double>::max();
        double a = 0.0;
        for (const auto& l : loops) {
            double d = (l.centroid - c).norm();
            if (d < best_d) {
                best_d = d;
                a = l.area;
            }
        }
        return a;
    };
    double area_lo = probe_area(end_lo, axis), area_hi = probe_area(end_hi, -axis);
    if (area_lo <= 0.0 && area_hi <= 0.0) throw NotTubular("no cross-section found near either end");

    Vec3 entrance = area_lo >= area_hi ? end_lo : end_hi;
    Vec3 drum_hint = area_lo >= area_hi ? end_hi : end_lo;
    Vec3 tangent = (area_lo >= area_hi ? axis : -axis);

    double r_est = std::sqrt(std::max(area_lo, area_hi) / std::numbers::pi);
    double step = extent / (1.5 * stations);

    std::vector<Vec3> centers;
    std::vector<double> areas_mm2;
    Vec3 p = entrance + tangent * std::max(1.5 * step, 0.02 * extent);
    Vec3 prev_center = entrance;
    const int max_stations = stations * 20;
    for (int it = 0; it < max_stations; ++it) {
        if ((drum_hint - p).dot(tangent) < 0.0) break; // overshot the far end
        auto loops = detail::slice_mesh(mesh, p, tangent, 6.0 * r_est + 2.0 * step);
        int local = 0;
        const detail::SectionLoop* pick = nullptr;
        double best_d = std::numeric_limits<double>::max();
        for (const auto& l : loops) {
            double d = (l.centroid - p).norm();
            if (d < 2.5 * r_est + step) {
                ++local;
                if (d < best_d) {
                    best_d = d;
                    pick = &l;
                }
            }
        }
        if (!pick) {
            if (!centers.empty()) break; // walked out through the drum cap
            throw NotTubular("empty cross-section while marching");
        }
        if (local > 1) throw NotTubular("disconnected cross-section while marching");
        // a steep drop of the equivalent radius means the plane is cutting an
        // end cap (cap cones shrink far faster than any plausible taper)
        double r_new = std::sqrt(pick->area / std::numbers::pi);
        if (!areas_mm2.empty() && r_est - r_new > 0.5 * step) break;
        centers.push_back(pick->centroid);
        areas_mm2.push_back(pick->area);
        r_est = std::sqrt(pick->area / std::numbers::pi);
        Vec3 heading = (pick->centroid - prev_center).normalized();
        tangent = (0.6 * tangent + 0.4 * heading).normalized();
        prev_center = pick->centroid;
        p = pick->centroid + tangent * step;
    }
    if (centers.size() < 3) throw NotTubular("tube too short to march");

    // cap centroids: vertex clusters just before the first / beyond the last
    // full cross-section
    Vec3 first_dir = (centers[1] - centers[0]).normalized();
    Vec3 last_dir = (centers[centers.size() - 1] - centers[centers.size() - 2]).normalized();
    auto cluster_centroid = [&](const Vec3& origin, const Vec3& dir, double r_loc, const Vec3& fallback) {
        Vec3 c = Vec3::Zero();
        int n = 0;
        for (const Vec3& v : mesh.vertices)
            if ((v - origin).dot(dir) > 0.25 * step && (v - origin).norm() < 4.0 * r_loc + 2.0 * step) {
                c += v;
                ++n;
            }
        return n > 0 ? Vec3(c / n) : fallback;
    };
    Vec3 entrance_pt =
        cluster_centroid(centers.front(), -first_dir, std::sqrt(areas_mm2.front() / std::numbers::pi), entrance);
    Vec3 drum_pt = cluster_centroid(centers.back(), last_dir, std::sqrt(areas_mm2.back() / std::numbers::pi), drum_hint);

    // extend to the cap centroids, carrying the neighboring areas
    std::vector<Vec3> line;
    line.push_back(entrance_pt);
    line.insert(line.end(), centers.begin(), centers.end());
    line.push_back(drum_pt);
    std::vector<double> areas;
    areas.push_back(areas_mm2.front());
    areas.insert(areas.end(), areas_mm2.begin(), areas_mm2.end());
    areas.push_back(areas_mm2.back());

    if (centerline_mm) *centerline_mm = line;

    AreaFunction f;
    f.arc_length.resize(line.size());
    f.area.resize(line.size());
    f.arc_length[0] = 0.0;
    for (std::size_t i = 1; i < line.size(); ++i)
        f.arc_length[i] = f.arc_length[i - 1] + (line[i] - line[i - 1]).norm() * 1e-3; // mm -> m
    for (std::size_t i = 0; i < areas.size(); ++i) f.area[i] = areas[i] * 1e-6;        // mm^2 -> m^2
    f.validate();
    return f;
}

} // namespace earcanal
