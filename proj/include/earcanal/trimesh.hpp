#pragma once

#include <array>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "earcanal/errors.hpp"

namespace earcanal {

using Vec3 = Eigen::Vector3d;
using Face = std::array<int, 3>;

// Triangle surface in millimeters, optionally open (boundary loops present).
struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;

    int num_vertices() const { return static_cast<int>(vertices.size()); }
    int num_faces() const { return static_cast<int>(faces.size()); }

    Vec3 face_normal(int f) const {
        const Face& t = faces[f];
        return (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]);
    }

    double face_area(int f) const { return 0.5 * face_normal(f).norm(); }

    void bounding_box(Vec3& lo, Vec3& hi) const {
        lo = Vec3::Constant(std::numeric_limits<double>::max());
        hi = Vec3::Constant(std::numeric_limits<double>::lowest());
        for (const Vec3& v : vertices) {
            lo = lo.cwiseMin(v);
            hi = hi.cwiseMax(v);
        }
    }
};

namespace detail {

struct EdgeKey {
    int a, b; // a < b
    bool operator<(const EdgeKey& o) const { return a != o.a ? a < o.a : b < o.b; }
    bool operator==(const EdgeKey& o) const { return a == o.a && b == o.b; }
};

inline EdgeKey edge_key(int u, int v) { return u < v ? EdgeKey{u, v} : EdgeKey{v, u}; }

} // namespace detail

// Edges incident to exactly one face, as directed half-edges (in face winding
// order, so loops inherit the surface orientation).
inline std::vector<std::pair<int, int>> boundary_half_edges(const TriMesh& mesh) {
    std::map<detail::EdgeKey, int> incidence;
    for (const Face& f : mesh.faces)
        for (int e = 0; e < 3; ++e) incidence[detail::edge_key(f[e], f[(e + 1) % 3])]++;
    std::vector<std::pair<int, int>> halves;
    for (const Face& f : mesh.faces)
        for (int e = 0; e < 3; ++e) {
            int u = f[e], v = f[(e + 1) % 3];
            if (incidence[detail::edge_key(u, v)] == 1) halves.emplace_back(u, v);
        }
    return halves;
}

// Closed loops of boundary edges. Each loop is a cyclic vertex sequence.
// Throws NonSimpleLoop if a boundary vertex has more than one outgoing
// boundary edge (non-manifold rim) or a loop revisits a vertex.
inline std::vector<std::vector<int>> boundary_loops(const TriMesh& mesh) {
    auto halves = boundary_half_edges(mesh);
    std::unordered_map<int, int> next;
    for (auto [u, v] : halves) {
        if (next.count(u)) throw NonSimpleLoop("boundary vertex " + std::to_string(u) + " has two outgoing edges");
        next[u] = v;
    }
    std::vector<std::vector<int>> loops;
    std::set<int> visited;
    for (auto [u, v] : halves) {
        if (visited.count(u)) continue;
        std::vector<int> loop;
        int cur = u;
        while (true) {
            if (visited.count(cur)) throw NonSimpleLoop("boundary loop revisits vertex " + std::to_string(cur));
            visited.insert(cur);
            loop.push_back(cur);
            auto it = next.find(cur);
            if (it == next.end()) throw NonSimpleLoop("open boundary chain at vertex " + std::to_string(cur));
            cur = it->second;
            if (cur == u) break;
        }
        loops.push_back(std::move(loop));
    }
    return loops;
}

inline bool is_closed(const TriMesh& mesh) { return boundary_half_edges(mesh).empty(); }

// V - E + F over unique undirected edges.
inline int euler_characteristic(const TriMesh& mesh) {
    std::set<detail::EdgeKey> edges;
    for (const Face& f : mesh.faces)
        for (int e = 0; e < 3; ++e) edges.insert(detail::edge_key(f[e], f[(e + 1) % 3]));
    return mesh.num_vertices() - static_cast<int>(edges.size()) + mesh.num_faces();
}

// Checks face index ranges and rejects degenerate faces (area <= 1e-12 mm^2).
inline void validate_mesh(const TriMesh& mesh) {
    for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
        const Face& f = mesh.faces[i];
        for (int k = 0; k < 3; ++k)
            if (f[k] < 0 || f[k] >= mesh.num_vertices())
                throw IndexOutOfRange("face " + std::to_string(i) + " references vertex " + std::to_string(f[k]) +
                                      " of " + std::to_string(mesh.num_vertices()));
        if (mesh.face_area(static_cast<int>(i)) <= 1e-12)
            throw ParseError("degenerate face " + std::to_string(i));
    }
}

// Closes every boundary loop with a triangle fan around the loop centroid.
// Loop orientation is the reverse of the boundary half-edges so the caps
// keep the outward orientation of the surrounding surface.
inline TriMesh cap_open_boundaries(const TriMesh& mesh) {
    auto loops = boundary_loops(mesh);
    if (loops.empty()) return mesh;
    TriMesh out = mesh;
    for (const auto& loop : loops) {
        Vec3 centroid = Vec3::Zero();
        for (int v : loop) centroid += mesh.vertices[v];
        centroid /= static_cast<double>(loop.size());
        int c = out.num_vertices();
        out.vertices.push_back(centroid);
        int n = static_cast<int>(loop.size());
        for (int i = 0; i < n; ++i) {
            // Boundary half-edges run with the face winding; the cap must be
            // wound against them to face outward.
            out.faces.push_back({loop[(i + 1) % n], loop[i], c});
        }
    }
    return out;
}

// --- ASCII OBJ (v/f records) -------------------------------------------------

inline TriMesh load_obj(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FileNotFound(path.string());
    TriMesh mesh;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag)) continue;
        if (tag == "v") {
            Vec3 v;
            if (!(ss >> v[0] >> v[1] >> v[2]))
                throw ParseError(path.string() + ":" + std::to_string(lineno) + ": bad vertex record");
            mesh.vertices.push_back(v);
        } else if (tag == "f") {
            std::vector<int> idx;
            std::string tok;
            while (ss >> tok) {
                // accept "i", "i/t", "i/t/n", "i//n"; use the vertex index only
                std::size_t slash = tok.find('/');
                std::string head = slash == std::string::npos ? tok : tok.substr(0, slash);
                int i = 0;
                try {
                    i = std::stoi(head);
                } catch (const std::exception&) {
                    throw ParseError(path.string() + ":" + std::to_string(lineno) + ": bad face index '" + tok + "'");
                }
                if (i <= 0 || i > mesh.num_vertices())
                    throw IndexOutOfRange(path.string() + ":" + std::to_string(lineno) + ": face index " + head +
                                          " over " + std::to_string(mesh.num_vertices()) + " vertices");
                idx.push_back(i - 1);
            }
            if (idx.size() < 3)
                throw ParseError(path.string() + ":" + std::to_string(lineno) + ": face with fewer than 3 vertices");
            for (std::size_t k = 2; k < idx.size(); ++k)
                mesh.faces.push_back({idx[0], idx[static_cast<int>(k) - 1], idx[static_cast<int>(k)]});
        }
        // other record types (vn, vt, comments, groups) are ignored
    }
    return mesh;
}

inline void save_obj(const TriMesh& mesh, const std::filesystem::path& path) {
    std::filesystem::path dir = path.parent_path();
    if (!dir.empty() && !std::filesystem::exists(dir)) throw FileNotFound("directory " + dir.string());
    std::ofstream out(path);
    if (!out) throw FileNotFound("cannot open " + path.string() + " for writing");
    char buf[128];
    for (const Vec3& v : mesh.vertices) {
        std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", v[0], v[1], v[2]);
        out << buf;
    }
    for (const Face& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

} // namespace earcanal
