#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "earcanal/errors.hpp"
#include "earcanal/trimesh.hpp"

namespace earcanal {

// Parametric stand-in for a segmented ear canal: a tapering elliptic tube
// with two bends and a slanted terminal cap, open at the entrance.
struct CanalSpec {
    double length = 27.0;           // mm of centerline arc
    double entrance_radius = 4.0;   // mm
    double drum_radius = 2.6;       // mm
    double bend_angles[2] = {22.0, 18.0};   // degrees
    double bend_positions[2] = {0.33, 0.66}; // arc-length fractions
    double ellipticity = 1.25;      // major/minor axis ratio
    double noise_amplitude = 0.0;   // mm, bound on radial jitter

    void validate() const {
        if (length <= 0.0) throw InvalidSpec("length must be positive");
        if (entrance_radius <= 0.0 || drum_radius <= 0.0) throw InvalidSpec("radii must be positive");
        if (!(bend_positions[0] > 0.0 && bend_positions[0] < bend_positions[1] && bend_positions[1] < 1.0))
            throw InvalidSpec("bend_positions must be strictly increasing within (0,1)");
        if (ellipticity < 1.0) throw InvalidSpec("ellipticity must be >= 1");
        if (noise_amplitude < 0.0) throw InvalidSpec("noise_amplitude must be >= 0");
    }
};

namespace detail {

// Deterministic uniform double in [0,1); bit pattern independent of the
// standard library's distribution implementations.
inline double rand_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double smoothstep(double x) {
    x = std::clamp(x, 0.0, 1.0);
    return x * x * (3.0 - 2.0 * x);
}

} // namespace detail

// Centerline of a canal spec, sampled at `n` stations (arc-length uniform).
// The tube starts at the origin along +z; each bend rotates the tangent
// smoothly over a short transition zone, the two bends about skew axes.
inline std::vector<Vec3> canal_centerline(const CanalSpec& spec, int n = 200) {
    spec.validate();
    const double deg = std::numbers::pi / 180.0;
    double w = 0.08; // transition half-width, fraction of arc length
    std::vector<Vec3> pts;
    pts.reserve(n + 1);
    Vec3 p = Vec3::Zero();
    pts.push_back(p);
    double ds = spec.length / n;
    for (int s = 0; s < n; ++s) {
        double frac = (s + 0.5) / n;
        double a1 = spec.bend_angles[0] * deg *
                    detail::smoothstep((frac - (spec.bend_positions[0] - w)) / (2.0 * w));
        double a2 = spec.bend_angles[1] * deg *
                    detail::smoothstep((frac - (spec.bend_positions[1] - w)) / (2.0 * w));
        // first bend about x, second about an axis rotated 60 deg in-plane
        Eigen::AngleAxisd r1(a1, Vec3::UnitX());
        Eigen::AngleAxisd r2(a2, Vec3(std::cos(60.0 * deg), std::sin(60.0 * deg), 0.0));
        Vec3 tangent = r2 * (r1 * Vec3::UnitZ());
        p += tangent * ds;
        pts.push_back(p);
    }
    return pts;
}

// Deterministic swept-tube mesh for a canal spec. Elliptic cross-sections
// interpolate entrance to drum radius at constant area factor, the frame is
// parallel-transported to avoid twist, and the drum end is closed by a
// slanted fan. The entrance ring is left open.
inline TriMesh synth_canal(const CanalSpec& spec, std::uint64_t seed, int rings = 64, int ring_vertices = 24) {
    spec.validate();
    std::mt19937_64 rng(seed);

    // low-frequency radial jitter: a few random-phase waves over (angle, s)
    struct Wave {
        double m, omega, phase, amp;
    };
    std::vector<Wave> waves;
    double amp_sum = 0.0;
    for (int k = 0; k < 3; ++k) {
        Wave wv;
        wv.m = 1.0 + std::floor(detail::rand_unit(rng) * 4.0);       // 1..4 lobes
        wv.omega = 2.0 * std::numbers::pi * (0.5 + detail::rand_unit(rng) * 1.5);
        wv.phase = 2.0 * std::numbers::pi * detail::rand_unit(rng);
        wv.amp = 0.3 + detail::rand_unit(rng) * 0.7;
        amp_sum += wv.amp;
        waves.push_back(wv);
    }

    auto centerline = canal_centerline(spec, rings);
    // parallel-transport frame
    std::vector<Vec3> tangents(centerline.size()), normals(centerline.size());
    for (std::size_t i = 0; i < centerline.size(); ++i) {
        Vec3 d = i + 1 < centerline.size() ? centerline[i + 1] - centerline[i] : centerline[i] - centerline[i - 1];
        tangents[i] = d.normalized();
    }
    normals[0] = Vec3::UnitX();
    for (std::size_t i = 1; i < centerline.size(); ++i) {
        Vec3 axis = tangents[i - 1].cross(tangents[i]);
        double sin_a = axis.norm();
        if (sin_a < 1e-12) {
            normals[i] = normals[i - 1];
        } else {
            double cos_a = std::clamp(tangents[i - 1].dot(tangents[i]), -1.0, 1.0);
            normals[i] = Eigen::AngleAxisd(std::atan2(sin_a, cos_a), axis / sin_a) * normals[i - 1];
        }
    }

    TriMesh mesh;
    double sqrt_e = std::sqrt(spec.ellipticity);
    for (std::size_t i = 0; i < centerline.size(); ++i) {
        double frac = static_cast<double>(i) / (centerline.size() - 1);
        double r = spec.entrance_radius + (spec.drum_radius - spec.entrance_radius) * frac;
        Vec3 n = normals[i];
        Vec3 b = tangents[i].cross(n).normalized();
        for (int v = 0; v < ring_vertices; ++v) {
            double theta = 2.0 * std::numbers::pi * v / ring_vertices;
            double dr = 0.0;
            if (spec.noise_amplitude > 0.0) {
                double wsum = 0.0;
                for (const Wave& wv : waves) wsum += wv.amp * std::sin(wv.m * theta + wv.omega * frac + wv.phase);
                dr = spec.noise_amplitude * wsum / amp_sum;
            }
            double a_axis = (r + dr) * sqrt_e, b_axis = (r + dr) / sqrt_e;
            mesh.vertices.push_back(centerline[i] + n * (a_axis * std::cos(theta)) + b * (b_axis * std::sin(theta)));
        }
    }

    int m = ring_vertices;
    for (std::size_t i = 0; i + 1 < centerline.size(); ++i) {
        int base = static_cast<int>(i) * m;
        for (int v = 0; v < m; ++v) {
            int v1 = (v + 1) % m;
            // outward-facing quads split into two triangles
            mesh.faces.push_back({base + v, base + v1, base + m + v});
            mesh.faces.push_back({base + v1, base + m + v1, base + m + v});
        }
    }

    // slanted drum cap: fan to an apex pushed along the tangent and tilted
    // toward the frame normal
    std::size_t last = centerline.size() - 1;
    double rd = spec.drum_radius;
    const double slant = 35.0 * std::numbers::pi / 180.0;
    Vec3 apex = centerline[last] + tangents[last] * (0.5 * rd * std::tan(slant)) + normals[last] * (0.35 * rd);
    int apex_idx = mesh.num_vertices();
    mesh.vertices.push_back(apex);
    int base = static_cast<int>(last) * m;
    for (int v = 0; v < m; ++v) mesh.faces.push_back({base + v, base + (v + 1) % m, apex_idx});

    return mesh;
}

} // namespace earcanal
