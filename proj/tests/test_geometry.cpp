#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>

#include "earcanal/aabb_tree.hpp"
#include "earcanal/centerline.hpp"
#include "earcanal/marching_cubes.hpp"
#include "earcanal/sdf.hpp"
#include "earcanal/synth_canal.hpp"
#include "earcanal/trimesh.hpp"
#include "test_helpers.hpp"

using namespace earcanal;
namespace fs = std::filesystem;
using testutil::make_open_cylinder;
using testutil::make_uv_sphere;

namespace {
fs::path temp_dir() {
    fs::path p = fs::temp_directory_path() / "earcanal_geom_tests";
    fs::create_directories(p);
    return p;
}
} // namespace

TEST_CASE("obj load of minimal file") {
    fs::path p = temp_dir() / "tri.obj";
    std::ofstream(p) << "# comment\nv 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n";
    TriMesh m = load_obj(p);
    REQUIRE(m.num_vertices() == 3);
    REQUIRE(m.num_faces() == 1);
    validate_mesh(m);
}

TEST_CASE("obj save/load round trip preserves vertices") {
    TriMesh sphere = make_uv_sphere(Vec3(1.5, -2.25, 3.125), 7.3);
    fs::path p = temp_dir() / "sphere.obj";
    save_obj(sphere, p);
    TriMesh back = load_obj(p);
    REQUIRE(back.num_vertices() == sphere.num_vertices());
    REQUIRE(back.faces == sphere.faces);
    double max_dev = 0.0;
    for (int i = 0; i < back.num_vertices(); ++i)
        max_dev = std::max(max_dev, (back.vertices[i] - sphere.vertices[i]).norm());
    REQUIRE(max_dev < 1e-6);
}

TEST_CASE("obj load rejects out-of-range face index") {
    fs::path p = temp_dir() / "bad.obj";
    std::ofstream(p) << "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 99\n";
    REQUIRE_THROWS_AS(load_obj(p), IndexOutOfRange);
    REQUIRE_THROWS_AS(load_obj(temp_dir() / "missing.obj"), FileNotFound);
}

TEST_CASE("capping leaves a closed sphere unchanged") {
    TriMesh sphere = make_uv_sphere(Vec3::Zero(), 5.0);
    REQUIRE(is_closed(sphere));
    TriMesh capped = cap_open_boundaries(sphere);
    REQUIRE(capped.num_vertices() == sphere.num_vertices());
    REQUIRE(capped.num_faces() == sphere.num_faces());
}

TEST_CASE("capping closes an open cylinder") {
    TriMesh cyl = make_open_cylinder(4.0, 20.0);
    // oracle: count boundary edges (face incidence 1) before and after
    REQUIRE(boundary_half_edges(cyl).size() == 48); // two 24-vertex rims
    REQUIRE(boundary_loops(cyl).size() == 2);
    TriMesh capped = cap_open_boundaries(cyl);
    REQUIRE(boundary_half_edges(capped).empty());
    REQUIRE(euler_characteristic(capped) == 2);
    REQUIRE(testutil::signed_volume(capped) > 0.0);
}

TEST_CASE("capping a flat disk loop") {
    // one open fan (disk missing its closing cap is just a disk: 1 loop)
    TriMesh disk;
    int n = 12;
    disk.vertices.push_back(Vec3::Zero());
    for (int i = 0; i < n; ++i) {
        double th = 2.0 * std::numbers::pi * i / n;
        disk.vertices.push_back(Vec3(std::cos(th), std::sin(th), 0.0));
    }
    for (int i = 0; i < n; ++i) disk.faces.push_back({0, 1 + i, 1 + (i + 1) % n});
    REQUIRE(boundary_loops(disk).size() == 1);
    TriMesh capped = cap_open_boundaries(disk);
    REQUIRE(boundary_half_edges(capped).empty());
    REQUIRE(euler_characteristic(capped) == 2);
}

TEST_CASE("sdf of a sphere matches the analytic distance") {
    const double r = 10.0;
    TriMesh sphere = make_uv_sphere(Vec3::Zero(), r, 48, 24);
    GridSpec grid = grid_around(sphere, 0.5, 22); // wide enough to sample 2r out
    ScalarField field = signed_distance_field(sphere, grid);

    // center sample
    Vec3 center_offset = -grid.origin;
    int ci = static_cast<int>(std::round(center_offset[0] / grid.spacing[0]));
    int cj = static_cast<int>(std::round(center_offset[1] / grid.spacing[1]));
    int ck = static_cast<int>(std::round(center_offset[2] / grid.spacing[2]));
    REQUIRE(field.at(ci, cj, ck) == Catch::Approx(-r).margin(0.5));

    // a sample roughly 2r from the center along +x is ~ +r outside
    int oi = ci + static_cast<int>(std::round(2 * r / grid.spacing[0]));
    REQUIRE(field.at(oi, cj, ck) == Catch::Approx(r).margin(0.5));

    // value at a surface vertex below one voxel diagonal
    const Vec3& sv = sphere.vertices[37];
    REQUIRE(std::abs(field.sample(sv)) < grid.voxel_diagonal());
}

TEST_CASE("sdf magnitude bounded by exhaustive distance plus voxel diagonal") {
    TriMesh canal = synth_canal(CanalSpec{}, 3);
    TriMesh capped = cap_open_boundaries(canal);
    GridSpec grid = grid_around(capped, 1.0, 3);
    ScalarField field = signed_distance_field(capped, grid);
    std::mt19937_64 rng(11);
    Vec3 lo = grid.origin, hi = grid.max_corner();
    for (int n = 0; n < 200; ++n) {
        Vec3 p;
        for (int a = 0; a < 3; ++a) p[a] = lo[a] + testutil::urand(rng) * (hi[a] - lo[a]);
        double exact = testutil::brute_force_closest(capped, p).distance;
        REQUIRE(std::abs(field.sample(p)) <= exact + grid.voxel_diagonal());
    }
}

TEST_CASE("sdf sign agrees with an independent parity oracle") {
    std::mt19937_64 rng(5);
    auto check = [&](const TriMesh& mesh, int samples) {
        GridSpec grid = grid_around(mesh, 1.0, 3);
        ScalarField field = signed_distance_field(mesh, grid);
        Vec3 lo, hi;
        mesh.bounding_box(lo, hi);
        int tested = 0;
        while (tested < samples) {
            Vec3 p;
            for (int a = 0; a < 3; ++a) p[a] = lo[a] + testutil::urand(rng) * (hi[a] - lo[a]);
            double d = field.sample(p);
            if (std::abs(d) < grid.voxel_diagonal()) continue; // skip the ambiguous shell
            bool inside = testutil::brute_force_inside(mesh, p, Vec3(0.61, 0.52, 0.6).normalized());
            REQUIRE(inside == (d < 0.0));
            ++tested;
        }
    };
    check(make_uv_sphere(Vec3(1, 2, 3), 8.0), 500);
    check(cap_open_boundaries(synth_canal(CanalSpec{}, 21)), 500);
}

TEST_CASE("isosurface of a sphere sdf lies on the sphere") {
    const double r = 10.0;
    TriMesh sphere = make_uv_sphere(Vec3::Zero(), r, 48, 24);
    GridSpec grid = grid_around(sphere, 0.5, 4);
    ScalarField field = signed_distance_field(sphere, grid);

    TriMesh iso = extract_isosurface(field, 0.0);
    REQUIRE(is_closed(iso));
    REQUIRE(testutil::signed_volume(iso) > 0.0); // outward orientation
    double half_diag = 0.5 * grid.voxel_diagonal();
    for (const Vec3& v : iso.vertices) REQUIRE(std::abs(v.norm() - r) < half_diag);

    TriMesh iso_off = extract_isosurface(field, 1.0);
    for (const Vec3& v : iso_off.vertices) REQUIRE(std::abs(v.norm() - (r + 1.0)) < half_diag);

    ScalarField positive = field;
    positive.values.assign(positive.values.size(), 3.0);
    REQUIRE_THROWS_AS(extract_isosurface(positive, 0.0), EmptyLevelSet);
}

TEST_CASE("isosurface of sdf reconstructs the input within a voxel diagonal") {
    TriMesh canal = cap_open_boundaries(synth_canal(CanalSpec{}, 9));
    GridSpec grid = grid_around(canal, 0.5, 4);
    ScalarField field = signed_distance_field(canal, grid);
    TriMesh recon = extract_isosurface(field, 0.0);
    REQUIRE(testutil::sampled_hausdorff(canal, recon) < grid.voxel_diagonal());
}

TEST_CASE("closest point on mesh") {
    TriMesh sphere = make_uv_sphere(Vec3::Zero(), 10.0);
    auto at_vertex = closest_point(sphere, sphere.vertices[100]);
    REQUIRE(at_vertex.distance == Catch::Approx(0.0).margin(1e-12));
    REQUIRE((at_vertex.point - sphere.vertices[100]).norm() < 1e-12);

    auto at_center = closest_point(sphere, Vec3::Zero());
    REQUIRE(at_center.distance == Catch::Approx(10.0).margin(0.2)); // chord sag
}

TEST_CASE("closest point equals exhaustive search") {
    TriMesh canal = cap_open_boundaries(synth_canal(CanalSpec{}, 17));
    AabbTree tree(canal);
    Vec3 lo, hi;
    canal.bounding_box(lo, hi);
    std::mt19937_64 rng(99);
    for (int n = 0; n < 100; ++n) {
        Vec3 p;
        for (int a = 0; a < 3; ++a)
            p[a] = lo[a] - 5.0 + testutil::urand(rng) * (hi[a] - lo[a] + 10.0);
        auto fast = tree.closest_point(p);
        auto slow = testutil::brute_force_closest(canal, p);
        REQUIRE(fast.face == slow.face);
        REQUIRE(std::abs(fast.distance - slow.distance) < 1e-9);
    }
}

TEST_CASE("synthetic canal determinism") {
    CanalSpec spec;
    spec.noise_amplitude = 0.4;
    TriMesh a = synth_canal(spec, 1234);
    TriMesh b = synth_canal(spec, 1234);
    REQUIRE(a.faces == b.faces);
    REQUIRE(a.num_vertices() == b.num_vertices());
    for (int i = 0; i < a.num_vertices(); ++i) REQUIRE(a.vertices[i] == b.vertices[i]); // bitwise
    TriMesh c = synth_canal(spec, 1235);
    bool differs = false;
    for (int i = 0; i < a.num_vertices() && !differs; ++i) differs = a.vertices[i] != c.vertices[i];
    REQUIRE(differs);
}

TEST_CASE("straight canal has a collinear centerline") {
    CanalSpec spec;
    spec.bend_angles[0] = spec.bend_angles[1] = 0.0;
    spec.noise_amplitude = 0.0;
    auto line = canal_centerline(spec);
    Vec3 dir = (line.back() - line.front()).normalized();
    for (const Vec3& p : line) {
        Vec3 d = (p - line.front()) - (p - line.front()).dot(dir) * dir;
        REQUIRE(d.norm() < 1e-9);
    }
}

TEST_CASE("canal centerline arc length matches the spec") {
    CanalSpec spec;
    spec.length = 28.0;
    auto line = canal_centerline(spec);
    double arc = 0.0;
    for (std::size_t i = 1; i < line.size(); ++i) arc += (line[i] - line[i - 1]).norm();
    REQUIRE(arc == Catch::Approx(28.0).margin(0.1));
}

TEST_CASE("canal mesh is open at the entrance and closes under capping") {
    TriMesh canal = synth_canal(CanalSpec{}, 7);
    auto loops = boundary_loops(canal);
    REQUIRE(loops.size() == 1);
    TriMesh capped = cap_open_boundaries(canal);
    REQUIRE(is_closed(capped));
    REQUIRE(euler_characteristic(capped) == 2);
    REQUIRE(testutil::signed_volume(capped) > 0.0);
}

TEST_CASE("centerline and area of a straight cylinder") {
    CanalSpec spec;
    spec.length = 28.0;
    spec.entrance_radius = spec.drum_radius = 4.0;
    spec.bend_angles[0] = spec.bend_angles[1] = 0.0;
    spec.ellipticity = 1.0;
    spec.noise_amplitude = 0.0;
    TriMesh tube = cap_open_boundaries(synth_canal(spec, 0, 64, 48));
    AreaFunction f = centerline_and_area(tube);
    REQUIRE(f.arc_length.size() >= 50);
    const double target = std::numbers::pi * 16.0e-6; // pi r^2 in m^2
    for (double a : f.area) REQUIRE(a == Catch::Approx(target).epsilon(0.02));
    REQUIRE(f.total_length() == Catch::Approx(0.028).epsilon(0.02));
}

TEST_CASE("cone area decreases monotonically") {
    CanalSpec spec;
    spec.length = 28.0;
    spec.entrance_radius = 4.0;
    spec.drum_radius = 2.0;
    spec.bend_angles[0] = spec.bend_angles[1] = 0.0;
    spec.ellipticity = 1.0;
    spec.noise_amplitude = 0.0;
    TriMesh cone = cap_open_boundaries(synth_canal(spec, 0, 64, 48));
    AreaFunction f = centerline_and_area(cone);
    // interior stations (cap extensions copy their neighbors)
    for (std::size_t i = 2; i + 1 < f.area.size(); ++i) REQUIRE(f.area[i] < f.area[i - 1]);
}

TEST_CASE("area function csv round trip") {
    AreaFunction f = AreaFunction::uniform_tube(0.028, 5.0265e-5);
    fs::path p = temp_dir() / "area.csv";
    save_area_csv(f, p);
    AreaFunction g = load_area_csv(p);
    REQUIRE(g.arc_length == f.arc_length);
    REQUIRE(g.area == f.area);
}

TEST_CASE("disconnected sections raise NotTubular") {
    // two parallel capped cylinders in one mesh
    TriMesh a = cap_open_boundaries(make_open_cylinder(3.0, 30.0));
    TriMesh b = a;
    int off = a.num_vertices();
    for (Vec3& v : b.vertices) v += Vec3(7.0, 0, 0);
    TriMesh both = a;
    both.vertices.insert(both.vertices.end(), b.vertices.begin(), b.vertices.end());
    for (const Face& fc : b.faces) both.faces.push_back({fc[0] + off, fc[1] + off, fc[2] + off});
    REQUIRE_THROWS_AS(centerline_and_area(both), NotTubular);
}
