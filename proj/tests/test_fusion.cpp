#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

#include "oracle_frames.hpp"
#include "splatmesh/mesh.hpp"
#include "splatmesh/parallel.hpp"
#include "splatmesh/tsdf.hpp"
#include "test_util.hpp"

using namespace splatmesh;

namespace {

// Camera at the origin looking down +z at a constant-depth frame.
DepthFrame flat_frame(float z, int size = 21) {
  DepthFrame f;
  f.depth = FloatImage(size, size, 1, z);
  f.valid = Mask(size, size, 1, 1);
  f.intrinsics = {50, 50, (size - 1) / 2.0, (size - 1) / 2.0, size, size};
  f.baseline = 0.5;
  return f;
}

TsdfVolume column_volume() { return TsdfVolume(Vec3(-0.1, -0.1, 4.0), 0.1, {3, 3, 21}, 0.3); }

// Zero crossing along the center column by linear interpolation.
double column_crossing(const TsdfVolume& v) {
  for (int k = 0; k + 1 < v.dims()[2]; ++k) {
    const double a = v.tsdf(1, 1, k), b = v.tsdf(1, 1, k + 1);
    if (a > 0 && b <= 0) return v.position(1, 1, k).z() + v.voxel_size() * a / (a - b);
  }
  return std::nan("");
}

TsdfVolume sphere_volume(double voxel, double radius = 1.0) {
  const int n = static_cast<int>(std::ceil(2.6 * radius / voxel)) + 1;
  const double trunc = 4 * voxel;
  TsdfVolume v(Vec3::Constant(-1.3 * radius), voxel, {n, n, n}, trunc);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const double sdf = v.position(i, j, k).norm() - radius;
        v.tsdf(i, j, k) = static_cast<float>(std::clamp(sdf / trunc, -1.0, 1.0));
        v.weight(i, j, k) = 2.f;
        v.color(i, j, k) = {200.f, 100.f, 50.f};
      }
  return v;
}

TriangleMesh strip(std::size_t faces, double offset) {
  TriangleMesh m;
  for (std::size_t i = 0; i < faces + 2; ++i) {
    m.vertices.emplace_back(offset + static_cast<double>(i / 2), static_cast<double>(i % 2), 0.0);
    m.colors.push_back({0, 0, 0});
  }
  const auto base = static_cast<std::uint32_t>(0);
  for (std::uint32_t i = 0; i < faces; ++i) m.faces.push_back({base + i, base + i + 1, base + i + 2});
  return m;
}

TriangleMesh concat(const TriangleMesh& a, const TriangleMesh& b) {
  TriangleMesh m = a;
  const auto n = static_cast<std::uint32_t>(a.vertices.size());
  m.vertices.insert(m.vertices.end(), b.vertices.begin(), b.vertices.end());
  m.colors.insert(m.colors.end(), b.colors.begin(), b.colors.end());
  for (auto f : b.faces) m.faces.push_back({f[0] + n, f[1] + n, f[2] + n});
  return m;
}

std::vector<CameraFrame> sphere_orbit(int count, const Intrinsics& k) {
  return orbit_cameras(count, Vec3::Zero(), 3.0, 20.0, k);
}

}  // namespace

TEST_CASE("volume construction rules") {
  CHECK_THROWS(TsdfVolume(Vec3::Zero(), 0.1, {4, 4, 4}, 0.15));
  CHECK_NOTHROW(TsdfVolume(Vec3::Zero(), 0.1, {4, 4, 4}, 0.2));
  CHECK_THROWS(TsdfVolume(Vec3::Zero(), 0.1, {1, 4, 4}, 0.4));
  // fx = 100, B = 0.5, lr = 1: bound at 10B = 25 / 50 = 0.5.
  CHECK(default_truncation(0.02, 1.0, 100.0, 0.5) == doctest::Approx(0.5));
  CHECK(default_truncation(0.2, 1.0, 100.0, 0.5) == doctest::Approx(0.8));
}

TEST_CASE("frontal plane: tsdf sign and zero crossing along the ray") {
  TsdfVolume v = column_volume();
  CHECK(integrate(v, flat_frame(5.f), RgbImage(21, 21, 3, 100)) > 0);
  for (int k = 0; k < 21; ++k) {
    const double z = v.position(1, 1, k).z();
    if (z < 4.95) CHECK(v.tsdf(1, 1, k) > 0.f);
    if (z > 5.05 && z <= 5.3) CHECK(v.tsdf(1, 1, k) < 0.f);
    if (z > 5.0 + 0.3 + 1e-9) CHECK(v.weight(1, 1, k) == 0.f);  // behind the truncation band
    CHECK(v.tsdf(1, 1, k) >= -1.f);
    CHECK(v.tsdf(1, 1, k) <= 1.f);
  }
  CHECK(v.tsdf(1, 1, 0) == 1.f);  // clamped
  CHECK(column_crossing(v) == doctest::Approx(5.0).epsilon(1e-6));
}

TEST_CASE("integrating the same frame twice doubles weights only") {
  TsdfVolume once = column_volume(), twice = column_volume();
  const RgbImage rgb(21, 21, 3, 80);
  integrate(once, flat_frame(5.f), rgb);
  integrate(twice, flat_frame(5.f), rgb);
  integrate(twice, flat_frame(5.f), rgb);
  for (std::size_t i = 0; i < once.voxel_count(); ++i) {
    CHECK(twice.tsdf_values()[i] == doctest::Approx(once.tsdf_values()[i]));
    CHECK(twice.weights()[i] == 2.f * once.weights()[i]);
  }
}

TEST_CASE("two depths average to the midpoint") {
  TsdfVolume v = column_volume();
  const RgbImage rgb(21, 21, 3, 0);
  integrate(v, flat_frame(5.f), rgb);
  integrate(v, flat_frame(5.2f), rgb);
  CHECK(std::abs(column_crossing(v) - 5.1) <= 0.05);
}

TEST_CASE("weights cap at 128 and colors average") {
  TsdfVolume v = column_volume();
  integrate(v, flat_frame(5.f), RgbImage(21, 21, 3, 100));
  integrate(v, flat_frame(5.f), RgbImage(21, 21, 3, 200));
  CHECK(v.color(1, 1, 5)[0] == doctest::Approx(150.f));
  for (int i = 0; i < 140; ++i) integrate(v, flat_frame(5.f), RgbImage(21, 21, 3, 0));
  float max_w = 0.f;
  for (float w : v.weights()) max_w = std::max(max_w, w);
  CHECK(max_w == kMaxFusionWeight);
}

TEST_CASE("masked and missing frames") {
  TsdfVolume v = column_volume();
  DepthFrame f = flat_frame(5.f);
  f.occluded = Mask(21, 21, 1, 1);
  CHECK(integrate(v, f, RgbImage(21, 21, 3, 0)) == 0);
  CHECK(v.missed_frames == 1);
  DepthFrame away = flat_frame(5.f);
  away.pose.center = Vec3(0, 0, 10);  // volume behind the camera
  CHECK(integrate(v, away, RgbImage(21, 21, 3, 0)) == 0);
  CHECK(v.missed_frames == 2);
  for (float w : v.weights()) CHECK(w == 0.f);
}

TEST_CASE("marching cubes on a direct sphere SDF") {
  const TsdfVolume v = sphere_volume(0.05);
  const TriangleMesh mesh = extract_mesh(v);
  REQUIRE(!mesh.empty());
  for (const auto& p : mesh.vertices) CHECK(std::abs(p.norm() - 1.0) <= 0.05);
  for (const auto& f : mesh.faces)
    for (auto idx : f) CHECK(idx < mesh.vertices.size());
  // Consistent winding on a closed surface: every directed edge appears once
  // and its reverse once.
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> edges;
  for (const auto& f : mesh.faces)
    for (int e = 0; e < 3; ++e) ++edges[{f[e], f[(e + 1) % 3]}];
  for (const auto& [edge, n] : edges) {
    CHECK(n == 1);
    CHECK(edges.count({edge.second, edge.first}) == 1);
  }
  // Normals point toward positive tsdf (outside): positive enclosed volume.
  double volume = 0.0;
  for (const auto& f : mesh.faces)
    volume += mesh.vertices[f[0]].dot(mesh.vertices[f[1]].cross(mesh.vertices[f[2]])) / 6.0;
  CHECK(volume == doctest::Approx(4.0 / 3.0 * std::numbers::pi).epsilon(0.02));
  CHECK(mesh.colors.front() == Rgb8{200, 100, 50});
  CHECK(component_sizes(mesh).size() == 1);
}

TEST_CASE("no crossings yields an empty mesh") {
  TsdfVolume v(Vec3::Zero(), 0.1, {5, 5, 5}, 0.4);
  for (int k = 0; k < 5; ++k)
    for (int j = 0; j < 5; ++j)
      for (int i = 0; i < 5; ++i) {
        v.tsdf(i, j, k) = 0.7f;
        v.weight(i, j, k) = 3.f;
      }
  CHECK(extract_mesh(v).empty());
  CHECK(extract_mesh(TsdfVolume(Vec3::Zero(), 0.1, {5, 5, 5}, 0.4)).empty());
}

TEST_CASE("single crossing lands on the edge midpoint") {
  TsdfVolume v(Vec3::Zero(), 0.1, {2, 2, 2}, 0.4);
  for (int k = 0; k < 2; ++k)
    for (int j = 0; j < 2; ++j)
      for (int i = 0; i < 2; ++i) {
        v.tsdf(i, j, k) = i == 0 ? 0.5f : -0.5f;
        v.weight(i, j, k) = 2.f;
      }
  const TriangleMesh m = extract_mesh(v);
  REQUIRE(m.vertices.size() == 4);
  CHECK(m.faces.size() == 2);
  for (const auto& p : m.vertices) CHECK(p.x() == doctest::Approx(0.05));
}

TEST_CASE("no faces in zero-weight regions") {
  TsdfVolume v = sphere_volume(0.1);
  const auto [nx, ny, nz] = v.dims();
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        if (v.position(i, j, k).x() > 1e-9) v.weight(i, j, k) = 0.f;
  const TriangleMesh m = extract_mesh(v);
  REQUIRE(!m.empty());
  for (const auto& p : m.vertices) CHECK(p.x() <= 1e-9);

  MeshingOptions strict;
  strict.min_weight = 2.f;  // every corner carries exactly 2
  CHECK(extract_mesh(v, strict).empty());
}

TEST_CASE("extraction is independent of thread count") {
  const TsdfVolume v = sphere_volume(0.04);
  const int saved = thread_count();
  set_thread_count(1);
  const TriangleMesh a = extract_mesh(v);
  set_thread_count(5);
  const TriangleMesh b = extract_mesh(v);
  set_thread_count(saved);
  CHECK(a.vertices == b.vertices);
  CHECK(a.faces == b.faces);
  CHECK(a.colors == b.colors);
}

TEST_CASE("clean_mesh drops small components") {
  const TriangleMesh big = strip(1000, 0.0), small = strip(10, 5000.0);
  const TriangleMesh both = concat(small, big);
  CHECK(component_sizes(both) == std::vector<std::size_t>{1000, 10});
  const TriangleMesh cleaned = clean_mesh(both, 100);
  CHECK(cleaned.faces.size() == 1000);
  CHECK(cleaned.vertices.size() == big.vertices.size());
  CHECK(cleaned.vertices.front().x() == doctest::Approx(0.0));
  const TriangleMesh same = clean_mesh(both, 0);
  CHECK(same.faces == both.faces);
  CHECK(same.vertices == both.vertices);
}

TEST_CASE("clean_mesh removes islands cut off by holes") {
  // A sphere split by a hole band leaves two caps; small caps vanish.
  TsdfVolume v = sphere_volume(0.1);
  const auto [nx, ny, nz] = v.dims();
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const double z = v.position(i, j, k).z();
        if (z > 0.55 && z < 0.75) v.weight(i, j, k) = 0.f;
      }
  const TriangleMesh m = extract_mesh(v);
  const auto sizes = component_sizes(m);
  REQUIRE(sizes.size() == 2);
  const TriangleMesh cleaned = clean_mesh(m, sizes[1] + 1);
  CHECK(cleaned.faces.size() == sizes[0]);
  for (const auto& p : cleaned.vertices) CHECK(p.z() < 0.6);
}

TEST_CASE("mesh PLY round trip") {
  testing::TempDir dir("mesh");
  const TriangleMesh m = extract_mesh(sphere_volume(0.1));
  write_mesh_ply(dir / "m.ply", m);
  const TriangleMesh back = read_mesh_ply(dir / "m.ply");
  CHECK(back.faces == m.faces);
  CHECK(back.colors == m.colors);
  REQUIRE(back.vertices.size() == m.vertices.size());
  for (std::size_t i = 0; i < m.vertices.size(); ++i) CHECK((back.vertices[i] - m.vertices[i]).norm() < 1e-6);
}

TEST_CASE("checkpoint round trip") {
  testing::TempDir dir("ckpt");
  const TsdfVolume v = sphere_volume(0.1);
  v.save(dir / "vol");
  const TsdfVolume back = TsdfVolume::load(dir / "vol");
  CHECK(back.dims() == v.dims());
  CHECK(back.voxel_size() == v.voxel_size());
  CHECK(back.truncation() == v.truncation());
  CHECK(back.origin() == v.origin());
  CHECK(std::equal(back.tsdf_values().begin(), back.tsdf_values().end(), v.tsdf_values().begin()));
  CHECK(std::equal(back.weights().begin(), back.weights().end(), v.weights().begin()));
  CHECK_THROWS(TsdfVolume::load(dir / "nothing"));
}

TEST_CASE("integration order does not matter") {
  const AnalyticScene scene = testing::textured_sphere_scene(false);
  const Intrinsics k{80, 80, 39.5, 29.5, 80, 60};
  std::vector<std::pair<DepthFrame, RgbImage>> frames;
  for (const auto& cam : sphere_orbit(8, k)) frames.push_back(testing::oracle_frame(scene, k, cam.pose));
  auto fuse = [&](const std::vector<int>& order) {
    TsdfVolume v(Vec3::Constant(-1.3), 0.05, {53, 53, 53}, 0.2);
    for (int i : order) integrate(v, frames[i].first, frames[i].second);
    return v;
  };
  std::vector<int> order{0, 1, 2, 3, 4, 5, 6, 7};
  const TsdfVolume ref = fuse(order);
  std::mt19937 rng(4);
  for (int trial = 0; trial < 3; ++trial) {
    std::shuffle(order.begin(), order.end(), rng);
    const TsdfVolume v = fuse(order);
    double max_diff = 0.0;
    for (std::size_t i = 0; i < v.voxel_count(); ++i) {
      max_diff = std::max<double>(max_diff, std::abs(v.tsdf_values()[i] - ref.tsdf_values()[i]));
      for (int c = 0; c < 3; ++c)
        max_diff = std::max<double>(max_diff, std::abs(v.colors()[i][c] - ref.colors()[i][c]) / 255.0);
    }
    CHECK(max_diff < 1e-6);
  }
}

TEST_CASE("24 oracle views of a sphere fuse onto the true surface") {
  const AnalyticScene scene = testing::textured_sphere_scene(false);
  const Intrinsics k{160, 160, 79.5, 59.5, 160, 120};
  std::vector<DepthFrame> depths;
  std::vector<RgbImage> colors;
  for (const auto& cam : sphere_orbit(24, k)) {
    auto [f, rgb] = testing::oracle_frame(scene, k, cam.pose);
    depths.push_back(std::move(f));
    colors.push_back(std::move(rgb));
  }
  const Bounds b = depth_bounds(depths);
  CHECK(b.min.x() >= -1.01);
  CHECK(b.max.x() <= 1.01);
  TsdfVolume v = make_volume(b, 0.02, 0.08);
  for (std::size_t i = 0; i < depths.size(); ++i) integrate(v, depths[i], colors[i]);
  const TriangleMesh m = extract_mesh(v);
  REQUIRE(!m.empty());
  std::size_t close = 0;
  for (const auto& p : m.vertices) close += std::abs(p.norm() - 1.0) <= 0.04;
  CHECK(static_cast<double>(close) / m.vertices.size() >= 0.95);
}
