#include <doctest.h>

#include <Eigen/Geometry>
#include <fstream>
#include <random>

#include "splatmesh/camera.hpp"
#include "splatmesh/error.hpp"
#include "test_util.hpp"

using namespace splatmesh;

namespace {

Pose at(const Vec3& c) {
  Pose p;
  p.center = c;
  return p;
}

Mat3 random_rotation(std::mt19937& rng) {
  std::normal_distribution<double> n;
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized().toRotationMatrix();
}

Intrinsics test_intrinsics() { return {100.0, 100.0, 50.0, 50.0, 100, 100}; }

}  // namespace

TEST_CASE("scene_radius is the max distance from the centroid of camera centers") {
  std::vector<Pose> pair{at({-1, 0, 0}), at({1, 0, 0})};
  CHECK(scene_radius(pair) == doctest::Approx(1.0));

  // centroid (0, 0, 2/3): max distance is from (0, 0, 2) -> 4/3
  std::vector<Pose> triple{at({0, 0, 0}), at({0, 0, 0}), at({0, 0, 2})};
  CHECK(scene_radius(triple) == doctest::Approx(4.0 / 3.0).epsilon(1e-12));

  std::vector<Pose> single{at({1, 2, 3})};
  CHECK_THROWS_WITH_AS(scene_radius(single), "insufficient poses", std::invalid_argument);
}

TEST_CASE("scene_radius is invariant under a global rigid transform") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Pose> poses;
    for (int i = 0; i < 12; ++i) poses.push_back(at({u(rng), u(rng), u(rng)}));
    const Mat3 r = random_rotation(rng);
    const Vec3 t(u(rng), u(rng), u(rng));
    std::vector<Pose> moved;
    for (const auto& p : poses) {
      Pose q;
      q.rotation = r * p.rotation;
      q.center = r * p.center + t;
      moved.push_back(q);
    }
    CHECK(std::abs(scene_radius(poses) - scene_radius(moved)) < 1e-9);
  }
}

TEST_CASE("baseline_from_radius") {
  CHECK(baseline_from_radius(10.0, 0.07) == doctest::Approx(0.7));
  CHECK(baseline_from_radius(2.0, 0.05) == doctest::Approx(0.1));
  CHECK(baseline_from_radius(10.0) == doctest::Approx(0.7));
  CHECK_THROWS(baseline_from_radius(1.0, 0.0));
  CHECK_THROWS(baseline_from_radius(0.0, 0.07));
  CHECK_THROWS(baseline_from_radius(-1.0, 0.07));
}

TEST_CASE("make_stereo_rig offsets the right eye along the left camera x axis") {
  const Intrinsics k = test_intrinsics();
  const StereoRig rig = make_stereo_rig(Pose{}, k, 1.0);
  CHECK(rig.right.center.isApprox(Vec3(1, 0, 0)));
  CHECK(rig.right.rotation == rig.left.rotation);
  CHECK(rig.left.center == Vec3::Zero());

  // 90 degrees about world y: camera x axis maps to (cos90, 0, -sin90) = (0, 0, -1).
  Pose rotated;
  rotated.rotation << 0, 0, 1,
                      0, 1, 0,
                     -1, 0, 0;
  rotated.center = Vec3(2, 3, 4);
  const StereoRig r2 = make_stereo_rig(rotated, k, 1.0);
  CHECK((r2.right.center - Vec3(2, 3, 3)).norm() < 1e-12);
  CHECK(r2.left.center == rotated.center);
  CHECK(r2.left.rotation == rotated.rotation);

  CHECK_THROWS(make_stereo_rig(Pose{}, k, 0.0));
  CHECK_THROWS(make_stereo_rig(Pose{}, k, -0.1));
}

TEST_CASE("project and unproject") {
  const Intrinsics k = test_intrinsics();
  const Projection center = project(k, Pose{}, {0, 0, 1});
  CHECK(center.u == doctest::Approx(50.0));
  CHECK(center.v == doctest::Approx(50.0));
  CHECK(center.z == doctest::Approx(1.0));
  CHECK(project(k, Pose{}, {0.5, 0, 1}).u == doctest::Approx(100.0));
  CHECK_THROWS_WITH(project(k, Pose{}, {0, 0, -1}), "behind camera");
  CHECK_THROWS(project(k, Pose{}, {0, 0, 0}));
  CHECK_THROWS(unproject(k, Pose{}, 10, 10, 0.0));
}

TEST_CASE("unproject inverts project on random points and poses") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  const Intrinsics k{320, 300, 160, 120, 320, 240};
  for (int trial = 0; trial < 200; ++trial) {
    Pose pose;
    pose.rotation = random_rotation(rng);
    pose.center = Vec3(u(rng), u(rng), u(rng)) * 3.0;
    const Vec3 cam(u(rng), u(rng), 0.5 + 4.0 * std::abs(u(rng)));
    const Vec3 world = pose.to_world(cam);
    const Projection p = project(k, pose, world);
    CHECK((unproject(k, pose, p.u, p.v, p.z) - world).norm() < 1e-6);
  }
}

TEST_CASE("stereo rig is rectified: equal rows and disparity fx*B/z") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  const Intrinsics k{280, 280, 160, 120, 320, 240};
  for (int trial = 0; trial < 200; ++trial) {
    Pose left;
    left.rotation = random_rotation(rng);
    left.center = Vec3(u(rng), u(rng), u(rng));
    const double baseline = 0.05 + 0.5 * std::abs(u(rng));
    const StereoRig rig = make_stereo_rig(left, k, baseline);
    const Vec3 world = left.to_world(Vec3(u(rng), u(rng), 1.0 + 3.0 * std::abs(u(rng))));
    const Projection pl = project(k, rig.left, world);
    const Projection pr = project(k, rig.right, world);
    CHECK(std::abs(pl.v - pr.v) < 1e-6);
    CHECK(std::abs((pl.u - pr.u) - k.fx * baseline / pl.z) < 1e-6);
  }
}

TEST_CASE("intrinsics and pose validation") {
  CHECK_NOTHROW(test_intrinsics().validate());
  CHECK_THROWS((Intrinsics{0, 100, 50, 50, 100, 100}.validate()));
  CHECK_THROWS((Intrinsics{100, 100, 100, 50, 100, 100}.validate()));
  CHECK_THROWS((Intrinsics{100, 100, 50, -1, 100, 100}.validate()));
  Pose bad;
  bad.rotation(0, 0) = -1;  // reflection
  CHECK_THROWS(bad.validate());
}

TEST_CASE("camera file round trip") {
  testing::TempDir dir("cam");
  const auto frames = orbit_cameras(5, Vec3::Zero(), 3.0, 25.0, {200, 200, 160, 120, 320, 240});
  write_camera_file(dir / "cams.txt", frames);
  const auto back = read_camera_file(dir / "cams.txt");
  REQUIRE(back.size() == frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    CHECK(back[i].id == frames[i].id);
    CHECK(back[i].pose.rotation == frames[i].pose.rotation);
    CHECK(back[i].pose.center == frames[i].pose.center);
    CHECK(back[i].intrinsics.fx == frames[i].intrinsics.fx);
  }

  std::ofstream(dir / "bad.txt") << "f0 100 100 50 50 100 100 1 0 0 0 1 0\n";
  CHECK_THROWS_AS(read_camera_file(dir / "bad.txt"), InputError);
  CHECK_THROWS_AS(read_camera_file(dir / "missing.txt"), InputError);
}

TEST_CASE("orbit cameras look at the target") {
  const auto frames = orbit_cameras(8, Vec3(0, 0, 0.5), 2.0, 30.0, {200, 200, 160, 120, 320, 240});
  for (const auto& f : frames) {
    CHECK_NOTHROW(f.pose.validate());
    const Projection p = project(f.intrinsics, f.pose, Vec3(0, 0, 0.5));
    CHECK(p.u == doctest::Approx(160.0));
    CHECK(p.v == doctest::Approx(120.0));
    CHECK(p.z == doctest::Approx(2.0));
  }
}

TEST_CASE("COLMAP text conversion") {
  testing::TempDir dir("colmap");
  std::ofstream(dir / "cameras.txt") << "# Camera list\n"
                                        "1 PINHOLE 640 480 500 510 320 240\n"
                                        "2 SIMPLE_PINHOLE 640 480 400 320.5 240.5\n";
  // Image 2: world-to-camera rotation of 90 degrees about z, t = (1, 2, 3).
  const double h = std::sqrt(0.5);
  std::ofstream(dir / "images.txt") << "# Image list\n"
                                       "2 " << h << " 0 0 " << h << " 1 2 3 2 b/img2.png\n"
                                       "\n"
                                       "1 1 0 0 0 1 2 3 1 img1.jpg\n"
                                       "10.0 20.0 -1\n";
  const auto frames = read_colmap_text(dir / "cameras.txt", dir / "images.txt");
  REQUIRE(frames.size() == 2);
  CHECK(frames[0].id == "img1");
  CHECK(frames[1].id == "b_img2");
  CHECK(frames[0].intrinsics.fx == 500);
  CHECK(frames[0].intrinsics.fy == 510);
  CHECK(frames[0].intrinsics.cx == doctest::Approx(319.5));
  CHECK(frames[1].intrinsics.fy == 400);
  CHECK(frames[1].intrinsics.cx == doctest::Approx(320.0));
  CHECK((frames[0].pose.center - Vec3(-1, -2, -3)).norm() < 1e-12);
  // R_wc = Rz(90): x->y, y->-x. Center = -R_wc^T t = -(2, -1, 3).
  CHECK((frames[1].pose.center - Vec3(-2, 1, -3)).norm() < 1e-12);
  // A world point maps to the same camera coordinates COLMAP would produce.
  const Vec3 world(0.3, -0.7, 5.0);
  Mat3 rz;
  rz << 0, -1, 0,
        1, 0, 0,
        0, 0, 1;
  const Vec3 colmap_cam = rz * world + Vec3(1, 2, 3);
  CHECK((frames[1].pose.to_camera(world) - colmap_cam).norm() < 1e-12);

  std::ofstream(dir / "radial.txt") << "1 SIMPLE_RADIAL 640 480 500 320 240 0.1\n";
  CHECK_THROWS_AS(read_colmap_text(dir / "radial.txt", dir / "images.txt"), InputError);
}
