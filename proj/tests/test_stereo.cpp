#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "splatmesh/image_io.hpp"
#include "splatmesh/parallel.hpp"
#include "splatmesh/render.hpp"
#include "splatmesh/stereo.hpp"
#include "stereo_oracle.hpp"
#include "test_util.hpp"

using namespace splatmesh;

namespace {

Primitive textured(std::variant<Sphere, Box, Plane> shape, double feature = 0.05) {
  Primitive p;
  p.shape = shape;
  p.albedo = {0.85, 0.75, 0.6};
  p.texture = {feature, 0.8};
  return p;
}

GrayImage shifted(const GrayImage& left, int shift, std::mt19937& rng) {
  GrayImage right(left.width(), left.height());
  std::uniform_int_distribution<int> dist(0, 255);
  for (int y = 0; y < left.height(); ++y)
    for (int x = 0; x < left.width(); ++x)
      right(x, y) = x + shift < left.width() ? left(x + shift, y) : static_cast<std::uint8_t>(dist(rng));
  return right;
}

}  // namespace

TEST_CASE("stereo parameter validation") {
  StereoParams p;
  CHECK_NOTHROW(p.validate());
  p.p2 = 4;
  CHECK_THROWS(p.validate());
  p = {};
  p.max_disparity = 0;
  CHECK_THROWS(p.validate());
  p = {};
  p.lr_threshold = 0;
  CHECK_THROWS(p.validate());
  p = {};
  p.num_paths = 3;
  CHECK_THROWS(p.validate());

  std::mt19937 rng(1);
  const GrayImage a = testing::random_gray(16, 16, rng), b = testing::random_gray(17, 16, rng);
  StereoParams small;
  small.max_disparity = 8;
  CHECK_THROWS(match_sgm(a, b, small));
  small.max_disparity = 16;
  CHECK_THROWS(match_sgm(a, a, small));
  CHECK(default_max_disparity(140.0) == 70);
  CHECK(default_max_disparity(141.0) == 71);
  CHECK(default_max_disparity(5000.0) == 256);
}

TEST_CASE("census cost matches the window comparison count") {
  std::mt19937 rng(7);
  const GrayImage l = testing::random_gray(20, 12, rng), r = testing::random_gray(20, 12, rng);
  const auto cl = census_transform(l), cr = census_transform(r);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 20; ++x)
      for (int d = 0; d < 8; ++d) CHECK(census_cost(cl, cr, x, y, d) == testing::brute_census_cost(l, r, x, y, d));
}

TEST_CASE("aggregation off equals brute-force WTA") {
  std::mt19937 rng(11);
  StereoParams p;
  p.num_paths = 0;
  p.subpixel = false;
  p.max_disparity = 12;
  for (int trial = 0; trial < 4; ++trial) {
    const GrayImage l = testing::random_gray(16, 16, rng), r = testing::random_gray(16, 16, rng);
    const auto [ours, unused] = match_sgm(l, r, p);
    const auto oracle = testing::brute_force_wta(l, r, p.max_disparity, p.uniqueness_ratio);
    CHECK(ours.values == oracle.disparity);
    CHECK(ours.valid == oracle.valid);
  }
}

TEST_CASE("constant shift is recovered") {
  std::mt19937 rng(5);
  const GrayImage left = testing::random_gray(64, 48, rng);
  const GrayImage right = shifted(left, 4, rng);
  StereoParams p;
  p.max_disparity = 16;
  const auto [disp, disp_r] = match_sgm(left, right, p);
  // Parabola refinement of a V-shaped cost can drift a little off the
  // integer optimum when the two neighbors are very unequal.
  int good = 0, rounded = 0, total = 0;
  for (int y = 2; y < 46; ++y)
    for (int x = 8; x < 60; ++x) {
      ++total;
      good += disp.valid(x, y) && std::abs(disp.values(x, y) - 4.0f) <= 0.25f;
      rounded += disp.valid(x, y) && std::lround(disp.values(x, y)) == 4;
    }
  CHECK(rounded == total);
  CHECK(good >= 0.99 * total);
  const Mask occ = occlusion_mask(disp, disp_r, 1.0);
  CHECK(occ(30, 20) == 0);
}

TEST_CASE("textureless pairs are mostly invalid") {
  const GrayImage flat(48, 32, 1, 128);
  StereoParams p;
  p.max_disparity = 16;
  const auto [disp, unused] = match_sgm(flat, flat, p);
  CHECK(count_set(disp.valid) < disp.valid.data().size() / 10);
}

TEST_CASE("aggregation does not carry texture into a flat region") {
  std::mt19937 rng(12);
  GrayImage left = testing::random_gray(64, 32, rng);
  for (int y = 0; y < 32; ++y)
    for (int x = 32; x < 64; ++x) left(x, y) = 90;
  GrayImage right(64, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 64; ++x) right(x, y) = left(std::min(x + 5, 63), y);
  StereoParams p;
  p.max_disparity = 16;
  const auto [disp, unused] = match_sgm(left, right, p);
  for (int y = 0; y < 32; ++y)
    for (int x = 36; x < 64; ++x) CHECK(disp.valid(x, y) == 0);
  CHECK(disp.valid(20, 16) == 1);
}

TEST_CASE("disparity values stay in range") {
  std::mt19937 rng(2);
  const GrayImage l = testing::random_gray(40, 30, rng), r = testing::random_gray(40, 30, rng);
  StereoParams p;
  p.max_disparity = 20;
  const auto [dl, dr] = match_sgm(l, r, p);
  for (const auto* m : {&dl, &dr})
    for (int y = 0; y < 30; ++y)
      for (int x = 0; x < 40; ++x)
        if (m->valid(x, y)) {
          CHECK(m->values(x, y) >= 0.f);
          CHECK(m->values(x, y) <= 20.f);
        }
}

TEST_CASE("matching is deterministic across thread counts") {
  std::mt19937 rng(3);
  const GrayImage l = testing::random_gray(64, 40, rng);
  const GrayImage r = shifted(l, 3, rng);
  StereoParams p;
  p.max_disparity = 12;
  const int saved = thread_count();
  set_thread_count(1);
  const auto a = match_sgm(l, r, p);
  set_thread_count(4);
  const auto b = match_sgm(l, r, p);
  set_thread_count(saved);
  CHECK(a.first.values == b.first.values);
  CHECK(a.second.values == b.second.values);
  CHECK(a.first.valid == b.first.valid);
}

TEST_CASE("occlusion mask simple cases") {
  DisparityMap l{FloatImage(20, 5, 1, 3.f), Mask(20, 5, 1, 1)};
  DisparityMap r = l;
  const Mask same = occlusion_mask(l, r, 1.0);
  for (int y = 0; y < 5; ++y)
    for (int x = 3; x < 20; ++x) CHECK(same(x, y) == 0);
  CHECK(same(2, 0) == 1);  // lookup leaves the image

  DisparityMap five{FloatImage(20, 5, 1, 5.f), Mask(20, 5, 1, 1)};
  DisparityMap nine{FloatImage(20, 5, 1, 9.f), Mask(20, 5, 1, 1)};
  CHECK(count_set(occlusion_mask(five, nine, 1.0)) == 100);

  r.valid(7, 1) = 0;
  CHECK(occlusion_mask(l, r, 1.0)(10, 1) == 1);
}

TEST_CASE("depth conversion and range gate") {
  DisparityMap disp{FloatImage(4, 1), Mask(4, 1, 1, 1)};
  disp.values(0, 0) = 10.f;
  disp.values(1, 0) = 20.f;
  disp.values(2, 0) = 0.0005f;
  disp.values(3, 0) = 50.f;
  disp.valid(3, 0) = 0;
  const DepthFrame f = disparity_to_depth(disp, 100.0, 0.5);
  CHECK(f.depth(0, 0) == doctest::Approx(5.0));
  CHECK(f.depth(1, 0) == doctest::Approx(2.5));
  CHECK(f.valid(2, 0) == 0);
  CHECK(f.valid(3, 0) == 0);
  CHECK(f.depth(1, 0) < f.depth(0, 0));

  // Gate [2B, 10B] with B = 0.5: 1.0 and 5.0 inclusive.
  DepthFrame g;
  g.depth = FloatImage(5, 1);
  g.valid = Mask(5, 1, 1, 1);
  const float zs[] = {0.99f, 1.0f, 3.0f, 5.0f, 5.01f};
  for (int i = 0; i < 5; ++i) g.depth(i, 0) = zs[i];
  const Mask keep = depth_range_mask(g, 0.5);
  CHECK(keep(0, 0) == 0);
  CHECK(keep(1, 0) == 1);
  CHECK(keep(2, 0) == 1);
  CHECK(keep(3, 0) == 1);
  CHECK(keep(4, 0) == 0);
  // Gate bounds follow the baseline.
  CHECK(depth_range_mask(g, 0.1)(1, 0) == 1);
  CHECK(depth_range_mask(g, 0.1)(2, 0) == 0);
}

TEST_CASE("depth error bound") {
  CHECK(depth_error_bound(10.0, 1.0, 100.0, 0.5) == doctest::Approx(2.0));
  CHECK(depth_error_bound(0.5, 1.0, 100.0, 0.05) == doctest::Approx(0.05));
  // First-order agreement with an actual disparity perturbation.
  const double fx = 500, b = 0.1, z = 2.0, eps = 1e-3;
  const double d = fx * b / z;
  const double actual = fx * b / (d - eps) - z;
  CHECK(actual == doctest::Approx(depth_error_bound(z, eps, fx, b)).epsilon(1e-3));
}

TEST_CASE("oracle frontal plane at mid range: median depth error below one percent") {
  AnalyticScene scene;
  scene.primitives.push_back(textured(Plane{Vec3::UnitZ(), 2.0}));
  const Intrinsics k{137, 137, 79.5, 59.5, 160, 120};
  const StereoRig rig = make_stereo_rig(Pose{}, k, 0.4);  // Z = 5B
  const auto l = render_analytic(scene, k, rig.left), r = render_analytic(scene, k, rig.right);
  StereoParams p;
  p.max_disparity = default_max_disparity(k.fx);
  const DepthFrame f = compute_depth(to_gray(l.rgb), to_gray(r.rgb), rig, p);
  std::vector<double> rel;
  for (int y = 0; y < k.height; ++y)
    for (int x = 0; x < k.width; ++x)
      if (f.usable(x, y)) rel.push_back(std::abs(f.depth(x, y) - (*l.depth)(x, y)) / (*l.depth)(x, y));
  REQUIRE(rel.size() > static_cast<std::size_t>(k.width * k.height / 2));
  std::nth_element(rel.begin(), rel.begin() + rel.size() / 2, rel.end());
  CHECK(rel[rel.size() / 2] < 0.01);
  for (int y = 0; y < k.height; ++y)
    for (int x = 0; x < k.width; ++x)
      if (f.valid(x, y)) CHECK(f.depth(x, y) > 0.f);
}

TEST_CASE("oracle disparities from projection convert back to depth") {
  AnalyticScene scene;
  scene.primitives.push_back(textured(Plane{Vec3(0.3, 0, 1).normalized(), 3.0}));
  const Intrinsics k{137, 137, 79.5, 59.5, 160, 120};
  const StereoRig rig = make_stereo_rig(Pose{}, k, 0.4);
  const auto l = render_analytic(scene, k, rig.left);
  DisparityMap disp{FloatImage(k.width, k.height), Mask(k.width, k.height)};
  for (int y = 0; y < k.height; ++y)
    for (int x = 0; x < k.width; ++x) {
      const Vec3 world = unproject(k, rig.left, x, y, (*l.depth)(x, y));
      disp.values(x, y) = static_cast<float>(project(k, rig.left, world).u - project(k, rig.right, world).u);
      disp.valid(x, y) = 1;
    }
  const DepthFrame f = disparity_to_depth(disp, k.fx, rig.baseline);
  for (int y = 0; y < k.height; ++y)
    for (int x = 0; x < k.width; ++x) CHECK(std::abs(f.depth(x, y) / (*l.depth)(x, y) - 1.0) < 0.01);
}

TEST_CASE("two-plane oracle: cross-check flags true occlusions") {
  AnalyticScene scene;
  scene.primitives.push_back(textured(Plane{Vec3::UnitZ(), 6.0}));
  scene.primitives.push_back(textured(Box{Vec3(-0.4, -3, 2.5), Vec3(0.4, 3, 3.0)}));
  const Intrinsics k{120, 120, 79.5, 49.5, 160, 100};
  const StereoRig rig = make_stereo_rig(Pose{}, k, 0.6);
  const auto l = render_analytic(scene, k, rig.left), r = render_analytic(scene, k, rig.right);
  StereoParams p;
  p.max_disparity = 60;
  const DepthFrame f = compute_depth(to_gray(l.rgb), to_gray(r.rgb), rig, p);

  int truly = 0, flagged = 0;
  for (int y = 0; y < k.height; ++y)
    for (int x = 0; x < k.width; ++x) {
      const double z = (*l.depth)(x, y);
      const Vec3 world = unproject(k, rig.left, x, y, z);
      bool occluded = true;
      try {
        const Projection q = project(k, rig.right, world);
        const long rx = std::lround(q.u), ry = std::lround(q.v);
        if (rx >= 0 && rx < k.width && ry >= 0 && ry < k.height)
          occluded = (*r.depth)(rx, ry) < q.z - 0.05;
      } catch (const std::domain_error&) {
      }
      if (occluded) {
        ++truly;
        flagged += f.occluded(x, y);
      }
    }
  REQUIRE(truly > 200);
  CHECK(flagged >= 0.9 * truly);
}
