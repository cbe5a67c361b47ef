#pragma once

#include <utility>

#include "splatmesh/render.hpp"
#include "splatmesh/stereo.hpp"

namespace splatmesh::testing {

// Depth frame straight from the ray caster: every hit pixel is usable.
inline std::pair<DepthFrame, RgbImage> oracle_frame(const AnalyticScene& scene, const Intrinsics& intr,
                                                    const Pose& pose) {
  RenderedFrame r = render_analytic(scene, intr, pose);
  DepthFrame f;
  f.depth = *r.depth;
  f.valid = Mask(intr.width, intr.height);
  for (int y = 0; y < intr.height; ++y)
    for (int x = 0; x < intr.width; ++x) f.valid(x, y) = f.depth(x, y) > 0.f;
  f.intrinsics = intr;
  f.pose = pose;
  f.baseline = 0.1;
  return {std::move(f), std::move(r.rgb)};
}

inline AnalyticScene textured_sphere_scene(bool with_ground) {
  AnalyticScene scene;
  Primitive sphere;
  sphere.shape = Sphere{Vec3::Zero(), 1.0};
  sphere.albedo = {0.9, 0.6, 0.4};
  sphere.texture = {0.05, 0.8};
  scene.primitives.push_back(sphere);
  if (with_ground) {
    Primitive ground;
    ground.shape = Plane{Vec3::UnitZ(), -1.0};
    ground.albedo = {0.6, 0.7, 0.6};
    ground.texture = {0.08, 0.8};
    scene.primitives.push_back(ground);
  }
  return scene;
}

}  // namespace splatmesh::testing
