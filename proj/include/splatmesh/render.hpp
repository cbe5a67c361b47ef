#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <variant>
#include <vector>

#include "splatmesh/camera.hpp"
#include "splatmesh/image.hpp"

namespace splatmesh {

struct RenderedFrame {
  RgbImage rgb;
  std::optional<FloatImage> depth;            // oracle only; 0 marks "no hit"
  std::optional<Image<std::int32_t>> labels;  // oracle only; primitive index or -1
  Intrinsics intrinsics;
  Pose pose;
  std::size_t skipped_elements = 0;           // splats dropped for non-finite values
};

// ---------------------------------------------------------------------------
// Gaussian splats

inline constexpr int kMaxShCoeffs = 16;  // degree 3

// Eigen vectors are not zeroed by value-initialization.
inline std::array<Eigen::Vector3f, kMaxShCoeffs> zero_sh() {
  std::array<Eigen::Vector3f, kMaxShCoeffs> sh;
  sh.fill(Eigen::Vector3f::Zero());
  return sh;
}

struct Gaussian {
  Vec3 position = Vec3::Zero();
  Vec3 scale = Vec3::Ones();                         // activated (linear)
  Eigen::Vector4d rotation{1.0, 0.0, 0.0, 0.0};      // unit quaternion w, x, y, z
  double opacity = 0.5;                              // activated, in (0, 1)
  std::array<Eigen::Vector3f, kMaxShCoeffs> sh = zero_sh();  // RGB per SH basis function
};

struct GaussianCloud {
  int sh_degree = 0;
  std::vector<Gaussian> elements;
};

// Loads a 3DGS-convention binary little-endian PLY and applies the
// activations: exp on scales, sigmoid on opacity, normalized quaternions.
// f_rest may hold 0, 9, 24 or 45 values (SH degree 0..3).
GaussianCloud load_gaussian_ply(const std::filesystem::path& path);

// Inverse of load_gaussian_ply (stores log scales and opacity logits).
void write_gaussian_ply(const std::filesystem::path& path, const GaussianCloud& cloud);

// View-dependent color for a unit viewing direction, before clamping to [0, 1].
Eigen::Vector3f eval_sh(const Gaussian& g, int degree, const Vec3& dir);

struct SplatRenderOptions {
  double screen_dilation = 0.3;       // px^2 added to the 2D covariance diagonal
  double min_transmittance = 1e-4;
  double near_plane = 0.01;
  std::array<double, 3> background{0.0, 0.0, 0.0};
};

RenderedFrame render_splats(const GaussianCloud& cloud, const Intrinsics& intr, const Pose& pose,
                            const SplatRenderOptions& options = {});

// ---------------------------------------------------------------------------
// Analytic oracle scene

// Solid value-noise texture in world coordinates; contrast 0 means flat albedo.
struct SolidTexture {
  double feature_size = 0.05;
  double contrast = 0.0;
};

struct Sphere {
  Vec3 center = Vec3::Zero();
  double radius = 1.0;
};

struct Box {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Ones();
};

// Points x with normal.dot(x) == offset.
struct Plane {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;
};

struct Primitive {
  std::variant<Sphere, Box, Plane> shape;
  Eigen::Vector3d albedo{0.8, 0.8, 0.8};
  SolidTexture texture;
};

struct AnalyticScene {
  std::vector<Primitive> primitives;
  Eigen::Vector3d background{0.0, 0.0, 0.0};

  void validate() const;
};

// Text description, one primitive per line ('#' comments allowed):
//   background r g b
//   sphere cx cy cz radius r g b [texture feature_size contrast]
//   box minx miny minz maxx maxy maxz r g b [texture feature_size contrast]
//   plane nx ny nz offset r g b [texture feature_size contrast]
AnalyticScene read_analytic_scene(const std::filesystem::path& path);

struct RayHit {
  double depth = 0.0;  // camera-frame z
  int primitive = -1;
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::Zero();
};

// Nearest hit along the ray through pixel (u, v); primitive == -1 on a miss.
RayHit cast_ray(const AnalyticScene& scene, const Intrinsics& intr, const Pose& pose, double u, double v);

// Ray casts every pixel center. Shading is Lambert from a directional light
// along the camera's optical axis, so a point has the same color in both eyes
// of a rectified rig.
RenderedFrame render_analytic(const AnalyticScene& scene, const Intrinsics& intr, const Pose& pose);

}  // namespace splatmesh
