#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <vector>

#include "splatmesh/camera.hpp"
#include "splatmesh/image.hpp"
#include "splatmesh/mesh.hpp"
#include "splatmesh/stereo.hpp"

namespace splatmesh {

inline constexpr float kMaxFusionWeight = 128.f;

// Dense projective TSDF. Grid point (i, j, k) sits at origin + voxel_size * (i, j, k).
// tsdf is the signed distance divided by the truncation, clamped to [-1, 1],
// positive in front of the observed surface.
class TsdfVolume {
 public:
  TsdfVolume() = default;
  TsdfVolume(const Vec3& origin, double voxel_size, std::array<int, 3> dims, double truncation);

  const Vec3& origin() const { return origin_; }
  double voxel_size() const { return voxel_size_; }
  const std::array<int, 3>& dims() const { return dims_; }
  double truncation() const { return truncation_; }
  std::size_t voxel_count() const { return tsdf_.size(); }

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * dims_[1] + j) * dims_[0] + i;
  }
  Vec3 position(int i, int j, int k) const { return origin_ + voxel_size_ * Vec3(i, j, k); }

  float& tsdf(int i, int j, int k) { return tsdf_[index(i, j, k)]; }
  float tsdf(int i, int j, int k) const { return tsdf_[index(i, j, k)]; }
  float& weight(int i, int j, int k) { return weight_[index(i, j, k)]; }
  float weight(int i, int j, int k) const { return weight_[index(i, j, k)]; }
  std::array<float, 3>& color(int i, int j, int k) { return color_[index(i, j, k)]; }
  const std::array<float, 3>& color(int i, int j, int k) const { return color_[index(i, j, k)]; }

  std::span<const float> tsdf_values() const { return tsdf_; }
  std::span<const float> weights() const { return weight_; }
  std::span<const std::array<float, 3>> colors() const { return color_; }

  // Frames whose projection touched no voxel.
  std::size_t missed_frames = 0;

  // Checkpoint: <stem>.txt header (origin, voxel_size, dims, truncation) and
  // <stem>.raw holding little-endian float32 tsdf, weight and rgb arrays.
  void save(const std::filesystem::path& stem) const;
  static TsdfVolume load(const std::filesystem::path& stem);

 private:
  Vec3 origin_ = Vec3::Zero();
  double voxel_size_ = 0.0;
  std::array<int, 3> dims_{0, 0, 0};
  double truncation_ = 0.0;
  std::vector<float> tsdf_;
  std::vector<float> weight_;
  std::vector<std::array<float, 3>> color_;
};

// max(4 * voxel_size, depth error at the far gate 10B for a disparity error of lr_threshold).
double default_truncation(double voxel_size, double lr_threshold, double fx, double baseline);

// Axis-aligned box around every usable depth sample (unpadded).
struct Bounds {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();
};
Bounds depth_bounds(std::span<const DepthFrame> frames);

// Volume covering `bounds` padded by 2 * truncation at the given voxel size.
TsdfVolume make_volume(const Bounds& bounds, double voxel_size, double truncation);

// Fuses one frame. Only usable pixels contribute; depth is sampled at the
// nearest pixel. Returns the number of voxels updated.
std::size_t integrate(TsdfVolume& volume, const DepthFrame& frame, const RgbImage& rgb);

struct MeshingOptions {
  float min_weight = 1.f;  // cells need weight > min_weight on all 8 corners
};

TriangleMesh extract_mesh(const TsdfVolume& volume, const MeshingOptions& options = {});

}  // namespace splatmesh
