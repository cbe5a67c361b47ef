#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace splatmesh {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Pinhole intrinsics. Pixel (x, y) has its center at u = x, v = y.
struct Intrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  // Throws std::invalid_argument when fx, fy are not positive or the principal
  // point lies outside [0, size).
  void validate() const;
};

// Camera-to-world rigid pose. Camera frame: +x right, +y down, +z forward.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 center = Vec3::Zero();

  static Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& world_up);

  Vec3 to_camera(const Vec3& world) const { return rotation.transpose() * (world - center); }
  Vec3 to_world(const Vec3& camera) const { return rotation * camera + center; }
  Vec3 right_axis() const { return rotation.col(0); }
  Vec3 forward_axis() const { return rotation.col(2); }

  void validate() const;
};

struct StereoRig {
  Intrinsics intrinsics;
  Pose left;
  Pose right;
  double baseline = 0.0;
};

struct Projection {
  double u = 0.0;
  double v = 0.0;
  double z = 0.0;
};

// Max distance of any camera center from the centroid of all centers.
double scene_radius(std::span<const Pose> poses);

inline constexpr double kDefaultBaselineFraction = 0.07;

double baseline_from_radius(double radius, double fraction = kDefaultBaselineFraction);

// Left eye is the input pose; the right eye shares its orientation and sits
// `baseline` along the left camera's +x axis.
StereoRig make_stereo_rig(const Pose& left, const Intrinsics& intrinsics, double baseline);

// Throws std::domain_error("behind camera") for camera-frame z <= 0.
Projection project(const Intrinsics& intr, const Pose& pose, const Vec3& world);
Vec3 unproject(const Intrinsics& intr, const Pose& pose, double u, double v, double depth);

// One line of a camera file:
//   frame_id fx fy cx cy width height r11 r12 r13 r21 r22 r23 r31 r32 r33 cx cy cz
// with the rotation camera-to-world (row-major) and the camera center in world units.
struct CameraFrame {
  std::string id;
  Intrinsics intrinsics;
  Pose pose;
};

std::vector<CameraFrame> read_camera_file(const std::filesystem::path& path);
void write_camera_file(const std::filesystem::path& path, std::span<const CameraFrame> frames);

// COLMAP text model (cameras.txt + images.txt). Only undistorted PINHOLE and
// SIMPLE_PINHOLE cameras are accepted. The COLMAP pixel-center convention
// (top-left pixel center at 0.5) is shifted to ours.
std::vector<CameraFrame> read_colmap_text(const std::filesystem::path& cameras_txt,
                                          const std::filesystem::path& images_txt);

// Ring of cameras looking at `target`, evenly spaced in azimuth around +z.
std::vector<CameraFrame> orbit_cameras(int count, const Vec3& target, double distance,
                                       double elevation_deg, const Intrinsics& intrinsics);

}  // namespace splatmesh
