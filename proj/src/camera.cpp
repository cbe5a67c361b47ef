#include "splatmesh/camera.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "splatmesh/error.hpp"

namespace splatmesh {

void Intrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw std::invalid_argument("intrinsics: focal length must be positive");
  if (width <= 0 || height <= 0) throw std::invalid_argument("intrinsics: image size must be positive");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
    throw std::invalid_argument("intrinsics: principal point outside image");
}

Pose Pose::look_at(const Vec3& eye, const Vec3& target, const Vec3& world_up) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(world_up);
  if (right.norm() < 1e-12) throw std::invalid_argument("look_at: view direction parallel to up");
  right.normalize();
  const Vec3 down = forward.cross(right);
  Pose pose;
  pose.rotation.col(0) = right;
  pose.rotation.col(1) = down;
  pose.rotation.col(2) = forward;
  pose.center = eye;
  return pose;
}

void Pose::validate() const {
  if (!(rotation.transpose() * rotation).isApprox(Mat3::Identity(), 1e-6) ||
      std::abs(rotation.determinant() - 1.0) > 1e-6)
    throw std::invalid_argument("pose: rotation is not a proper orthonormal matrix");
  if (!center.allFinite()) throw std::invalid_argument("pose: non-finite center");
}

double scene_radius(std::span<const Pose> poses) {
  if (poses.size() < 2) throw std::invalid_argument("insufficient poses");
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : poses) centroid += p.center;
  centroid /= static_cast<double>(poses.size());
  double radius = 0.0;
  for (const auto& p : poses) radius = std::max(radius, (p.center - centroid).norm());
  return radius;
}

double baseline_from_radius(double radius, double fraction) {
  if (!(radius > 0.0)) throw std::invalid_argument("baseline: scene radius must be positive");
  if (!(fraction > 0.0)) throw std::invalid_argument("baseline: fraction must be positive");
  return radius * fraction;
}

StereoRig make_stereo_rig(const Pose& left, const Intrinsics& intrinsics, double baseline) {
  if (!(baseline > 0.0)) throw std::invalid_argument("stereo rig: baseline must be positive");
  StereoRig rig;
  rig.intrinsics = intrinsics;
  rig.left = left;
  rig.right = left;
  rig.right.center = left.center + baseline * left.right_axis();
  rig.baseline = baseline;
  return rig;
}

Projection project(const Intrinsics& intr, const Pose& pose, const Vec3& world) {
  const Vec3 c = pose.to_camera(world);
  if (!(c.z() > 0.0)) throw std::domain_error("behind camera");
  return {intr.fx * c.x() / c.z() + intr.cx, intr.fy * c.y() / c.z() + intr.cy, c.z()};
}

Vec3 unproject(const Intrinsics& intr, const Pose& pose, double u, double v, double depth) {
  if (!(depth > 0.0)) throw std::domain_error("unproject: depth must be positive");
  const Vec3 c((u - intr.cx) / intr.fx * depth, (v - intr.cy) / intr.fy * depth, depth);
  return pose.to_world(c);
}

std::vector<CameraFrame> read_camera_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open camera file " + path.string());
  std::vector<CameraFrame> frames;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    CameraFrame f;
    auto& k = f.intrinsics;
    ss >> f.id >> k.fx >> k.fy >> k.cx >> k.cy >> k.width >> k.height;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) ss >> f.pose.rotation(r, c);
    ss >> f.pose.center.x() >> f.pose.center.y() >> f.pose.center.z();
    if (!ss) throw InputError(path.string() + ":" + std::to_string(line_no) + ": malformed camera line");
    try {
      k.validate();
      f.pose.validate();
    } catch (const std::invalid_argument& e) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    frames.push_back(std::move(f));
  }
  if (frames.empty()) throw InputError("camera file has no frames: " + path.string());
  return frames;
}

void write_camera_file(const std::filesystem::path& path, std::span<const CameraFrame> frames) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "# frame_id fx fy cx cy width height r11 r12 r13 r21 r22 r23 r31 r32 r33 cx cy cz\n";
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, " %.17g", v);
    out << buf;
  };
  for (const auto& f : frames) {
    const auto& k = f.intrinsics;
    out << f.id;
    put(k.fx); put(k.fy); put(k.cx); put(k.cy);
    out << ' ' << k.width << ' ' << k.height;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) put(f.pose.rotation(r, c));
    for (int i = 0; i < 3; ++i) put(f.pose.center[i]);
    out << '\n';
  }
}

std::vector<CameraFrame> read_colmap_text(const std::filesystem::path& cameras_txt,
                                          const std::filesystem::path& images_txt) {
  std::map<int, Intrinsics> cameras;
  {
    std::ifstream in(cameras_txt);
    if (!in) throw InputError("cannot open " + cameras_txt.string());
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ss(line);
      int id = 0;
      std::string model;
      Intrinsics k;
      ss >> id >> model >> k.width >> k.height;
      if (model == "PINHOLE") {
        ss >> k.fx >> k.fy >> k.cx >> k.cy;
      } else if (model == "SIMPLE_PINHOLE") {
        ss >> k.fx >> k.cx >> k.cy;
        k.fy = k.fx;
      } else {
        throw InputError("unsupported COLMAP camera model '" + model + "' (undistort first)");
      }
      if (!ss) throw InputError("malformed COLMAP camera line: " + line);
      k.cx -= 0.5;
      k.cy -= 0.5;
      cameras[id] = k;
    }
  }

  struct Entry {
    int image_id;
    CameraFrame frame;
  };
  std::vector<Entry> entries;
  std::ifstream in(images_txt);
  if (!in) throw InputError("cannot open " + images_txt.string());
  std::string line;
  bool expect_points = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') continue;
    if (expect_points) {
      expect_points = false;
      continue;
    }
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    int image_id = 0, camera_id = 0;
    double qw, qx, qy, qz, tx, ty, tz;
    std::string name;
    ss >> image_id >> qw >> qx >> qy >> qz >> tx >> ty >> tz >> camera_id >> name;
    if (!ss) throw InputError("malformed COLMAP image line: " + line);
    auto cam = cameras.find(camera_id);
    if (cam == cameras.end()) throw InputError("COLMAP image references unknown camera " + std::to_string(camera_id));
    const Mat3 world_to_camera = Eigen::Quaterniond(qw, qx, qy, qz).normalized().toRotationMatrix();
    CameraFrame f;
    f.intrinsics = cam->second;
    f.pose.rotation = world_to_camera.transpose();
    f.pose.center = -world_to_camera.transpose() * Vec3(tx, ty, tz);
    std::string id = std::filesystem::path(name).replace_extension().string();
    std::replace(id.begin(), id.end(), '/', '_');
    f.id = id;
    entries.push_back({image_id, std::move(f)});
    expect_points = true;
  }
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.image_id < b.image_id; });
  std::vector<CameraFrame> frames;
  for (auto& e : entries) frames.push_back(std::move(e.frame));
  if (frames.empty()) throw InputError("no images in " + images_txt.string());
  return frames;
}

std::vector<CameraFrame> orbit_cameras(int count, const Vec3& target, double distance,
                                       double elevation_deg, const Intrinsics& intrinsics) {
  std::vector<CameraFrame> frames;
  const double elev = elevation_deg * std::numbers::pi / 180.0;
  for (int i = 0; i < count; ++i) {
    const double az = 2.0 * std::numbers::pi * i / count;
    const Vec3 eye = target + distance * Vec3(std::cos(elev) * std::cos(az),
                                              std::cos(elev) * std::sin(az), std::sin(elev));
    char id[32];
    std::snprintf(id, sizeof id, "frame_%04d", i);
    frames.push_back({id, intrinsics, Pose::look_at(eye, target, Vec3::UnitZ())});
  }
  return frames;
}

}  // namespace splatmesh
