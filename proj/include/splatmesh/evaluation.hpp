#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "splatmesh/camera.hpp"
#include "splatmesh/kdtree.hpp"
#include "splatmesh/mesh.hpp"

namespace splatmesh {

struct PointCloud {
  std::vector<Vec3> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

// PLY point cloud or mesh vertices. Meshes with faces are area-sampled by the
// caller when needed; this only reads vertices.
PointCloud read_point_cloud_ply(const std::filesystem::path& path);
void write_point_cloud_ply(const std::filesystem::path& path, const PointCloud& cloud);

// Area-weighted uniform samples; identical (mesh, n, seed) give identical output.
PointCloud sample_mesh(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed);

struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  PointCloud apply(const PointCloud& cloud) const;
  RigidTransform compose(const RigidTransform& inner) const {
    return {rotation * inner.rotation, rotation * inner.translation + translation};
  }
};

struct IcpResult {
  RigidTransform transform;  // maps src onto dst
  double rmse = 0.0;
  int iterations = 0;
};

// Point-to-point ICP seeded with the centroid offset. Each iteration pairs
// every source point with its exact nearest destination point and solves the
// rigid fit in closed form (SVD of the cross-covariance). Stops when the RMSE
// changes by less than tol or after max_iters.
IcpResult icp_align(const PointCloud& src, const PointCloud& dst, int max_iters, double tol);

// Distance from each query point to its nearest neighbour in `index`.
std::vector<double> nearest_distances(const PointCloud& queries, const KdTree& index);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// A point counts when its nearest neighbour in the other cloud is within tau (<=).
PrecisionRecall precision_recall_f1(const PointCloud& pred, const PointCloud& gt, double tau);

// 0.5 * (mean pred->gt nearest distance + mean gt->pred nearest distance).
double chamfer(const PointCloud& pred, const PointCloud& gt);

struct EvalSettings {
  double tau = 0.01;
  std::size_t samples = 100000;
  std::uint64_t seed = 0;
  bool icp = true;
  int icp_max_iters = 50;
  double icp_tol = 1e-9;
  double unit_to_mm = 1000.0;  // world units -> millimetres for the radius metrics
};

struct RadiusScore {
  double radius_mm = 0.0;
  double accuracy_pct = 0.0;
  double recall_pct = 0.0;
  double f1_pct = 0.0;
};

struct MetricsReport {
  double tau = 0.0;
  PrecisionRecall at_tau;
  RadiusScore at_2_5mm;
  RadiusScore at_5mm;
  double chamfer = 0.0;     // world units
  double chamfer_mm = 0.0;
  double icp_rmse = 0.0;
  int icp_iterations = 0;
  std::size_t pred_points = 0;
  std::size_t gt_points = 0;

  std::string to_json() const;
};

// Samples the prediction, optionally aligns it to gt with ICP, then scores.
MetricsReport evaluate(const TriangleMesh& prediction, const PointCloud& gt, const EvalSettings& settings);

}  // namespace splatmesh
