#include "splatmesh/evaluation.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <random>
#include <stdexcept>

#include "splatmesh/error.hpp"
#include "splatmesh/parallel.hpp"
#include "splatmesh/ply.hpp"

namespace splatmesh {
namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

Vec3 centroid(const std::vector<Vec3>& pts) {
  Vec3 c = Vec3::Zero();
  for (const auto& p : pts) c += p;
  return c / static_cast<double>(pts.size());
}

void require_non_degenerate(const PointCloud& cloud) {
  if (cloud.size() < 3) throw std::invalid_argument("rank-deficient alignment");
  const Vec3 c = centroid(cloud.points);
  Mat3 cov = Mat3::Zero();
  for (const auto& p : cloud.points) cov += (p - c) * (p - c).transpose();
  const Eigen::JacobiSVD<Mat3> svd(cov);
  const auto s = svd.singularValues();
  if (!(s[1] > 1e-12 * s[0])) throw std::invalid_argument("rank-deficient alignment");
}

// Closed-form least-squares rigid fit mapping src[i] onto dst[i].
RigidTransform fit_rigid(const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
  const Vec3 cs = centroid(src), cd = centroid(dst);
  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) h += (src[i] - cs) * (dst[i] - cd).transpose();
  const Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  RigidTransform t;
  t.rotation = svd.matrixV() * d * svd.matrixU().transpose();
  t.translation = cd - t.rotation * cs;
  return t;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double fraction_within(const std::vector<double>& d, double r) {
  std::size_t n = 0;
  for (double x : d) n += x <= r;
  return static_cast<double>(n) / static_cast<double>(d.size());
}

double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace

PointCloud read_point_cloud_ply(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw InputError("point cloud not found: " + path.string());
  const TriangleMesh mesh = read_mesh_ply(path);
  return {mesh.vertices};
}

void write_point_cloud_ply(const std::filesystem::path& path, const PointCloud& cloud) {
  TriangleMesh mesh;
  mesh.vertices = cloud.points;
  mesh.colors.assign(cloud.size(), Rgb8{255, 255, 255});
  write_mesh_ply(path, mesh);
}

PointCloud RigidTransform::apply(const PointCloud& cloud) const {
  PointCloud out;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) out.points.push_back(apply(p));
  return out;
}

PointCloud sample_mesh(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed) {
  if (mesh.faces.empty()) throw std::invalid_argument("sample_mesh: empty mesh");
  if (n == 0) throw std::invalid_argument("sample_mesh: sample count must be positive");
  std::vector<double> cumulative(mesh.faces.size());
  double total = 0.0;
  for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
    const auto& f = mesh.faces[i];
    const Vec3& a = mesh.vertices[f[0]];
    total += 0.5 * (mesh.vertices[f[1]] - a).cross(mesh.vertices[f[2]] - a).norm();
    cumulative[i] = total;
  }
  if (!(total > 0.0)) throw std::invalid_argument("sample_mesh: mesh has zero area");

  std::mt19937_64 rng(seed);
  PointCloud cloud;
  cloud.points.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    const double pick = uniform01(rng) * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    if (it == cumulative.end()) --it;
    const auto& f = mesh.faces[static_cast<std::size_t>(it - cumulative.begin())];
    const double r1 = std::sqrt(uniform01(rng));
    const double r2 = uniform01(rng);
    cloud.points.push_back((1.0 - r1) * mesh.vertices[f[0]] + r1 * (1.0 - r2) * mesh.vertices[f[1]] +
                           r1 * r2 * mesh.vertices[f[2]]);
  }
  return cloud;
}

std::vector<double> nearest_distances(const PointCloud& queries, const KdTree& index) {
  std::vector<double> d(queries.size());
  parallel_for(0, static_cast<int>(queries.size()), [&](int i) {
    d[static_cast<std::size_t>(i)] = std::sqrt(index.nearest(queries.points[static_cast<std::size_t>(i)]).distance_sq);
  });
  return d;
}

IcpResult icp_align(const PointCloud& src, const PointCloud& dst, int max_iters, double tol) {
  require_non_degenerate(src);
  require_non_degenerate(dst);
  const KdTree index(dst.points);

  IcpResult result;
  result.transform.translation = centroid(dst.points) - centroid(src.points);
  std::vector<Vec3> moved(src.size()), matched(src.size());
  double prev_rmse = std::numeric_limits<double>::infinity();

  auto correspond = [&]() {
    std::vector<double> d2(src.size());
    parallel_for(0, static_cast<int>(src.size()), [&](int i) {
      const auto k = static_cast<std::size_t>(i);
      moved[k] = result.transform.apply(src.points[k]);
      const auto nn = index.nearest(moved[k]);
      matched[k] = dst.points[nn.index];
      d2[k] = nn.distance_sq;
    });
    return std::sqrt(mean(d2));
  };

  for (int it = 0; it < max_iters; ++it) {
    const double rmse = correspond();
    result.rmse = rmse;
    result.iterations = it;
    if (std::abs(prev_rmse - rmse) < tol) break;
    prev_rmse = rmse;
    result.transform = fit_rigid(moved, matched).compose(result.transform);
    result.iterations = it + 1;
  }
  result.rmse = correspond();
  return result;
}

PrecisionRecall precision_recall_f1(const PointCloud& pred, const PointCloud& gt, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("precision_recall_f1: tau must be positive");
  if (pred.empty() || gt.empty()) throw std::invalid_argument("precision_recall_f1: empty cloud");
  const KdTree gt_index(gt.points), pred_index(pred.points);
  PrecisionRecall pr;
  pr.precision = fraction_within(nearest_distances(pred, gt_index), tau);
  pr.recall = fraction_within(nearest_distances(gt, pred_index), tau);
  pr.f1 = harmonic(pr.precision, pr.recall);
  return pr;
}

double chamfer(const PointCloud& pred, const PointCloud& gt) {
  if (pred.empty() || gt.empty()) throw std::invalid_argument("chamfer: empty cloud");
  const KdTree gt_index(gt.points), pred_index(pred.points);
  return 0.5 * (mean(nearest_distances(pred, gt_index)) + mean(nearest_distances(gt, pred_index)));
}

MetricsReport evaluate(const TriangleMesh& prediction, const PointCloud& gt, const EvalSettings& settings) {
  if (prediction.empty()) throw StageError("empty prediction");
  if (gt.empty()) throw InputError("empty ground truth");
  PointCloud pred = sample_mesh(prediction, settings.samples, settings.seed);

  MetricsReport report;
  report.tau = settings.tau;
  if (settings.icp) {
    const IcpResult icp = icp_align(pred, gt, settings.icp_max_iters, settings.icp_tol);
    pred = icp.transform.apply(pred);
    report.icp_rmse = icp.rmse;
    report.icp_iterations = icp.iterations;
  }

  const KdTree gt_index(gt.points), pred_index(pred.points);
  const auto d_pred = nearest_distances(pred, gt_index);
  const auto d_gt = nearest_distances(gt, pred_index);

  report.at_tau.precision = fraction_within(d_pred, settings.tau);
  report.at_tau.recall = fraction_within(d_gt, settings.tau);
  report.at_tau.f1 = harmonic(report.at_tau.precision, report.at_tau.recall);
  for (auto [score, mm] : {std::pair{&report.at_2_5mm, 2.5}, std::pair{&report.at_5mm, 5.0}}) {
    const double r = mm / settings.unit_to_mm;
    score->radius_mm = mm;
    score->accuracy_pct = 100.0 * fraction_within(d_pred, r);
    score->recall_pct = 100.0 * fraction_within(d_gt, r);
    score->f1_pct = harmonic(score->accuracy_pct, score->recall_pct);
  }
  report.chamfer = 0.5 * (mean(d_pred) + mean(d_gt));
  report.chamfer_mm = report.chamfer * settings.unit_to_mm;
  report.pred_points = pred.size();
  report.gt_points = gt.size();
  return report;
}

std::string MetricsReport::to_json() const {
  auto radius = [](const RadiusScore& s) {
    return nlohmann::ordered_json{{"radius_mm", s.radius_mm},
                                  {"accuracy_pct", s.accuracy_pct},
                                  {"recall_pct", s.recall_pct},
                                  {"f1_pct", s.f1_pct}};
  };
  nlohmann::ordered_json j;
  j["tau"] = tau;
  j["precision"] = at_tau.precision;
  j["recall"] = at_tau.recall;
  j["f1"] = at_tau.f1;
  j["radius_2_5mm"] = radius(at_2_5mm);
  j["radius_5mm"] = radius(at_5mm);
  j["chamfer"] = chamfer;
  j["chamfer_mm"] = chamfer_mm;
  j["icp_rmse"] = icp_rmse;
  j["icp_iterations"] = icp_iterations;
  j["pred_points"] = pred_points;
  j["gt_points"] = gt_points;
  return j.dump(2) + "\n";
}

}  // namespace splatmesh
