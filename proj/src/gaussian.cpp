#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "splatmesh/error.hpp"
#include "splatmesh/parallel.hpp"
#include "splatmesh/ply.hpp"
#include "splatmesh/render.hpp"

namespace splatmesh {
namespace {

constexpr float kC0 = 0.28209479177387814f;
constexpr float kC1 = 0.4886025119029199f;
constexpr float kC2[] = {1.0925484305920792f, -1.0925484305920792f, 0.31539156525252005f,
                         -1.0925484305920792f, 0.5462742152960396f};
constexpr float kC3[] = {-0.5900435899266435f, 2.890611442640554f, -0.4570457994644658f,
                         0.3731763325901154f,  -0.4570457994644658f, 1.445305721320277f,
                         -0.5900435899266435f};

constexpr int kTile = 16;

int coeffs_for_degree(int degree) { return (degree + 1) * (degree + 1); }

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

bool finite(const Gaussian& g) {
  if (!g.position.allFinite() || !g.scale.allFinite() || !g.rotation.allFinite() ||
      !std::isfinite(g.opacity))
    return false;
  for (const auto& c : g.sh)
    if (!c.allFinite()) return false;
  return true;
}

// Strict weak order used to make the depth sort independent of storage order.
bool content_less(const Gaussian& a, const Gaussian& b) {
  auto lex = [](const auto& x, const auto& y) {
    return std::lexicographical_compare(x.data(), x.data() + x.size(), y.data(), y.data() + y.size());
  };
  if (a.position != b.position) return lex(a.position, b.position);
  if (a.scale != b.scale) return lex(a.scale, b.scale);
  if (a.rotation != b.rotation) return lex(a.rotation, b.rotation);
  if (a.opacity != b.opacity) return a.opacity < b.opacity;
  for (int i = 0; i < kMaxShCoeffs; ++i)
    if (a.sh[i] != b.sh[i]) return lex(a.sh[i], b.sh[i]);
  return false;
}

struct Splat {
  std::size_t element = 0;
  double depth = 0.0;
  float mean_u = 0.f, mean_v = 0.f;
  float conic_a = 0.f, conic_b = 0.f, conic_c = 0.f;
  float opacity = 0.f;
  Eigen::Vector3f color;
  int x0 = 0, x1 = 0, y0 = 0, y1 = 0;  // inclusive pixel bounds
};

}  // namespace

Eigen::Vector3f eval_sh(const Gaussian& g, int degree, const Vec3& dir) {
  const auto& sh = g.sh;
  Eigen::Vector3f result = kC0 * sh[0];
  if (degree > 0) {
    const float x = static_cast<float>(dir.x());
    const float y = static_cast<float>(dir.y());
    const float z = static_cast<float>(dir.z());
    result += -kC1 * y * sh[1] + kC1 * z * sh[2] - kC1 * x * sh[3];
    if (degree > 1) {
      const float xx = x * x, yy = y * y, zz = z * z;
      const float xy = x * y, yz = y * z, xz = x * z;
      result += kC2[0] * xy * sh[4] + kC2[1] * yz * sh[5] +
                kC2[2] * (2.f * zz - xx - yy) * sh[6] + kC2[3] * xz * sh[7] +
                kC2[4] * (xx - yy) * sh[8];
      if (degree > 2) {
        result += kC3[0] * y * (3.f * xx - yy) * sh[9] + kC3[1] * xy * z * sh[10] +
                  kC3[2] * y * (4.f * zz - xx - yy) * sh[11] +
                  kC3[3] * z * (2.f * zz - 3.f * xx - 3.f * yy) * sh[12] +
                  kC3[4] * x * (4.f * zz - xx - yy) * sh[13] + kC3[5] * z * (xx - yy) * sh[14] +
                  kC3[6] * x * (xx - 3.f * yy) * sh[15];
      }
    }
  }
  result.array() += 0.5f;
  return result;
}

GaussianCloud load_gaussian_ply(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw InputError("splat PLY not found: " + path.string());
  const ply::File file = ply::read(path);
  if (file.format != ply::Format::kBinaryLittleEndian)
    throw InputError("unsupported splat PLY (expected binary_little_endian): " + path.string());
  const ply::Element* vertex = file.find("vertex");
  if (!vertex || vertex->count == 0) throw InputError("splat PLY has no elements: " + path.string());

  const char* required[] = {"x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity",
                            "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"};
  for (const char* name : required)
    if (!vertex->find(name))
      throw InputError(std::string("unsupported splat PLY: missing property ") + name);

  int rest = 0;
  while (vertex->find("f_rest_" + std::to_string(rest))) ++rest;
  int degree = -1;
  for (int d = 0; d <= 3; ++d)
    if (3 * (coeffs_for_degree(d) - 1) == rest) degree = d;
  if (degree < 0) throw InputError("unsupported splat PLY: " + std::to_string(rest) + " f_rest values");

  GaussianCloud cloud;
  cloud.sh_degree = degree;
  cloud.elements.resize(vertex->count);
  const auto& x = vertex->column("x");
  const auto& y = vertex->column("y");
  const auto& z = vertex->column("z");
  const auto& op = vertex->column("opacity");
  const std::vector<double>* scale[3] = {&vertex->column("scale_0"), &vertex->column("scale_1"),
                                         &vertex->column("scale_2")};
  const std::vector<double>* rot[4] = {&vertex->column("rot_0"), &vertex->column("rot_1"),
                                       &vertex->column("rot_2"), &vertex->column("rot_3")};
  const std::vector<double>* dc[3] = {&vertex->column("f_dc_0"), &vertex->column("f_dc_1"),
                                      &vertex->column("f_dc_2")};
  std::vector<const std::vector<double>*> rest_cols;
  for (int i = 0; i < rest; ++i) rest_cols.push_back(&vertex->column("f_rest_" + std::to_string(i)));
  const int per_channel = rest / 3;

  for (std::size_t i = 0; i < vertex->count; ++i) {
    Gaussian& g = cloud.elements[i];
    g.position = Vec3(x[i], y[i], z[i]);
    for (int k = 0; k < 3; ++k) g.scale[k] = std::exp((*scale[k])[i]);
    g.rotation = Eigen::Vector4d((*rot[0])[i], (*rot[1])[i], (*rot[2])[i], (*rot[3])[i]);
    const double n = g.rotation.norm();
    if (n > 0.0) g.rotation /= n;
    g.opacity = sigmoid(op[i]);
    for (int c = 0; c < 3; ++c) g.sh[0][c] = static_cast<float>((*dc[c])[i]);
    for (int j = 0; j < per_channel; ++j)
      for (int c = 0; c < 3; ++c)
        g.sh[j + 1][c] = static_cast<float>((*rest_cols[c * per_channel + j])[i]);
  }
  return cloud;
}

void write_gaussian_ply(const std::filesystem::path& path, const GaussianCloud& cloud) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  const int per_channel = coeffs_for_degree(cloud.sh_degree) - 1;
  out << "ply\nformat binary_little_endian 1.0\nelement vertex " << cloud.elements.size() << "\n";
  for (const char* p : {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"})
    out << "property float " << p << "\n";
  for (int i = 0; i < 3 * per_channel; ++i) out << "property float f_rest_" << i << "\n";
  for (const char* p : {"opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"})
    out << "property float " << p << "\n";
  out << "end_header\n";
  std::vector<float> row;
  for (const auto& g : cloud.elements) {
    row.clear();
    for (int k = 0; k < 3; ++k) row.push_back(static_cast<float>(g.position[k]));
    row.insert(row.end(), {0.f, 0.f, 0.f});
    for (int c = 0; c < 3; ++c) row.push_back(g.sh[0][c]);
    for (int c = 0; c < 3; ++c)
      for (int j = 0; j < per_channel; ++j) row.push_back(g.sh[j + 1][c]);
    row.push_back(static_cast<float>(std::log(g.opacity / (1.0 - g.opacity))));
    for (int k = 0; k < 3; ++k) row.push_back(static_cast<float>(std::log(g.scale[k])));
    for (int k = 0; k < 4; ++k) row.push_back(static_cast<float>(g.rotation[k]));
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
  }
}

RenderedFrame render_splats(const GaussianCloud& cloud, const Intrinsics& intr, const Pose& pose,
                            const SplatRenderOptions& options) {
  if (cloud.elements.empty()) throw std::invalid_argument("render_splats: empty cloud");
  intr.validate();

  RenderedFrame frame;
  frame.intrinsics = intr;
  frame.pose = pose;
  const int width = intr.width;
  const int height = intr.height;
  const Mat3 world_to_cam = pose.rotation.transpose();
  const double lim_x = 1.3 * (0.5 * width / intr.fx);
  const double lim_y = 1.3 * (0.5 * height / intr.fy);

  // Project and cull. Each element is handled independently; results land in
  // a per-element slot so the later compaction is deterministic.
  const auto n = cloud.elements.size();
  std::vector<std::optional<Splat>> projected(n);
  std::vector<std::uint8_t> non_finite(n, 0);
  parallel_for(0, static_cast<int>(n), [&](int idx) {
    const Gaussian& g = cloud.elements[idx];
    if (!finite(g)) {
      non_finite[idx] = 1;
      return;
    }
    const Vec3 t = pose.to_camera(g.position);
    if (t.z() <= options.near_plane) return;

    const Eigen::Quaterniond q(g.rotation[0], g.rotation[1], g.rotation[2], g.rotation[3]);
    const Mat3 r = q.normalized().toRotationMatrix();
    const Mat3 m = r * g.scale.asDiagonal();
    const Mat3 cov3 = m * m.transpose();

    const double tx = std::clamp(t.x() / t.z(), -lim_x, lim_x) * t.z();
    const double ty = std::clamp(t.y() / t.z(), -lim_y, lim_y) * t.z();
    Eigen::Matrix<double, 2, 3> jac;
    jac << intr.fx / t.z(), 0.0, -intr.fx * tx / (t.z() * t.z()),
           0.0, intr.fy / t.z(), -intr.fy * ty / (t.z() * t.z());
    const Eigen::Matrix<double, 2, 3> jw = jac * world_to_cam;
    Eigen::Matrix2d cov2 = jw * cov3 * jw.transpose();
    cov2(0, 0) += options.screen_dilation;
    cov2(1, 1) += options.screen_dilation;
    const double det = cov2.determinant();
    if (!(det > 0.0)) return;

    const double mid = 0.5 * (cov2(0, 0) + cov2(1, 1));
    const double lambda = mid + std::sqrt(std::max(0.1, mid * mid - det));
    const double radius = std::ceil(3.0 * std::sqrt(lambda));
    const double u = intr.fx * t.x() / t.z() + intr.cx;
    const double v = intr.fy * t.y() / t.z() + intr.cy;

    Splat s;
    s.x0 = static_cast<int>(std::max(0.0, std::floor(u - radius)));
    s.x1 = static_cast<int>(std::min(width - 1.0, std::ceil(u + radius)));
    s.y0 = static_cast<int>(std::max(0.0, std::floor(v - radius)));
    s.y1 = static_cast<int>(std::min(height - 1.0, std::ceil(v + radius)));
    if (s.x0 > s.x1 || s.y0 > s.y1) return;  // footprint entirely off-screen

    s.element = static_cast<std::size_t>(idx);
    s.depth = t.z();
    s.mean_u = static_cast<float>(u);
    s.mean_v = static_cast<float>(v);
    s.conic_a = static_cast<float>(cov2(1, 1) / det);
    s.conic_b = static_cast<float>(-cov2(0, 1) / det);
    s.conic_c = static_cast<float>(cov2(0, 0) / det);
    s.opacity = static_cast<float>(g.opacity);
    const Vec3 dir = (g.position - pose.center).normalized();
    s.color = eval_sh(g, cloud.sh_degree, dir).cwiseMax(0.f);
    projected[idx] = s;
  });

  std::vector<Splat> splats;
  for (std::size_t i = 0; i < n; ++i) {
    frame.skipped_elements += non_finite[i];
    if (projected[i]) splats.push_back(*projected[i]);
  }
  std::sort(splats.begin(), splats.end(), [&](const Splat& a, const Splat& b) {
    if (a.depth != b.depth) return a.depth < b.depth;
    const Gaussian& ga = cloud.elements[a.element];
    const Gaussian& gb = cloud.elements[b.element];
    if (content_less(ga, gb)) return true;
    if (content_less(gb, ga)) return false;
    return a.element < b.element;
  });

  const int tiles_x = (width + kTile - 1) / kTile;
  const int tiles_y = (height + kTile - 1) / kTile;
  std::vector<std::vector<std::uint32_t>> bins(static_cast<std::size_t>(tiles_x) * tiles_y);
  for (std::size_t i = 0; i < splats.size(); ++i) {
    const auto& s = splats[i];
    for (int ty = s.y0 / kTile; ty <= s.y1 / kTile; ++ty)
      for (int tx = s.x0 / kTile; tx <= s.x1 / kTile; ++tx)
        bins[static_cast<std::size_t>(ty) * tiles_x + tx].push_back(static_cast<std::uint32_t>(i));
  }

  frame.rgb = RgbImage(width, height, 3);
  const Eigen::Vector3f background(static_cast<float>(options.background[0]),
                                   static_cast<float>(options.background[1]),
                                   static_cast<float>(options.background[2]));
  const float min_t = static_cast<float>(options.min_transmittance);
  parallel_for(0, tiles_x * tiles_y, [&](int tile) {
    const auto& bin = bins[static_cast<std::size_t>(tile)];
    const int bx = (tile % tiles_x) * kTile;
    const int by = (tile / tiles_x) * kTile;
    for (int y = by; y < std::min(by + kTile, height); ++y) {
      for (int x = bx; x < std::min(bx + kTile, width); ++x) {
        float transmittance = 1.f;
        Eigen::Vector3f color = Eigen::Vector3f::Zero();
        for (std::uint32_t i : bin) {
          const Splat& s = splats[i];
          const float dx = static_cast<float>(x) - s.mean_u;
          const float dy = static_cast<float>(y) - s.mean_v;
          const float power = -0.5f * (s.conic_a * dx * dx + s.conic_c * dy * dy) - s.conic_b * dx * dy;
          if (power > 0.f) continue;
          const float alpha = s.opacity * std::exp(power);
          if (alpha < 1.f / 255.f) continue;
          color += s.color * (alpha * transmittance);
          transmittance *= 1.f - alpha;
          if (transmittance < min_t) break;
        }
        color += background * transmittance;
        for (int c = 0; c < 3; ++c)
          frame.rgb(x, y, c) = static_cast<std::uint8_t>(std::lround(std::clamp(color[c], 0.f, 1.f) * 255.f));
      }
    }
  });
  return frame;
}

}  // namespace splatmesh
