#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "splatmesh/error.hpp"
#include "splatmesh/parallel.hpp"
#include "splatmesh/render.hpp"

namespace splatmesh {
namespace {

constexpr double kMinHit = 1e-9;
constexpr double kAmbient = 0.25;

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

double lattice(std::int64_t x, std::int64_t y, std::int64_t z) {
  const std::uint64_t h = mix(static_cast<std::uint64_t>(x) ^ mix(static_cast<std::uint64_t>(y) ^
                                                                   mix(static_cast<std::uint64_t>(z))));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double value_noise(const Vec3& q) {
  const double fx = std::floor(q.x()), fy = std::floor(q.y()), fz = std::floor(q.z());
  const auto ix = static_cast<std::int64_t>(fx), iy = static_cast<std::int64_t>(fy),
             iz = static_cast<std::int64_t>(fz);
  auto smooth = [](double t) { return t * t * (3.0 - 2.0 * t); };
  const double tx = smooth(q.x() - fx), ty = smooth(q.y() - fy), tz = smooth(q.z() - fz);
  double acc = 0.0;
  for (int c = 0; c < 8; ++c) {
    const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
    const double w = (dx ? tx : 1.0 - tx) * (dy ? ty : 1.0 - ty) * (dz ? tz : 1.0 - tz);
    acc += w * lattice(ix + dx, iy + dy, iz + dz);
  }
  return acc;
}

double texture_value(const SolidTexture& tex, const Vec3& p) {
  if (tex.contrast <= 0.0) return 1.0;
  const Vec3 q = p / tex.feature_size;
  const double n = 0.65 * value_noise(q) + 0.35 * value_noise(2.0 * q + Vec3(17.3, 5.1, 9.7));
  return 1.0 - tex.contrast + tex.contrast * n;
}

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  Vec3 normal = Vec3::Zero();
};

Hit intersect(const Sphere& s, const Vec3& o, const Vec3& d) {
  const Vec3 oc = o - s.center;
  const double a = d.squaredNorm();
  const double b = 2.0 * d.dot(oc);
  const double c = oc.squaredNorm() - s.radius * s.radius;
  const double disc = b * b - 4.0 * a * c;
  Hit hit;
  if (disc < 0.0) return hit;
  const double sq = std::sqrt(disc);
  double t = (-b - sq) / (2.0 * a);
  if (t <= kMinHit) t = (-b + sq) / (2.0 * a);
  if (t <= kMinHit) return hit;
  hit.t = t;
  hit.normal = (o + t * d - s.center) / s.radius;
  return hit;
}

Hit intersect(const Box& box, const Vec3& o, const Vec3& d) {
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  int near_axis = -1, far_axis = -1;
  for (int k = 0; k < 3; ++k) {
    if (d[k] == 0.0) {
      if (o[k] < box.min[k] || o[k] > box.max[k]) return {};
      continue;
    }
    double t0 = (box.min[k] - o[k]) / d[k];
    double t1 = (box.max[k] - o[k]) / d[k];
    if (t0 > t1) std::swap(t0, t1);
    if (t0 > t_near) { t_near = t0; near_axis = k; }
    if (t1 < t_far) { t_far = t1; far_axis = k; }
  }
  if (t_near > t_far) return {};
  Hit hit;
  int axis = -1;
  if (t_near > kMinHit) { hit.t = t_near; axis = near_axis; }
  else if (t_far > kMinHit) { hit.t = t_far; axis = far_axis; }
  else return {};
  if (axis >= 0) hit.normal[axis] = d[axis] > 0.0 ? -1.0 : 1.0;
  return hit;
}

Hit intersect(const Plane& p, const Vec3& o, const Vec3& d) {
  const double denom = p.normal.dot(d);
  if (std::abs(denom) < 1e-15) return {};
  const double t = (p.offset - p.normal.dot(o)) / denom;
  if (t <= kMinHit) return {};
  Hit hit;
  hit.t = t;
  hit.normal = p.normal;
  return hit;
}

bool parse_texture(std::istringstream& ss, SolidTexture& tex) {
  std::string word;
  if (!(ss >> word)) return true;
  if (word != "texture") return false;
  ss >> tex.feature_size >> tex.contrast;
  return static_cast<bool>(ss);
}

}  // namespace

void AnalyticScene::validate() const {
  if (primitives.empty()) throw std::invalid_argument("analytic scene has no primitives");
  for (const auto& prim : primitives) {
    if (const auto* s = std::get_if<Sphere>(&prim.shape); s && !(s->radius > 0.0))
      throw std::invalid_argument("sphere radius must be positive");
    if (const auto* b = std::get_if<Box>(&prim.shape); b && !(b->min.array() < b->max.array()).all())
      throw std::invalid_argument("box min must be below max componentwise");
    if (const auto* p = std::get_if<Plane>(&prim.shape); p && std::abs(p->normal.norm() - 1.0) > 1e-9)
      throw std::invalid_argument("plane normal must be unit length");
    if (!(prim.texture.feature_size > 0.0) || prim.texture.contrast < 0.0 || prim.texture.contrast > 1.0)
      throw std::invalid_argument("texture needs feature_size > 0 and contrast in [0, 1]");
  }
}

AnalyticScene read_analytic_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open scene file " + path.string());
  AnalyticScene scene;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    std::string kind;
    ss >> kind;
    Primitive prim;
    bool ok = true;
    if (kind == "background") {
      ss >> scene.background.x() >> scene.background.y() >> scene.background.z();
      ok = static_cast<bool>(ss);
    } else if (kind == "sphere") {
      Sphere s;
      ss >> s.center.x() >> s.center.y() >> s.center.z() >> s.radius;
      ss >> prim.albedo.x() >> prim.albedo.y() >> prim.albedo.z();
      ok = static_cast<bool>(ss) && parse_texture(ss, prim.texture);
      prim.shape = s;
    } else if (kind == "box") {
      Box b;
      ss >> b.min.x() >> b.min.y() >> b.min.z() >> b.max.x() >> b.max.y() >> b.max.z();
      ss >> prim.albedo.x() >> prim.albedo.y() >> prim.albedo.z();
      ok = static_cast<bool>(ss) && parse_texture(ss, prim.texture);
      prim.shape = b;
    } else if (kind == "plane") {
      Plane p;
      ss >> p.normal.x() >> p.normal.y() >> p.normal.z() >> p.offset;
      ss >> prim.albedo.x() >> prim.albedo.y() >> prim.albedo.z();
      ok = static_cast<bool>(ss) && parse_texture(ss, prim.texture);
      prim.shape = p;
    } else {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": unknown primitive '" + kind + "'");
    }
    if (!ok) throw InputError(path.string() + ":" + std::to_string(line_no) + ": malformed line");
    if (kind != "background") scene.primitives.push_back(prim);
  }
  try {
    scene.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return scene;
}

RayHit cast_ray(const AnalyticScene& scene, const Intrinsics& intr, const Pose& pose, double u, double v) {
  // Unnormalized direction with unit camera-frame z, so the ray parameter is depth.
  const Vec3 dir = pose.rotation * Vec3((u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0);
  RayHit best;
  double best_t = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
    const Hit h = std::visit([&](const auto& shape) { return intersect(shape, pose.center, dir); },
                             scene.primitives[i].shape);
    if (h.t < best_t) {
      best_t = h.t;
      best.depth = h.t;
      best.primitive = static_cast<int>(i);
      best.point = pose.center + h.t * dir;
      best.normal = h.normal;
    }
  }
  return best;
}

RenderedFrame render_analytic(const AnalyticScene& scene, const Intrinsics& intr, const Pose& pose) {
  scene.validate();
  intr.validate();
  RenderedFrame frame;
  frame.intrinsics = intr;
  frame.pose = pose;
  frame.rgb = RgbImage(intr.width, intr.height, 3);
  frame.depth = FloatImage(intr.width, intr.height, 1, 0.f);
  frame.labels = Image<std::int32_t>(intr.width, intr.height, 1, -1);
  const Vec3 forward = pose.forward_axis();

  parallel_for(0, intr.height, [&](int y) {
    for (int x = 0; x < intr.width; ++x) {
      const RayHit hit = cast_ray(scene, intr, pose, x, y);
      Eigen::Vector3d color = scene.background;
      if (hit.primitive >= 0) {
        const Primitive& prim = scene.primitives[static_cast<std::size_t>(hit.primitive)];
        const double lambert = std::abs(hit.normal.dot(forward));
        const double shade = kAmbient + (1.0 - kAmbient) * lambert;
        color = prim.albedo * (shade * texture_value(prim.texture, hit.point));
        (*frame.depth)(x, y) = static_cast<float>(hit.depth);
        (*frame.labels)(x, y) = hit.primitive;
      }
      for (int c = 0; c < 3; ++c)
        frame.rgb(x, y, c) = static_cast<std::uint8_t>(std::lround(std::clamp(color[c], 0.0, 1.0) * 255.0));
    }
  });
  return frame;
}

}  // namespace splatmesh
