#include "splatmesh/tsdf.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "splatmesh/error.hpp"
#include "splatmesh/parallel.hpp"

namespace splatmesh {

TsdfVolume::TsdfVolume(const Vec3& origin, double voxel_size, std::array<int, 3> dims, double truncation)
    : origin_(origin), voxel_size_(voxel_size), dims_(dims), truncation_(truncation) {
  if (!(voxel_size > 0.0)) throw std::invalid_argument("tsdf: voxel_size must be positive");
  if (dims[0] < 2 || dims[1] < 2 || dims[2] < 2) throw std::invalid_argument("tsdf: need at least 2 voxels per axis");
  if (truncation < 2.0 * voxel_size) throw std::invalid_argument("tsdf: truncation must be >= 2 * voxel_size");
  const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  tsdf_.assign(n, 1.f);
  weight_.assign(n, 0.f);
  color_.assign(n, {0.f, 0.f, 0.f});
}

void TsdfVolume::save(const std::filesystem::path& stem) const {
  std::filesystem::path header = stem, raw = stem;
  header += ".txt";
  raw += ".raw";
  {
    std::ofstream out(header);
    if (!out) throw InputError("cannot write " + header.string());
    out.precision(17);
    out << "origin " << origin_.x() << " " << origin_.y() << " " << origin_.z() << "\n"
        << "voxel_size " << voxel_size_ << "\n"
        << "dims " << dims_[0] << " " << dims_[1] << " " << dims_[2] << "\n"
        << "truncation " << truncation_ << "\n"
        << "layout float32 tsdf, float32 weight, float32 rgb[3]; x fastest\n";
  }
  std::ofstream out(raw, std::ios::binary);
  if (!out) throw InputError("cannot write " + raw.string());
  out.write(reinterpret_cast<const char*>(tsdf_.data()), static_cast<std::streamsize>(tsdf_.size() * 4));
  out.write(reinterpret_cast<const char*>(weight_.data()), static_cast<std::streamsize>(weight_.size() * 4));
  out.write(reinterpret_cast<const char*>(color_.data()), static_cast<std::streamsize>(color_.size() * 12));
}

TsdfVolume TsdfVolume::load(const std::filesystem::path& stem) {
  std::filesystem::path header = stem, raw = stem;
  header += ".txt";
  raw += ".raw";
  std::ifstream in(header);
  if (!in) throw InputError("cannot open " + header.string());
  Vec3 origin = Vec3::Zero();
  double voxel = 0.0, trunc = 0.0;
  std::array<int, 3> dims{0, 0, 0};
  std::string key;
  while (in >> key) {
    if (key == "origin") in >> origin.x() >> origin.y() >> origin.z();
    else if (key == "voxel_size") in >> voxel;
    else if (key == "dims") in >> dims[0] >> dims[1] >> dims[2];
    else if (key == "truncation") in >> trunc;
    else std::getline(in, key);
  }
  TsdfVolume vol(origin, voxel, dims, trunc);
  std::ifstream data(raw, std::ios::binary);
  if (!data) throw InputError("cannot open " + raw.string());
  data.read(reinterpret_cast<char*>(vol.tsdf_.data()), static_cast<std::streamsize>(vol.tsdf_.size() * 4));
  data.read(reinterpret_cast<char*>(vol.weight_.data()), static_cast<std::streamsize>(vol.weight_.size() * 4));
  data.read(reinterpret_cast<char*>(vol.color_.data()), static_cast<std::streamsize>(vol.color_.size() * 12));
  if (!data) throw InputError("truncated volume data: " + raw.string());
  return vol;
}

double default_truncation(double voxel_size, double lr_threshold, double fx, double baseline) {
  return std::max(4.0 * voxel_size, depth_error_bound(10.0 * baseline, lr_threshold, fx, baseline));
}

Bounds depth_bounds(std::span<const DepthFrame> frames) {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& f : frames)
    for (int y = 0; y < f.depth.height(); ++y)
      for (int x = 0; x < f.depth.width(); ++x) {
        if (!f.usable(x, y)) continue;
        const Vec3 p = unproject(f.intrinsics, f.pose, x, y, f.depth(x, y));
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
      }
  if (!(lo.array() <= hi.array()).all()) throw StageError("no usable depth samples to bound the volume");
  return {lo, hi};
}

TsdfVolume make_volume(const Bounds& bounds, double voxel_size, double truncation) {
  const Vec3 pad = Vec3::Constant(2.0 * truncation);
  const Vec3 lo = bounds.min - pad;
  const Vec3 extent = bounds.max + pad - lo;
  std::array<int, 3> dims{};
  for (int a = 0; a < 3; ++a) dims[a] = static_cast<int>(std::ceil(extent[a] / voxel_size)) + 1;
  return TsdfVolume(lo, voxel_size, dims, truncation);
}

std::size_t integrate(TsdfVolume& volume, const DepthFrame& frame, const RgbImage& rgb) {
  if (!rgb.same_size(frame.depth) || rgb.channels() != 3)
    throw std::invalid_argument("integrate: color image does not match depth frame");
  const auto [nx, ny, nz] = volume.dims();
  const Intrinsics& k = frame.intrinsics;
  const Mat3 world_to_cam = frame.pose.rotation.transpose();
  const double trunc = volume.truncation();

  std::vector<std::size_t> updated(static_cast<std::size_t>(nz), 0);
  parallel_for(0, nz, [&](int kz) {
    std::size_t count = 0;
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const Vec3 c = world_to_cam * (volume.position(i, j, kz) - frame.pose.center);
        if (!(c.z() > 0.0)) continue;
        const long px = std::lround(k.fx * c.x() / c.z() + k.cx);
        const long py = std::lround(k.fy * c.y() / c.z() + k.cy);
        if (px < 0 || py < 0 || px >= k.width || py >= k.height) continue;
        const int x = static_cast<int>(px), y = static_cast<int>(py);
        if (!frame.usable(x, y)) continue;
        const double sdf = frame.depth(x, y) - c.z();
        if (sdf < -trunc) continue;
        const double obs = std::clamp(sdf / trunc, -1.0, 1.0);

        float& w = volume.weight(i, j, kz);
        float& t = volume.tsdf(i, j, kz);
        auto& col = volume.color(i, j, kz);
        const double w_old = w;
        const double w_sum = w_old + 1.0;
        t = static_cast<float>((t * w_old + obs) / w_sum);
        for (int ch = 0; ch < 3; ++ch) col[ch] = static_cast<float>((col[ch] * w_old + rgb(x, y, ch)) / w_sum);
        w = static_cast<float>(std::min<double>(w_sum, kMaxFusionWeight));
        ++count;
      }
    updated[static_cast<std::size_t>(kz)] = count;
  });

  std::size_t total = 0;
  for (auto c : updated) total += c;
  if (total == 0) ++volume.missed_frames;
  return total;
}

}  // namespace splatmesh
