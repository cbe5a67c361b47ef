#include "splatmesh/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "splatmesh/error.hpp"
#include "splatmesh/image_io.hpp"

namespace splatmesh {

PropagationResult propagate_mask(const Mask& mask, const DepthFrame& depth, const Intrinsics& target_intr,
                                 const Pose& target_pose) {
  if (!mask.same_size(depth.depth)) throw std::invalid_argument("propagate_mask: mask/depth size mismatch");
  PropagationResult result;
  result.mask = Mask(target_intr.width, target_intr.height);
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask(x, y) || !depth.usable(x, y)) continue;
      const Vec3 world = unproject(depth.intrinsics, depth.pose, x, y, depth.depth(x, y));
      const Vec3 c = target_pose.to_camera(world);
      if (!(c.z() > 0.0)) continue;
      ++result.projected_points;
      const long u = std::lround(target_intr.fx * c.x() / c.z() + target_intr.cx);
      const long v = std::lround(target_intr.fy * c.y() / c.z() + target_intr.cy);
      for (long sy = v - 1; sy <= v + 1; ++sy)
        for (long sx = u - 1; sx <= u + 1; ++sx)
          if (sx >= 0 && sy >= 0 && sx < target_intr.width && sy < target_intr.height)
            result.mask(static_cast<int>(sx), static_cast<int>(sy)) = 1;
    }
  result.no_depth = result.projected_points == 0;
  return result;
}

Mask dilate(const Mask& mask, int radius) {
  if (radius < 0) throw std::invalid_argument("dilate: radius must be >= 0");
  if (radius == 0) return mask;
  const int w = mask.width(), h = mask.height();

  // Horizontal running sums per row, so each disc row is an O(1) span query.
  std::vector<int> prefix(static_cast<std::size_t>(w + 1) * h, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      prefix[static_cast<std::size_t>(y) * (w + 1) + x + 1] =
          prefix[static_cast<std::size_t>(y) * (w + 1) + x] + (mask(x, y) ? 1 : 0);
  std::vector<int> half(static_cast<std::size_t>(radius) + 1);
  for (int dy = 0; dy <= radius; ++dy)
    half[dy] = static_cast<int>(std::floor(std::sqrt(static_cast<double>(radius * radius - dy * dy))));

  Mask out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      bool on = false;
      for (int dy = -radius; dy <= radius && !on; ++dy) {
        const int sy = y + dy;
        if (sy < 0 || sy >= h) continue;
        const int hw = half[std::abs(dy)];
        const int x0 = std::max(0, x - hw), x1 = std::min(w - 1, x + hw);
        const int* row = prefix.data() + static_cast<std::size_t>(sy) * (w + 1);
        on = row[x1 + 1] - row[x0] > 0;
      }
      out(x, y) = on ? 1 : 0;
    }
  return out;
}

std::vector<Pixel> select_seeds_fps(std::span<const Pixel> input, std::size_t k) {
  if (input.empty()) throw std::invalid_argument("select_seeds_fps: empty mask");
  if (k == 0) throw std::invalid_argument("select_seeds_fps: k must be >= 1");
  std::vector<Pixel> pixels(input.begin(), input.end());
  std::sort(pixels.begin(), pixels.end(),
            [](const Pixel& a, const Pixel& b) { return a.y != b.y ? a.y < b.y : a.x < b.x; });
  pixels.erase(std::unique(pixels.begin(), pixels.end()), pixels.end());
  if (k >= pixels.size()) return pixels;

  double mx = 0.0, my = 0.0;
  for (const auto& p : pixels) {
    mx += p.x;
    my += p.y;
  }
  mx /= static_cast<double>(pixels.size());
  my /= static_cast<double>(pixels.size());

  std::size_t first = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const double d = (pixels[i].x - mx) * (pixels[i].x - mx) + (pixels[i].y - my) * (pixels[i].y - my);
    if (d < best) {
      best = d;
      first = i;
    }
  }

  std::vector<Pixel> seeds{pixels[first]};
  std::vector<long long> min_d2(pixels.size(), std::numeric_limits<long long>::max());
  std::size_t last = first;
  while (seeds.size() < k) {
    std::size_t pick = 0;
    long long pick_d = -1;
    for (std::size_t i = 0; i < pixels.size(); ++i) {
      const long long dx = pixels[i].x - pixels[last].x, dy = pixels[i].y - pixels[last].y;
      min_d2[i] = std::min(min_d2[i], dx * dx + dy * dy);
      if (min_d2[i] > pick_d) {
        pick_d = min_d2[i];
        pick = i;
      }
    }
    seeds.push_back(pixels[pick]);
    last = pick;
  }
  return seeds;
}

std::vector<Pixel> select_seeds_fps(const Mask& mask, std::size_t k) {
  std::vector<Pixel> pixels;
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      if (mask(x, y)) pixels.push_back({x, y});
  return select_seeds_fps(pixels, k);
}

void write_seeds(const std::filesystem::path& path, std::span<const Pixel> seeds) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  for (const auto& s : seeds) out << s.x << " " << s.y << "\n";
}

std::vector<Pixel> read_seeds(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<Pixel> seeds;
  Pixel p;
  while (in >> p.x >> p.y) seeds.push_back(p);
  return seeds;
}

ExternalRefiner::ExternalRefiner(std::string command, std::filesystem::path exchange_dir)
    : command_(std::move(command)), exchange_dir_(std::move(exchange_dir)) {
  if (command_.empty()) throw InputError("external refiner needs a command");
}

Mask ExternalRefiner::refine(const RefineRequest& request) {
  char name[32];
  std::snprintf(name, sizeof name, "frame_%04zu", request.frame_index);
  const auto dir = exchange_dir_ / name;
  std::filesystem::create_directories(dir);
  std::filesystem::remove(dir / "mask.png");
  write_png(dir / "image.png", *request.image);
  write_mask_png(dir / "region.png", *request.region);
  write_seeds(dir / "seeds.txt", request.seeds);

  const std::string cmd = command_ + " '" + dir.string() + "'";
  const int status = std::system(cmd.c_str());
  if (status != 0) throw StageError("external refiner failed (status " + std::to_string(status) + ") on " + name);
  if (!std::filesystem::exists(dir / "mask.png")) throw StageError("external refiner wrote no mask.png for " + std::string(name));
  Mask out = read_mask_png(dir / "mask.png");
  if (!out.same_size(*request.region)) throw StageError("external refiner returned a mask of the wrong size");
  return out;
}

MaskTrack track_object(std::span<const RgbImage> images, std::span<const DepthFrame> depths,
                       std::span<const CameraFrame> cameras, const Mask& initial_mask, MaskRefiner& refiner,
                       const TrackSettings& settings) {
  if (images.size() != depths.size() || images.size() != cameras.size())
    throw std::invalid_argument("track_object: images/depths/cameras count mismatch");
  if (images.empty()) return {};
  if (!initial_mask.same_size(images[0])) throw std::invalid_argument("track_object: initial mask size mismatch");

  MaskTrack track;
  track.masks.push_back(initial_mask);
  track.seeds.push_back(count_set(initial_mask) ? select_seeds_fps(initial_mask, settings.seeds)
                                                : std::vector<Pixel>{});
  if (!count_set(initial_mask)) track.lost_at = 0;

  for (std::size_t j = 1; j < images.size(); ++j) {
    const Intrinsics& intr = cameras[j].intrinsics;
    if (track.lost_at) {
      track.masks.emplace_back(intr.width, intr.height);
      track.seeds.emplace_back();
      continue;
    }
    auto projected = propagate_mask(track.masks.back(), depths[j - 1], intr, cameras[j].pose);
    if (projected.no_depth) ++track.no_depth_warnings;
    if (!count_set(projected.mask)) {
      track.lost_at = j;
      track.masks.emplace_back(intr.width, intr.height);
      track.seeds.emplace_back();
      continue;
    }
    const Mask region = dilate(projected.mask, settings.dilation_radius);
    auto seeds = select_seeds_fps(region, settings.seeds);
    RefineRequest request{j, &images[j], &region, seeds};
    track.masks.push_back(refiner.refine(request));
    track.seeds.push_back(std::move(seeds));
  }
  return track;
}

double mask_iou(const Mask& a, const Mask& b) {
  if (!a.same_size(b)) throw std::invalid_argument("mask_iou: size mismatch");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const bool x = a.data()[i] != 0, y = b.data()[i] != 0;
    inter += x && y;
    uni += x || y;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace splatmesh
