#include "splatmesh/stereo.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "splatmesh/parallel.hpp"

namespace splatmesh {
namespace {

using Cost = std::uint16_t;

struct Direction {
  int dx;
  int dy;
};

constexpr Direction kPaths8[] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {-1, -1}, {1, -1}, {-1, 1}};

GrayImage mirror(const GrayImage& img) {
  GrayImage out(img.width(), img.height(), img.channels());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c) out(x, y, c) = img(img.width() - 1 - x, y, c);
  return out;
}

DisparityMap mirror(const DisparityMap& m) {
  DisparityMap out{FloatImage(m.values.width(), m.values.height()), Mask(m.valid.width(), m.valid.height())};
  const int w = m.values.width();
  for (int y = 0; y < m.values.height(); ++y)
    for (int x = 0; x < w; ++x) {
      out.values(x, y) = m.values(w - 1 - x, y);
      out.valid(x, y) = m.valid(w - 1 - x, y);
    }
  return out;
}

// Scanline aggregation along one direction, added into `sum`. Every pixel
// belongs to exactly one line, so lines can be processed concurrently.
void aggregate_direction(const std::vector<std::uint8_t>& cost, std::vector<Cost>& sum, int width,
                         int height, int levels, Direction dir, int p1, int p2) {
  std::vector<Pixel> starts;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const int px = x - dir.dx, py = y - dir.dy;
      if (px < 0 || py < 0 || px >= width || py >= height) starts.push_back({x, y});
    }

  parallel_for(0, static_cast<int>(starts.size()), [&](int i) {
    std::vector<Cost> prev(levels), cur(levels);
    int x = starts[i].x, y = starts[i].y;
    bool first = true;
    while (x >= 0 && y >= 0 && x < width && y < height) {
      const std::size_t base = (static_cast<std::size_t>(y) * width + x) * levels;
      const std::uint8_t* c = cost.data() + base;
      if (first) {
        for (int d = 0; d < levels; ++d) cur[d] = c[d];
        first = false;
      } else {
        const Cost min_prev = *std::min_element(prev.begin(), prev.end());
        const int jump = min_prev + p2;
        for (int d = 0; d < levels; ++d) {
          int best = prev[d];
          if (d > 0) best = std::min(best, prev[d - 1] + p1);
          if (d + 1 < levels) best = std::min(best, prev[d + 1] + p1);
          best = std::min(best, jump);
          cur[d] = static_cast<Cost>(c[d] + best - min_prev);
        }
      }
      Cost* s = sum.data() + base;
      for (int d = 0; d < levels; ++d) s[d] = static_cast<Cost>(s[d] + cur[d]);
      std::swap(prev, cur);
      x += dir.dx;
      y += dir.dy;
    }
  });
}

}  // namespace

void StereoParams::validate() const {
  if (max_disparity < 1) throw std::invalid_argument("stereo: max_disparity must be >= 1");
  if (!(p1 > 0 && p2 >= p1)) throw std::invalid_argument("stereo: need P2 >= P1 > 0");
  if (num_paths != 0 && num_paths != 4 && num_paths != 8)
    throw std::invalid_argument("stereo: num_paths must be 0, 4 or 8");
  if (!(lr_threshold > 0.0)) throw std::invalid_argument("stereo: lr_threshold must be positive");
  if (!(uniqueness_ratio > 0.0 && uniqueness_ratio <= 1.0))
    throw std::invalid_argument("stereo: uniqueness_ratio must be in (0, 1]");
}

int default_max_disparity(double fx) {
  return std::min(256, static_cast<int>(std::ceil(fx / 2.0)));
}

Image<std::uint64_t> census_transform(const GrayImage& image) {
  const int w = image.width(), h = image.height();
  Image<std::uint64_t> out(w, h);
  constexpr int rx = kCensusWidth / 2, ry = kCensusHeight / 2;
  parallel_for(0, h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      const std::uint8_t center = image(x, y);
      std::uint64_t bits = 0;
      for (int dy = -ry; dy <= ry; ++dy)
        for (int dx = -rx; dx <= rx; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int sx = std::clamp(x + dx, 0, w - 1);
          const int sy = std::clamp(y + dy, 0, h - 1);
          bits = (bits << 1) | (image(sx, sy) < center ? 1u : 0u);
        }
      out(x, y) = bits;
    }
  });
  return out;
}

std::uint8_t census_cost(const Image<std::uint64_t>& left, const Image<std::uint64_t>& right,
                         int x, int y, int d) {
  return static_cast<std::uint8_t>(std::popcount(left(x, y) ^ right(std::max(x - d, 0), y)));
}

bool flat_window(const GrayImage& image, int x, int y) {
  const int w = image.width(), h = image.height();
  constexpr int rx = kCensusWidth / 2, ry = kCensusHeight / 2;
  const std::uint8_t center = image(x, y);
  for (int dy = -ry; dy <= ry; ++dy)
    for (int dx = -rx; dx <= rx; ++dx)
      if (image(std::clamp(x + dx, 0, w - 1), std::clamp(y + dy, 0, h - 1)) != center) return false;
  return true;
}

DisparityMap match_left(const GrayImage& left, const GrayImage& right, const StereoParams& params) {
  params.validate();
  if (!left.same_size(right) || left.channels() != 1 || right.channels() != 1)
    throw std::invalid_argument("stereo: image dimensions differ");
  const int w = left.width(), h = left.height();
  if (params.max_disparity >= w) throw std::invalid_argument("stereo: max_disparity must be below image width");
  const int levels = params.max_disparity + 1;

  const auto census_l = census_transform(left);
  const auto census_r = census_transform(right);
  std::vector<std::uint8_t> cost(static_cast<std::size_t>(w) * h * levels);
  parallel_for(0, h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      std::uint8_t* c = cost.data() + (static_cast<std::size_t>(y) * w + x) * levels;
      for (int d = 0; d < levels; ++d) c[d] = census_cost(census_l, census_r, x, y, d);
    }
  });

  std::vector<Cost> sum(cost.size(), 0);
  if (params.num_paths == 0) {
    std::copy(cost.begin(), cost.end(), sum.begin());
  } else {
    for (int i = 0; i < params.num_paths; ++i)
      aggregate_direction(cost, sum, w, h, levels, kPaths8[i], params.p1, params.p2);
  }
  cost.clear();
  cost.shrink_to_fit();

  DisparityMap out{FloatImage(w, h), Mask(w, h)};
  parallel_for(0, h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      const Cost* s = sum.data() + (static_cast<std::size_t>(y) * w + x) * levels;
      int best = 0;
      for (int d = 1; d < levels; ++d)
        if (s[d] < s[best]) best = d;
      int second = std::numeric_limits<int>::max();
      for (int d = 0; d < levels; ++d)
        if (std::abs(d - best) > 1) second = std::min(second, static_cast<int>(s[d]));
      const bool unique = second == std::numeric_limits<int>::max() ||
                          static_cast<double>(s[best]) < params.uniqueness_ratio * second;

      double disp = best;
      if (params.subpixel && best > 0 && best < params.max_disparity) {
        const int c0 = s[best - 1], c1 = s[best], c2 = s[best + 1];
        const int denom = c0 - 2 * c1 + c2;
        if (denom > 0) disp += static_cast<double>(c0 - c2) / (2.0 * denom);
      }
      out.values(x, y) = static_cast<float>(std::clamp(disp, 0.0, static_cast<double>(params.max_disparity)));
      out.valid(x, y) = unique && best <= x && !flat_window(left, x, y);
    }
  });
  return out;
}

std::pair<DisparityMap, DisparityMap> match_sgm(const GrayImage& left, const GrayImage& right,
                                                const StereoParams& params) {
  DisparityMap from_left = match_left(left, right, params);
  DisparityMap from_right = mirror(match_left(mirror(right), mirror(left), params));
  return {std::move(from_left), std::move(from_right)};
}

Mask occlusion_mask(const DisparityMap& left, const DisparityMap& right, double lr_threshold) {
  if (!left.values.same_size(right.values)) throw std::invalid_argument("occlusion_mask: size mismatch");
  const int w = left.values.width(), h = left.values.height();
  Mask occluded(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      bool bad = !left.valid(x, y);
      if (!bad) {
        const float d = left.values(x, y);
        const long xr = x - std::lround(d);
        bad = xr < 0 || xr >= w || !right.valid(static_cast<int>(xr), y) ||
              std::abs(d - right.values(static_cast<int>(xr), y)) > lr_threshold;
      }
      occluded(x, y) = bad ? 1 : 0;
    }
  return occluded;
}

bool DepthFrame::usable(int x, int y) const {
  if (!valid(x, y)) return false;
  if (!occluded.empty() && occluded(x, y)) return false;
  if (!in_range.empty() && !in_range(x, y)) return false;
  return true;
}

Mask DepthFrame::final_mask() const {
  Mask m(depth.width(), depth.height());
  for (int y = 0; y < depth.height(); ++y)
    for (int x = 0; x < depth.width(); ++x) m(x, y) = usable(x, y) ? 1 : 0;
  return m;
}

DepthFrame disparity_to_depth(const DisparityMap& disparity, double fx, double baseline) {
  if (!(fx > 0.0) || !(baseline > 0.0)) throw std::invalid_argument("disparity_to_depth: fx and B must be positive");
  const int w = disparity.values.width(), h = disparity.values.height();
  DepthFrame frame;
  frame.depth = FloatImage(w, h, 1, 0.f);
  frame.valid = Mask(w, h);
  frame.baseline = baseline;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double d = disparity.values(x, y);
      if (disparity.valid(x, y) && d > kMinDisparity) {
        frame.depth(x, y) = static_cast<float>(fx * baseline / d);
        frame.valid(x, y) = 1;
      }
    }
  return frame;
}

Mask depth_range_mask(const DepthFrame& frame, double baseline) {
  if (!(baseline > 0.0)) throw std::invalid_argument("depth_range_mask: baseline must be positive");
  const double lo = 2.0 * baseline, hi = 10.0 * baseline;
  Mask keep(frame.depth.width(), frame.depth.height());
  for (int y = 0; y < frame.depth.height(); ++y)
    for (int x = 0; x < frame.depth.width(); ++x) {
      const double z = frame.depth(x, y);
      keep(x, y) = frame.valid(x, y) && z >= lo && z <= hi ? 1 : 0;
    }
  return keep;
}

double depth_error_bound(double depth, double eps_d, double fx, double baseline) {
  return eps_d * depth * depth / (fx * baseline);
}

DepthFrame compute_depth(const GrayImage& left, const GrayImage& right, const StereoRig& rig,
                         const StereoParams& params) {
  auto [disp_left, disp_right] = match_sgm(left, right, params);
  DepthFrame frame = disparity_to_depth(disp_left, rig.intrinsics.fx, rig.baseline);
  frame.occluded = occlusion_mask(disp_left, disp_right, params.lr_threshold);
  frame.in_range = depth_range_mask(frame, rig.baseline);
  frame.intrinsics = rig.intrinsics;
  frame.pose = rig.left;
  return frame;
}

}  // namespace splatmesh
