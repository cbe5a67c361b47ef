#pragma once

#include <cstdint>
#include <utility>

#include "splatmesh/camera.hpp"
#include "splatmesh/image.hpp"

namespace splatmesh {

inline constexpr int kCensusWidth = 7;
inline constexpr int kCensusHeight = 5;
inline constexpr int kCensusBits = kCensusWidth * kCensusHeight - 1;

struct StereoParams {
  int max_disparity = 64;
  int p1 = 8;
  int p2 = 96;
  int num_paths = 8;  // 0 disables aggregation, otherwise 4 or 8
  double lr_threshold = 1.0;
  double uniqueness_ratio = 0.95;
  bool subpixel = true;

  void validate() const;
};

// max_disparity = ceil(fx / 2) capped at 256: the disparity of the near depth
// gate Z = 2B is fx / 2 for any baseline.
int default_max_disparity(double fx);

struct DisparityMap {
  FloatImage values;
  Mask valid;
};

// Census descriptor over a 7 wide by 5 tall window. Bit set when the neighbor
// is darker than the center; out-of-image neighbors replicate the border.
Image<std::uint64_t> census_transform(const GrayImage& image);

// Matching cost for left pixel x at disparity d. A right pixel x - d left of
// the image is replaced by column 0, so impossible candidates carry no
// constant penalty that aggregation could spread into textureless regions;
// match_left marks them invalid instead.
std::uint8_t census_cost(const Image<std::uint64_t>& left, const Image<std::uint64_t>& right,
                         int x, int y, int d);

// True when every pixel of the census window around (x, y) equals the center.
bool flat_window(const GrayImage& image, int x, int y);

// Left-based disparity for a rectified pair (right pixel = left pixel - d).
// Pixels with a flat census window are invalid: their raw cost is the same at
// every disparity, so any aggregated minimum there was carried in from
// textured neighbors.
DisparityMap match_left(const GrayImage& left, const GrayImage& right, const StereoParams& params);

// Returns (left-based, right-based). The right-based map is obtained by
// matching the horizontally mirrored pair with the eyes swapped, so both maps
// hold positive disparities: right pixel u corresponds to left pixel u + d.
std::pair<DisparityMap, DisparityMap> match_sgm(const GrayImage& left, const GrayImage& right,
                                                const StereoParams& params);

// Left-right cross check. A pixel is occluded when either map is invalid
// there, the lookup into the right map leaves the image, or the disparities
// disagree by more than lr_threshold.
Mask occlusion_mask(const DisparityMap& left, const DisparityMap& right, double lr_threshold);

inline constexpr double kMinDisparity = 1e-3;

struct DepthFrame {
  FloatImage depth;
  Mask valid;
  Mask occluded;
  Mask in_range;
  Intrinsics intrinsics;
  Pose pose;
  double baseline = 0.0;

  // valid && !occluded && in_range; empty occlusion / range masks count as pass.
  bool usable(int x, int y) const;
  Mask final_mask() const;
};

// Z = fx * B / d for valid pixels with d > kMinDisparity.
DepthFrame disparity_to_depth(const DisparityMap& disparity, double fx, double baseline);

// Closed interval [2B, 10B] on valid pixels.
Mask depth_range_mask(const DepthFrame& frame, double baseline);

// Depth error implied by a disparity error eps_d: eps_d * Z^2 / (fx * B).
double depth_error_bound(double depth, double eps_d, double fx, double baseline);

// Full per-frame stereo stage: match, cross-check, triangulate, gate.
DepthFrame compute_depth(const GrayImage& left, const GrayImage& right, const StereoRig& rig,
                         const StereoParams& params);

}  // namespace splatmesh
