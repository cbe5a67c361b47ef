#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "splatmesh/camera.hpp"
#include "splatmesh/image.hpp"
#include "splatmesh/stereo.hpp"

namespace splatmesh {

struct PropagationResult {
  Mask mask;
  std::size_t projected_points = 0;
  bool no_depth = false;  // warning: nothing under the mask had usable depth
};

// Lifts every masked pixel with usable depth into the world, projects it into
// camera j and marks the 3x3 neighborhood around the nearest pixel.
PropagationResult propagate_mask(const Mask& mask, const DepthFrame& depth, const Intrinsics& target_intr,
                                 const Pose& target_pose);

// Dilation with a disc of the given radius: (dx, dy) with dx^2 + dy^2 <= r^2.
Mask dilate(const Mask& mask, int radius);

// Farthest point sampling. Starts at the pixel nearest the mask centroid, then
// repeatedly takes the pixel farthest from all chosen seeds. Ties go to the
// first pixel in row-major order. Returns every pixel when k exceeds the count.
std::vector<Pixel> select_seeds_fps(std::span<const Pixel> pixels, std::size_t k);
std::vector<Pixel> select_seeds_fps(const Mask& mask, std::size_t k);

struct RefineRequest {
  std::size_t frame_index = 0;
  const RgbImage* image = nullptr;
  const Mask* region = nullptr;  // projected and dilated mask
  std::span<const Pixel> seeds;
};

class MaskRefiner {
 public:
  virtual ~MaskRefiner() = default;
  virtual std::string name() const = 0;
  virtual Mask refine(const RefineRequest& request) = 0;
};

// Passes the projected, dilated mask through unchanged.
class IdentityRefiner final : public MaskRefiner {
 public:
  std::string name() const override { return "identity"; }
  Mask refine(const RefineRequest& request) override { return *request.region; }
};

// Out-of-process refiner. For each frame it writes
//   <exchange_dir>/frame_NNNN/image.png   RGB frame
//   <exchange_dir>/frame_NNNN/region.png  dilated mask (1-bit)
//   <exchange_dir>/frame_NNNN/seeds.txt   "u v" per line
// runs `<command> <frame dir>` and reads back <frame dir>/mask.png.
class ExternalRefiner final : public MaskRefiner {
 public:
  ExternalRefiner(std::string command, std::filesystem::path exchange_dir);
  std::string name() const override { return "external"; }
  Mask refine(const RefineRequest& request) override;

 private:
  std::string command_;
  std::filesystem::path exchange_dir_;
};

void write_seeds(const std::filesystem::path& path, std::span<const Pixel> seeds);
std::vector<Pixel> read_seeds(const std::filesystem::path& path);

struct TrackSettings {
  int dilation_radius = 10;
  std::size_t seeds = 5;
};

struct MaskTrack {
  std::vector<Mask> masks;
  std::vector<std::vector<Pixel>> seeds;
  std::optional<std::size_t> lost_at;  // first frame whose propagated mask was empty
  std::size_t no_depth_warnings = 0;
};

// Frame j's mask comes from frame j-1 only: propagate, dilate, pick seeds,
// refine. After the track is lost every later mask is empty.
MaskTrack track_object(std::span<const RgbImage> images, std::span<const DepthFrame> depths,
                       std::span<const CameraFrame> cameras, const Mask& initial_mask, MaskRefiner& refiner, const TrackSettings& settings);

double mask_iou(const Mask& a, const Mask& b);

}  // namespace splatmesh
