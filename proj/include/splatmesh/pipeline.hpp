#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "splatmesh/config.hpp"
#include "splatmesh/evaluation.hpp"
#include "splatmesh/stereo.hpp"

namespace splatmesh {

// Output directory layout (all under config.output):
//   render/cameras.txt, render/rig.txt, render/<id>_{left,right}.png,
//   render/<id>_depth.pfm (analytic scenes only)
//   depth/<id>_{disparity,depth}.pfm, depth/<id>_{valid,occluded,in_range}.png, depth/<id>.txt
//   masks/<id>.png, masks/<id>_seeds.txt, masks/track.txt
//   fusion/mesh.ply, fusion/mesh_raw.ply, fusion/volume.{txt,raw}, fusion/fusion.txt
//   eval/metrics.json, eval/gt_oracle.ply (when the oracle provides ground truth)
//   manifest.json
namespace layout {
std::filesystem::path render_dir(const PipelineConfig& c);
std::filesystem::path depth_dir(const PipelineConfig& c);
std::filesystem::path masks_dir(const PipelineConfig& c);
std::filesystem::path fusion_dir(const PipelineConfig& c);
std::filesystem::path eval_dir(const PipelineConfig& c);
std::filesystem::path mesh_path(const PipelineConfig& c);
std::filesystem::path metrics_path(const PipelineConfig& c);
std::filesystem::path manifest_path(const PipelineConfig& c);
}  // namespace layout

struct StageResult {
  std::string stage;
  bool skipped = false;
  double seconds = 0.0;
  std::map<std::string, double> counters;  // warnings and sizes worth reporting
};

// Each command validates its inputs, writes its outputs and records itself in
// the run manifest (stage hash, timing, counters). Input problems raise
// InputError, processing failures StageError naming the frame.
StageResult cmd_render_stereo(const PipelineConfig& config);
StageResult cmd_match(const PipelineConfig& config);
StageResult cmd_segment(const PipelineConfig& config);
StageResult cmd_fuse(const PipelineConfig& config);
StageResult cmd_eval(const PipelineConfig& config, MetricsReport* report = nullptr);

// Runs every stage in order, skipping stages whose manifest hash matches the
// current config and inputs and whose outputs are all present (unless force).
std::vector<StageResult> cmd_pipeline(const PipelineConfig& config, bool force = false);

// COLMAP text model directory -> camera file. Returns the frame count.
std::size_t cmd_convert_colmap(const std::filesystem::path& colmap_dir, const std::filesystem::path& camera_file);

// Camera frames of the configured source, sorted as listed.
std::vector<CameraFrame> load_cameras(const PipelineConfig& config);

// Baseline the config yields for these cameras.
double rig_baseline(const PipelineConfig& config, const std::vector<CameraFrame>& cameras);

// Reads the per-frame outputs of the match stage.
DepthFrame load_depth_frame(const PipelineConfig& config, const CameraFrame& camera, double baseline);

std::string sha256_hex(const std::string& data);

}  // namespace splatmesh
