#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "splatmesh/evaluation.hpp"
#include "splatmesh/segmentation.hpp"
#include "splatmesh/stereo.hpp"

namespace splatmesh {

// Run configuration. The file is INI style with one section per stage:
//
//   [scene]         splat | analytic, cameras | colmap, output, gt
//   [rig]           baseline_fraction, baseline
//   [stereo]        max_disparity (or auto), p1, p2, num_paths, lr_threshold,
//                   uniqueness_ratio, subpixel
//   [fusion]        voxel_size (or auto), resolution, truncation (or auto),
//                   min_weight, min_triangles
//   [segmentation]  enabled, initial_mask, object_primitive, dilation_radius,
//                   seeds, refiner, refiner_command
//   [eval]          tau (or auto), tau_voxels, samples, icp, icp_max_iters,
//                   icp_tol, unit_to_mm
//   [run]           threads, seed
//
// Relative paths resolve against the config file's directory.
struct PipelineConfig {
  // scene
  std::filesystem::path splat;
  std::filesystem::path analytic;
  std::filesystem::path cameras;
  std::filesystem::path colmap;  // directory holding cameras.txt and images.txt
  std::filesystem::path output = "out";
  std::filesystem::path gt;      // optional; analytic scenes fall back to oracle ground truth

  // rig
  double baseline_fraction = kDefaultBaselineFraction;
  std::optional<double> baseline;  // absolute baseline, overrides the fraction

  // stereo
  StereoParams stereo;
  bool auto_max_disparity = true;

  // fusion
  std::optional<double> voxel_size;  // unset: derived from resolution
  int resolution = 128;              // voxels along the longest axis when voxel_size is unset
  std::optional<double> truncation;  // unset: default_truncation
  float min_weight = 1.f;
  std::size_t min_triangles = 100;

  // segmentation
  bool segmentation = false;
  std::filesystem::path initial_mask;
  int object_primitive = -1;  // analytic scenes: initial mask from the oracle labels
  TrackSettings track;
  std::string refiner = "identity";
  std::string refiner_command;

  // eval
  std::optional<double> tau;  // unset: tau_voxels * voxel size
  double tau_voxels = 2.0;
  EvalSettings eval;

  // run
  int threads = 0;
  std::uint64_t seed = 0;

  // Throws InputError on inconsistent settings.
  void validate() const;

  // Canonical text of the settings a stage depends on, used for stage hashes.
  std::string stage_text(const std::string& stage) const;
};

// Loads an INI config. Unknown sections or keys are input errors.
PipelineConfig load_config(const std::filesystem::path& path);

// Applies "section.key=value" overrides after the file has been read.
void apply_overrides(PipelineConfig& config, const std::vector<std::string>& assignments,
                     const std::filesystem::path& base_dir);

// Writes every setting in the file format (paths as stored).
std::string to_ini(const PipelineConfig& config);

}  // namespace splatmesh
