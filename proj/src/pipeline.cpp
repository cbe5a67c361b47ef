#include "splatmesh/pipeline.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "splatmesh/error.hpp"
#include "splatmesh/image_io.hpp"
#include "splatmesh/parallel.hpp"
#include "splatmesh/render.hpp"
#include "splatmesh/tsdf.hpp"

namespace splatmesh {

namespace fs = std::filesystem;

namespace layout {
fs::path render_dir(const PipelineConfig& c) { return c.output / "render"; }
fs::path depth_dir(const PipelineConfig& c) { return c.output / "depth"; }
fs::path masks_dir(const PipelineConfig& c) { return c.output / "masks"; }
fs::path fusion_dir(const PipelineConfig& c) { return c.output / "fusion"; }
fs::path eval_dir(const PipelineConfig& c) { return c.output / "eval"; }
fs::path mesh_path(const PipelineConfig& c) { return fusion_dir(c) / "mesh.ply"; }
fs::path metrics_path(const PipelineConfig& c) { return eval_dir(c) / "metrics.json"; }
fs::path manifest_path(const PipelineConfig& c) { return c.output / "manifest.json"; }
}  // namespace layout

namespace {

using Clock = std::chrono::steady_clock;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Flat "key value" text files used for stage metadata.
void write_kv(const fs::path& path, const std::vector<std::pair<std::string, std::string>>& entries) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  for (const auto& [k, v] : entries) out << k << " " << v << "\n";
}

std::map<std::string, std::string> read_kv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("missing stage output " + path.string() + " (run the previous stage first)");
  std::map<std::string, std::string> kv;
  std::string key, value;
  while (in >> key >> value) kv[key] = value;
  return kv;
}

double kv_double(const std::map<std::string, std::string>& kv, const std::string& key, const fs::path& path) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw InputError(path.string() + ": missing " + key);
  return std::stod(it->second);
}

fs::path frame_file(const fs::path& dir, const CameraFrame& cam, const std::string& suffix) {
  return dir / (cam.id + suffix);
}

void check_frame_ids(const std::vector<CameraFrame>& cams) {
  std::set<std::string> seen;
  for (const auto& c : cams) {
    if (c.id.empty() || c.id.find_first_of("/\\") != std::string::npos)
      throw InputError("frame id '" + c.id + "' cannot be used as a file name");
    if (!seen.insert(c.id).second) throw InputError("duplicate frame id '" + c.id + "'");
  }
}

// Runs fn(i) for every frame, naming the frame in any failure.
template <typename Fn>
void for_each_frame(const std::vector<CameraFrame>& cams, Fn&& fn) {
  parallel_for(0, static_cast<int>(cams.size()), [&](int i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (const InputError& e) {
      throw InputError("frame " + cams[i].id + ": " + e.what());
    } catch (const std::exception& e) {
      throw StageError("frame " + cams[i].id + ": " + e.what());
    }
  });
}

// Render-stage products: left cameras and the per-frame baseline.
struct RenderedSet {
  std::vector<CameraFrame> cameras;
  double baseline = 0.0;
};

RenderedSet load_rendered(const PipelineConfig& config) {
  const fs::path dir = layout::render_dir(config);
  if (!fs::exists(dir / "cameras.txt")) throw InputError("missing " + (dir / "cameras.txt").string() + " (run render-stereo first)");
  RenderedSet set;
  set.cameras = read_camera_file(dir / "cameras.txt");
  std::ifstream in(dir / "rig.txt");
  if (!in) throw InputError("missing " + (dir / "rig.txt").string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string id;
    double fx = 0, b = 0;
    if (!(ss >> id >> fx >> b)) throw InputError("malformed rig line: " + line);
    set.baseline = b;
  }
  if (!(set.baseline > 0.0)) throw InputError("rig.txt holds no baseline");
  return set;
}

// Stage bookkeeping -------------------------------------------------------

std::vector<fs::path> stage_inputs(const PipelineConfig& c, const std::string& stage) {
  std::vector<fs::path> in;
  in.push_back(c.splat.empty() ? c.analytic : c.splat);
  if (!c.cameras.empty()) {
    in.push_back(c.cameras);
  } else {
    in.push_back(c.colmap / "cameras.txt");
    in.push_back(c.colmap / "images.txt");
  }
  if ((stage == "segment" || stage == "fuse" || stage == "eval") && c.segmentation && !c.initial_mask.empty())
    in.push_back(c.initial_mask);
  if (stage == "eval" && !c.gt.empty()) in.push_back(c.gt);
  return in;
}

std::string stage_hash(const PipelineConfig& c, const std::string& stage) {
  std::string text = c.stage_text(stage);
  for (const auto& p : stage_inputs(c, stage)) {
    if (!fs::exists(p)) throw InputError("input not found: " + p.string());
    text += p.filename().string() + ":" + sha256_hex(read_file(p)) + "\n";
  }
  return sha256_hex(text);
}

nlohmann::ordered_json read_manifest(const PipelineConfig& c) {
  const fs::path path = layout::manifest_path(c);
  if (!fs::exists(path)) return nlohmann::ordered_json::object();
  try {
    return nlohmann::ordered_json::parse(read_file(path));
  } catch (const nlohmann::json::exception&) {
    return nlohmann::ordered_json::object();  // unreadable manifest: nothing can be skipped
  }
}

void record_stage(const PipelineConfig& c, const StageResult& r, const std::vector<fs::path>& outputs) {
  auto manifest = read_manifest(c);
  manifest["config_hash"] = sha256_hex(to_ini(c));
  nlohmann::ordered_json entry;
  entry["hash"] = stage_hash(c, r.stage);
  entry["seconds"] = r.seconds;
  entry["counters"] = r.counters;
  std::vector<std::string> names;
  for (const auto& p : outputs) names.push_back(fs::relative(p, c.output).generic_string());
  entry["outputs"] = names;
  manifest["stages"][r.stage] = entry;
  std::ofstream out(layout::manifest_path(c));
  out << manifest.dump(2) << "\n";
}

bool stage_current(const PipelineConfig& c, const std::string& stage) {
  const auto manifest = read_manifest(c);
  if (!manifest.contains("stages") || !manifest["stages"].contains(stage)) return false;
  const auto& entry = manifest["stages"][stage];
  if (!entry.contains("hash") || entry["hash"] != stage_hash(c, stage)) return false;
  for (const auto& name : entry["outputs"])
    if (!fs::exists(c.output / name.get<std::string>())) return false;
  return true;
}

template <typename Fn>
StageResult timed(const std::string& stage, Fn&& fn) {
  StageResult r;
  r.stage = stage;
  const auto start = Clock::now();
  fn(r);
  r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return r;
}

// Stage outputs -----------------------------------------------------------

std::vector<fs::path> render_outputs(const PipelineConfig& c, const std::vector<CameraFrame>& cams) {
  const fs::path dir = layout::render_dir(c);
  std::vector<fs::path> out{dir / "cameras.txt", dir / "rig.txt"};
  for (const auto& cam : cams) {
    out.push_back(frame_file(dir, cam, "_left.png"));
    out.push_back(frame_file(dir, cam, "_right.png"));
    if (!c.analytic.empty()) out.push_back(frame_file(dir, cam, "_depth.pfm"));
  }
  return out;
}

std::vector<fs::path> match_outputs(const PipelineConfig& c, const std::vector<CameraFrame>& cams) {
  const fs::path dir = layout::depth_dir(c);
  std::vector<fs::path> out;
  for (const auto& cam : cams)
    for (const char* s : {"_disparity.pfm", "_depth.pfm", "_valid.png", "_occluded.png", "_in_range.png", ".txt"})
      out.push_back(frame_file(dir, cam, s));
  return out;
}

std::vector<fs::path> segment_outputs(const PipelineConfig& c, const std::vector<CameraFrame>& cams) {
  const fs::path dir = layout::masks_dir(c);
  std::vector<fs::path> out{dir / "track.txt"};
  for (const auto& cam : cams) {
    out.push_back(frame_file(dir, cam, ".png"));
    out.push_back(frame_file(dir, cam, "_seeds.txt"));
  }
  return out;
}

std::vector<fs::path> fuse_outputs(const PipelineConfig& c) {
  const fs::path dir = layout::fusion_dir(c);
  return {dir / "mesh.ply", dir / "mesh_raw.ply", dir / "volume.txt", dir / "volume.raw", dir / "fusion.txt"};
}

int max_disparity_for(const PipelineConfig& c, const Intrinsics& k) {
  if (!c.auto_max_disparity) return c.stereo.max_disparity;
  return std::min(default_max_disparity(k.fx), k.width - 1);
}

Mask oracle_object_mask(const AnalyticScene& scene, const CameraFrame& cam, int primitive) {
  const RenderedFrame r = render_analytic(scene, cam.intrinsics, cam.pose);
  Mask m(cam.intrinsics.width, cam.intrinsics.height);
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) m(x, y) = (*r.labels)(x, y) == primitive;
  return m;
}

// Observable oracle surface: every other pixel of every left view whose
// depth lies in the stereo gate, optionally restricted to one primitive.
PointCloud oracle_ground_truth(const PipelineConfig& c, const std::vector<CameraFrame>& cams, double baseline) {
  const AnalyticScene scene = read_analytic_scene(c.analytic);
  std::vector<std::vector<Vec3>> per_frame(cams.size());
  const int object = c.segmentation ? c.object_primitive : -1;
  for_each_frame(cams, [&](std::size_t i) {
    const auto& cam = cams[i];
    const RenderedFrame r = render_analytic(scene, cam.intrinsics, cam.pose);
    for (int y = 0; y < cam.intrinsics.height; y += 2)
      for (int x = 0; x < cam.intrinsics.width; x += 2) {
        const double z = (*r.depth)(x, y);
        if (!(z >= 2.0 * baseline && z <= 10.0 * baseline)) continue;
        if (object >= 0 && (*r.labels)(x, y) != object) continue;
        per_frame[i].push_back(unproject(cam.intrinsics, cam.pose, x, y, z));
      }
  });
  PointCloud gt;
  for (auto& pts : per_frame) gt.points.insert(gt.points.end(), pts.begin(), pts.end());
  return gt;
}

PointCloud load_ground_truth(const fs::path& path, const EvalSettings& settings) {
  const TriangleMesh mesh = read_mesh_ply(path);
  if (!mesh.faces.empty()) return sample_mesh(mesh, settings.samples, settings.seed ^ 0x9e3779b97f4a7c15ULL);
  PointCloud cloud;
  cloud.points = mesh.vertices;
  return cloud;
}

}  // namespace

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw StageError("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::vector<CameraFrame> load_cameras(const PipelineConfig& config) {
  std::vector<CameraFrame> cams = config.cameras.empty()
                                      ? read_colmap_text(config.colmap / "cameras.txt", config.colmap / "images.txt")
                                      : read_camera_file(config.cameras);
  check_frame_ids(cams);
  return cams;
}

double rig_baseline(const PipelineConfig& config, const std::vector<CameraFrame>& cameras) {
  if (config.baseline) return *config.baseline;
  std::vector<Pose> poses;
  for (const auto& c : cameras) poses.push_back(c.pose);
  try {
    return baseline_from_radius(scene_radius(poses), config.baseline_fraction);
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("cannot derive the baseline: ") + e.what() + " (set rig.baseline)");
  }
}

DepthFrame load_depth_frame(const PipelineConfig& config, const CameraFrame& camera, double baseline) {
  const fs::path dir = layout::depth_dir(config);
  DepthFrame f;
  f.depth = read_pfm(frame_file(dir, camera, "_depth.pfm"));
  f.valid = read_mask_png(frame_file(dir, camera, "_valid.png"));
  f.occluded = read_mask_png(frame_file(dir, camera, "_occluded.png"));
  f.in_range = read_mask_png(frame_file(dir, camera, "_in_range.png"));
  if (f.depth.width() != camera.intrinsics.width || f.depth.height() != camera.intrinsics.height ||
      !f.valid.same_size(f.depth) || !f.occluded.same_size(f.depth) || !f.in_range.same_size(f.depth))
    throw InputError("depth outputs of frame " + camera.id + " do not match its camera");
  f.intrinsics = camera.intrinsics;
  f.pose = camera.pose;
  f.baseline = baseline;
  return f;
}

StageResult cmd_render_stereo(const PipelineConfig& config) {
  config.validate();
  const auto cams = load_cameras(config);
  const double baseline = rig_baseline(config, cams);
  const fs::path dir = layout::render_dir(config);
  fs::create_directories(dir);

  std::optional<GaussianCloud> cloud;
  std::optional<AnalyticScene> scene;
  if (!config.splat.empty()) {
    cloud = load_gaussian_ply(config.splat);
  } else {
    scene = read_analytic_scene(config.analytic);
  }

  StageResult result = timed("render", [&](StageResult& r) {
    std::vector<std::size_t> skipped(cams.size(), 0);
    for_each_frame(cams, [&](std::size_t i) {
      const CameraFrame& cam = cams[i];
      const StereoRig rig = make_stereo_rig(cam.pose, cam.intrinsics, baseline);
      RenderedFrame left, right;
      if (cloud) {
        left = render_splats(*cloud, cam.intrinsics, rig.left);
        right = render_splats(*cloud, cam.intrinsics, rig.right);
        skipped[i] = left.skipped_elements;
      } else {
        left = render_analytic(*scene, cam.intrinsics, rig.left);
        right = render_analytic(*scene, cam.intrinsics, rig.right);
        write_pfm(frame_file(dir, cam, "_depth.pfm"), *left.depth);
      }
      write_png(frame_file(dir, cam, "_left.png"), left.rgb);
      write_png(frame_file(dir, cam, "_right.png"), right.rgb);
    });
    write_camera_file(dir / "cameras.txt", cams);
    std::ofstream rig(dir / "rig.txt");
    rig << "# frame_id fx baseline\n";
    for (const auto& cam : cams) rig << cam.id << " " << fmt(cam.intrinsics.fx) << " " << fmt(baseline) << "\n";
    r.counters["frames"] = static_cast<double>(cams.size());
    r.counters["baseline"] = baseline;
    r.counters["skipped_splats"] = cloud ? static_cast<double>(skipped.front()) : 0.0;
  });
  record_stage(config, result, render_outputs(config, cams));
  return result;
}

StageResult cmd_match(const PipelineConfig& config) {
  config.validate();
  const RenderedSet set = load_rendered(config);
  const fs::path in_dir = layout::render_dir(config);
  const fs::path dir = layout::depth_dir(config);
  fs::create_directories(dir);

  StageResult result = timed("match", [&](StageResult& r) {
    std::vector<std::size_t> usable(set.cameras.size(), 0);
    for_each_frame(set.cameras, [&](std::size_t i) {
      const CameraFrame& cam = set.cameras[i];
      const GrayImage left = to_gray(read_png(frame_file(in_dir, cam, "_left.png")));
      const GrayImage right = to_gray(read_png(frame_file(in_dir, cam, "_right.png")));
      if (left.width() != cam.intrinsics.width || left.height() != cam.intrinsics.height)
        throw InputError("rendered image size does not match the camera");
      StereoParams params = config.stereo;
      params.max_disparity = max_disparity_for(config, cam.intrinsics);

      const auto [disp_left, disp_right] = match_sgm(left, right, params);
      DepthFrame f = disparity_to_depth(disp_left, cam.intrinsics.fx, set.baseline);
      f.occluded = occlusion_mask(disp_left, disp_right, params.lr_threshold);
      f.in_range = depth_range_mask(f, set.baseline);
      usable[i] = count_set(f.final_mask());

      write_pfm(frame_file(dir, cam, "_disparity.pfm"), disp_left.values);
      write_pfm(frame_file(dir, cam, "_depth.pfm"), f.depth);
      write_mask_png(frame_file(dir, cam, "_valid.png"), f.valid);
      write_mask_png(frame_file(dir, cam, "_occluded.png"), f.occluded);
      write_mask_png(frame_file(dir, cam, "_in_range.png"), f.in_range);
      write_kv(frame_file(dir, cam, ".txt"),
               {{"fx", fmt(cam.intrinsics.fx)},
                {"baseline", fmt(set.baseline)},
                {"max_disparity", std::to_string(params.max_disparity)},
                {"lr_threshold", fmt(params.lr_threshold)},
                {"uniqueness_ratio", fmt(params.uniqueness_ratio)},
                {"depth_min", fmt(2.0 * set.baseline)},
                {"depth_max", fmt(10.0 * set.baseline)},
                {"error_bound_at_max",
                 fmt(depth_error_bound(10.0 * set.baseline, params.lr_threshold, cam.intrinsics.fx, set.baseline))},
                {"usable_pixels", std::to_string(usable[i])}});
    });
    std::size_t total = 0, empty = 0;
    for (auto u : usable) {
      total += u;
      empty += u == 0;
    }
    r.counters["usable_pixels"] = static_cast<double>(total);
    r.counters["frames_without_depth"] = static_cast<double>(empty);
  });
  record_stage(config, result, match_outputs(config, set.cameras));
  return result;
}

StageResult cmd_segment(const PipelineConfig& config) {
  config.validate();
  if (!config.segmentation) throw InputError("segmentation is disabled in the config (segmentation.enabled)");
  const RenderedSet set = load_rendered(config);
  const auto& cams = set.cameras;
  const fs::path dir = layout::masks_dir(config);
  fs::create_directories(dir);

  Mask initial;
  if (!config.initial_mask.empty()) {
    initial = read_mask_png(config.initial_mask);
    if (initial.width() != cams[0].intrinsics.width || initial.height() != cams[0].intrinsics.height)
      throw InputError("initial mask size does not match frame " + cams[0].id);
  } else {
    initial = oracle_object_mask(read_analytic_scene(config.analytic), cams[0], config.object_primitive);
    if (!count_set(initial))
      throw InputError("primitive " + std::to_string(config.object_primitive) + " is not visible in frame " + cams[0].id);
  }

  StageResult result = timed("segment", [&](StageResult& r) {
    std::vector<RgbImage> images(cams.size());
    std::vector<DepthFrame> depths(cams.size());
    for_each_frame(cams, [&](std::size_t i) {
      images[i] = read_png(frame_file(layout::render_dir(config), cams[i], "_left.png"));
      depths[i] = load_depth_frame(config, cams[i], set.baseline);
    });
    std::unique_ptr<MaskRefiner> refiner;
    if (config.refiner == "external")
      refiner = std::make_unique<ExternalRefiner>(config.refiner_command, dir / "exchange");
    else
      refiner = std::make_unique<IdentityRefiner>();
    const MaskTrack track = track_object(images, depths, cams, initial, *refiner, config.track);
    for (std::size_t i = 0; i < cams.size(); ++i) {
      write_mask_png(frame_file(dir, cams[i], ".png"), track.masks[i]);
      write_seeds(frame_file(dir, cams[i], "_seeds.txt"), track.seeds[i]);
    }
    write_kv(dir / "track.txt", {{"refiner", refiner->name()},
                                 {"frames", std::to_string(cams.size())},
                                 {"lost_at", track.lost_at ? cams[*track.lost_at].id : std::string("none")},
                                 {"no_depth_warnings", std::to_string(track.no_depth_warnings)}});
    r.counters["lost_at"] = track.lost_at ? static_cast<double>(*track.lost_at) : -1.0;
    r.counters["no_depth_warnings"] = static_cast<double>(track.no_depth_warnings);
    if (track.lost_at) std::clog << "warning: object track lost at frame " << cams[*track.lost_at].id << "\n";
  });
  record_stage(config, result, segment_outputs(config, cams));
  return result;
}

StageResult cmd_fuse(const PipelineConfig& config) {
  config.validate();
  const RenderedSet set = load_rendered(config);
  const auto& cams = set.cameras;
  const fs::path dir = layout::fusion_dir(config);
  fs::create_directories(dir);

  StageResult result = timed("fuse", [&](StageResult& r) {
    std::vector<DepthFrame> frames(cams.size());
    std::vector<RgbImage> colors(cams.size());
    for_each_frame(cams, [&](std::size_t i) {
      frames[i] = load_depth_frame(config, cams[i], set.baseline);
      colors[i] = read_png(frame_file(layout::render_dir(config), cams[i], "_left.png"));
      if (config.segmentation) {
        const Mask object = read_mask_png(frame_file(layout::masks_dir(config), cams[i], ".png"));
        if (!object.same_size(frames[i].depth)) throw InputError("object mask size mismatch");
        for (std::size_t p = 0; p < object.data().size(); ++p)
          if (!object.data()[p]) frames[i].valid.data()[p] = 0;
      }
    });

    const Bounds bounds = depth_bounds(frames);
    double far_error = 0.0;  // Eq. 1 bound at the far gate, worst over frames
    for (const auto& cam : cams)
      far_error = std::max(far_error, depth_error_bound(10.0 * set.baseline, config.stereo.lr_threshold,
                                                        cam.intrinsics.fx, set.baseline));
    const double extent = (bounds.max - bounds.min).maxCoeff();
    double voxel = 0.0;
    if (config.voxel_size) {
      voxel = *config.voxel_size;
    } else {
      // Largest padded axis must fit in `resolution` grid points:
      // ceil((extent + 4 * truncation) / voxel) + 1 <= resolution.
      const double res = config.resolution;
      voxel = config.truncation ? (extent + 4.0 * *config.truncation) / (res - 1.0)
                                : std::max(extent / (res - 17.0), (extent + 4.0 * far_error) / (res - 1.0));
      voxel *= 1.0 + 1e-9;
    }
    const double trunc = config.truncation.value_or(std::max(4.0 * voxel, far_error));
    if (trunc < 2.0 * voxel) throw InputError("fusion.truncation must be at least 2 * voxel_size");

    TsdfVolume volume = make_volume(bounds, voxel, trunc);
    for (std::size_t i = 0; i < cams.size(); ++i) {
      try {
        integrate(volume, frames[i], colors[i]);
      } catch (const std::exception& e) {
        throw StageError("frame " + cams[i].id + ": " + e.what());
      }
    }
    volume.save(dir / "volume");
    MeshingOptions meshing;
    meshing.min_weight = config.min_weight;
    const TriangleMesh raw = extract_mesh(volume, meshing);
    const TriangleMesh mesh = clean_mesh(raw, config.min_triangles);
    write_mesh_ply(dir / "mesh_raw.ply", raw);
    write_mesh_ply(dir / "mesh.ply", mesh);
    const auto& d = volume.dims();
    write_kv(dir / "fusion.txt", {{"voxel_size", fmt(voxel)},
                                  {"truncation", fmt(trunc)},
                                  {"dims", std::to_string(d[0]) + "x" + std::to_string(d[1]) + "x" + std::to_string(d[2])},
                                  {"missed_frames", std::to_string(volume.missed_frames)},
                                  {"faces_raw", std::to_string(raw.faces.size())},
                                  {"faces", std::to_string(mesh.faces.size())}});
    r.counters["voxel_size"] = voxel;
    r.counters["truncation"] = trunc;
    r.counters["missed_frames"] = static_cast<double>(volume.missed_frames);
    r.counters["faces_removed"] = static_cast<double>(raw.faces.size() - mesh.faces.size());
    r.counters["faces"] = static_cast<double>(mesh.faces.size());
    if (mesh.empty()) std::clog << "warning: fused mesh is empty\n";
  });
  record_stage(config, result, fuse_outputs(config));
  return result;
}

StageResult cmd_eval(const PipelineConfig& config, MetricsReport* report_out) {
  config.validate();
  if (config.gt.empty() && config.analytic.empty())
    throw InputError("eval needs scene.gt (only analytic scenes provide oracle ground truth)");
  const fs::path mesh_file = layout::mesh_path(config);
  if (!fs::exists(mesh_file)) throw InputError("mesh not found: " + mesh_file.string() + " (run fuse first)");
  const fs::path dir = layout::eval_dir(config);
  fs::create_directories(dir);

  std::vector<fs::path> outputs{layout::metrics_path(config)};
  StageResult result = timed("eval", [&](StageResult& r) {
    const TriangleMesh mesh = read_mesh_ply(mesh_file);
    EvalSettings settings = config.eval;
    settings.seed = config.seed;
    if (config.tau) {
      settings.tau = *config.tau;
    } else {
      const fs::path info = layout::fusion_dir(config) / "fusion.txt";
      settings.tau = config.tau_voxels * kv_double(read_kv(info), "voxel_size", info);
    }
    PointCloud gt;
    if (!config.gt.empty()) {
      gt = load_ground_truth(config.gt, settings);
    } else {
      const RenderedSet set = load_rendered(config);
      gt = oracle_ground_truth(config, set.cameras, set.baseline);
      write_point_cloud_ply(dir / "gt_oracle.ply", gt);
      outputs.push_back(dir / "gt_oracle.ply");
    }
    const MetricsReport report = evaluate(mesh, gt, settings);
    std::ofstream(layout::metrics_path(config)) << report.to_json();
    r.counters["f1"] = report.at_tau.f1;
    r.counters["chamfer"] = report.chamfer;
    if (report_out) *report_out = report;
  });
  record_stage(config, result, outputs);
  return result;
}

std::vector<StageResult> cmd_pipeline(const PipelineConfig& config, bool force) {
  config.validate();
  fs::create_directories(config.output);
  std::vector<StageResult> results;
  bool dirty = force;  // once a stage reruns, everything after it reruns too
  auto run = [&](const std::string& stage, auto&& fn) {
    if (!dirty && stage_current(config, stage)) {
      StageResult skipped;
      skipped.stage = stage;
      skipped.skipped = true;
      results.push_back(skipped);
      std::clog << "[" << stage << "] up to date, skipped\n";
      return;
    }
    dirty = true;
    results.push_back(fn());
    std::clog << "[" << stage << "] " << results.back().seconds << " s\n";
  };
  run("render", [&] { return cmd_render_stereo(config); });
  run("match", [&] { return cmd_match(config); });
  if (config.segmentation) run("segment", [&] { return cmd_segment(config); });
  run("fuse", [&] { return cmd_fuse(config); });
  if (!config.gt.empty() || !config.analytic.empty()) run("eval", [&] { return cmd_eval(config); });
  return results;
}

std::size_t cmd_convert_colmap(const fs::path& colmap_dir, const fs::path& camera_file) {
  const auto cams = read_colmap_text(colmap_dir / "cameras.txt", colmap_dir / "images.txt");
  check_frame_ids(cams);
  if (camera_file.has_parent_path()) fs::create_directories(camera_file.parent_path());
  write_camera_file(camera_file, cams);
  return cams.size();
}

}  // namespace splatmesh
