// splatmesh command line: stereo rendering, matching, segmentation, fusion
// and evaluation stages, individually or chained.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "splatmesh/config.hpp"
#include "splatmesh/error.hpp"
#include "splatmesh/parallel.hpp"
#include "splatmesh/pipeline.hpp"

namespace {

using namespace splatmesh;

constexpr int kExitOk = 0;
constexpr int kExitStage = 1;
constexpr int kExitInput = 2;

struct CommonOptions {
  std::string config;
  std::vector<std::string> overrides;
  std::string output;
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config, "INI config file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--set", o.overrides, "Override a setting: section.key=value (repeatable)");
  cmd->add_option("-o,--output", o.output, "Output directory (overrides scene.output)");
  cmd->add_option("-j,--threads", o.threads, "Worker threads (overrides SPLATMESH_THREADS and run.threads)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seed, "RNG seed (overrides run.seed)");
}

// Precedence, lowest to highest: config file, --set, dedicated flags.
// Threads: run.threads < SPLATMESH_THREADS < --threads.
PipelineConfig resolve(const CommonOptions& o) {
  PipelineConfig config = load_config(o.config);
  apply_overrides(config, o.overrides, std::filesystem::current_path());
  if (!o.output.empty()) config.output = o.output;
  if (o.seed) config.seed = *o.seed;
  if (o.threads) {
    set_thread_count(*o.threads);
  } else if (std::getenv("SPLATMESH_THREADS") == nullptr && config.threads > 0) {
    set_thread_count(config.threads);
  }
  config.validate();
  return config;
}

void print(const StageResult& r) {
  std::cout << r.stage << (r.skipped ? ": skipped (up to date)" : ": done in " + std::to_string(r.seconds) + " s");
  for (const auto& [k, v] : r.counters) std::cout << " " << k << "=" << v;
  std::cout << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Surface reconstruction from stereo pairs rendered off a splat or analytic scene"};
  app.require_subcommand(1);

  CommonOptions common;
  bool force = false;
  std::vector<std::pair<CLI::App*, std::string>> stages;
  for (const auto& [name, help] : std::vector<std::pair<std::string, std::string>>{
           {"render-stereo", "Render left/right views for every camera"},
           {"match", "Census + SGM disparity, occlusion and range masks, depth"},
           {"segment", "Propagate an object mask through the sequence"},
           {"fuse", "TSDF fusion, marching cubes and mesh cleaning"},
           {"eval", "Score the fused mesh against ground truth"},
           {"pipeline", "Run all stages, skipping those already up to date"}}) {
    CLI::App* cmd = app.add_subcommand(name, help);
    add_common(cmd, common);
    if (name == "pipeline") cmd->add_flag("--force", force, "Rerun every stage");
    stages.emplace_back(cmd, name);
  }

  std::string colmap_dir, camera_out;
  CLI::App* convert = app.add_subcommand("convert-colmap", "Convert a COLMAP text model to a camera file");
  convert->add_option("colmap_dir", colmap_dir, "Directory with cameras.txt and images.txt")
      ->required()
      ->check(CLI::ExistingDirectory);
  convert->add_option("camera_file", camera_out, "Output camera file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (convert->parsed()) {
      const std::size_t n = cmd_convert_colmap(colmap_dir, camera_out);
      std::cout << "wrote " << n << " frames to " << camera_out << "\n";
      return kExitOk;
    }
    for (const auto& [cmd, name] : stages) {
      if (!cmd->parsed()) continue;
      const PipelineConfig config = resolve(common);
      if (name == "render-stereo") print(cmd_render_stereo(config));
      if (name == "match") print(cmd_match(config));
      if (name == "segment") print(cmd_segment(config));
      if (name == "fuse") print(cmd_fuse(config));
      if (name == "eval") {
        MetricsReport report;
        print(cmd_eval(config, &report));
        std::cout << report.to_json();
      }
      if (name == "pipeline")
        for (const auto& r : cmd_pipeline(config, force)) print(r);
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStage;
  }
  return kExitOk;
}
