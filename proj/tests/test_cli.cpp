#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "splatmesh/camera.hpp"
#include "splatmesh/evaluation.hpp"
#include "splatmesh/mesh.hpp"
#include "test_util.hpp"

using namespace splatmesh;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Runs the CLI through the shell with stdout and stderr captured to files.
Run cli(const testing::TempDir& dir, const std::string& args, const std::string& env = "") {
  const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = env + " '" + std::string(SPLATMESH_CLI) + "' " + args + " >'" + out.string() + "' 2>'" +
                          err.string() + "'";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

// Small analytic sphere scene, `views` orbit cameras at 160x120.
fs::path write_scene(const testing::TempDir& dir, int views, const std::string& extra = "") {
  const Intrinsics k{80, 80, 79.5, 59.5, 160, 120};
  write_camera_file(dir / "cameras.txt", orbit_cameras(views, Vec3::Zero(), 1.6, 20.0, k));
  std::ofstream(dir / "scene.txt") << "background 0.05 0.05 0.08\n"
                                      "sphere 0 0 0 1 0.9 0.6 0.4 texture 0.08 0.8\n";
  const fs::path config = dir / "run.ini";
  std::ofstream(config) << "[scene]\nanalytic = scene.txt\ncameras = cameras.txt\noutput = out\n"
                           "[fusion]\nresolution = 48\nmin_triangles = 10\n"
                           "[eval]\nsamples = 5000\n"
                        << extra;
  return config;
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);)
    if (!line.empty() && line[0] != '#') ++n;
  return n;
}

}  // namespace

TEST_CASE("usage errors exit with 2, help with 0") {
  testing::TempDir dir("cli_usage");
  CHECK(cli(dir, "").code == 2);
  CHECK(cli(dir, "no-such-command").code == 2);
  CHECK(cli(dir, "match").code == 2);  // --config is required
  CHECK(cli(dir, "--help").code == 0);
  CHECK(cli(dir, "pipeline -c '" + (dir / "missing.ini").string() + "'").code == 2);
}

TEST_CASE("config problems are input errors") {
  testing::TempDir dir("cli_config");
  const fs::path config = write_scene(dir, 3, "[stereo]\nbogus_key = 3\n");
  const Run r = cli(dir, "render-stereo -c '" + config.string() + "'");
  CHECK(r.code == 2);
  CHECK(contains(r.err, "bogus_key"));

  const fs::path ok = write_scene(dir, 3);
  const Run bad_set = cli(dir, "render-stereo -c '" + ok.string() + "' --set stereo.p1=abc");
  CHECK(bad_set.code == 2);
}

TEST_CASE("missing splat file exits with 2 and names the path") {
  testing::TempDir dir("cli_missing");
  write_scene(dir, 3);
  const fs::path config = dir / "splat.ini";
  std::ofstream(config) << "[scene]\nsplat = nowhere/scene.ply\ncameras = cameras.txt\noutput = out\n";
  const Run r = cli(dir, "render-stereo -c '" + config.string() + "'");
  CHECK(r.code == 2);
  CHECK(contains(r.err, "nowhere/scene.ply"));
}

TEST_CASE("render-stereo writes a pair per pose and oracle depth") {
  testing::TempDir dir("cli_render");
  const fs::path config = write_scene(dir, 3);
  const Run r = cli(dir, "render-stereo -c '" + config.string() + "'");
  REQUIRE(r.code == 0);
  const fs::path render = dir / "out" / "render";
  int pngs = 0, pfms = 0;
  for (const auto& e : fs::directory_iterator(render)) {
    pngs += e.path().extension() == ".png";
    pfms += e.path().extension() == ".pfm";
  }
  CHECK(pngs == 6);
  CHECK(pfms == 3);
  CHECK(count_lines(render / "rig.txt") == 3);
  CHECK(fs::exists(dir / "out" / "manifest.json"));
}

TEST_CASE("eval on an empty mesh is a stage error") {
  testing::TempDir dir("cli_empty");
  const fs::path config = write_scene(dir, 3);
  PointCloud gt;
  gt.points = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
  write_point_cloud_ply(dir / "gt.ply", gt);
  fs::create_directories(dir / "out" / "fusion");
  write_mesh_ply(dir / "out" / "fusion" / "mesh.ply", TriangleMesh{});
  const Run r = cli(dir, "eval -c '" + config.string() + "' --set scene.gt='" + (dir / "gt.ply").string() + "' --set eval.tau=0.01");
  CHECK(r.code == 1);
  CHECK(contains(r.err, "empty prediction"));
}

TEST_CASE("eval without a fused mesh is an input error") {
  testing::TempDir dir("cli_nomesh");
  const fs::path config = write_scene(dir, 3);
  const Run r = cli(dir, "eval -c '" + config.string() + "' --set eval.tau=0.01");
  CHECK(r.code == 2);
  CHECK(contains(r.err, "mesh.ply"));
}

TEST_CASE("pipeline resumes, reruns what changed and is deterministic") {
  testing::TempDir dir("cli_pipeline");
  const fs::path config = write_scene(dir, 6);
  const std::string base = "pipeline -c '" + config.string() + "'";

  const Run first = cli(dir, base, "SPLATMESH_THREADS=1");
  REQUIRE(first.code == 0);
  const fs::path mesh = dir / "out" / "fusion" / "mesh.ply";
  const fs::path metrics = dir / "out" / "eval" / "metrics.json";
  REQUIRE(fs::exists(mesh));
  REQUIRE(fs::exists(metrics));
  const std::string mesh_bytes = slurp(mesh), metrics_bytes = slurp(metrics);

  const Run again = cli(dir, base);
  REQUIRE(again.code == 0);
  for (const char* stage : {"render", "match", "fuse", "eval"})
    CHECK(contains(again.out, std::string(stage) + ": skipped"));

  // A fusion setting invalidates fusion and everything after it only.
  const Run changed = cli(dir, base + " --set fusion.min_triangles=11");
  REQUIRE(changed.code == 0);
  CHECK(contains(changed.out, "render: skipped"));
  CHECK(contains(changed.out, "match: skipped"));
  CHECK(contains(changed.out, "fuse: done"));
  CHECK(contains(changed.out, "eval: done"));

  // Deleted outputs are regenerated even when the hash matches.
  fs::remove(mesh);
  const Run repaired = cli(dir, base);
  REQUIRE(repaired.code == 0);
  CHECK(contains(repaired.out, "fuse: done"));

  const Run forced = cli(dir, base + " --force --threads 3");
  REQUIRE(forced.code == 0);
  CHECK(contains(forced.out, "render: done"));
  CHECK(slurp(mesh) == mesh_bytes);
  CHECK(slurp(metrics) == metrics_bytes);

  const Run env_threads = cli(dir, base + " --force", "SPLATMESH_THREADS=5");
  REQUIRE(env_threads.code == 0);
  CHECK(slurp(mesh) == mesh_bytes);
}

TEST_CASE("stages run one at a time and report missing inputs") {
  testing::TempDir dir("cli_stages");
  const fs::path config = write_scene(dir, 8);
  const std::string c = " -c '" + config.string() + "'";
  const Run early = cli(dir, "fuse" + c);
  CHECK(early.code == 2);
  CHECK(cli(dir, "render-stereo" + c).code == 0);
  CHECK(cli(dir, "match" + c).code == 0);
  CHECK(cli(dir, "fuse" + c).code == 0);
  const Run eval = cli(dir, "eval" + c);
  REQUIRE(eval.code == 0);
  CHECK(contains(eval.out, "\"f1\""));
  CHECK(fs::exists(dir / "out" / "depth" / "frame_0000_depth.pfm"));
}

TEST_CASE("seed flag changes evaluation sampling only") {
  testing::TempDir dir("cli_seed");
  const fs::path config = write_scene(dir, 8);
  const std::string base = "pipeline -c '" + config.string() + "'";
  REQUIRE(cli(dir, base).code == 0);
  const std::string mesh = slurp(dir / "out" / "fusion" / "mesh.ply");
  const Run reseeded = cli(dir, base + " --seed 7");
  REQUIRE(reseeded.code == 0);
  CHECK(contains(reseeded.out, "fuse: skipped"));
  CHECK(contains(reseeded.out, "eval: done"));
  CHECK(slurp(dir / "out" / "fusion" / "mesh.ply") == mesh);
}

TEST_CASE("convert-colmap writes a camera file") {
  testing::TempDir dir("cli_colmap");
  fs::create_directories(dir / "sparse");
  std::ofstream(dir / "sparse" / "cameras.txt") << "# camera list\n1 PINHOLE 64 48 50 50 32 24\n";
  std::ofstream(dir / "sparse" / "images.txt") << "# image list\n"
                                                   "1 1 0 0 0 0 0 2 1 a.png\n\n"
                                                   "2 0.9238795 0 0.3826834 0 0.5 0 2 1 b.png\n\n";
  const fs::path out = dir / "cams.txt";
  const Run r = cli(dir, "convert-colmap '" + (dir / "sparse").string() + "' '" + out.string() + "'");
  REQUIRE(r.code == 0);
  const auto frames = read_camera_file(out);
  REQUIRE(frames.size() == 2);
  CHECK(frames[0].intrinsics.fx == doctest::Approx(50));
  CHECK(frames[0].intrinsics.cx == doctest::Approx(31.5));
  CHECK(frames[0].pose.center.isApprox(Vec3(0, 0, -2)));

  CHECK(cli(dir, "convert-colmap '" + (dir / "nothing").string() + "' '" + out.string() + "'").code == 2);
  std::ofstream(dir / "sparse" / "cameras.txt") << "1 OPENCV 64 48 50 50 32 24 0.1 0 0 0\n";
  CHECK(cli(dir, "convert-colmap '" + (dir / "sparse").string() + "' '" + out.string() + "'").code == 2);
}
