#include "splatmesh/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdio>
#include <functional>
#include <sstream>

#include "splatmesh/error.hpp"

namespace splatmesh {
namespace {

namespace fs = std::filesystem;

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& s) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size()) throw InputError("config: " + key + " expects a number, got '" + s + "'");
  return v;
}

long long parse_int(const std::string& key, const std::string& s) {
  long long v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size()) throw InputError("config: " + key + " expects an integer, got '" + s + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw InputError("config: " + key + " expects true/false, got '" + s + "'");
}

std::optional<double> parse_auto_double(const std::string& key, const std::string& s) {
  if (s == "auto") return std::nullopt;
  return parse_double(key, s);
}

fs::path parse_path(const std::string& s, const fs::path& base) {
  if (s.empty()) return {};
  const fs::path p(s);
  return p.is_absolute() || base.empty() ? p : base / p;
}

std::string show(const std::optional<double>& v) { return v ? fmt_double(*v) : "auto"; }

struct Field {
  const char* section;
  const char* key;
  std::function<void(PipelineConfig&, const std::string&, const fs::path&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

#define SM_PATH(sec, name, member)                                                             \
  Field {                                                                                      \
    sec, name, [](PipelineConfig& c, const std::string& v, const fs::path& b) {                \
      c.member = parse_path(v, b);                                                             \
    },                                                                                         \
        [](const PipelineConfig& c) { return c.member.string(); }                              \
  }
#define SM_DOUBLE(sec, name, member)                                                           \
  Field {                                                                                      \
    sec, name, [](PipelineConfig& c, const std::string& v, const fs::path&) {                  \
      c.member = parse_double(sec "." name, v);                                                \
    },                                                                                         \
        [](const PipelineConfig& c) { return fmt_double(c.member); }                           \
  }
#define SM_INT(sec, name, member, type)                                                        \
  Field {                                                                                      \
    sec, name, [](PipelineConfig& c, const std::string& v, const fs::path&) {                  \
      c.member = static_cast<type>(parse_int(sec "." name, v));                                \
    },                                                                                         \
        [](const PipelineConfig& c) { return std::to_string(c.member); }                       \
  }
#define SM_BOOL(sec, name, member)                                                             \
  Field {                                                                                      \
    sec, name, [](PipelineConfig& c, const std::string& v, const fs::path&) {                  \
      c.member = parse_bool(sec "." name, v);                                                  \
    },                                                                                         \
        [](const PipelineConfig& c) { return std::string(c.member ? "true" : "false"); }       \
  }
#define SM_AUTO(sec, name, member)                                                             \
  Field {                                                                                      \
    sec, name, [](PipelineConfig& c, const std::string& v, const fs::path&) {                  \
      c.member = parse_auto_double(sec "." name, v);                                           \
    },                                                                                         \
        [](const PipelineConfig& c) { return show(c.member); }                                 \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      SM_PATH("scene", "splat", splat),
      SM_PATH("scene", "analytic", analytic),
      SM_PATH("scene", "cameras", cameras),
      SM_PATH("scene", "colmap", colmap),
      SM_PATH("scene", "output", output),
      SM_PATH("scene", "gt", gt),
      SM_DOUBLE("rig", "baseline_fraction", baseline_fraction),
      SM_AUTO("rig", "baseline", baseline),
      Field{"stereo", "max_disparity",
            [](PipelineConfig& c, const std::string& v, const fs::path&) {
              c.auto_max_disparity = v == "auto";
              if (!c.auto_max_disparity) c.stereo.max_disparity = static_cast<int>(parse_int("stereo.max_disparity", v));
            },
            [](const PipelineConfig& c) {
              return c.auto_max_disparity ? std::string("auto") : std::to_string(c.stereo.max_disparity);
            }},
      SM_INT("stereo", "p1", stereo.p1, int),
      SM_INT("stereo", "p2", stereo.p2, int),
      SM_INT("stereo", "num_paths", stereo.num_paths, int),
      SM_DOUBLE("stereo", "lr_threshold", stereo.lr_threshold),
      SM_DOUBLE("stereo", "uniqueness_ratio", stereo.uniqueness_ratio),
      SM_BOOL("stereo", "subpixel", stereo.subpixel),
      SM_AUTO("fusion", "voxel_size", voxel_size),
      SM_INT("fusion", "resolution", resolution, int),
      SM_AUTO("fusion", "truncation", truncation),
      Field{"fusion", "min_weight",
            [](PipelineConfig& c, const std::string& v, const fs::path&) {
              c.min_weight = static_cast<float>(parse_double("fusion.min_weight", v));
            },
            [](const PipelineConfig& c) { return fmt_double(c.min_weight); }},
      SM_INT("fusion", "min_triangles", min_triangles, std::size_t),
      SM_BOOL("segmentation", "enabled", segmentation),
      SM_PATH("segmentation", "initial_mask", initial_mask),
      SM_INT("segmentation", "object_primitive", object_primitive, int),
      SM_INT("segmentation", "dilation_radius", track.dilation_radius, int),
      SM_INT("segmentation", "seeds", track.seeds, std::size_t),
      Field{"segmentation", "refiner",
            [](PipelineConfig& c, const std::string& v, const fs::path&) { c.refiner = v; },
            [](const PipelineConfig& c) { return c.refiner; }},
      Field{"segmentation", "refiner_command",
            [](PipelineConfig& c, const std::string& v, const fs::path&) { c.refiner_command = v; },
            [](const PipelineConfig& c) { return c.refiner_command; }},
      SM_AUTO("eval", "tau", tau),
      SM_DOUBLE("eval", "tau_voxels", tau_voxels),
      SM_INT("eval", "samples", eval.samples, std::size_t),
      SM_BOOL("eval", "icp", eval.icp),
      SM_INT("eval", "icp_max_iters", eval.icp_max_iters, int),
      SM_DOUBLE("eval", "icp_tol", eval.icp_tol),
      SM_DOUBLE("eval", "unit_to_mm", eval.unit_to_mm),
      SM_INT("run", "threads", threads, int),
      SM_INT("run", "seed", seed, std::uint64_t),
  };
  return table;
}

#undef SM_PATH
#undef SM_DOUBLE
#undef SM_INT
#undef SM_BOOL
#undef SM_AUTO

const Field& find_field(const std::string& section, const std::string& key) {
  for (const auto& f : fields())
    if (section == f.section && key == f.key) return f;
  throw InputError("config: unknown setting " + section + "." + key);
}

}  // namespace

void PipelineConfig::validate() const {
  const int sources = !splat.empty() + !analytic.empty();
  if (sources != 1) throw InputError("config: exactly one of scene.splat and scene.analytic must be set");
  if (cameras.empty() == colmap.empty()) throw InputError("config: exactly one of scene.cameras and scene.colmap must be set");
  if (output.empty()) throw InputError("config: scene.output must be set");
  if (!(baseline_fraction > 0.0)) throw InputError("config: rig.baseline_fraction must be positive");
  if (baseline && !(*baseline > 0.0)) throw InputError("config: rig.baseline must be positive");
  try {
    StereoParams p = stereo;
    if (auto_max_disparity) p.max_disparity = 1;
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  if (voxel_size && !(*voxel_size > 0.0)) throw InputError("config: fusion.voxel_size must be positive");
  if (!voxel_size && resolution < 24) throw InputError("config: fusion.resolution must be at least 24");
  if (voxel_size && truncation && *truncation < 2.0 * *voxel_size)
    throw InputError("config: fusion.truncation must be at least 2 * voxel_size");
  if (truncation && !(*truncation > 0.0)) throw InputError("config: fusion.truncation must be positive");
  if (!(min_weight >= 0.f)) throw InputError("config: fusion.min_weight must be non-negative");
  if (track.dilation_radius < 0) throw InputError("config: segmentation.dilation_radius must be >= 0");
  if (track.seeds < 1) throw InputError("config: segmentation.seeds must be >= 1");
  if (refiner != "identity" && refiner != "external")
    throw InputError("config: segmentation.refiner must be identity or external");
  if (refiner == "external" && refiner_command.empty())
    throw InputError("config: segmentation.refiner_command is required for the external refiner");
  if (segmentation && initial_mask.empty() && object_primitive < 0)
    throw InputError("config: segmentation needs initial_mask or object_primitive");
  if (segmentation && initial_mask.empty() && analytic.empty())
    throw InputError("config: segmentation.object_primitive only works with analytic scenes");
  if (tau && !(*tau > 0.0)) throw InputError("config: eval.tau must be positive");
  if (!(tau_voxels > 0.0)) throw InputError("config: eval.tau_voxels must be positive");
  if (eval.samples == 0) throw InputError("config: eval.samples must be positive");
  if (!(eval.unit_to_mm > 0.0)) throw InputError("config: eval.unit_to_mm must be positive");
  if (threads < 0) throw InputError("config: run.threads must be >= 0");
}

std::string PipelineConfig::stage_text(const std::string& stage) const {
  // Each stage hashes its own section plus everything upstream of it.
  static const std::vector<std::pair<std::string, std::vector<std::string>>> deps = {
      {"render", {"scene", "rig"}},
      {"match", {"scene", "rig", "stereo"}},
      {"segment", {"scene", "rig", "stereo", "segmentation"}},
      {"fuse", {"scene", "rig", "stereo", "segmentation", "fusion"}},
      {"eval", {"scene", "rig", "stereo", "segmentation", "fusion", "eval", "run"}},
  };
  const std::vector<std::string>* sections = nullptr;
  for (const auto& [name, secs] : deps)
    if (name == stage) sections = &secs;
  if (!sections) throw std::invalid_argument("stage_text: unknown stage " + stage);

  std::ostringstream out;
  for (const auto& f : fields()) {
    if (std::find(sections->begin(), sections->end(), f.section) == sections->end()) continue;
    if (std::string(f.section) == "scene" && std::string(f.key) == "output") continue;
    if (std::string(f.section) == "run" && std::string(f.key) == "threads") continue;
    if (std::string(f.section) == "scene" && std::string(f.key) == "gt" && stage != "eval") continue;
    out << f.section << "." << f.key << "=" << f.get(*this) << "\n";
  }
  return out.str();
}

PipelineConfig load_config(const std::filesystem::path& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw InputError("config: " + std::string(e.what()));
  }
  PipelineConfig config;
  const fs::path base = path.parent_path();
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw InputError("config: setting '" + section + "' outside a section");
    for (const auto& [key, value] : body) find_field(section, key).set(config, value.data(), base);
  }
  return config;
}

void apply_overrides(PipelineConfig& config, const std::vector<std::string>& assignments,
                     const std::filesystem::path& base_dir) {
  for (const auto& a : assignments) {
    const auto eq = a.find('=');
    const auto dot = a.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq)
      throw InputError("override must look like section.key=value: " + a);
    find_field(a.substr(0, dot), a.substr(dot + 1, eq - dot - 1)).set(config, a.substr(eq + 1), base_dir);
  }
}

std::string to_ini(const PipelineConfig& config) {
  std::ostringstream out;
  std::string section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      if (!section.empty()) out << "\n";
      section = f.section;
      out << "[" << section << "]\n";
    }
    out << f.key << " = " << f.get(config) << "\n";
  }
  return out.str();
}

}  // namespace splatmesh
