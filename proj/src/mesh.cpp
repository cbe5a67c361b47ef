#include "splatmesh/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "splatmesh/error.hpp"
#include "splatmesh/ply.hpp"

namespace splatmesh {
namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t i) {
    while (parent_[i] != i) {
      parent_[i] = parent_[parent_[i]];
      i = parent_[i];
    }
    return i;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

// Component root per face.
std::vector<std::size_t> face_components(const TriangleMesh& mesh) {
  DisjointSets sets(mesh.vertices.size());
  for (const auto& f : mesh.faces) {
    sets.unite(f[0], f[1]);
    sets.unite(f[1], f[2]);
  }
  std::vector<std::size_t> roots(mesh.faces.size());
  for (std::size_t i = 0; i < mesh.faces.size(); ++i) roots[i] = sets.find(mesh.faces[i][0]);
  return roots;
}

}  // namespace

void write_mesh_ply(const std::filesystem::path& path, const TriangleMesh& mesh) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << mesh.vertices.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "element face " << mesh.faces.size() << "\n"
      << "property list uchar int vertex_indices\n"
      << "end_header\n";
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const float p[3] = {static_cast<float>(mesh.vertices[i].x()), static_cast<float>(mesh.vertices[i].y()),
                        static_cast<float>(mesh.vertices[i].z())};
    out.write(reinterpret_cast<const char*>(p), sizeof p);
    const Rgb8 c = i < mesh.colors.size() ? mesh.colors[i] : Rgb8{200, 200, 200};
    out.write(reinterpret_cast<const char*>(c.data()), 3);
  }
  for (const auto& f : mesh.faces) {
    const std::uint8_t n = 3;
    const std::int32_t idx[3] = {static_cast<std::int32_t>(f[0]), static_cast<std::int32_t>(f[1]),
                                 static_cast<std::int32_t>(f[2])};
    out.write(reinterpret_cast<const char*>(&n), 1);
    out.write(reinterpret_cast<const char*>(idx), sizeof idx);
  }
}

TriangleMesh read_mesh_ply(const std::filesystem::path& path) {
  const ply::File file = ply::read(path);
  const ply::Element* vertex = file.find("vertex");
  if (!vertex) throw InputError("PLY has no vertex element: " + path.string());
  TriangleMesh mesh;
  const auto& x = vertex->column("x");
  const auto& y = vertex->column("y");
  const auto& z = vertex->column("z");
  const bool has_color = vertex->find("red") && vertex->find("green") && vertex->find("blue");
  mesh.vertices.reserve(vertex->count);
  for (std::size_t i = 0; i < vertex->count; ++i) mesh.vertices.emplace_back(x[i], y[i], z[i]);
  if (has_color) {
    const auto& r = vertex->column("red");
    const auto& g = vertex->column("green");
    const auto& b = vertex->column("blue");
    for (std::size_t i = 0; i < vertex->count; ++i)
      mesh.colors.push_back({static_cast<std::uint8_t>(r[i]), static_cast<std::uint8_t>(g[i]),
                             static_cast<std::uint8_t>(b[i])});
  }
  if (const ply::Element* face = file.find("face")) {
    for (const auto& l : face->lists) {
      // Fan-triangulate polygons.
      for (std::size_t k = 1; k + 1 < l.size(); ++k) {
        std::array<std::uint32_t, 3> f{static_cast<std::uint32_t>(l[0]), static_cast<std::uint32_t>(l[k]),
                                       static_cast<std::uint32_t>(l[k + 1])};
        for (auto v : f)
          if (v >= mesh.vertices.size()) throw InputError("PLY face index out of range: " + path.string());
        mesh.faces.push_back(f);
      }
    }
  }
  return mesh;
}

TriangleMesh clean_mesh(const TriangleMesh& mesh, std::size_t min_triangles) {
  if (min_triangles == 0 || mesh.faces.empty()) return mesh;
  const auto roots = face_components(mesh);
  std::vector<std::size_t> size(mesh.vertices.size(), 0);
  for (auto r : roots) ++size[r];

  TriangleMesh out;
  std::vector<std::int64_t> remap(mesh.vertices.size(), -1);
  std::vector<std::uint8_t> used(mesh.vertices.size(), 0);
  for (std::size_t i = 0; i < mesh.faces.size(); ++i)
    if (size[roots[i]] >= min_triangles)
      for (auto v : mesh.faces[i]) used[v] = 1;
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    if (!used[v]) continue;
    remap[v] = static_cast<std::int64_t>(out.vertices.size());
    out.vertices.push_back(mesh.vertices[v]);
    if (v < mesh.colors.size()) out.colors.push_back(mesh.colors[v]);
  }
  for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
    if (size[roots[i]] < min_triangles) continue;
    const auto& f = mesh.faces[i];
    out.faces.push_back({static_cast<std::uint32_t>(remap[f[0]]), static_cast<std::uint32_t>(remap[f[1]]),
                         static_cast<std::uint32_t>(remap[f[2]])});
  }
  return out;
}

std::vector<std::size_t> component_sizes(const TriangleMesh& mesh) {
  const auto roots = face_components(mesh);
  std::vector<std::size_t> size(mesh.vertices.size(), 0);
  for (auto r : roots) ++size[r];
  std::vector<std::size_t> sizes;
  for (auto s : size)
    if (s > 0) sizes.push_back(s);
  std::sort(sizes.rbegin(), sizes.rend());
  return sizes;
}

}  // namespace splatmesh
