#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "splatmesh/camera.hpp"

namespace splatmesh {

using Rgb8 = std::array<std::uint8_t, 3>;

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Rgb8> colors;  // one per vertex
  std::vector<std::array<std::uint32_t, 3>> faces;

  bool empty() const { return faces.empty(); }
};

// Binary little-endian PLY: float x y z, uchar red green blue, uchar/int face lists.
void write_mesh_ply(const std::filesystem::path& path, const TriangleMesh& mesh);

// Reads any PLY with a vertex element (faces optional, colors optional).
TriangleMesh read_mesh_ply(const std::filesystem::path& path);

// Connected components over faces that share a vertex index; components with
// fewer than min_triangles faces are dropped and vertices reindexed in their
// original order.
TriangleMesh clean_mesh(const TriangleMesh& mesh, std::size_t min_triangles);

// Face count of each connected component, largest first.
std::vector<std::size_t> component_sizes(const TriangleMesh& mesh);

}  // namespace splatmesh
