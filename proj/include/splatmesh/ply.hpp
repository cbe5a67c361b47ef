#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace splatmesh::ply {

enum class Format { kAscii, kBinaryLittleEndian, kBinaryBigEndian };

// One element block of a PLY file. Scalar properties are widened to double;
// list properties (e.g. face vertex_indices) are kept per row.
struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<std::string> scalar_names;
  std::vector<std::vector<double>> scalars;  // [property][row]
  std::string list_name;
  std::vector<std::vector<std::int64_t>> lists;  // [row]

  std::optional<std::size_t> find(const std::string& property) const;
  const std::vector<double>& column(const std::string& property) const;
};

struct File {
  Format format = Format::kBinaryLittleEndian;
  std::vector<Element> elements;

  const Element* find(const std::string& element) const;
};

File read(const std::filesystem::path& path);

}  // namespace splatmesh::ply
