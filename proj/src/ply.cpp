#include "splatmesh/ply.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "splatmesh/error.hpp"

namespace splatmesh::ply {
namespace {

enum class Type { kI8, kU8, kI16, kU16, kI32, kU32, kF32, kF64 };

Type parse_type(const std::string& t) {
  if (t == "char" || t == "int8") return Type::kI8;
  if (t == "uchar" || t == "uint8") return Type::kU8;
  if (t == "short" || t == "int16") return Type::kI16;
  if (t == "ushort" || t == "uint16") return Type::kU16;
  if (t == "int" || t == "int32") return Type::kI32;
  if (t == "uint" || t == "uint32") return Type::kU32;
  if (t == "float" || t == "float32") return Type::kF32;
  if (t == "double" || t == "float64") return Type::kF64;
  throw InputError("ply: unknown property type '" + t + "'");
}

std::size_t type_size(Type t) {
  switch (t) {
    case Type::kI8: case Type::kU8: return 1;
    case Type::kI16: case Type::kU16: return 2;
    case Type::kI32: case Type::kU32: case Type::kF32: return 4;
    case Type::kF64: return 8;
  }
  return 0;
}

struct PropertyDecl {
  std::string name;
  Type type = Type::kF32;
  bool is_list = false;
  Type count_type = Type::kU8;
};

struct ElementDecl {
  std::string name;
  std::size_t count = 0;
  std::vector<PropertyDecl> props;
};

template <typename T>
T load(const unsigned char* p, bool swap) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  if (swap && sizeof(T) > 1) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

double decode(Type t, const unsigned char* p, bool swap) {
  switch (t) {
    case Type::kI8: return load<std::int8_t>(p, swap);
    case Type::kU8: return load<std::uint8_t>(p, swap);
    case Type::kI16: return load<std::int16_t>(p, swap);
    case Type::kU16: return load<std::uint16_t>(p, swap);
    case Type::kI32: return load<std::int32_t>(p, swap);
    case Type::kU32: return load<std::uint32_t>(p, swap);
    case Type::kF32: return load<float>(p, swap);
    case Type::kF64: return load<double>(p, swap);
  }
  return 0.0;
}

}  // namespace

std::optional<std::size_t> Element::find(const std::string& property) const {
  for (std::size_t i = 0; i < scalar_names.size(); ++i)
    if (scalar_names[i] == property) return i;
  return std::nullopt;
}

const std::vector<double>& Element::column(const std::string& property) const {
  auto idx = find(property);
  if (!idx) throw InputError("ply: element '" + name + "' has no property '" + property + "'");
  return scalars[*idx];
}

const Element* File::find(const std::string& element) const {
  for (const auto& e : elements)
    if (e.name == element) return &e;
  return nullptr;
}

File read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());

  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw InputError("not a PLY file: " + path.string());

  File file;
  std::vector<ElementDecl> decls;
  bool have_format = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt == "ascii") file.format = Format::kAscii;
      else if (fmt == "binary_little_endian") file.format = Format::kBinaryLittleEndian;
      else if (fmt == "binary_big_endian") file.format = Format::kBinaryBigEndian;
      else throw InputError("ply: unknown format '" + fmt + "'");
      have_format = true;
    } else if (key == "element") {
      ElementDecl d;
      ss >> d.name >> d.count;
      decls.push_back(std::move(d));
    } else if (key == "property") {
      if (decls.empty()) throw InputError("ply: property before element");
      PropertyDecl p;
      std::string t;
      ss >> t;
      if (t == "list") {
        std::string ct, it;
        ss >> ct >> it >> p.name;
        p.is_list = true;
        p.count_type = parse_type(ct);
        p.type = parse_type(it);
      } else {
        p.type = parse_type(t);
        ss >> p.name;
      }
      decls.back().props.push_back(p);
    } else if (key == "end_header") {
      break;
    }
  }
  if (!have_format) throw InputError("ply: missing format line in " + path.string());

  const bool swap = (file.format == Format::kBinaryBigEndian) ==
                    (std::endian::native == std::endian::little);

  for (const auto& d : decls) {
    Element e;
    e.name = d.name;
    e.count = d.count;
    for (const auto& p : d.props) {
      if (p.is_list) e.list_name = p.name;
      else e.scalar_names.push_back(p.name);
    }
    e.scalars.assign(e.scalar_names.size(), std::vector<double>(d.count));
    const bool has_list = !e.list_name.empty();
    if (has_list) e.lists.resize(d.count);

    bool fixed_size = !has_list;
    std::size_t stride = 0;
    for (const auto& p : d.props) stride += type_size(p.type);

    if (file.format == Format::kAscii) {
      for (std::size_t row = 0; row < d.count; ++row) {
        std::size_t s = 0;
        for (const auto& p : d.props) {
          if (p.is_list) {
            std::size_t n = 0;
            in >> n;
            auto& l = e.lists[row];
            l.resize(n);
            for (auto& v : l) in >> v;
          } else {
            in >> e.scalars[s++][row];
          }
        }
        if (!in) throw InputError("ply: truncated ascii data in " + path.string());
      }
    } else if (fixed_size) {
      std::vector<unsigned char> buf(stride * d.count);
      in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
      if (!in) throw InputError("ply: truncated binary data in " + path.string());
      for (std::size_t row = 0; row < d.count; ++row) {
        const unsigned char* p = buf.data() + row * stride;
        std::size_t s = 0;
        for (const auto& prop : d.props) {
          e.scalars[s++][row] = decode(prop.type, p, swap);
          p += type_size(prop.type);
        }
      }
    } else {
      unsigned char tmp[8];
      auto read_value = [&](Type t) {
        in.read(reinterpret_cast<char*>(tmp), static_cast<std::streamsize>(type_size(t)));
        if (!in) throw InputError("ply: truncated binary data in " + path.string());
        return decode(t, tmp, swap);
      };
      for (std::size_t row = 0; row < d.count; ++row) {
        std::size_t s = 0;
        for (const auto& p : d.props) {
          if (p.is_list) {
            const auto n = static_cast<std::size_t>(read_value(p.count_type));
            auto& l = e.lists[row];
            l.resize(n);
            for (auto& v : l) v = static_cast<std::int64_t>(read_value(p.type));
          } else {
            e.scalars[s++][row] = read_value(p.type);
          }
        }
      }
    }
    file.elements.push_back(std::move(e));
  }
  return file;
}

}  // namespace splatmesh::ply
