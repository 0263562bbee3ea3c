#include "ksdf/mesh.hpp"

#include "ksdf/error.hpp"
#include "ksdf/log.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

namespace ksdf {
namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool parse_double(std::string_view tok, double& out) {
  if (tok.empty()) return false;
  if (tok.front() == '+') tok.remove_prefix(1);
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return res.ec == std::errc() && res.ptr == tok.data() + tok.size();
}

bool parse_int(std::string_view tok, long& out) {
  if (tok.empty()) return false;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return res.ec == std::errc() && res.ptr == tok.data() + tok.size();
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

void finish_loaded(Mesh& mesh, const std::string& what) {
  mesh.check_indices();
  const std::size_t before = mesh.triangles.size();
  const Aabb box = mesh.bounds();
  const double extent = mesh.vertices.empty() ? 0.0 : box.extent().maxCoeff();
  if (extent > 0.0) {
    // Degeneracy is judged at canonical scale.
    const double s = 2.0 * kCanonicalHalfExtent / extent;
    remove_degenerate_triangles(mesh, 1e-12 / (s * s));
  } else {
    mesh.triangles.clear();
  }
  if (mesh.triangles.empty()) throw Error(ErrorCode::EmptyMesh, what + " has no non-degenerate triangles");
  if (mesh.triangles.size() != before) {
    log::warn(what, ": dropped ", before - mesh.triangles.size(), " degenerate triangles");
  }
  if (const std::size_t open = boundary_edge_count(mesh); open > 0) {
    log::warn(what, ": not watertight (", open, " boundary edges); signs come from the ray vote");
  }
  log::info(what, ": ", mesh.vertices.size(), " vertices, ", mesh.triangles.size(), " triangles");
}

Mesh parse_stl(const std::string& bytes) {
  if (bytes.size() < 84) throw Error(ErrorCode::ParseError, "STL shorter than its 84-byte header");
  std::uint32_t count = 0;
  std::memcpy(&count, bytes.data() + 80, 4);
  if (bytes.size() != 84 + 50ull * count) {
    throw Error(ErrorCode::ParseError, "binary STL size does not match its triangle count");
  }
  Mesh mesh;
  std::map<std::array<float, 3>, int> welded;
  const char* p = bytes.data() + 84;
  for (std::uint32_t t = 0; t < count; ++t, p += 50) {
    Tri tri{};
    for (int k = 0; k < 3; ++k) {
      std::array<float, 3> v{};
      std::memcpy(v.data(), p + 12 + 12 * k, 12);
      auto [it, inserted] = welded.emplace(v, static_cast<int>(mesh.vertices.size()));
      if (inserted) mesh.vertices.emplace_back(v[0], v[1], v[2]);
      tri[k] = it->second;
    }
    mesh.triangles.push_back(tri);
  }
  return mesh;
}

Mesh parse_ply(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0) throw Error(ErrorCode::ParseError, "missing ply magic");
  long n_vertices = -1, n_faces = -1;
  int xyz[3] = {-1, -1, -1};
  int n_props = 0;
  std::string current;
  bool ascii = false;
  while (std::getline(in, line)) {
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "format") ascii = tok.size() > 1 && tok[1] == "ascii";
    else if (tok[0] == "element" && tok.size() == 3) {
      current = std::string(tok[1]);
      long n = 0;
      if (!parse_int(tok[2], n)) throw Error(ErrorCode::ParseError, "bad element count");
      if (current == "vertex") n_vertices = n;
      else if (current == "face") n_faces = n;
    } else if (tok[0] == "property" && current == "vertex") {
      const std::string_view name = tok.back();
      if (name == "x") xyz[0] = n_props;
      if (name == "y") xyz[1] = n_props;
      if (name == "z") xyz[2] = n_props;
      ++n_props;
    } else if (tok[0] == "end_header") {
      break;
    }
  }
  if (!ascii) throw Error(ErrorCode::ParseError, "only ASCII PLY is supported");
  if (n_vertices < 0 || n_faces < 0 || xyz[0] < 0 || xyz[1] < 0 || xyz[2] < 0) {
    throw Error(ErrorCode::ParseError, "PLY header lacks vertex/face elements or x,y,z");
  }
  Mesh mesh;
  for (long i = 0; i < n_vertices; ++i) {
    if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "PLY truncated in vertex list");
    const auto tok = split_ws(line);
    if (static_cast<int>(tok.size()) < n_props) throw Error(ErrorCode::ParseError, "short PLY vertex line");
    Vec3 v;
    for (int k = 0; k < 3; ++k) {
      if (!parse_double(tok[xyz[k]], v[k])) throw Error(ErrorCode::ParseError, "bad PLY coordinate");
    }
    mesh.vertices.push_back(v);
  }
  for (long i = 0; i < n_faces; ++i) {
    if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "PLY truncated in face list");
    const auto tok = split_ws(line);
    long n = 0;
    if (tok.empty() || !parse_int(tok[0], n) || n < 3 || static_cast<long>(tok.size()) < n + 1) {
      throw Error(ErrorCode::ParseError, "bad PLY face line");
    }
    std::vector<int> idx(n);
    for (long k = 0; k < n; ++k) {
      long v = 0;
      if (!parse_int(tok[k + 1], v) || v < 0 || v >= n_vertices) throw Error(ErrorCode::ParseError, "bad PLY index");
      idx[k] = static_cast<int>(v);
    }
    for (long k = 1; k + 1 < n; ++k) mesh.triangles.push_back({idx[0], idx[k], idx[k + 1]});
  }
  return mesh;
}

}  // namespace

Aabb Mesh::bounds() const {
  Aabb box;
  for (const auto& v : vertices) box.expand(v);
  return box;
}

double Mesh::area() const {
  double total = 0.0;
  for (const auto& t : triangles) total += triangle_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
  return total;
}

void Mesh::check_indices() const {
  const int n = static_cast<int>(vertices.size());
  for (const auto& t : triangles) {
    for (int k : t) {
      if (k < 0 || k >= n) throw Error(ErrorCode::InvalidArgument, "triangle index out of range");
    }
  }
}

MeshFormat format_from_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".stl") return MeshFormat::stl;
  if (ext == ".ply") return MeshFormat::ply;
  return MeshFormat::obj;
}

namespace {

Mesh parse_obj_raw(std::string_view text) {
  Mesh mesh;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  std::vector<long> face;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "v") {
      Vec3 v;
      if (tok.size() < 4 || !parse_double(tok[1], v[0]) || !parse_double(tok[2], v[1]) ||
          !parse_double(tok[3], v[2])) {
        throw Error(ErrorCode::ParseError, "malformed vertex at line " + std::to_string(line_no));
      }
      mesh.vertices.push_back(v);
    } else if (tok[0] == "f") {
      if (tok.size() < 4) throw Error(ErrorCode::ParseError, "face with fewer than 3 vertices at line " + std::to_string(line_no));
      face.clear();
      for (std::size_t k = 1; k < tok.size(); ++k) {
        long idx = 0;
        const std::string_view head = tok[k].substr(0, tok[k].find('/'));
        if (!parse_int(head, idx) || idx == 0) {
          throw Error(ErrorCode::ParseError, "malformed face index at line " + std::to_string(line_no));
        }
        if (idx < 0) idx += static_cast<long>(mesh.vertices.size()) + 1;
        if (idx < 1 || idx > static_cast<long>(mesh.vertices.size())) {
          throw Error(ErrorCode::ParseError, "face index out of range at line " + std::to_string(line_no));
        }
        face.push_back(idx - 1);
      }
      for (std::size_t k = 1; k + 1 < face.size(); ++k) {
        mesh.triangles.push_back({static_cast<int>(face[0]), static_cast<int>(face[k]), static_cast<int>(face[k + 1])});
      }
    }
  }
  return mesh;
}

}  // namespace

Mesh parse_obj(std::string_view text) {
  Mesh mesh = parse_obj_raw(text);
  finish_loaded(mesh, "OBJ text");
  return mesh;
}

Mesh load_mesh(const std::filesystem::path& path, MeshFormat format) {
  const std::string bytes = read_file(path);
  Mesh mesh;
  switch (format) {
    case MeshFormat::obj: mesh = parse_obj_raw(bytes); break;
    case MeshFormat::stl: mesh = parse_stl(bytes); break;
    case MeshFormat::ply: mesh = parse_ply(bytes); break;
  }
  finish_loaded(mesh, path.filename().string());
  return mesh;
}

Mesh load_mesh(const std::filesystem::path& path) { return load_mesh(path, format_from_path(path)); }

void save_mesh(const Mesh& mesh, const std::filesystem::path& path, MeshFormat format) {
  if (format != MeshFormat::obj) throw Error(ErrorCode::InvalidArgument, "only OBJ output is supported");
  if (mesh.empty()) throw Error(ErrorCode::EmptyMesh, "refusing to save a mesh without triangles");
  std::string out;
  out.reserve(mesh.vertices.size() * 40 + mesh.triangles.size() * 24);
  char buf[128];
  for (const auto& v : mesh.vertices) {
    const int n = std::snprintf(buf, sizeof buf, "v %.9g %.9g %.9g\n", v.x(), v.y(), v.z());
    out.append(buf, n);
  }
  for (const auto& t : mesh.triangles) {
    const int n = std::snprintf(buf, sizeof buf, "f %d %d %d\n", t[0] + 1, t[1] + 1, t[2] + 1);
    out.append(buf, n);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

Mesh normalize_mesh(const Mesh& mesh) {
  if (mesh.vertices.empty() || mesh.triangles.empty()) throw Error(ErrorCode::EmptyMesh, "cannot normalize an empty mesh");
  const Aabb box = mesh.bounds();
  const double extent = box.extent().maxCoeff();
  if (!(extent > 0.0)) throw Error(ErrorCode::ZeroExtent, "all vertices coincide");
  NormalizationTransform step;
  step.scale = 2.0 * kCanonicalHalfExtent / extent;
  step.translation = -box.center();

  Mesh out;
  out.triangles = mesh.triangles;
  out.vertices.reserve(mesh.vertices.size());
  for (const auto& v : mesh.vertices) out.vertices.push_back(step.to_canonical(v));
  // compose: canonical2 = s2 * (s1 * (src + t1) + t2) = s1 s2 * (src + t1 + t2 / s1)
  const auto& prev = mesh.source_transform;
  out.source_transform.scale = prev.scale * step.scale;
  out.source_transform.translation = prev.translation + step.translation / prev.scale;
  return out;
}

Mesh denormalize_mesh(const Mesh& mesh) {
  Mesh out;
  out.triangles = mesh.triangles;
  out.vertices.reserve(mesh.vertices.size());
  for (const auto& v : mesh.vertices) out.vertices.push_back(mesh.source_transform.to_source(v));
  return out;
}

Mesh apply_transform(const Mesh& mesh, const NormalizationTransform& transform) {
  Mesh out;
  out.triangles = mesh.triangles;
  out.vertices.reserve(mesh.vertices.size());
  for (const auto& v : mesh.vertices) out.vertices.push_back(transform.to_canonical(v));
  out.source_transform = transform;
  return out;
}

void remove_degenerate_triangles(Mesh& mesh, double min_area) {
  std::erase_if(mesh.triangles, [&](const Tri& t) {
    return !(triangle_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]) > min_area);
  });
}

Mesh merge_meshes(const std::vector<Mesh>& parts) {
  Mesh out;
  for (const auto& part : parts) {
    const int base = static_cast<int>(out.vertices.size());
    out.vertices.insert(out.vertices.end(), part.vertices.begin(), part.vertices.end());
    for (const auto& t : part.triangles) out.triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
  }
  return out;
}

double signed_volume(const Mesh& mesh) {
  double vol = 0.0;
  for (const auto& t : mesh.triangles) {
    vol += mesh.vertices[t[0]].dot(mesh.vertices[t[1]].cross(mesh.vertices[t[2]]));
  }
  return vol / 6.0;
}

std::size_t boundary_edge_count(const Mesh& mesh) {
  std::map<std::pair<int, int>, int> uses;
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      const int a = t[k];
      const int b = t[(k + 1) % 3];
      ++uses[{std::min(a, b), std::max(a, b)}];
    }
  }
  std::size_t open = 0;
  for (const auto& [edge, n] : uses) open += n == 1;
  return open;
}

}  // namespace ksdf
