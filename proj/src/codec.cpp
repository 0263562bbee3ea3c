#include "ksdf/codec.hpp"

#include "ksdf/error.hpp"
#include "ksdf/log.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <iterator>

namespace ksdf {
namespace {

constexpr std::uint8_t kSineFlag = 0x10;
constexpr std::uint8_t kInverseFlag = 0x20;

class Writer {
 public:
  template <typename T>
  void put(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    bytes.insert(bytes.end(), p, p + sizeof(T));
  }
  void put_f32(double v) { put(static_cast<float>(v)); }
  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& bytes, std::size_t end) : bytes_(bytes), end_(end) {}
  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > end_) throw Error(ErrorCode::TruncatedFile, "artifact ends inside a field");
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  double get_f32() { return get<float>(); }
  std::size_t pos() const { return pos_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(const std::vector<std::uint8_t>& bytes, std::size_t crc_offset) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, bytes.data(), static_cast<uInt>(crc_offset));
  const std::size_t tail = crc_offset + 4;
  if (tail < bytes.size()) crc = crc32(crc, bytes.data() + tail, static_cast<uInt>(bytes.size() - tail));
  return static_cast<std::uint32_t>(crc);
}

std::size_t sphere_count(const NetConfig& config) {
  return config.branch == Branch::none ? 0 : static_cast<std::size_t>(config.spheres);
}

std::size_t payload_offset_of_crc(const NetConfig& config) {
  return kArtifactHeaderBytes + 4 * (4 * sphere_count(config) + count_trainable(config));
}

}  // namespace

NeuralArtifact make_artifact(const NetConfig& config, KeySphereSet spheres, Weights weights,
                             const NormalizationTransform& transform, nlohmann::json provenance) {
  NeuralArtifact a;
  a.config = config;
  a.spheres = std::move(spheres);
  if (config.branch == Branch::none) a.spheres.spheres.clear();
  for (auto& s : a.spheres.spheres) {
    s.center = Vec3(static_cast<float>(s.center.x()), static_cast<float>(s.center.y()), static_cast<float>(s.center.z()));
    s.radius = static_cast<float>(s.radius);
  }
  a.weights = std::move(weights);
  a.weights.round_to_f32();
  a.transform = transform;
  a.provenance = std::move(provenance);
  check_dimensions(a.config, a.weights, a.spheres);
  return a;
}

std::string mesh_hash(const Mesh& mesh) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& v : mesh.vertices) {
    const double xyz[3] = {v.x(), v.y(), v.z()};
    feed(xyz, sizeof xyz);
  }
  for (const auto& t : mesh.triangles) feed(t.data(), sizeof(int) * 3);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::size_t artifact_byte_count(const NetConfig& config, std::size_t provenance_bytes) {
  return payload_offset_of_crc(config) + 4 + 4 + provenance_bytes;
}

std::vector<std::uint8_t> encode_artifact(const NeuralArtifact& a) {
  check_dimensions(a.config, a.weights, a.spheres);
  Writer w;
  w.bytes.reserve(artifact_byte_count(a.config, 256));
  w.bytes.insert(w.bytes.end(), {'K', 'S', 'D', 'F'});
  w.put<std::uint32_t>(kArtifactVersion);
  std::uint8_t flags = static_cast<std::uint8_t>(a.config.branch);
  if (a.config.activation == Activation::sine) flags |= kSineFlag;
  if (a.config.weighting == Weighting::inverse) flags |= kInverseFlag;
  w.put<std::uint8_t>(flags);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(sphere_count(a.config)));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(a.config.layers));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(a.config.hidden));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(kFeatureDim));
  w.put<double>(a.transform.scale);
  w.put<double>(a.transform.translation.x());
  w.put<double>(a.transform.translation.y());
  w.put<double>(a.transform.translation.z());
  if (a.config.branch != Branch::none) {
    for (const auto& s : a.spheres.spheres) {
      w.put_f32(s.center.x());
      w.put_f32(s.center.y());
      w.put_f32(s.center.z());
      w.put_f32(s.radius);
    }
  }
  for (double v : a.weights.values) w.put_f32(v);
  const std::size_t crc_offset = w.bytes.size();
  w.put<std::uint32_t>(0);
  const std::string prov = a.provenance.dump();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(prov.size()));
  w.bytes.insert(w.bytes.end(), prov.begin(), prov.end());
  const std::uint32_t crc = crc_of(w.bytes, crc_offset);
  std::memcpy(w.bytes.data() + crc_offset, &crc, 4);
  return std::move(w.bytes);
}

NeuralArtifact decode_artifact(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4) throw Error(ErrorCode::TruncatedFile, "artifact shorter than its magic");
  if (std::memcmp(bytes.data(), "KSDF", 4) != 0) throw Error(ErrorCode::BadMagic, "not a KSDF artifact");
  if (bytes.size() < kArtifactHeaderBytes) throw Error(ErrorCode::TruncatedFile, "artifact header truncated");
  Reader r(bytes, bytes.size());
  r.get<std::uint32_t>();  // magic
  const auto version = r.get<std::uint32_t>();
  if (version != kArtifactVersion) throw Error(ErrorCode::VersionUnsupported, "KSDF version " + std::to_string(version));
  const auto flags = r.get<std::uint8_t>();
  const auto m = r.get<std::uint32_t>();
  const auto k = r.get<std::uint32_t>();
  const auto q = r.get<std::uint32_t>();
  const auto feature_dim = r.get<std::uint32_t>();

  NeuralArtifact a;
  const std::uint8_t branch = flags & 0x0f;
  if (branch > 2 || (flags & ~(0x0f | kSineFlag | kInverseFlag)) != 0 || k < 1 || q < 1 || k > (1u << 16) ||
      q > (1u << 16) || m > (1u << 24)) {
    throw Error(ErrorCode::ChecksumMismatch, "artifact header is inconsistent");
  }
  a.config.branch = static_cast<Branch>(branch);
  a.config.activation = (flags & kSineFlag) ? Activation::sine : Activation::relu;
  a.config.weighting = (flags & kInverseFlag) ? Weighting::inverse : Weighting::direct;
  a.config.spheres = static_cast<int>(m);
  a.config.layers = static_cast<int>(k);
  a.config.hidden = static_cast<int>(q);
  try {
    a.config.validate();
  } catch (const Error&) {
    throw Error(ErrorCode::ChecksumMismatch, "artifact header is inconsistent");
  }

  const std::size_t crc_offset = payload_offset_of_crc(a.config);
  if (bytes.size() < crc_offset + 8) throw Error(ErrorCode::TruncatedFile, "artifact payload truncated");
  std::uint32_t stored_crc = 0;
  std::uint32_t prov_len = 0;
  std::memcpy(&stored_crc, bytes.data() + crc_offset, 4);
  std::memcpy(&prov_len, bytes.data() + crc_offset + 4, 4);
  if (bytes.size() < crc_offset + 8 + static_cast<std::size_t>(prov_len)) {
    throw Error(ErrorCode::TruncatedFile, "artifact provenance truncated");
  }
  if (crc_of(bytes, crc_offset) != stored_crc) throw Error(ErrorCode::ChecksumMismatch, "artifact CRC32 mismatch");
  if (bytes.size() != crc_offset + 8 + static_cast<std::size_t>(prov_len)) {
    throw Error(ErrorCode::ChecksumMismatch, "trailing bytes after provenance");
  }
  if (feature_dim != static_cast<std::uint32_t>(kFeatureDim)) {
    throw Error(ErrorCode::VersionUnsupported, "feature dimension " + std::to_string(feature_dim));
  }

  a.transform.scale = r.get<double>();
  const double tx = r.get<double>();
  const double ty = r.get<double>();
  const double tz = r.get<double>();
  a.transform.translation = Vec3(tx, ty, tz);
  if (a.config.branch != Branch::none) {
    a.spheres.spheres.resize(m);
    for (auto& s : a.spheres.spheres) {
      const double x = r.get_f32();
      const double y = r.get_f32();
      const double z = r.get_f32();
      s.center = Vec3(x, y, z);
      s.radius = r.get_f32();
    }
  }
  a.weights.values.resize(count_trainable(a.config));
  for (double& v : a.weights.values) v = r.get_f32();
  const std::string prov(bytes.begin() + static_cast<std::ptrdiff_t>(crc_offset + 8), bytes.end());
  try {
    a.provenance = prov.empty() ? nlohmann::json::object() : nlohmann::json::parse(prov);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("artifact provenance: ") + e.what());
  }
  return a;
}

std::size_t serialize(const NeuralArtifact& artifact, const std::filesystem::path& path) {
  const auto bytes = encode_artifact(artifact);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
  return bytes.size();
}

NeuralArtifact deserialize(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_artifact(bytes);
}

CompressionReport compression_report(const NeuralArtifact& artifact, const Mesh& source_mesh) {
  CompressionReport r;
  r.source_params = 3 * source_mesh.vertices.size() + 3 * source_mesh.triangles.size();
  r.artifact_params = count_parameters(artifact.config);
  r.artifact_payload_bytes = 4 * r.artifact_params;
  r.ratio = r.source_params == 0 ? 0.0 : static_cast<double>(r.artifact_params) / static_cast<double>(r.source_params);
  if (r.ratio > 1.0) {
    log::warn("artifact (", r.artifact_params, " parameters) is larger than the source mesh (", r.source_params, ")");
  }
  return r;
}

nlohmann::json to_json(const CompressionReport& r) {
  return {{"source_params", r.source_params},
          {"artifact_params", r.artifact_params},
          {"ratio", r.ratio},
          {"ratio_inverse", r.ratio > 0 ? 1.0 / r.ratio : 0.0},
          {"artifact_payload_bytes", r.artifact_payload_bytes}};
}

nlohmann::json describe(const NeuralArtifact& a) {
  return {{"branch", to_string(a.config.branch)},
          {"spheres", a.config.spheres},
          {"layers", a.config.layers},
          {"hidden", a.config.hidden},
          {"feature_dim", kFeatureDim},
          {"activation", to_string(a.config.activation)},
          {"weighting", to_string(a.config.weighting)},
          {"parameters", count_parameters(a.config)},
          {"trainable", count_trainable(a.config)},
          {"bytes", artifact_byte_count(a.config, a.provenance.dump().size())},
          {"transform", {{"scale", a.transform.scale},
                         {"translation", {a.transform.translation.x(), a.transform.translation.y(), a.transform.translation.z()}}}},
          {"provenance", a.provenance}};
}

}  // namespace ksdf
