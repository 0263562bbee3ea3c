#include "ksdf/mesh.hpp"
#include "ksdf/shapes.hpp"
#include "test_util.hpp"

#include <cstring>

namespace ksdf {
namespace {

using test::TempDir;

std::string cube_obj() {
  std::string s;
  for (int i = 0; i < 8; ++i) {
    s += "v " + std::to_string(i & 1) + " " + std::to_string((i >> 1) & 1) + " " + std::to_string((i >> 2) & 1) + "\n";
  }
  // quads, outward
  s += "f 1 3 4 2\nf 5 6 8 7\nf 1 2 6 5\nf 3 7 8 4\nf 1 5 7 3\nf 2 4 8 6\n";
  return s;
}

void append_f32(std::string& s, float v) { s.append(reinterpret_cast<const char*>(&v), 4); }

std::string binary_stl(const Mesh& mesh) {
  std::string s(80, ' ');
  const auto n = static_cast<std::uint32_t>(mesh.triangles.size());
  s.append(reinterpret_cast<const char*>(&n), 4);
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) append_f32(s, 0.0f);
    for (int c = 0; c < 3; ++c) {
      for (int k = 0; k < 3; ++k) append_f32(s, static_cast<float>(mesh.vertices[t[c]][k]));
    }
    s.append(2, '\0');
  }
  return s;
}

TEST(LoadMesh, SingleTriangleObj) {
  const Mesh m = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
  EXPECT_EQ(m.vertices.size(), 3u);
  ASSERT_EQ(m.triangles.size(), 1u);
  EXPECT_EQ(m.triangles[0], (Tri{0, 1, 2}));
}

TEST(LoadMesh, ObjSlashTokensNegativeIndicesAndPolygons) {
  const Mesh m = parse_obj(
      "# comment\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvt 0 0\nvn 0 0 1\n"
      "f 1/1/1 2/1/1 3//1 4\nf -4 -2 -1\n");
  ASSERT_EQ(m.triangles.size(), 3u);
  EXPECT_EQ(m.triangles[0], (Tri{0, 1, 2}));
  EXPECT_EQ(m.triangles[1], (Tri{0, 2, 3}));
  EXPECT_EQ(m.triangles[2], (Tri{0, 2, 3}));
}

TEST(LoadMesh, BunnyVertexCountMatchesFile) {
  const std::filesystem::path path = std::filesystem::path(KSDF_TEST_DATA_DIR) / "bunny.obj";
  const std::string text = test::read_text(path);
  std::size_t v_lines = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    if (text.compare(pos, 2, "v ") == 0) ++v_lines;
    pos = text.find('\n', pos);
    if (pos == std::string::npos) break;
    ++pos;
  }
  const Mesh m = load_mesh(path);
  EXPECT_EQ(m.vertices.size(), v_lines);
  EXPECT_GT(m.triangles.size(), 1000u);
}

TEST(LoadMesh, MalformedAndTruncatedFilesAreParseErrors) {
  TempDir dir;
  test::write_text(dir / "bad.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 x\n");
  EXPECT_KSDF_ERROR(load_mesh(dir / "bad.obj"), ErrorCode::ParseError);
  test::write_text(dir / "trunc.obj", "v 0 0 0\nv 1 0\n");
  EXPECT_KSDF_ERROR(load_mesh(dir / "trunc.obj"), ErrorCode::ParseError);

  std::string stl = binary_stl(shapes::box(Vec3::Zero(), Vec3::Ones()));
  stl.resize(stl.size() - 7);
  test::write_text(dir / "trunc.stl", stl);
  EXPECT_KSDF_ERROR(load_mesh(dir / "trunc.stl"), ErrorCode::ParseError);

  test::write_text(dir / "trunc.ply", "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\n"
                                      "property float y\nproperty float z\nelement face 1\n"
                                      "property list uchar int vertex_indices\nend_header\n0 0 0\n1 0 0\n");
  EXPECT_KSDF_ERROR(load_mesh(dir / "trunc.ply"), ErrorCode::ParseError);
  EXPECT_KSDF_ERROR(load_mesh(dir / "missing.obj"), ErrorCode::ParseError);
}

TEST(LoadMesh, OutOfRangeIndexIsRejected) {
  EXPECT_ANY_THROW(parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n"));
}

TEST(LoadMesh, DegenerateTrianglesAreDroppedAndAllDegenerateIsEmpty) {
  const Mesh m = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 2 0 0\nf 1 2 3\nf 1 2 4\n");
  EXPECT_EQ(m.triangles.size(), 1u);
  EXPECT_KSDF_ERROR(parse_obj("v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n"), ErrorCode::EmptyMesh);
  EXPECT_KSDF_ERROR(parse_obj("v 0 0 0\n"), ErrorCode::EmptyMesh);
}

TEST(LoadMesh, BinaryStlIsWelded) {
  TempDir dir;
  const Mesh box = shapes::box(Vec3::Zero(), Vec3::Ones());
  test::write_text(dir / "box.stl", binary_stl(box));
  const Mesh m = load_mesh(dir / "box.stl");
  EXPECT_EQ(m.triangles.size(), 12u);
  EXPECT_EQ(m.vertices.size(), 8u);
  EXPECT_NEAR(signed_volume(m), 1.0, 1e-6);
}

TEST(LoadMesh, AsciiPly) {
  TempDir dir;
  test::write_text(dir / "tri.ply", "ply\nformat ascii 1.0\ncomment x\nelement vertex 4\nproperty float x\n"
                                    "property float y\nproperty float z\nproperty uchar red\nelement face 1\n"
                                    "property list uchar int vertex_indices\nend_header\n"
                                    "0 0 0 1\n1 0 0 1\n1 1 0 1\n0 1 0 1\n4 0 1 2 3\n");
  const Mesh m = load_mesh(dir / "tri.ply");
  EXPECT_EQ(m.vertices.size(), 4u);
  EXPECT_EQ(m.triangles.size(), 2u);
  EXPECT_NEAR(m.area(), 1.0, 1e-12);
}

TEST(NormalizeMesh, UnitCubeMapsToCanonicalCube) {
  const Mesh m = normalize_mesh(parse_obj(cube_obj()));
  const Aabb b = m.bounds();
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(b.lo[k], -0.9, 1e-15);
    EXPECT_NEAR(b.hi[k], 0.9, 1e-15);
  }
  EXPECT_DOUBLE_EQ(m.source_transform.scale, 1.8);
  EXPECT_TRUE(m.source_transform.translation.isApprox(Vec3(-0.5, -0.5, -0.5)));
}

TEST(NormalizeMesh, IdempotentAndComposes) {
  Mesh src = parse_obj(cube_obj());
  for (auto& v : src.vertices) v = 3.0 * v + Vec3(5, -2, 7);
  const Mesh once = normalize_mesh(src);
  const Mesh twice = normalize_mesh(once);
  ASSERT_EQ(once.vertices.size(), twice.vertices.size());
  for (std::size_t i = 0; i < once.vertices.size(); ++i) {
    EXPECT_LE((once.vertices[i] - twice.vertices[i]).norm(), 1e-12);
  }
  const Mesh back = denormalize_mesh(twice);
  for (std::size_t i = 0; i < src.vertices.size(); ++i) EXPECT_LE((back.vertices[i] - src.vertices[i]).norm(), 1e-12);
}

TEST(NormalizeMesh, BunnyTouchesBoundOnLongestAxisOnly) {
  const Mesh src = load_mesh(std::filesystem::path(KSDF_TEST_DATA_DIR) / "bunny.obj");
  Aabb raw;
  for (const auto& v : src.vertices) raw.expand(v);
  const Vec3 extent = raw.hi - raw.lo;
  int longest = 0;
  for (int k = 1; k < 3; ++k) {
    if (extent[k] > extent[longest]) longest = k;
  }
  const Mesh m = normalize_mesh(src);
  const Aabb b = m.bounds();
  for (int k = 0; k < 3; ++k) {
    const double reach = std::max(-b.lo[k], b.hi[k]);
    if (k == longest) {
      EXPECT_NEAR(reach, 0.9, 1e-12);
      EXPECT_NEAR(b.hi[k] - b.lo[k], 1.8, 1e-12);
    } else {
      EXPECT_LT(reach, 0.9 - 1e-6);
    }
  }
}

TEST(NormalizeMesh, CoincidentVerticesAreZeroExtent) {
  Mesh m;
  m.vertices = {Vec3(1, 1, 1), Vec3(1, 1, 1), Vec3(1, 1, 1)};
  m.triangles = {{0, 1, 2}};
  EXPECT_KSDF_ERROR(normalize_mesh(m), ErrorCode::ZeroExtent);
}

TEST(SaveMesh, RoundTripAndDeterminism) {
  TempDir dir;
  const Mesh cube = parse_obj(cube_obj());
  save_mesh(cube, dir / "cube.obj");
  const Mesh back = load_mesh(dir / "cube.obj");
  ASSERT_EQ(back.vertices.size(), cube.vertices.size());
  for (std::size_t i = 0; i < cube.vertices.size(); ++i) EXPECT_LE((back.vertices[i] - cube.vertices[i]).norm(), 1e-6);

  const Mesh bunny = load_mesh(std::filesystem::path(KSDF_TEST_DATA_DIR) / "bunny.obj");
  save_mesh(bunny, dir / "a.obj");
  save_mesh(load_mesh(dir / "a.obj"), dir / "b.obj");
  EXPECT_EQ(test::read_text(dir / "a.obj"), test::read_text(dir / "b.obj"));
}

TEST(SaveMesh, EmptyMeshAndUnwritablePath) {
  TempDir dir;
  EXPECT_KSDF_ERROR(save_mesh(Mesh{}, dir / "x.obj"), ErrorCode::EmptyMesh);
  EXPECT_KSDF_ERROR(save_mesh(parse_obj(cube_obj()), dir / "no" / "such" / "dir.obj"), ErrorCode::IoError);
}

TEST(Mesh, SignedVolumeAndArea) {
  const Mesh cube = parse_obj(cube_obj());
  EXPECT_NEAR(signed_volume(cube), 1.0, 1e-12);
  EXPECT_NEAR(cube.area(), 6.0, 1e-12);
  const Mesh merged = merge_meshes({cube, shapes::box(Vec3(2, 0, 0), Vec3(3, 2, 1))});
  EXPECT_EQ(merged.triangles.size(), 24u);
  EXPECT_NEAR(signed_volume(merged), 3.0, 1e-12);
}

TEST(Mesh, BoundaryEdges) {
  EXPECT_EQ(boundary_edge_count(shapes::box(Vec3::Zero(), Vec3::Ones())), 0u);
  EXPECT_EQ(boundary_edge_count(shapes::torus(0.6, 0.25, 16, 8)), 0u);
  // the missing top face leaves its four rim edges
  EXPECT_EQ(boundary_edge_count(shapes::open_box(Vec3::Zero(), Vec3::Ones())), 4u);
  EXPECT_EQ(boundary_edge_count(parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")), 3u);
}

}  // namespace
}  // namespace ksdf
