#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace angadapt {

/// Cross-sections in 1/cm; `source` is the angle-integrated isotropic
/// emission density (the angular density is source / 4pi).
struct Material {
  double sigma_t = 0.0;
  double sigma_s = 0.0;
  double source = 0.0;

  bool operator==(const Material&) const = default;
};

struct Triangle {
  std::array<int, 3> v{};
  int region = 0;

  bool operator==(const Triangle&) const = default;
};

struct BoundaryEdge {
  std::array<int, 2> v{};
  int tag = 0;

  bool operator==(const BoundaryEdge&) const = default;
};

inline constexpr int kVacuumBoundary = 1;

/// Region ids used by the duct generator.
namespace duct_region {
inline constexpr int kVoid = 0;
inline constexpr int kSource = 1;
inline constexpr int kDetector = 2;
}  // namespace duct_region

struct TriMesh {
  std::vector<std::array<double, 2>> vertices;
  std::vector<Triangle> triangles;
  std::vector<BoundaryEdge> boundary;
  std::map<int, Material> regions;

  /// Signed area (positive for counter-clockwise triangles).
  double signed_area(int t) const;
  double region_volume(int region) const;
  double total_volume() const;

  bool operator==(const TriMesh&) const = default;
};

/// Straight duct along +y: x in [0, width], y in [0, length + 2], with a
/// 1x1 source box at the bottom and a 1x1 detector box at the top, both
/// centred in x. Each rectangular cell is split into four triangles
/// through its centre, stored bottom, left, right, top; cells are stored row
/// by row from y = 0. Outer edges are tagged vacuum.
TriMesh generate_duct(double length, double width, double h);

/// nx x ny square cells of side `cell` split the same way; the bottom row
/// is source, the top row detector and the rest void.
TriMesh generate_block(int nx, int ny, double cell);

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

ValidationReport validate(const TriMesh& m);

/// ASCII mesh format:
///   tmesh 1
///   vertices K      then K lines "x y"
///   triangles M     then M lines "v0 v1 v2 region"
///   boundary B      then B lines "v0 v1 tag"
///   region id sigma_t sigma_s source   (one line per region)
/// Indices are 0-based. Errors are reported as ParseError with the line.
TriMesh load_mesh(const std::filesystem::path& path);
TriMesh parse_mesh(const std::string& text, const std::string& name = "<mesh>");
void save_mesh(const TriMesh& m, const std::filesystem::path& path);
std::string format_mesh(const TriMesh& m);

}  // namespace angadapt
