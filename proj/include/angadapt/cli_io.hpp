#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "angadapt/adapt_driver.hpp"
#include "angadapt/mesh.hpp"
#include "angadapt/transport.hpp"

namespace angadapt {

/// Everything a `run` needs, read from an INI file with the sections
/// [mesh], [angle], [surrogate], [adapt], [solver], [goal] and [output].
struct RunConfig {
  // [mesh]: either a mesh file or duct generator parameters.
  std::optional<std::filesystem::path> mesh_file;
  double length = 10.0;
  double width = 1.0;
  double h = 0.25;
  // [angle]
  bool hemisphere = true;
  // [adapt], [surrogate], [angle] max_level
  AdaptConfig adapt;
  // [solver]
  SolveOptions solver;
  std::optional<Preconditioner> preconditioner;  ///< unset: automatic choice
  std::size_t direct_limit = 100000;  ///< FP_n systems up to this size use the direct solver
  double time_limit = 0.0;  ///< wall-clock budget for the whole run in seconds; 0 means none
  // [goal]
  int goal_region = duct_region::kDetector;
  std::optional<double> reference;
  std::optional<int> reference_level;  ///< fixed-refinement level computed as reference
  // [output]
  std::filesystem::path output = "output";
  bool vtk = true;
};

/// Parses configuration text. Relative mesh paths are resolved against
/// `base_dir`. Throws ParseError naming the line of the offending entry.
RunConfig parse_config(const std::string& text, const std::string& name = "<config>",
                       const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

using NamedField = std::pair<std::string, std::vector<double>>;

/// The configured mesh file, or the configured duct when no file is given.
std::shared_ptr<DgMesh> build_mesh(const RunConfig& config);

/// Transport problem for a configuration. A positive time_limit becomes a
/// solver deadline counted from this call.
Problem make_problem(const RunConfig& config, std::shared_ptr<const DgMesh> mesh);

/// Legacy ASCII unstructured grid with one point per DG node (element
/// corners duplicated) and the given point fields. Throws std::runtime_error
/// if the file cannot be written.
void write_vtk(const DgMesh& mesh, const std::vector<NamedField>& fields,
               const std::filesystem::path& path);

inline constexpr const char* kCsvHeader =
    "step,ndof,mean_angle_dofs,detector,rel_error,effectivity,underresolved_pct,wall_seconds";

/// One row per record with 12 significant digits; undefined values print as nan.
void write_csv(const std::vector<AdaptRow>& rows, const std::filesystem::path& path);
std::vector<AdaptRow> read_csv(const std::filesystem::path& path);

/// Executes a configuration; returns the process exit code.
int cmd_run(const std::filesystem::path& config, std::ostream& out, std::ostream& err);

struct VerifyOptions {
  /// Fault injection: perturbs the production moment matrix before it is compared.
  bool perturb_moments = false;
};

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// The fast oracle checks run by `verify`.
std::vector<CheckResult> verify(const VerifyOptions& options = {});
int cmd_verify(const VerifyOptions& options, std::ostream& out);

int cmd_mesh_gen(double length, double width, double h, const std::filesystem::path& path,
                 std::ostream& out, std::ostream& err);
int cmd_mesh_check(const std::filesystem::path& path, std::ostream& out, std::ostream& err);

}  // namespace angadapt
