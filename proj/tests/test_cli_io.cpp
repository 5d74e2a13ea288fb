#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "angadapt/cli_io.hpp"
#include "angadapt/errors.hpp"

using namespace angadapt;
namespace fs = std::filesystem;

namespace {

struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name) : dir(fs::temp_directory_path() / ("angadapt_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void put(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

int error_line(const std::string& text) {
  try {
    parse_config(text, "cfg.ini");
  } catch (const ParseError& e) {
    return e.line();
  }
  return -1;
}

}  // namespace

TEST_CASE("configuration parsing") {
  const RunConfig c = parse_config(
      "[mesh]\nlength = 4\nh = 0.5\n"
      "[angle]\nmax_level = 5\nhemisphere = false\n"
      "[surrogate]\norder = 9\nsigma_f = 0.1\nshape = lanczos\n"
      "[adapt]\nmode = non_robust\ntau = 1e-6\nsteps = 6\n"
      "[solver]\nrel_tol = 1e-9\npreconditioner = block_jacobi\n"
      "[goal]\nreference = 0.25\n"
      "[output]\ndirectory = out/x\nvtk = false\ntiming = false\n",
      "cfg.ini", "/base");
  CHECK_FALSE(c.mesh_file.has_value());
  CHECK(c.length == 4.0);
  CHECK(c.h == 0.5);
  CHECK(c.adapt.max_level == 5);
  CHECK_FALSE(c.hemisphere);
  CHECK(c.adapt.surrogate.order == 9);
  CHECK(c.adapt.surrogate.sigma_f == 0.1);
  CHECK(c.adapt.surrogate.shape == FilterShape::lanczos);
  CHECK(c.adapt.mode == AdaptMode::non_robust);
  CHECK(c.adapt.tau == 1e-6);
  CHECK(c.adapt.steps == 6);
  CHECK(c.solver.rel_tol == 1e-9);
  CHECK(c.preconditioner == Preconditioner::block_jacobi);
  CHECK(c.reference == 0.25);
  CHECK_FALSE(c.reference_level.has_value());
  CHECK(c.output == fs::path("out/x"));
  CHECK_FALSE(c.vtk);
  CHECK_FALSE(c.adapt.timing);

  const RunConfig m = parse_config("[mesh]\nfile = duct.msh\n", "cfg.ini", "/base");
  CHECK(m.mesh_file == fs::path("/base/duct.msh"));
  const RunConfig defaults = parse_config("", "cfg.ini");
  CHECK(defaults.adapt.mode == AdaptMode::robust);
  CHECK_FALSE(defaults.preconditioner.has_value());
  CHECK(defaults.time_limit == 0.0);
  CHECK(parse_config("[solver]\ntime_limit = 1800\n").time_limit == 1800.0);
}

TEST_CASE("configuration errors name the offending line") {
  CHECK(error_line("[mesh]\nh = 0.5\n[adapt]\nbogus = 1\n") == 4);
  CHECK(error_line("[mesh]\nh = 0.5\n[nonsense]\nx = 1\n") == 3);
  CHECK(error_line("[adapt]\nsteps = 3\ntau = fast\n") == 3);
  CHECK(error_line("[adapt]\n\nmode = sideways\n") == 3);
  CHECK(error_line("[output]\nvtk = maybe\n") == 2);
  CHECK(error_line("[solver]\nmax_iterations = 0\n") == 2);
  CHECK(error_line("[mesh]\nh = -1\n") == 2);
  CHECK(error_line("[solver]\ntime_limit = -5\n") == 2);
  CHECK(error_line("[adapt]\nratio = 0.5\n") == 1);
  try {
    parse_config("[adapt]\nbogus = 1\n", "cfg.ini");
    FAIL("no error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("cfg.ini:2") == 0);
    CHECK(std::string(e.what()).find("bogus") != std::string::npos);
  }
}

TEST_CASE("VTK output") {
  Scratch s("vtk");
  const DgMesh mesh(generate_block(1, 2, 0.5));
  std::vector<double> f(mesh.num_nodes());
  for (int i = 0; i < mesh.num_nodes(); ++i) f[i] = 0.5 * i;
  write_vtk(mesh, {{"scalar_flux", f}}, s.dir / "a.vtk");
  std::istringstream in(slurp(s.dir / "a.vtk"));
  std::string line;
  std::getline(in, line);
  CHECK(line == "# vtk DataFile Version 3.0");
  std::getline(in, line);
  std::getline(in, line);
  CHECK(line == "ASCII");
  std::getline(in, line);
  CHECK(line == "DATASET UNSTRUCTURED_GRID");
  std::getline(in, line);
  CHECK(line == "POINTS " + std::to_string(mesh.num_nodes()) + " double");
  const std::string text = slurp(s.dir / "a.vtk");
  const int e = mesh.num_elements();
  CHECK(text.find("CELLS " + std::to_string(e) + " " + std::to_string(4 * e) + "\n") != std::string::npos);
  CHECK(text.find("CELL_TYPES " + std::to_string(e) + "\n") != std::string::npos);
  CHECK(text.find("POINT_DATA " + std::to_string(mesh.num_nodes()) + "\nSCALARS scalar_flux double 1\n") !=
        std::string::npos);
  CHECK_THROWS_AS(write_vtk(mesh, {{"short", {1.0}}}, s.dir / "b.vtk"), StructuralError);
}

TEST_CASE("CSV record round trip") {
  Scratch s("csv");
  std::vector<AdaptRow> rows(2);
  rows[0] = {1, 1200, 4.0, 0.123456789012345, 0.05, 3.25, 12.5, 0.0};
  rows[1] = {2, 3600, 12.0, 1e-7, 0.01, std::nan(""), 0.0, 1.5};
  write_csv(rows, s.dir / "r.csv");
  const std::string text = slurp(s.dir / "r.csv");
  CHECK(text.rfind(std::string(kCsvHeader) + "\n", 0) == 0);
  CHECK(text.find("1,1200,4,0.123456789012,0.05,3.25,12.5,0\n") != std::string::npos);
  CHECK(text.find(",nan,") != std::string::npos);
  const std::vector<AdaptRow> back = read_csv(s.dir / "r.csv");
  REQUIRE(back.size() == 2u);
  CHECK(back[0].ndof == 1200u);
  CHECK(back[0].detector == doctest::Approx(0.123456789012).epsilon(1e-12));
  CHECK(back[1].step == 2);
  CHECK(std::isnan(back[1].effectivity));
  CHECK(back[1].wall_seconds == 1.5);

  put(s.dir / "bad.csv", "step,ndof\n1,2\n");
  CHECK_THROWS_AS(read_csv(s.dir / "bad.csv"), ParseError);
  put(s.dir / "short.csv", std::string(kCsvHeader) + "\n1,2,3\n");
  CHECK_THROWS_AS(read_csv(s.dir / "short.csv"), ParseError);
}

TEST_CASE("run command") {
  Scratch s("run");
  SUBCASE("a missing mesh file is reported by name") {
    put(s.dir / "cfg.ini", "[mesh]\nfile = nowhere.msh\n");
    std::ostringstream out, err;
    CHECK(cmd_run(s.dir / "cfg.ini", out, err) == 2);
    CHECK(err.str().find((s.dir / "nowhere.msh").string()) != std::string::npos);
  }
  SUBCASE("a malformed config is rejected") {
    put(s.dir / "cfg.ini", "[adapt]\nsteps = many\n");
    std::ostringstream out, err;
    CHECK(cmd_run(s.dir / "cfg.ini", out, err) == 2);
    CHECK(err.str().find(":2:") != std::string::npos);
  }
  SUBCASE("a short adaptive run writes its record and fields") {
    const fs::path output = s.dir / "out";
    put(s.dir / "cfg.ini", "[mesh]\nlength = 2\nh = 0.5\n[angle]\nmax_level = 3\n[adapt]\nsteps = 2\n"
                           "[goal]\nreference_level = 2\n[output]\ntiming = false\ndirectory = " +
                               output.string() + "\n");
    std::ostringstream out, err;
    REQUIRE(cmd_run(s.dir / "cfg.ini", out, err) == 0);
    CHECK(err.str().empty());
    const std::vector<AdaptRow> rows = read_csv(output / "record.csv");
    REQUIRE(rows.size() == 2u);
    CHECK(std::isfinite(rows[0].rel_error));
    CHECK(fs::exists(output / "step_001.vtk"));
    CHECK(fs::exists(output / "step_002.vtk"));
    const std::string vtk = slurp(output / "step_001.vtk");
    CHECK(vtk.find("SCALARS active_functions") != std::string::npos);
    CHECK(vtk.find("SCALARS underresolved") != std::string::npos);
    const std::string first = slurp(output / "record.csv");
    std::ostringstream out2, err2;
    REQUIRE(cmd_run(s.dir / "cfg.ini", out2, err2) == 0);
    CHECK(slurp(output / "record.csv") == first);
  }
  SUBCASE("a solver failure exits non-zero") {
    put(s.dir / "cfg.ini", "[mesh]\nlength = 2\nh = 0.5\n[adapt]\nsteps = 2\n[solver]\nmax_iterations = 1\n"
                           "preconditioner = block_jacobi\n[output]\nvtk = false\ndirectory = " +
                               (s.dir / "o").string() + "\n");
    std::ostringstream out, err;
    CHECK(cmd_run(s.dir / "cfg.ini", out, err) == 4);
    CHECK(err.str().find("run stopped") != std::string::npos);
  }
}

TEST_CASE("verify command") {
  const std::vector<CheckResult> clean = verify();
  CHECK(clean.size() >= 10u);
  for (const CheckResult& c : clean) {
    INFO(c.name << ": " << c.detail);
    CHECK(c.pass);
  }
  const std::vector<CheckResult> faulty = verify({true});
  REQUIRE(faulty.size() == clean.size());
  for (const CheckResult& c : faulty) {
    INFO(c.name << ": " << c.detail);
    CHECK(c.pass == (c.name != "moment_matrices"));
  }
  std::ostringstream out;
  CHECK(cmd_verify({}, out) == 0);
  CHECK(out.str().find("FAIL") == std::string::npos);
  std::ostringstream bad;
  CHECK(cmd_verify({true}, bad) != 0);
  CHECK(bad.str().find("FAIL moment_matrices") != std::string::npos);
}

TEST_CASE("mesh commands") {
  Scratch s("mesh");
  std::ostringstream out, err;
  REQUIRE(cmd_mesh_gen(4.0, 1.0, 0.5, s.dir / "d.msh", out, err) == 0);
  CHECK(cmd_mesh_check(s.dir / "d.msh", out, err) == 0);
  TriMesh m = load_mesh(s.dir / "d.msh");
  std::swap(m.triangles[0].v[0], m.triangles[0].v[1]);
  save_mesh(m, s.dir / "bad.msh");
  std::ostringstream err2;
  CHECK(cmd_mesh_check(s.dir / "bad.msh", out, err2) != 0);
  CHECK_FALSE(err2.str().empty());
  CHECK(cmd_mesh_check(s.dir / "none.msh", out, err2) == 2);
  CHECK(cmd_mesh_gen(4.0, 1.0, -1.0, s.dir / "x.msh", out, err2) == 2);
}
