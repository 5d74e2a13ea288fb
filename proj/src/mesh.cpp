#include "angadapt/mesh.hpp"

#include <functional>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "angadapt/errors.hpp"

namespace angadapt {

namespace {

using Edge = std::pair<int, int>;

Edge make_edge(int a, int b) { return a < b ? Edge{a, b} : Edge{b, a}; }

// Segment breakpoints of [0, total] with interior breaks, each piece split
// into ceil(len / h) equal cells.
std::vector<double> axis_nodes(const std::vector<double>& breaks, double h) {
  std::vector<double> out{breaks.front()};
  for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
    const double len = breaks[s + 1] - breaks[s];
    if (len <= 1e-12) continue;
    const int n = std::max(1, static_cast<int>(std::ceil(len / h - 1e-9)));
    for (int k = 1; k <= n; ++k)
      out.push_back(k == n ? breaks[s + 1] : breaks[s] + len * k / n);
  }
  return out;
}

}  // namespace

double TriMesh::signed_area(int t) const {
  const auto& a = vertices[triangles[t].v[0]];
  const auto& b = vertices[triangles[t].v[1]];
  const auto& c = vertices[triangles[t].v[2]];
  return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]));
}

double TriMesh::region_volume(int region) const {
  double sum = 0.0;
  for (int t = 0; t < static_cast<int>(triangles.size()); ++t)
    if (triangles[t].region == region) sum += signed_area(t);
  return sum;
}

double TriMesh::total_volume() const {
  double sum = 0.0;
  for (int t = 0; t < static_cast<int>(triangles.size()); ++t) sum += signed_area(t);
  return sum;
}

namespace {

TriMesh cell_mesh(const std::vector<double>& xs, const std::vector<double>& ys,
                  const std::function<int(double, double)>& region_of) {
  const int nx = static_cast<int>(xs.size()) - 1;
  const int ny = static_cast<int>(ys.size()) - 1;

  TriMesh m;
  auto corner = [&](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) m.vertices.push_back({xs[i], ys[j]});
  const int centre_base = static_cast<int>(m.vertices.size());
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      m.vertices.push_back({0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1])});

  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int c = centre_base + j * nx + i;
      const int v00 = corner(i, j), v10 = corner(i + 1, j);
      const int v11 = corner(i + 1, j + 1), v01 = corner(i, j + 1);
      const int region = region_of(m.vertices[c][0], m.vertices[c][1]);
      m.triangles.push_back({{v00, v10, c}, region});
      m.triangles.push_back({{v01, v00, c}, region});
      m.triangles.push_back({{v10, v11, c}, region});
      m.triangles.push_back({{v11, v01, c}, region});
    }
  }
  for (int i = 0; i < nx; ++i) {
    m.boundary.push_back({{corner(i, 0), corner(i + 1, 0)}, kVacuumBoundary});
    m.boundary.push_back({{corner(i + 1, ny), corner(i, ny)}, kVacuumBoundary});
  }
  for (int j = 0; j < ny; ++j) {
    m.boundary.push_back({{corner(nx, j), corner(nx, j + 1)}, kVacuumBoundary});
    m.boundary.push_back({{corner(0, j + 1), corner(0, j)}, kVacuumBoundary});
  }
  m.regions[duct_region::kVoid] = Material{0.0, 0.0, 0.0};
  m.regions[duct_region::kSource] = Material{0.0, 0.0, 1.0};
  m.regions[duct_region::kDetector] = Material{0.0, 0.0, 0.0};
  return m;
}

}  // namespace

TriMesh generate_duct(double length, double width, double h) {
  if (!(length > 0.0) || !(width > 0.0) || !(h > 0.0))
    throw DomainError("generate_duct: length, width and h must be positive");
  if (h >= std::min(1.0, width))
    throw DomainError("generate_duct: h = " + std::to_string(h) +
                      " does not resolve the 1 cm source/detector boxes");
  const double total = length + 2.0;
  const double box_lo = 0.5 * (width - 1.0);
  const double box_hi = 0.5 * (width + 1.0);
  std::vector<double> xb{0.0};
  if (box_lo > 1e-12) xb.push_back(box_lo);
  if (width - box_hi > 1e-12) xb.push_back(box_hi);
  xb.push_back(width);
  if (width < 1.0) xb = {0.0, width};
  const std::vector<double> xs = axis_nodes(xb, h);
  const std::vector<double> ys = axis_nodes({0.0, 1.0, length + 1.0, total}, h);
  return cell_mesh(xs, ys, [&](double x, double y) {
    const bool in_box = x > box_lo && x < box_hi;
    if (in_box && y < 1.0) return duct_region::kSource;
    if (in_box && y > length + 1.0) return duct_region::kDetector;
    return duct_region::kVoid;
  });
}

TriMesh generate_block(int nx, int ny, double cell) {
  if (nx < 1 || ny < 2 || !(cell > 0.0))
    throw DomainError("generate_block: need nx >= 1, ny >= 2 and a positive cell size");
  std::vector<double> xs(nx + 1), ys(ny + 1);
  for (int i = 0; i <= nx; ++i) xs[i] = i * cell;
  for (int j = 0; j <= ny; ++j) ys[j] = j * cell;
  const double top = (ny - 1) * cell;
  return cell_mesh(xs, ys, [&](double, double y) {
    if (y < cell) return duct_region::kSource;
    if (y > top) return duct_region::kDetector;
    return duct_region::kVoid;
  });
}

ValidationReport validate(const TriMesh& m) {
  ValidationReport report;
  auto add = [&](std::string s) { report.violations.push_back(std::move(s)); };
  const int nv = static_cast<int>(m.vertices.size());
  if (m.triangles.empty()) add("no elements");
  std::map<Edge, int> edge_use;
  for (int t = 0; t < static_cast<int>(m.triangles.size()); ++t) {
    const Triangle& tri = m.triangles[t];
    bool ids_ok = true;
    for (int v : tri.v) ids_ok = ids_ok && v >= 0 && v < nv;
    if (!ids_ok) {
      add("triangle " + std::to_string(t) + " references a missing vertex");
      continue;
    }
    if (!(m.signed_area(t) > 0.0))
      add("triangle " + std::to_string(t) + " is not positively oriented (area " +
          std::to_string(m.signed_area(t)) + ")");
    if (!m.regions.contains(tri.region))
      add("triangle " + std::to_string(t) + " uses undefined region " +
          std::to_string(tri.region));
    for (int k = 0; k < 3; ++k) ++edge_use[make_edge(tri.v[k], tri.v[(k + 1) % 3])];
  }
  std::set<Edge> listed;
  for (std::size_t b = 0; b < m.boundary.size(); ++b) {
    const Edge e = make_edge(m.boundary[b].v[0], m.boundary[b].v[1]);
    listed.insert(e);
    const auto it = edge_use.find(e);
    if (it == edge_use.end() || it->second != 1)
      add("boundary edge " + std::to_string(b) + " is not a single-triangle edge");
  }
  for (const auto& [e, count] : edge_use) {
    if (count > 2)
      add("edge (" + std::to_string(e.first) + "," + std::to_string(e.second) + ") shared by " +
          std::to_string(count) + " triangles");
    else if (count == 1 && !listed.contains(e))
      add("edge (" + std::to_string(e.first) + "," + std::to_string(e.second) +
          ") lies on the boundary but has no boundary entry");
  }
  for (const auto& [id, mat] : m.regions) {
    if (mat.sigma_t < 0.0 || mat.sigma_s < 0.0 || mat.source < 0.0)
      add("region " + std::to_string(id) + " has a negative cross-section or source");
    if (mat.sigma_s > mat.sigma_t)
      add("region " + std::to_string(id) + " has sigma_s > sigma_t");
  }
  return report;
}

TriMesh parse_mesh(const std::string& text, const std::string& name) {
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  // Next non-empty, non-comment line as a token stream.
  auto next = [&](std::istringstream& tokens) -> bool {
    while (std::getline(in, raw)) {
      ++line_no;
      const auto hash = raw.find('#');
      if (hash != std::string::npos) raw.erase(hash);
      if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
      tokens = std::istringstream(raw);
      return true;
    }
    return false;
  };
  auto fail = [&](const std::string& what) -> ParseError { return ParseError(name, line_no, what); };
  auto expect_end = [&](std::istringstream& tokens) {
    std::string extra;
    if (tokens >> extra) throw fail("unexpected trailing token '" + extra + "'");
  };
  auto read_count = [&](const std::string& keyword) {
    std::istringstream tokens;
    if (!next(tokens)) throw fail("missing '" + keyword + "' section");
    std::string word;
    long long count = -1;
    if (!(tokens >> word) || word != keyword) throw fail("expected '" + keyword + "'");
    if (!(tokens >> count) || count < 0) throw fail("malformed count for '" + keyword + "'");
    expect_end(tokens);
    return static_cast<int>(count);
  };

  TriMesh m;
  {
    std::istringstream tokens;
    std::string word;
    int version = 0;
    if (!next(tokens) || !(tokens >> word >> version) || word != "tmesh" || version != 1)
      throw fail("expected header 'tmesh 1'");
  }
  const int nv = read_count("vertices");
  for (int i = 0; i < nv; ++i) {
    std::istringstream tokens;
    if (!next(tokens)) throw fail("expected " + std::to_string(nv) + " vertices, file ended");
    double x, y;
    if (!(tokens >> x >> y)) throw fail("malformed vertex line");
    expect_end(tokens);
    m.vertices.push_back({x, y});
  }
  const int nt = read_count("triangles");
  if (nt == 0) throw fail("no elements");
  std::vector<int> tri_lines;
  for (int i = 0; i < nt; ++i) {
    std::istringstream tokens;
    if (!next(tokens)) throw fail("expected " + std::to_string(nt) + " triangles, file ended");
    Triangle t;
    if (!(tokens >> t.v[0] >> t.v[1] >> t.v[2] >> t.region)) throw fail("malformed triangle line");
    expect_end(tokens);
    for (int v : t.v)
      if (v < 0 || v >= nv)
        throw fail("triangle references vertex " + std::to_string(v) + " but only " +
                   std::to_string(nv) + " vertices exist");
    m.triangles.push_back(t);
    tri_lines.push_back(line_no);
  }
  const int nb = read_count("boundary");
  std::vector<int> boundary_lines;
  for (int i = 0; i < nb; ++i) {
    std::istringstream tokens;
    if (!next(tokens)) throw fail("expected " + std::to_string(nb) + " boundary edges, file ended");
    BoundaryEdge b;
    if (!(tokens >> b.v[0] >> b.v[1] >> b.tag)) throw fail("malformed boundary line");
    expect_end(tokens);
    for (int v : b.v)
      if (v < 0 || v >= nv) throw fail("boundary edge references vertex " + std::to_string(v));
    m.boundary.push_back(b);
    boundary_lines.push_back(line_no);
  }
  {
    std::istringstream tokens;
    while (next(tokens)) {
      std::string word;
      int id;
      Material mat;
      if (!(tokens >> word) || word != "region") throw fail("expected 'region' line");
      if (!(tokens >> id >> mat.sigma_t >> mat.sigma_s >> mat.source))
        throw fail("malformed region line");
      expect_end(tokens);
      if (m.regions.contains(id)) throw fail("region " + std::to_string(id) + " defined twice");
      m.regions[id] = mat;
    }
  }

  // Topology checks, reported against the line that breaks them.
  std::map<Edge, int> edge_use;
  for (int t = 0; t < nt; ++t) {
    line_no = tri_lines[t];
    if (!(m.signed_area(t) > 0.0)) throw fail("triangle is degenerate or clockwise");
    if (!m.regions.contains(m.triangles[t].region))
      throw fail("triangle uses undefined region " + std::to_string(m.triangles[t].region));
    for (int k = 0; k < 3; ++k) {
      const Edge e = make_edge(m.triangles[t].v[k], m.triangles[t].v[(k + 1) % 3]);
      if (++edge_use[e] > 2) throw fail("non-conforming topology: edge shared by more than 2 triangles");
    }
  }
  for (int b = 0; b < nb; ++b) {
    line_no = boundary_lines[b];
    const auto it = edge_use.find(make_edge(m.boundary[b].v[0], m.boundary[b].v[1]));
    if (it == edge_use.end() || it->second != 1)
      throw fail("boundary edge is not on the mesh boundary");
  }
  const ValidationReport report = validate(m);
  if (!report.ok()) throw ParseError(name, 0, report.violations.front());
  return m;
}

TriMesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open mesh file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_mesh(buffer.str(), path.string());
}

std::string format_mesh(const TriMesh& m) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "tmesh 1\n";
  out << "vertices " << m.vertices.size() << "\n";
  for (const auto& v : m.vertices) out << v[0] << " " << v[1] << "\n";
  out << "triangles " << m.triangles.size() << "\n";
  for (const auto& t : m.triangles)
    out << t.v[0] << " " << t.v[1] << " " << t.v[2] << " " << t.region << "\n";
  out << "boundary " << m.boundary.size() << "\n";
  for (const auto& b : m.boundary) out << b.v[0] << " " << b.v[1] << " " << b.tag << "\n";
  for (const auto& [id, mat] : m.regions)
    out << "region " << id << " " << mat.sigma_t << " " << mat.sigma_s << " " << mat.source << "\n";
  return out.str();
}

void save_mesh(const TriMesh& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_mesh: cannot write " + path.string());
  out << format_mesh(m);
  if (!out) throw std::runtime_error("save_mesh: write failed for " + path.string());
}

}  // namespace angadapt
