#include <cmath>
#include <map>
#include <string>

#include "angadapt/errors.hpp"
#include "angadapt/transport.hpp"

namespace angadapt {

DgMesh::DgMesh(TriMesh mesh) : mesh_(std::move(mesh)) {
  const ValidationReport report = validate(mesh_);
  if (!report.ok()) throw StructuralError("DgMesh: invalid mesh: " + report.violations.front());

  elements_.reserve(mesh_.triangles.size());
  for (int t = 0; t < static_cast<int>(mesh_.triangles.size()); ++t) {
    const Triangle& tri = mesh_.triangles[t];
    Element el;
    el.vertex = tri.v;
    el.area = mesh_.signed_area(t);
    el.region = tri.region;
    el.material = mesh_.regions.at(tri.region);
    for (int k = 0; k < 3; ++k) {
      const auto& p1 = mesh_.vertices[tri.v[(k + 1) % 3]];
      const auto& p2 = mesh_.vertices[tri.v[(k + 2) % 3]];
      el.gx[k] = (p1[1] - p2[1]) / (2.0 * el.area);
      el.gy[k] = (p2[0] - p1[0]) / (2.0 * el.area);
    }
    elements_.push_back(el);
  }

  std::map<std::pair<int, int>, int> boundary_tag;
  for (const BoundaryEdge& b : mesh_.boundary)
    boundary_tag[{std::min(b.v[0], b.v[1]), std::max(b.v[0], b.v[1])}] = b.tag;

  std::map<std::pair<int, int>, int> open;  // edge -> index into faces_
  for (int e = 0; e < num_elements(); ++e) {
    for (int k = 0; k < 3; ++k) {
      const int va = elements_[e].vertex[k];
      const int vb = elements_[e].vertex[(k + 1) % 3];
      const std::pair<int, int> key{std::min(va, vb), std::max(va, vb)};
      const auto it = open.find(key);
      if (it != open.end()) {
        Face& f = faces_[it->second];
        f.nbr = e;
        const auto& ev = elements_[e].vertex;
        const int fa = elements_[f.elem].vertex[f.local];
        const int fb = elements_[f.elem].vertex[(f.local + 1) % 3];
        for (int j = 0; j < 3; ++j) {
          if (ev[j] == fa) f.nbr_a = j;
          if (ev[j] == fb) f.nbr_b = j;
        }
        open.erase(it);
        continue;
      }
      Face f;
      f.elem = e;
      f.local = k;
      const auto& pa = mesh_.vertices[va];
      const auto& pb = mesh_.vertices[vb];
      const double dx = pb[0] - pa[0];
      const double dy = pb[1] - pa[1];
      f.length = std::hypot(dx, dy);
      f.nx = dy / f.length;
      f.ny = -dx / f.length;
      open.emplace(key, static_cast<int>(faces_.size()));
      faces_.push_back(f);
    }
  }
  for (auto& [key, index] : open) {
    const auto it = boundary_tag.find(key);
    faces_[index].tag = it == boundary_tag.end() ? kVacuumBoundary : it->second;
  }
}

std::array<double, 2> DgMesh::node_position(int node) const {
  return mesh_.vertices[elements_[node / 3].vertex[node % 3]];
}

double DgMesh::region_volume(int region) const {
  if (!mesh_.regions.contains(region))
    throw DomainError("region " + std::to_string(region) + " does not exist in the mesh");
  return mesh_.region_volume(region);
}

}  // namespace angadapt
