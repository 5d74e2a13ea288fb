#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "angadapt/errors.hpp"
#include "angadapt/transport.hpp"

namespace angadapt {

namespace {

double face_mass(double length, bool same_vertex) { return length / 6.0 * (same_vertex ? 2.0 : 1.0); }

double mass(double area, bool diagonal) { return area / 12.0 * (diagonal ? 2.0 : 1.0); }

// Visits every overlapping (row leaf, col leaf) pair of two trees below
// nodes `a` and `b`, passing the geometry of the smaller patch.
template <class F>
void overlap_walk(const AngleTree& tr, int a, const AngleTree& tc, int b, F&& f) {
  const AngleTree::Node& na = tr.node(a);
  const AngleTree::Node& nb = tc.node(b);
  if (na.leaf >= 0 && nb.leaf >= 0) {
    f(na.leaf, nb.leaf, na.level >= nb.level ? tr.geometry(a) : tc.geometry(b));
    return;
  }
  for (int c = 0; c < 4; ++c)
    overlap_walk(tr, na.leaf >= 0 ? a : na.child[c], tc, nb.leaf >= 0 ? b : nb.child[c], f);
}

}  // namespace

std::vector<double> TransportOperator::apply(std::span<const double> x, Mode mode) const {
  std::vector<double> y(size());
  apply(x, y, mode);
  return y;
}

void TransportOperator::check_size(std::span<const double> v, const char* what) const {
  if (v.size() != size())
    throw StructuralError(std::string(what) + ": vector of length " + std::to_string(v.size()) +
                          " does not match the " + std::to_string(size()) + " unknowns");
}

double HaarTransport::Pair::eval(const PatchGeometry& g) const {
  double v = area * g.area + mx * g.mx + my * g.my;
  for (int k = 0; k < faces; ++k) v += fminus[k] * g.half_range(fnx[k], fny[k]).minus;
  return v;
}

HaarTransport::HaarTransport(std::shared_ptr<const DgMesh> mesh, std::vector<TreePtr> trees,
                             AngularDomain domain)
    : TransportOperator(std::move(mesh), domain), trees_(std::move(trees)) {
  const DgMesh& m = *mesh_;
  if (static_cast<int>(trees_.size()) != m.num_nodes())
    throw StructuralError("HaarTransport: " + std::to_string(trees_.size()) + " trees for " +
                          std::to_string(m.num_nodes()) + " nodes");
  for (const TreePtr& t : trees_) offsets_.push_back(offsets_.back() + t->num_functions(domain_.octants()));

  const double w = domain_.weight();
  for (int e = 0; e < m.num_elements(); ++e) {
    const DgMesh::Element& el = m.element(e);
    element_pairs_.push_back(static_cast<int>(pairs_.size()));
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        Pair p{};
        p.row = 3 * e + i;
        p.col = 3 * e + j;
        p.area = w * el.material.sigma_t * mass(el.area, i == j);
        p.mx = w * el.area / 3.0 * el.gx[j];
        p.my = w * el.area / 3.0 * el.gy[j];
        pairs_.push_back(p);
      }
    }
  }
  row_pairs_.resize(m.num_elements());
  col_pairs_.resize(m.num_elements());
  auto add_face = [&](Pair& p, double nx, double ny, double coeff) {
    p.fnx[p.faces] = nx;
    p.fny[p.faces] = ny;
    p.fminus[p.faces] = coeff;
    ++p.faces;
  };
  for (const DgMesh::Face& f : m.faces()) {
    const std::array<int, 2> own{f.local, (f.local + 1) % 3};
    const std::array<int, 2> other{f.nbr_a, f.nbr_b};
    for (int s = 0; s < (f.boundary() ? 1 : 2); ++s) {
      const int e = s == 0 ? f.elem : f.nbr;
      const int e_other = s == 0 ? f.nbr : f.elem;
      const auto& mine = s == 0 ? own : other;
      const auto& theirs = s == 0 ? other : own;
      const double nx = s == 0 ? f.nx : -f.nx;
      const double ny = s == 0 ? f.ny : -f.ny;
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          const double mf = w * face_mass(f.length, a == b);
          add_face(pairs_[element_pairs_[e] + 3 * mine[a] + mine[b]], nx, ny, -mf);
          if (f.boundary()) continue;
          Pair p{};
          p.row = 3 * e + mine[a];
          p.col = 3 * e_other + theirs[b];
          add_face(p, nx, ny, mf);
          row_pairs_[e].push_back(static_cast<int>(pairs_.size()));
          col_pairs_[e_other].push_back(static_cast<int>(pairs_.size()));
          pairs_.push_back(p);
        }
      }
    }
  }
}

void HaarTransport::leaf_values(std::span<const double> x, std::vector<double>& leaves) const {
  leaves.resize(size());
  const int oct = domain_.octants();
  for (int i = 0; i < mesh_->num_nodes(); ++i)
    synthesize(*trees_[i], x.subspan(offsets_[i], block_size(i)),
               std::span<double>(leaves).subspan(offsets_[i], block_size(i)), oct);
}

void HaarTransport::pair_product(const Pair& p, const std::vector<double>& in,
                                 std::vector<double>& out, Mode mode) const {
  const AngleTree& tr = *trees_[p.row];
  const AngleTree& tc = *trees_[p.col];
  const double* src = in.data() + offsets_[mode == Mode::forward ? p.col : p.row];
  double* dst = out.data() + offsets_[mode == Mode::forward ? p.row : p.col];
  if (&tr == &tc) {
    const int n = static_cast<int>(block_size(p.row));
    for (int l = 0; l < n; ++l) dst[l] += p.eval(tr.geometry(tr.leaf_node(l))) * src[l];
    return;
  }
  for (int o = 0; o < domain_.octants(); ++o) {
    if (mode == Mode::forward)
      overlap_walk(tr, tr.root(o), tc, tc.root(o),
                   [&](int a, int b, const PatchGeometry& g) { dst[a] += p.eval(g) * src[b]; });
    else
      overlap_walk(tr, tr.root(o), tc, tc.root(o),
                   [&](int a, int b, const PatchGeometry& g) { dst[b] += p.eval(g) * src[a]; });
  }
}

void HaarTransport::add_scatter(std::span<const double> x, std::span<double> y) const {
  const DgMesh& m = *mesh_;
  const int oct = domain_.octants();
  const double octant_integral = domain_.weight() * kPi / 2.0;
  for (int e = 0; e < m.num_elements(); ++e) {
    const DgMesh::Element& el = m.element(e);
    if (el.material.sigma_s == 0.0) continue;
    std::array<double, 3> sums{};
    for (int j = 0; j < 3; ++j) {
      const int node = 3 * e + j;
      for (int o = 0; o < oct; ++o) sums[j] += x[offsets_[node] + trees_[node]->octant_offset(o)];
    }
    for (int i = 0; i < 3; ++i) {
      double acc = 0.0;
      for (int j = 0; j < 3; ++j) acc += mass(el.area, i == j) * sums[j];
      acc *= -el.material.sigma_s / kFourPi * octant_integral * octant_integral;
      const int node = 3 * e + i;
      for (int o = 0; o < oct; ++o) y[offsets_[node] + trees_[node]->octant_offset(o)] += acc;
    }
  }
}

void HaarTransport::apply(std::span<const double> x, std::span<double> y, Mode mode) const {
  check_size(x, "HaarTransport::apply");
  check_size(y, "HaarTransport::apply");
  leaf_values(x, leaf_in_);
  leaf_out_.assign(size(), 0.0);
  for (const Pair& p : pairs_) pair_product(p, leaf_in_, leaf_out_, mode);
  const int oct = domain_.octants();
  for (int i = 0; i < mesh_->num_nodes(); ++i)
    synthesize_transpose(*trees_[i], std::span<const double>(leaf_out_).subspan(offsets_[i], block_size(i)),
                         y.subspan(offsets_[i], block_size(i)), oct);
  add_scatter(x, y);
}

void HaarTransport::element_solve(int e, std::vector<double>& src, std::vector<double>& dst,
                                  Mode mode) const {
  const Pair* pe = &pairs_[element_pairs_[e]];
  const std::array<const AngleTree*, 3> t{trees_[3 * e].get(), trees_[3 * e + 1].get(),
                                          trees_[3 * e + 2].get()};
  Eigen::Matrix3d block;
  Eigen::Vector3d rhs;
  auto solve_block = [&](const PatchGeometry& g) -> Eigen::Vector3d {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        const double v = pe[3 * i + j].eval(g);
        if (mode == Mode::forward)
          block(i, j) = v;
        else
          block(j, i) = v;
      }
    return block.partialPivLu().solve(rhs);
  };
  if (t[0] == t[1] && t[1] == t[2]) {
    const std::array<double*, 3> in{&src[offsets_[3 * e]], &src[offsets_[3 * e + 1]], &src[offsets_[3 * e + 2]]};
    const std::array<double*, 3> out{&dst[offsets_[3 * e]], &dst[offsets_[3 * e + 1]], &dst[offsets_[3 * e + 2]]};
    const int n = static_cast<int>(block_size(3 * e));
    for (int l = 0; l < n; ++l) {
      for (int i = 0; i < 3; ++i) rhs[i] = in[i][l];
      const Eigen::Vector3d sol = solve_block(t[0]->geometry(t[0]->leaf_node(l)));
      for (int i = 0; i < 3; ++i) out[i][l] = sol[i];
    }
    return;
  }
  // Union of the three refinements: split tested residuals by area and
  // average the block solutions back onto each node's leaves.
  thread_local std::vector<double> local;
  local.assign(src.begin() + offsets_[3 * e], src.begin() + offsets_[3 * e + 3]);
  const std::array<const double*, 3> in{local.data(), local.data() + block_size(3 * e),
                                        local.data() + block_size(3 * e) + block_size(3 * e + 1)};
  const std::array<double*, 3> out{&dst[offsets_[3 * e]], &dst[offsets_[3 * e + 1]], &dst[offsets_[3 * e + 2]]};
  std::fill(dst.begin() + offsets_[3 * e], dst.begin() + offsets_[3 * e + 3], 0.0);
  auto walk = [&](auto&& self, std::array<int, 3> nodes) -> void {
    bool all_leaves = true;
    int finest = 0;
    for (int i = 0; i < 3; ++i) {
      all_leaves = all_leaves && t[i]->node(nodes[i]).leaf >= 0;
      if (t[i]->node(nodes[i]).level > t[finest]->node(nodes[finest]).level) finest = i;
    }
    if (all_leaves) {
      const PatchGeometry& g = t[finest]->geometry(nodes[finest]);
      std::array<double, 3> frac{};
      for (int i = 0; i < 3; ++i) {
        frac[i] = g.area / t[i]->geometry(nodes[i]).area;
        rhs[i] = in[i][t[i]->node(nodes[i]).leaf] * frac[i];
      }
      const Eigen::Vector3d sol = solve_block(g);
      for (int i = 0; i < 3; ++i) out[i][t[i]->node(nodes[i]).leaf] += sol[i] * frac[i];
      return;
    }
    for (int c = 0; c < 4; ++c) {
      std::array<int, 3> next;
      for (int i = 0; i < 3; ++i) {
        const AngleTree::Node& n = t[i]->node(nodes[i]);
        next[i] = n.leaf >= 0 ? nodes[i] : n.child[c];
      }
      self(self, next);
    }
  };
  for (int o = 0; o < domain_.octants(); ++o) walk(walk, {t[0]->root(o), t[1]->root(o), t[2]->root(o)});
}

void HaarTransport::element_residual(int e, Mode mode) const {
  const auto begin = offsets_[3 * e], end = offsets_[3 * e + 3];
  std::fill(leaf_res_.begin() + begin, leaf_res_.begin() + end, 0.0);
  for (int k = 0; k < 9; ++k) pair_product(pairs_[element_pairs_[e] + k], leaf_out_, leaf_res_, mode);
  for (const int p : mode == Mode::forward ? row_pairs_[e] : col_pairs_[e])
    pair_product(pairs_[p], leaf_out_, leaf_res_, mode);
  for (auto q = begin; q < end; ++q) leaf_res_[q] = leaf_in_[q] - leaf_res_[q];
}

void HaarTransport::precondition(std::span<const double> r, std::span<double> z, Mode mode) const {
  check_size(r, "HaarTransport::precondition");
  check_size(z, "HaarTransport::precondition");
  const int oct = domain_.octants();
  const int ne = mesh_->num_elements();
  leaf_in_.resize(size());
  leaf_out_.assign(size(), 0.0);
  for (int i = 0; i < mesh_->num_nodes(); ++i)
    analyse_transpose(*trees_[i], r.subspan(offsets_[i], block_size(i)),
                      std::span<double>(leaf_in_).subspan(offsets_[i], block_size(i)), oct);
  if (preconditioner_ == Preconditioner::block_jacobi) {
    for (int e = 0; e < ne; ++e) element_solve(e, leaf_in_, leaf_out_, mode);
  } else {
    leaf_res_.resize(size());
    auto update = [&](int e) {
      element_residual(e, mode);
      element_solve(e, leaf_res_, leaf_res_, mode);
      for (auto q = offsets_[3 * e]; q < offsets_[3 * e + 3]; ++q) leaf_out_[q] += leaf_res_[q];
    };
    for (int e = 0; e < ne; ++e) update(e);
    for (int e = ne - 1; e >= 0; --e) update(e);
  }
  for (int i = 0; i < mesh_->num_nodes(); ++i)
    analyse(*trees_[i], std::span<const double>(leaf_out_).subspan(offsets_[i], block_size(i)),
            z.subspan(offsets_[i], block_size(i)), oct);
}

std::vector<double> HaarTransport::diagonal() const {
  std::vector<double> d(size());
  std::vector<double> leaf;
  const int oct = domain_.octants();
  const double octant_integral = domain_.weight() * kPi / 2.0;
  for (int e = 0; e < mesh_->num_elements(); ++e) {
    const DgMesh::Element& el = mesh_->element(e);
    for (int i = 0; i < 3; ++i) {
      const int node = 3 * e + i;
      const AngleTree& t = *trees_[node];
      const Pair& p = pairs_[element_pairs_[e] + 4 * i];
      leaf.resize(block_size(node));
      for (std::size_t l = 0; l < leaf.size(); ++l) leaf[l] = p.eval(t.geometry(t.leaf_node(static_cast<int>(l))));
      std::span<double> out(d.data() + offsets_[node], block_size(node));
      support_sum(t, leaf, out, oct);
      const double scatter =
          -el.material.sigma_s / kFourPi * mass(el.area, true) * octant_integral * octant_integral;
      for (int o = 0; o < oct; ++o) out[t.octant_offset(o)] += scatter;
    }
  }
  return d;
}

std::vector<double> HaarTransport::isotropic_load(const std::function<double(int)>& density) const {
  std::vector<double> b(size(), 0.0);
  const double octant_integral = domain_.weight() * kPi / 2.0;
  for (int e = 0; e < mesh_->num_elements(); ++e) {
    const DgMesh::Element& el = mesh_->element(e);
    const double c = density(el.region);
    if (c == 0.0) continue;
    for (int i = 0; i < 3; ++i) {
      const int node = 3 * e + i;
      for (int o = 0; o < domain_.octants(); ++o)
        b[offsets_[node] + trees_[node]->octant_offset(o)] = c * el.area / 3.0 * octant_integral;
    }
  }
  return b;
}

std::vector<double> HaarTransport::scalar_flux(std::span<const double> x) const {
  check_size(x, "HaarTransport::scalar_flux");
  std::vector<double> phi(mesh_->num_nodes(), 0.0);
  const double octant_integral = domain_.weight() * kPi / 2.0;
  for (int i = 0; i < mesh_->num_nodes(); ++i)
    for (int o = 0; o < domain_.octants(); ++o)
      phi[i] += octant_integral * x[offsets_[i] + trees_[i]->octant_offset(o)];
  return phi;
}

std::vector<double> HaarTransport::load(const PatchSource& source, const PatchInflow& inflow) const {
  const DgMesh& m = *mesh_;
  const double w = domain_.weight();
  std::vector<double> leaf(size(), 0.0);
  for (int e = 0; e < m.num_elements(); ++e) {
    const DgMesh::Element& el = m.element(e);
    for (int i = 0; i < 3; ++i) {
      const int node = 3 * e + i;
      const AngleTree& t = *trees_[node];
      for (int l = 0; l < static_cast<int>(block_size(node)); ++l) {
        const SpherePatch& patch = t.patch(t.leaf_node(l));
        double acc = 0.0;
        for (int j = 0; j < 3; ++j) {
          const auto pos = m.node_position(3 * e + j);
          acc += mass(el.area, i == j) * source(pos[0], pos[1], patch);
        }
        leaf[offsets_[node] + l] += w * acc;
      }
    }
  }
  if (inflow) {
    for (const DgMesh::Face& f : m.faces()) {
      if (!f.boundary()) continue;
      const std::array<int, 2> local{f.local, (f.local + 1) % 3};
      for (int a = 0; a < 2; ++a) {
        const int node = 3 * f.elem + local[a];
        const AngleTree& t = *trees_[node];
        for (int l = 0; l < static_cast<int>(block_size(node)); ++l) {
          const int tn = t.leaf_node(l);
          const double minus = t.geometry(tn).half_range(f.nx, f.ny).minus;
          if (minus == 0.0) continue;
          double acc = 0.0;
          for (int b = 0; b < 2; ++b) {
            const auto pos = m.node_position(3 * f.elem + local[b]);
            acc += face_mass(f.length, a == b) * inflow(pos[0], pos[1], t.patch(tn));
          }
          leaf[offsets_[node] + l] -= w * minus * acc;
        }
      }
    }
  }
  std::vector<double> b(size());
  for (int i = 0; i < m.num_nodes(); ++i)
    synthesize_transpose(*trees_[i], std::span<const double>(leaf).subspan(offsets_[i], block_size(i)),
                         std::span<double>(b).subspan(offsets_[i], block_size(i)), domain_.octants());
  return b;
}

double HaarTransport::boundary_outflow(std::span<const double> x) const {
  check_size(x, "HaarTransport::boundary_outflow");
  std::vector<double> leaves;
  leaf_values(x, leaves);
  double total = 0.0;
  for (const DgMesh::Face& f : mesh_->faces()) {
    if (!f.boundary()) continue;
    for (int a = 0; a < 2; ++a) {
      const int node = 3 * f.elem + (f.local + a) % 3;
      const AngleTree& t = *trees_[node];
      for (int l = 0; l < static_cast<int>(block_size(node)); ++l)
        total += t.geometry(t.leaf_node(l)).half_range(f.nx, f.ny).plus * leaves[offsets_[node] + l] *
                 f.length / 2.0;
    }
  }
  return domain_.weight() * total;
}

std::vector<AngleMap> HaarTransport::to_maps(std::span<const double> x, int max_level) const {
  check_size(x, "HaarTransport::to_maps");
  std::vector<AngleMap> maps;
  maps.reserve(trees_.size());
  for (int i = 0; i < mesh_->num_nodes(); ++i) {
    const AngleTree& t = *trees_[i];
    AngleMap m(trees_[i], max_level);
    const auto block = x.subspan(offsets_[i], block_size(i));
    std::copy(block.begin(), block.end(), m.coeffs.begin());
    if (domain_.hemisphere) {
      for (int o = 0; o < 4; ++o) m.coeffs[t.octant_offset(o + 4)] = block[t.octant_offset(o)];
      for (int n = 0; n < t.size(); ++n) {
        const AngleTree::Node& node = t.node(n);
        if (node.coeff < 0 || key_octant(node.key) >= 4) continue;
        const int mirror = t.find(mirror_key(node.key));
        if (mirror < 0 || t.node(mirror).coeff < 0)
          throw StructuralError("to_maps: tree of node " + std::to_string(i) +
                                " is not symmetric under mu -> -mu");
        const int c = t.node(mirror).coeff;
        m.coeffs[c] = block[node.coeff];
        m.coeffs[c + 1] = -block[node.coeff + 1];
        m.coeffs[c + 2] = -block[node.coeff + 2];
      }
    }
    maps.push_back(std::move(m));
  }
  return maps;
}

std::vector<double> HaarTransport::from_maps(const std::vector<AngleMap>& maps) const {
  if (maps.size() != trees_.size())
    throw StructuralError("from_maps: one map per node required");
  std::vector<double> x(size());
  for (int i = 0; i < mesh_->num_nodes(); ++i) {
    if (maps[i].tree->subdivided() != trees_[i]->subdivided())
      throw StructuralError("from_maps: map of node " + std::to_string(i) + " has a different tree");
    std::copy_n(maps[i].coeffs.begin(), block_size(i), x.begin() + offsets_[i]);
  }
  return x;
}

}  // namespace angadapt
