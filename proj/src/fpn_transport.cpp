#include <cmath>
#include <map>
#include <string>

#include "angadapt/errors.hpp"
#include "angadapt/transport.hpp"

namespace angadapt {

namespace {

double face_mass(double length, bool same_vertex) { return length / 6.0 * (same_vertex ? 2.0 : 1.0); }

double mass(double area, bool diagonal) { return area / 12.0 * (diagonal ? 2.0 : 1.0); }

constexpr std::size_t kBlockMemoryLimit = std::size_t{1} << 30;

}  // namespace

FpnTransport::FpnTransport(std::shared_ptr<const DgMesh> mesh, FpnConfig config, AngularDomain domain)
    : TransportOperator(std::move(mesh), domain), config_(config) {
  if (config_.order < 0) throw DomainError("FpnTransport: order must be non-negative");
  if (config_.sigma_f < 0.0) throw DomainError("FpnTransport: filter strength must be non-negative");
  for (int k = 0; k < harmonic_count(config_.order); ++k) {
    const HarmonicIndex h = HarmonicIndex::from_flat(k);
    if (!domain_.hemisphere || (h.l + std::abs(h.m)) % 2 == 0) basis_.push_back(k);
  }
  const int nb = static_cast<int>(basis_.size());
  const MomentMatrices mm = moment_matrices(config_.order);
  mx_.resize(nb, nb);
  my_.resize(nb, nb);
  filter_.resize(nb);
  for (int a = 0; a < nb; ++a) {
    filter_[a] = filter_coeff(HarmonicIndex::from_flat(basis_[a]).l, config_.order, config_.sigma_f,
                              config_.shape);
    for (int b = 0; b < nb; ++b) {
      mx_(a, b) = mm.mx(basis_[a], basis_[b]);
      my_(a, b) = mm.my(basis_[a], basis_[b]);
    }
  }
  const int nodes = mesh_->num_nodes();
  for (int i = 0; i < nodes; ++i) offsets_.push_back(offsets_.back() + nb);

  mxs_ = mx_.sparseView(1e-14);
  mys_ = my_.sparseView(1e-14);

  edges_.assign(mesh_->num_elements(), {});
  for (const DgMesh::Face& f : mesh_->faces()) {
    edges_[f.elem][f.local] = {f.nx, f.ny, f.length};
    if (!f.boundary()) {
      // The neighbour traverses the shared edge in the opposite direction.
      const int local = (f.nbr_b + 1) % 3 == f.nbr_a ? f.nbr_b : f.nbr_a;
      edges_[f.nbr][local] = {-f.nx, -f.ny, f.length};
    }
  }

  // Node blocks depend only on a handful of geometric numbers; identical
  // blocks are factorised once.
  diag_.assign(size(), 0.0);
  node_block_id_.assign(nodes, -1);
  std::map<std::vector<double>, int> seen;
  bool fallback = false;
  for (int i = 0; i < nodes; ++i) {
    const int e = i / 3, k = i % 3;
    const DgMesh::Element& el = mesh_->element(e);
    std::vector<double> key{el.material.sigma_t, el.material.sigma_s, el.area, el.gx[k], el.gy[k]};
    for (const int edge : {k, (k + 2) % 3})
      key.insert(key.end(), edges_[e][edge].begin(), edges_[e][edge].end());
    auto [it, inserted] = seen.emplace(std::move(key), -1);
    if (inserted) {
      const Eigen::MatrixXd block = node_block(i);
      it->second = static_cast<int>(block_diags_.size());
      block_diags_.push_back(block.diagonal());
      if (!fallback) {
        if ((block_lu_.size() + 1) * static_cast<std::size_t>(nb) * nb * sizeof(double) >
            kBlockMemoryLimit) {
          fallback = true;
          block_lu_.clear();
        } else {
          block_lu_.emplace_back(block);
        }
      }
    }
    node_block_id_[i] = it->second;
    for (int a = 0; a < nb; ++a) diag_[offsets_[i] + a] = block_diags_[it->second][a];
  }
  if (fallback) block_lu_.clear();

  element_faces_.assign(mesh_->num_elements(), {-1, -1, -1});
  for (int fi = 0; fi < static_cast<int>(mesh_->faces().size()); ++fi) {
    const DgMesh::Face& f = mesh_->faces()[fi];
    element_faces_[f.elem][f.local] = fi;
    if (!f.boundary()) element_faces_[f.nbr][(f.nbr_b + 1) % 3 == f.nbr_a ? f.nbr_b : f.nbr_a] = fi;
  }
  std::map<std::vector<double>, int> seen_elements;
  element_block_id_.assign(mesh_->num_elements(), -1);
  for (int e = 0; e < mesh_->num_elements(); ++e) {
    const DgMesh::Element& el = mesh_->element(e);
    std::vector<double> key{el.material.sigma_t, el.material.sigma_s, el.area};
    key.insert(key.end(), el.gx.begin(), el.gx.end());
    key.insert(key.end(), el.gy.begin(), el.gy.end());
    for (const auto& edge : edges_[e]) key.insert(key.end(), edge.begin(), edge.end());
    auto [it, inserted] = seen_elements.emplace(std::move(key), static_cast<int>(element_lu_.size()));
    if (inserted) element_lu_.emplace_back(element_block(e));
    element_block_id_[e] = it->second;
  }
}

FpnTransport::~FpnTransport() = default;

Eigen::SparseMatrix<double> FpnTransport::assemble() const {
  const int nc = static_cast<int>(basis_.size());
  const Eigen::MatrixXd& mx = mx_;
  const Eigen::MatrixXd& my = my_;
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(nc, nc);
  std::vector<Eigen::Triplet<double>> triplets;
  auto add = [&](int row_node, int col_node, const Eigen::MatrixXd& blk) {
    for (int a = 0; a < nc; ++a)
      for (int b = 0; b < nc; ++b)
        if (blk(a, b) != 0.0) triplets.emplace_back(row_node * nc + a, col_node * nc + b, blk(a, b));
  };
  for (int e = 0; e < mesh_->num_elements(); ++e) {
    const DgMesh::Element& el = mesh_->element(e);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        const double m = mass(el.area, i == j);
        Eigen::MatrixXd blk = el.area / 3.0 * (el.gx[j] * mx + el.gy[j] * my);
        for (int a = 0; a < nc; ++a) {
          blk(a, a) += m * (el.material.sigma_t + filter_[a]);
          if (basis_[a] == 0) blk(a, a) -= m * el.material.sigma_s;
        }
        add(3 * e + i, 3 * e + j, blk);
      }
    }
  }
  for (const DgMesh::Face& f : mesh_->faces()) {
    const Eigen::MatrixXd n = f.nx * mx + f.ny * my;
    const std::array<int, 2> own{3 * f.elem + f.local, 3 * f.elem + (f.local + 1) % 3};
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        const double mf = face_mass(f.length, a == b);
        add(own[a], own[b], -0.5 * mf * (n - identity));
        if (f.boundary()) continue;
        const std::array<int, 2> other{3 * f.nbr + f.nbr_a, 3 * f.nbr + f.nbr_b};
        add(own[a], other[b], 0.5 * mf * (n - identity));
        add(other[a], own[b], -0.5 * mf * (n + identity));
        add(other[a], other[b], 0.5 * mf * (n + identity));
      }
    }
  }
  const int rows = mesh_->num_nodes() * nc;
  Eigen::SparseMatrix<double> m(rows, rows);
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

Eigen::MatrixXd FpnTransport::element_block(int e) const {
  const int nb = static_cast<int>(basis_.size());
  const DgMesh::Element& el = mesh_->element(e);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(3 * nb, 3 * nb);
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(nb, nb);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      auto blk = b.block(i * nb, j * nb, nb, nb);
      const double m = mass(el.area, i == j);
      blk = el.area / 3.0 * (el.gx[j] * mx_ + el.gy[j] * my_);
      for (int a = 0; a < nb; ++a) blk(a, a) += m * (el.material.sigma_t + filter_[a]);
      blk(0, 0) -= m * el.material.sigma_s;
    }
  }
  for (int k = 0; k < 3; ++k) {
    const auto& [nx, ny, length] = edges_[e][k];
    const Eigen::MatrixXd g = nx * mx_ + ny * my_ - identity;
    for (const int i : {k, (k + 1) % 3})
      for (const int j : {k, (k + 1) % 3})
        b.block(i * nb, j * nb, nb, nb) -= 0.5 * face_mass(length, i == j) * g;
  }
  return b;
}

void FpnTransport::element_apply(int e, std::span<const double> z, Eigen::VectorXd& out,
                                 Mode mode) const {
  using Vec = Eigen::VectorXd;
  const int nb = static_cast<int>(basis_.size());
  const DgMesh::Element& el = mesh_->element(e);
  auto in = [&](int node) { return Eigen::Map<const Vec>(z.data() + offsets_[node], nb); };
  out.setZero(3 * nb);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double m = mass(el.area, i == j);
      const auto xj = in(3 * e + j);
      out.segment(i * nb, nb).array() += m * (el.material.sigma_t + filter_.array()) * xj.array();
      out[i * nb] -= m * el.material.sigma_s * xj[0];
    }
  }
  Vec u = Vec::Zero(nb), v = Vec::Zero(nb);
  if (mode == Mode::forward) {
    for (int j = 0; j < 3; ++j) {
      u += el.gx[j] * in(3 * e + j);
      v += el.gy[j] * in(3 * e + j);
    }
    const Vec s = mxs_ * u + mys_ * v;
    for (int i = 0; i < 3; ++i) out.segment(i * nb, nb) += el.area / 3.0 * s;
  } else {
    const Vec s = in(3 * e) + in(3 * e + 1) + in(3 * e + 2);
    u = mxs_ * s;
    v = mys_ * s;
    for (int j = 0; j < 3; ++j) out.segment(j * nb, nb) += el.area / 3.0 * (el.gx[j] * u + el.gy[j] * v);
  }
  for (int k = 0; k < 3; ++k) {
    const DgMesh::Face& f = mesh_->faces()[element_faces_[e][k]];
    const auto& [nx, ny, length] = edges_[e][k];
    const std::array<int, 2> local{k, (k + 1) % 3};
    // Neighbour local index of the vertex shared with local[a].
    std::array<int, 2> other{-1, -1};
    if (!f.boundary()) {
      const bool first = f.elem == e;
      const DgMesh::Element& nel = mesh_->element(first ? f.nbr : f.elem);
      for (int a = 0; a < 2; ++a)
        for (int j = 0; j < 3; ++j)
          if (nel.vertex[j] == el.vertex[local[a]]) other[a] = 3 * (first ? f.nbr : f.elem) + j;
    }
    for (int a = 0; a < 2; ++a) {
      Vec own_sum = Vec::Zero(nb), other_sum = Vec::Zero(nb);
      for (int b = 0; b < 2; ++b) {
        const double mf = face_mass(length, a == b);
        own_sum += mf * in(3 * e + local[b]);
        if (other[b] >= 0) other_sum += mf * in(other[b]);
      }
      auto row = out.segment(local[a] * nb, nb);
      if (mode == Mode::forward) {
        const Vec d = other_sum - own_sum;
        row += 0.5 * (nx * (mxs_ * d) + ny * (mys_ * d) - d);
      } else {
        row -= 0.5 * (nx * (mxs_ * own_sum) + ny * (mys_ * own_sum) - own_sum);
        row -= 0.5 * (nx * (mxs_ * other_sum) + ny * (mys_ * other_sum) + other_sum);
      }
    }
  }
}

Eigen::MatrixXd FpnTransport::node_block(int node) const {
  const int nb = static_cast<int>(basis_.size());
  const int e = node / 3, k = node % 3;
  const DgMesh::Element& el = mesh_->element(e);
  Eigen::MatrixXd b = el.area / 3.0 * (el.gx[k] * mx_ + el.gy[k] * my_);
  const double m = mass(el.area, true);
  for (int a = 0; a < nb; ++a) b(a, a) += m * (el.material.sigma_t + filter_[a]);
  b(0, 0) -= m * el.material.sigma_s;
  for (const int edge : {k, (k + 2) % 3}) {
    const auto& [nx, ny, length] = edges_[e][edge];
    b -= 0.5 * face_mass(length, true) * (nx * mx_ + ny * my_ - Eigen::MatrixXd::Identity(nb, nb));
  }
  return b;
}

std::vector<double> FpnTransport::node_coefficients(std::span<const double> x, int node) const {
  std::vector<double> out(harmonic_count(config_.order), 0.0);
  for (std::size_t a = 0; a < basis_.size(); ++a) out[basis_[a]] = x[offsets_[node] + a];
  return out;
}

void FpnTransport::apply(std::span<const double> x, std::span<double> y, Mode mode) const {
  check_size(x, "FpnTransport::apply");
  check_size(y, "FpnTransport::apply");
  using Vec = Eigen::VectorXd;
  using CMap = Eigen::Map<const Vec>;
  using MapV = Eigen::Map<Vec>;
  const int nb = static_cast<int>(basis_.size());
  std::fill(y.begin(), y.end(), 0.0);
  auto in = [&](int node) { return CMap(x.data() + offsets_[node], nb); };
  auto out = [&](int node) { return MapV(y.data() + offsets_[node], nb); };

  Vec u(nb), v(nb), s(nb);
  for (int e = 0; e < mesh_->num_elements(); ++e) {
    const DgMesh::Element& el = mesh_->element(e);
    const double st = el.material.sigma_t, ss = el.material.sigma_s;
    for (int i = 0; i < 3; ++i) {
      auto yi = out(3 * e + i);
      for (int j = 0; j < 3; ++j) {
        const double m = mass(el.area, i == j);
        const auto xj = in(3 * e + j);
        yi.array() += m * (st + filter_.array()) * xj.array();
        yi[0] -= m * ss * xj[0];
      }
    }
    if (mode == Mode::forward) {
      u.setZero();
      v.setZero();
      for (int j = 0; j < 3; ++j) {
        u += el.gx[j] * in(3 * e + j);
        v += el.gy[j] * in(3 * e + j);
      }
      s.noalias() = mxs_ * u;
      s.noalias() += mys_ * v;
      for (int i = 0; i < 3; ++i) out(3 * e + i) += el.area / 3.0 * s;
    } else {
      s = in(3 * e) + in(3 * e + 1) + in(3 * e + 2);
      u.noalias() = mxs_ * s;
      v.noalias() = mys_ * s;
      for (int j = 0; j < 3; ++j) out(3 * e + j) += el.area / 3.0 * (el.gx[j] * u + el.gy[j] * v);
    }
  }

  std::array<Vec, 2> d{Vec(nb), Vec(nb)}, dm{Vec(nb), Vec(nb)}, t{Vec(nb), Vec(nb)};
  for (const DgMesh::Face& f : mesh_->faces()) {
    const std::array<int, 2> own{3 * f.elem + f.local, 3 * f.elem + (f.local + 1) % 3};
    std::array<int, 2> other{-1, -1};
    if (!f.boundary()) other = {3 * f.nbr + f.nbr_a, 3 * f.nbr + f.nbr_b};
    if (mode == Mode::forward) {
      for (int a = 0; a < 2; ++a) {
        d[a] = -in(own[a]);
        if (!f.boundary()) d[a] += in(other[a]);
      }
      for (int a = 0; a < 2; ++a) {
        dm[a] = face_mass(f.length, true) * d[a] + face_mass(f.length, false) * d[1 - a];
        t[a].noalias() = f.nx * (mxs_ * dm[a]);
        t[a].noalias() += f.ny * (mys_ * dm[a]);
      }
      for (int a = 0; a < 2; ++a) {
        out(own[a]) += 0.5 * (t[a] - dm[a]);
        if (!f.boundary()) out(other[a]) += 0.5 * (t[a] + dm[a]);
      }
    } else {
      for (int a = 0; a < 2; ++a) {
        d[a] = in(own[a]);
        dm[a] = in(own[a]);
        if (!f.boundary()) {
          d[a] += in(other[a]);
          dm[a] -= in(other[a]);
        }
        t[a].noalias() = f.nx * (mxs_ * d[a]);
        t[a].noalias() += f.ny * (mys_ * d[a]);
        t[a] = 0.5 * (t[a] - dm[a]);
      }
      for (int a = 0; a < 2; ++a) {
        const Vec h = face_mass(f.length, true) * t[a] + face_mass(f.length, false) * t[1 - a];
        out(own[a]) -= h;
        if (!f.boundary()) out(other[a]) += h;
      }
    }
  }
}

void FpnTransport::sweep(std::span<const double> r, std::span<double> z, Mode mode) const {
  const int nb = static_cast<int>(basis_.size());
  Eigen::VectorXd local;
  auto update = [&](int e) {
    element_apply(e, z, local, mode);
    Eigen::Map<Eigen::VectorXd> ze(z.data() + offsets_[3 * e], 3 * nb);
    local = Eigen::Map<const Eigen::VectorXd>(r.data() + offsets_[3 * e], 3 * nb) - local;
    ze += element_lu_[element_block_id_[e]].solve(local, mode);
  };
  for (int e = 0; e < mesh_->num_elements(); ++e) update(e);
  for (int e = mesh_->num_elements() - 1; e >= 0; --e) update(e);
}

void FpnTransport::precondition(std::span<const double> r, std::span<double> z, Mode mode) const {
  check_size(r, "FpnTransport::precondition");
  check_size(z, "FpnTransport::precondition");
  const int nb = static_cast<int>(basis_.size());
  if (preconditioner_ == Preconditioner::direct) {
    if (!direct_lu_) {
      Eigen::SparseMatrix<double> a = assemble();
      a.makeCompressed();
      direct_lu_ = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
      direct_lu_->compute(a);
      if (direct_lu_->info() != Eigen::Success)
        throw SolverError("FpnTransport: sparse factorisation failed", 0.0, 0);
    }
    Eigen::Map<const Eigen::VectorXd> rv(r.data(), r.size());
    Eigen::Map<Eigen::VectorXd> zv(z.data(), z.size());
    if (mode == Mode::forward)
      zv = direct_lu_->solve(rv);
    else
      zv = direct_lu_->transpose().solve(rv);
    return;
  }
  if (preconditioner_ == Preconditioner::gauss_seidel) {
    std::fill(z.begin(), z.end(), 0.0);
    sweep(r, z, mode);
    return;
  }
  for (int i = 0; i < mesh_->num_nodes(); ++i) {
    Eigen::Map<const Eigen::VectorXd> ri(r.data() + offsets_[i], nb);
    Eigen::Map<Eigen::VectorXd> zi(z.data() + offsets_[i], nb);
    const int id = node_block_id_[i];
    if (block_lu_.empty()) {
      zi = ri.array() / Eigen::Map<const Eigen::ArrayXd>(diag_.data() + offsets_[i], nb);
    } else {
      zi = block_lu_[id].solve(ri, mode);
    }
  }
}

std::vector<double> FpnTransport::diagonal() const { return diag_; }

std::vector<double> FpnTransport::isotropic_load(const std::function<double(int)>& density) const {
  std::vector<double> b(size(), 0.0);
  const double y00_integral = std::sqrt(kFourPi);
  for (int e = 0; e < mesh_->num_elements(); ++e) {
    const DgMesh::Element& el = mesh_->element(e);
    const double c = density(el.region);
    for (int i = 0; i < 3; ++i) b[offsets_[3 * e + i]] = c * el.area / 3.0 * y00_integral;
  }
  return b;
}

std::vector<double> FpnTransport::scalar_flux(std::span<const double> x) const {
  check_size(x, "FpnTransport::scalar_flux");
  std::vector<double> phi(mesh_->num_nodes());
  for (int i = 0; i < mesh_->num_nodes(); ++i) phi[i] = std::sqrt(kFourPi) * x[offsets_[i]];
  return phi;
}

}  // namespace angadapt
