#include <doctest.h>

#include <cmath>
#include <random>

#include "angadapt/errors.hpp"
#include "angadapt/oracle_suite.hpp"
#include "angadapt/transport.hpp"

using namespace angadapt;

namespace {

std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

std::shared_ptr<DgMesh> block_mesh(Material source, Material detector) {
  TriMesh m = generate_block(2, 2, 0.5);
  m.regions[duct_region::kSource] = source;
  m.regions[duct_region::kDetector] = detector;
  return std::make_shared<DgMesh>(std::move(m));
}

std::vector<TreePtr> mixed_trees(int nodes) {
  const TreePtr a = AngleTree::uniform(1);
  std::vector<PatchKey> keys = a->subdivided();
  const PatchKey k = child_key(patch_key(base_octant(1)), 3);
  keys.push_back(k);
  keys.push_back(mirror_key(k));
  const TreePtr b = AngleTree::build(keys);
  const TreePtr c = AngleTree::base();
  const TreePtr d = AngleTree::uniform(2);
  std::vector<TreePtr> trees;
  for (int i = 0; i < nodes; ++i) trees.push_back(std::array{a, b, c, d}[i % 4]);
  return trees;
}

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

void check_against_dense(const TransportOperator& op, std::mt19937_64& rng) {
  const Eigen::MatrixXd a = oracle::dense_assemble(op, Mode::forward);
  const Eigen::MatrixXd at = oracle::dense_assemble(op, Mode::adjoint);
  const double scale = std::max(1.0, max_abs(a));
  CHECK(max_abs(a.transpose() - at) <= 1e-12 * scale);
  for (int s = 0; s < 3; ++s) {
    const std::vector<double> x = random_vector(op.size(), rng);
    const Eigen::VectorXd ref = a * Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
    const std::vector<double> y = op.apply(x, Mode::forward);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::abs(y[i] - ref[i]) <= 1e-12 * scale);
    const std::vector<double> v = random_vector(op.size(), rng);
    const double lhs = dot(op.apply(x, Mode::forward), v);
    const double rhs = dot(x, op.apply(v, Mode::adjoint));
    CHECK(std::abs(lhs - rhs) <= 1e-12 * scale * static_cast<double>(op.size()));
  }
  const std::vector<double> diag = op.diagonal();
  for (int i = 0; i < a.rows(); ++i) CHECK(std::abs(diag[i] - a(i, i)) <= 1e-12 * scale);
}

// Leaf values of node `node` over all eight octants.
std::vector<double> node_leaves(const HaarTransport& op, const std::vector<double>& x, int node) {
  return mallat_inverse(op.to_maps(x, kMaxPatchLevel)[node]);
}

}  // namespace

TEST_CASE("zero in, zero out and linearity") {
  std::mt19937_64 rng(1);
  const auto mesh = block_mesh({0.7, 0.3, 1.0}, {1.2, 0.5, 0.0});
  const HaarTransport haar(mesh, mixed_trees(mesh->num_nodes()));
  const FpnTransport fpn(mesh, FpnConfig{3, 0.5});
  for (const TransportOperator* op : {static_cast<const TransportOperator*>(&haar),
                                      static_cast<const TransportOperator*>(&fpn)}) {
    for (double v : op->apply(std::vector<double>(op->size(), 0.0), Mode::forward)) CHECK(v == 0.0);
    const std::vector<double> a = random_vector(op->size(), rng), b = random_vector(op->size(), rng);
    std::vector<double> ab(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) ab[i] = 1.5 * a[i] - 2.0 * b[i];
    const std::vector<double> ya = op->apply(a, Mode::forward), yb = op->apply(b, Mode::forward);
    const std::vector<double> yab = op->apply(ab, Mode::forward);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(yab[i] - (1.5 * ya[i] - 2.0 * yb[i])) <= 1e-12);
  }
  CHECK_THROWS_AS(haar.apply(std::vector<double>(3, 0.0), Mode::forward), StructuralError);
}

TEST_CASE("Haar operator matches the dense oracle") {
  std::mt19937_64 rng(2);
  const auto mesh = block_mesh({0.7, 0.3, 1.0}, {1.2, 0.5, 0.0});
  check_against_dense(HaarTransport(mesh, mixed_trees(mesh->num_nodes())), rng);
  check_against_dense(HaarTransport(mesh, mixed_trees(mesh->num_nodes()), AngularDomain{false}), rng);
}

TEST_CASE("FP_n operator matches the dense oracle") {
  std::mt19937_64 rng(3);
  const auto mesh = block_mesh({0.7, 0.3, 1.0}, {1.2, 0.5, 0.0});
  for (int order : {0, 1, 3}) {
    check_against_dense(FpnTransport(mesh, FpnConfig{order, 0.8}), rng);
    check_against_dense(FpnTransport(mesh, FpnConfig{order, 0.8}, AngularDomain{false}), rng);
  }
  const FpnTransport op(mesh, FpnConfig{3, 0.8});
  const Eigen::MatrixXd sparse = Eigen::MatrixXd(op.assemble());
  CHECK(max_abs(sparse - oracle::dense_assemble(op, Mode::forward)) <= 1e-12);
}

TEST_CASE("dense oracle refuses large problems") {
  const auto big = std::make_shared<DgMesh>(generate_duct(2, 1, 0.5));
  CHECK_THROWS_AS(oracle::dense_assemble(HaarTransport(big, std::vector<TreePtr>(big->num_nodes(), AngleTree::base()))),
                  DomainError);
  const auto mesh = block_mesh({0.7, 0.3, 1.0}, {1.2, 0.5, 0.0});
  CHECK_THROWS_AS(oracle::dense_assemble(HaarTransport(mesh, std::vector<TreePtr>(mesh->num_nodes(), AngleTree::uniform(3)))),
                  DomainError);
  CHECK_THROWS_AS(oracle::dense_assemble(FpnTransport(mesh, FpnConfig{4, 0.0})), DomainError);
}

TEST_CASE("solve recovers a known field") {
  std::mt19937_64 rng(4);
  const auto mesh = std::make_shared<DgMesh>(generate_duct(2, 1, 0.5));
  SolveOptions opts;
  opts.abs_tol = opts.rel_tol = 1e-13;
  const HaarTransport haar(mesh, std::vector<TreePtr>(mesh->num_nodes(), AngleTree::uniform(2)));
  const FpnTransport fpn(mesh, FpnConfig{3, 1.0});
  for (const TransportOperator* op : {static_cast<const TransportOperator*>(&haar),
                                      static_cast<const TransportOperator*>(&fpn)}) {
    for (Mode mode : {Mode::forward, Mode::adjoint}) {
      const std::vector<double> x = random_vector(op->size(), rng);
      const SolveResult r = solve(*op, op->apply(x, mode), mode, opts);
      double err = 0.0, norm = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        err += (r.x[i] - x[i]) * (r.x[i] - x[i]);
        norm += x[i] * x[i];
      }
      CHECK(std::sqrt(err / norm) <= 1e-8);
    }
  }
}

TEST_CASE("preconditioners give the same solution") {
  const auto mesh = std::make_shared<DgMesh>(generate_duct(2, 1, 0.5));
  FpnTransport op(mesh, FpnConfig{3, 1.0});
  const std::vector<double> q = forward_source(op);
  std::vector<std::vector<double>> sols;
  for (Preconditioner p : {Preconditioner::block_jacobi, Preconditioner::gauss_seidel, Preconditioner::direct}) {
    op.set_preconditioner(p);
    sols.push_back(solve(op, q, Mode::forward).x);
    if (p == Preconditioner::direct) CHECK(solve(op, q, Mode::forward).iterations <= 2);
  }
  for (std::size_t i = 0; i < q.size(); ++i) {
    CHECK(std::abs(sols[0][i] - sols[2][i]) <= 1e-8);
    CHECK(std::abs(sols[1][i] - sols[2][i]) <= 1e-8);
  }
}

TEST_CASE("linear manufactured solution is reproduced exactly") {
  const auto mesh = std::make_shared<DgMesh>(generate_duct(2, 1, 0.5));
  const double sigma_t = 0.8, sigma_s = 0.3;
  TriMesh tm = mesh->mesh();
  for (auto& [id, mat] : tm.regions) mat = Material{sigma_t, sigma_s, 0.0};
  const auto mat_mesh = std::make_shared<DgMesh>(tm);

  // Per-leaf linear solution, symmetric under mu -> -mu.
  auto coeffs = [](const SpherePatch& p) {
    const double t = p.phi_lo + 0.3 * std::abs(p.mu_lo + p.mu_hi);
    return std::array<double, 3>{1.0 + 0.5 * std::sin(t), 0.3 * std::cos(2 * t), -0.2 + 0.1 * t};
  };
  const TreePtr tree = AngleTree::uniform(2);
  auto psi = [&](double x, double y, const SpherePatch& p) {
    const auto c = coeffs(p);
    return c[0] + c[1] * x + c[2] * y;
  };
  auto phi = [&](double x, double y) {
    double s = 0.0;
    for (int l = 0; l < tree->num_functions(); ++l) {
      const SpherePatch p = tree->patch(tree->leaf_node(l));
      s += psi(x, y, p) * p.area();
    }
    return s;
  };
  for (const auto& m : {mesh, mat_mesh}) {
    const bool material = m == mat_mesh;
    for (bool hemisphere : {true, false}) {
      const HaarTransport op(m, std::vector<TreePtr>(m->num_nodes(), tree), AngularDomain{hemisphere});
      const auto source = [&](double x, double y, const SpherePatch& p) {
        const auto c = coeffs(p);
        double q = c[1] * patch_moment(p, Axis::x) + c[2] * patch_moment(p, Axis::y);
        if (material) q += sigma_t * p.area() * psi(x, y, p) - sigma_s / kFourPi * p.area() * phi(x, y);
        return q;
      };
      SolveOptions opts;
      opts.abs_tol = opts.rel_tol = 1e-14;
      const SolveResult r = solve(op, op.load(source, psi), Mode::forward, opts);
      double err = 0.0;
      for (int node = 0; node < m->num_nodes(); ++node) {
        const auto pos = m->node_position(node);
        const std::vector<double> leaves = node_leaves(op, r.x, node);
        for (int l = 0; l < tree->num_functions(); ++l)
          err = std::max(err, std::abs(leaves[l] - psi(pos[0], pos[1], tree->patch(tree->leaf_node(l)))));
      }
      CHECK(err <= 1e-11);
    }
  }
}

TEST_CASE("scattering medium with matched inflow gives the infinite-medium flux") {
  TriMesh tm = generate_duct(2, 1, 0.5);
  for (auto& [id, mat] : tm.regions) mat = Material{2.0, 1.0, 1.0};
  const auto mesh = std::make_shared<DgMesh>(tm);
  const HaarTransport op(mesh, std::vector<TreePtr>(mesh->num_nodes(), AngleTree::uniform(1)));
  const double psi = 1.0 / (kFourPi * (2.0 - 1.0));
  const std::vector<double> b =
      op.load([](double, double, const SpherePatch& p) { return p.area() / kFourPi; },
              [psi](double, double, const SpherePatch&) { return psi; });
  SolveOptions opts;
  opts.abs_tol = opts.rel_tol = 1e-13;
  const SolveResult r = solve(op, b, Mode::forward, opts);
  for (double f : op.scalar_flux(r.x)) CHECK(std::abs(f - 1.0) <= 1e-8);
}

TEST_CASE("functional, adjoint source and duality") {
  std::mt19937_64 rng(5);
  const auto mesh = std::make_shared<DgMesh>(generate_duct(2, 1, 0.5));
  const HaarTransport haar(mesh, std::vector<TreePtr>(mesh->num_nodes(), AngleTree::uniform(1)));
  const FpnTransport fpn(mesh, FpnConfig{3, 1.0});

  std::vector<double> one(haar.size(), 0.0);
  for (int i = 0; i < mesh->num_nodes(); ++i)
    for (int o = 0; o < 4; ++o) one[haar.block_offset(i) + haar.tree(i)->octant_offset(o)] = 1.0;
  CHECK(functional(haar, one, duct_region::kDetector) == doctest::Approx(kFourPi).epsilon(1e-13));
  CHECK(functional(haar, std::vector<double>(haar.size(), 0.0), duct_region::kDetector) == 0.0);
  CHECK_THROWS_AS(functional(haar, one, 17), DomainError);

  for (const TransportOperator* op : {static_cast<const TransportOperator*>(&haar),
                                      static_cast<const TransportOperator*>(&fpn)}) {
    const std::vector<double> qa = adjoint_source(*op, duct_region::kDetector);
    for (int i = 0; i < mesh->num_nodes(); ++i)
      if (mesh->element(i / 3).region != duct_region::kDetector)
        for (std::size_t k = 0; k < op->block_size(i); ++k) CHECK(qa[op->block_offset(i) + k] == 0.0);
    const std::vector<double> x = random_vector(op->size(), rng);
    const double f = functional(*op, x, duct_region::kDetector);
    CHECK(std::abs(f - dot(x, qa)) <= 1e-12 * std::max(1.0, std::abs(f)));

    // The gap is bounded by residual times dual solution; tight solves make it round-off.
    const std::vector<double> q = forward_source(*op);
    SolveOptions tight;
    tight.abs_tol = tight.rel_tol = 1e-13;
    const SolveResult fwd = solve(*op, q, Mode::forward, tight);
    const SolveResult adj = solve(*op, qa, Mode::adjoint, tight);
    const double ff = functional(*op, fwd.x, duct_region::kDetector);
    CHECK(ff > 0.0);
    CHECK(std::abs(ff - dot(adj.x, q)) <= 10.0 * 1e-10 * std::abs(ff));

    const SolveResult loose = solve(*op, q, Mode::forward);
    const double gap = std::abs(functional(*op, loose.x, duct_region::kDetector) - dot(adj.x, q));
    CHECK(gap <= loose.residual * std::sqrt(dot(adj.x, adj.x)) * 1.01 + 1e-15);
  }
  CHECK(dot(one, adjoint_source(haar, duct_region::kDetector)) == doctest::Approx(kFourPi).epsilon(1e-12));
}

TEST_CASE("vacuum particle balance") {
  const auto mesh = std::make_shared<DgMesh>(generate_duct(4, 1, 0.25));
  for (const TreePtr& t : {AngleTree::base(), AngleTree::uniform(2)}) {
    const HaarTransport op(mesh, std::vector<TreePtr>(mesh->num_nodes(), t));
    const SolveResult r = solve(op, forward_source(op), Mode::forward);
    CHECK(std::abs(op.boundary_outflow(r.x) - 1.0) <= 1e-9);
  }
}

TEST_CASE("full sphere and hemisphere agree for mirror-symmetric maps") {
  const auto mesh = std::make_shared<DgMesh>(generate_duct(2, 1, 0.5));
  const TreePtr t = bounded_refinement(1.2, 1.9, 0.0, 1.0, 3, true);
  const HaarTransport half(mesh, std::vector<TreePtr>(mesh->num_nodes(), t));
  const HaarTransport full(mesh, std::vector<TreePtr>(mesh->num_nodes(), t), AngularDomain{false});
  SolveOptions opts;
  opts.abs_tol = opts.rel_tol = 1e-13;
  const SolveResult a = solve(half, forward_source(half), Mode::forward, opts);
  const SolveResult b = solve(full, forward_source(full), Mode::forward, opts);
  const double fa = functional(half, a.x, duct_region::kDetector);
  const double fb = functional(full, b.x, duct_region::kDetector);
  CHECK(std::abs(fa - fb) <= 1e-11 * std::max(1.0, std::abs(fa)));
  double asym = 0.0;
  for (int node = 0; node < mesh->num_nodes(); node += 7) {
    const std::vector<double> leaves = node_leaves(full, b.x, node);
    for (int l = 0; l < t->num_functions(); ++l) {
      const PatchKey mk = mirror_key(t->node(t->leaf_node(l)).key);
      asym = std::max(asym, std::abs(leaves[l] - leaves[t->node(t->find(mk)).leaf]));
    }
  }
  CHECK(asym <= 1e-11);
}

TEST_CASE("solver failure reports the residual") {
  const auto mesh = std::make_shared<DgMesh>(generate_duct(2, 1, 0.5));
  const HaarTransport op(mesh, std::vector<TreePtr>(mesh->num_nodes(), AngleTree::uniform(2)));
  SolveOptions opts;
  opts.max_iterations = 1;
  opts.restart = 1;
  try {
    solve(op, forward_source(op), Mode::forward, opts);
    FAIL("expected SolverError");
  } catch (const SolverError& e) {
    CHECK(e.residual() > 0.0);
    CHECK(e.iterations() == 1);
  }
  SolveOptions late;
  late.deadline = std::chrono::steady_clock::now() - std::chrono::seconds(1);
  try {
    solve(op, forward_source(op), Mode::forward, late);
    FAIL("expected SolverError");
  } catch (const SolverError& e) {
    CHECK(e.iterations() == 0);
    CHECK(std::string(e.what()).find("wall-clock") != std::string::npos);
  }
  SolveOptions generous;
  generous.deadline = std::chrono::steady_clock::now() + std::chrono::hours(1);
  CHECK_NOTHROW(solve(op, forward_source(op), Mode::forward, generous));
}

TEST_CASE("FP_n hemisphere basis keeps l + m even") {
  const auto mesh = std::make_shared<DgMesh>(generate_duct(2, 1, 0.5));
  const FpnTransport op(mesh, FpnConfig{5, 0.0});
  for (int k : op.basis()) {
    const HarmonicIndex h = HarmonicIndex::from_flat(k);
    CHECK((h.l + h.m) % 2 == 0);
  }
  CHECK(op.basis().size() == 21u);
  CHECK(FpnTransport(mesh, FpnConfig{5, 0.0}, AngularDomain{false}).basis().size() == 36u);
}
