#include <doctest.h>

#include <cmath>
#include <random>

#include "angadapt/errors.hpp"
#include "angadapt/goal_metric.hpp"
#include "angadapt/oracle_suite.hpp"

using namespace angadapt;

namespace {

std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

std::shared_ptr<DgMesh> tiny() {
  TriMesh m = generate_block(2, 2, 0.5);
  m.regions[duct_region::kSource] = {0.6, 0.2, 1.0};
  return std::make_shared<DgMesh>(std::move(m));
}

}  // namespace

TEST_CASE("reduced residual is the operator diagonal") {
  std::mt19937_64 rng(1);
  const auto mesh = tiny();
  const HaarTransport op(mesh, std::vector<TreePtr>(mesh->num_nodes(), AngleTree::uniform(1)));
  const Eigen::MatrixXd a = oracle::dense_assemble(op);
  for (double v : reduced_residual(op, std::vector<double>(op.size(), 0.0))) CHECK(v == 0.0);
  for (int i = 0; i < static_cast<int>(op.size()); i += 37) {
    std::vector<double> unit(op.size(), 0.0);
    unit[i] = 1.0;
    const std::vector<double> r = reduced_residual(op, unit);
    CHECK(std::abs(r[i] - a(i, i)) <= 1e-13);
  }
  const std::vector<double> x = random_vector(op.size(), rng), y = random_vector(op.size(), rng);
  std::vector<double> xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) xy[i] = x[i] - 3.0 * y[i];
  const std::vector<double> rx = reduced_residual(op, x), ry = reduced_residual(op, y), rxy = reduced_residual(op, xy);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(rxy[i] - (rx[i] - 3.0 * ry[i])) <= 1e-13);
}

TEST_CASE("metric arithmetic") {
  const std::vector<double> psi{2.0}, psi_adj{1.0}, r{4.0}, r_adj{3.0};
  const MetricField e = error_metric(psi, psi_adj, r, r_adj, 10.0, 0.5);
  CHECK(e.values[0] == doctest::Approx(120.0));
  const MetricField swapped = error_metric(psi_adj, psi, r_adj, r, 10.0, 0.5);
  CHECK(swapped.values[0] == e.values[0]);
  const std::vector<double> zero{0.0};
  CHECK(error_metric(zero, zero, r, r_adj, 10.0, 0.5).values[0] == 0.0);
  CHECK_THROWS_AS(error_metric(psi, psi_adj, r, r_adj, 10.0, 0.0), DomainError);
  CHECK_THROWS_AS(error_metric(psi, psi_adj, r, r_adj, 10.0, -1.0), DomainError);
}

TEST_CASE("metric symmetries and scaling") {
  std::mt19937_64 rng(2);
  const std::size_t n = 50;
  const std::vector<double> p = random_vector(n, rng), pa = random_vector(n, rng);
  const std::vector<double> r = random_vector(n, rng), ra = random_vector(n, rng);
  std::vector<double> np(n), npa(n);
  for (std::size_t i = 0; i < n; ++i) np[i] = -p[i], npa[i] = -pa[i];
  const MetricField e = error_metric(p, pa, r, ra, 100.0, 1e-3);
  const MetricField flipped = error_metric(np, npa, r, ra, 100.0, 1e-3);
  const MetricField scaled = error_metric(p, pa, r, ra, 300.0, 0.5e-3);
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(e.values[i] >= 0.0);
    CHECK(flipped.values[i] == e.values[i]);
    CHECK(scaled.values[i] == doctest::Approx(6.0 * e.values[i]).epsilon(1e-14));
  }
}

TEST_CASE("error estimate") {
  std::mt19937_64 rng(3);
  const std::vector<double> a = random_vector(40, rng), b = random_vector(40, rng);
  CHECK(error_estimate(std::vector<double>(40, 0.0), b) == 0.0);
  std::vector<double> a2(a);
  for (double& x : a2) x *= 2.5;
  CHECK(error_estimate(a2, b) == doctest::Approx(2.5 * error_estimate(a, b)).epsilon(1e-14));

  const auto mesh = tiny();
  const HaarTransport op(mesh, std::vector<TreePtr>(mesh->num_nodes(), AngleTree::uniform(1)));
  const Eigen::MatrixXd dense = oracle::dense_assemble(op);
  const std::vector<double> psi = random_vector(op.size(), rng), psi_adj = random_vector(op.size(), rng);
  const double est = error_estimate(psi, reduced_residual(op, psi_adj));
  const Eigen::Map<const Eigen::VectorXd> p(psi.data(), psi.size()), pa(psi_adj.data(), psi_adj.size());
  const double ref = p.dot(dense.diagonal().asDiagonal() * pa);
  CHECK(std::abs(est - ref) <= 1e-12 * std::max(1.0, std::abs(ref)));
}

TEST_CASE("effectivity index") {
  CHECK(effectivity_index(0.3, 0.3).value() == 1.0);
  CHECK(effectivity_index(-0.6, 0.3).value() == 2.0);
  CHECK_FALSE(effectivity_index(1.0, 0.0).has_value());
  CHECK_FALSE(effectivity_index(1.0, 1e-301).has_value());
  CHECK(effectivity_index(1.0, 1e-299).has_value());
}

TEST_CASE("non-robust metric vanishes where both solutions vanish") {
  std::mt19937_64 rng(4);
  std::vector<double> p = random_vector(20, rng), pa = random_vector(20, rng);
  for (int i = 5; i < 10; ++i) p[i] = pa[i] = 0.0;
  const MetricField e = error_metric(p, pa, random_vector(20, rng), random_vector(20, rng), 20.0, 1e-3);
  for (int i = 5; i < 10; ++i) CHECK(e.values[i] == 0.0);
}
