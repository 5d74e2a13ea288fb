#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "angadapt/errors.hpp"
#include "angadapt/transport.hpp"

namespace angadapt {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

namespace {

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

}  // namespace

SolveResult solve(const TransportOperator& op, std::span<const double> rhs, Mode mode,
                  const SolveOptions& options) {
  if (!(options.abs_tol > 0.0) || !(options.rel_tol > 0.0))
    throw DomainError("solve: tolerances must be positive");
  if (options.restart < 1 || options.max_iterations < 1)
    throw DomainError("solve: restart and max_iterations must be positive");
  const std::size_t n = op.size();
  if (rhs.size() != n)
    throw StructuralError("solve: right-hand side has " + std::to_string(rhs.size()) +
                          " entries, operator has " + std::to_string(n));

  SolveResult result;
  result.x.assign(n, 0.0);
  const double target = std::max(options.abs_tol, options.rel_tol * norm(rhs));
  const int m = options.restart;

  std::vector<double> r(rhs.begin(), rhs.end());
  std::vector<double> w(n), z(n);
  std::vector<std::vector<double>> basis;
  std::vector<double> h((m + 1) * m), cs(m), sn(m), g(m + 1), y(m);
  auto H = [&](int i, int j) -> double& { return h[i * m + j]; };

  double beta = norm(r);
  result.residual = beta;
  while (beta > target) {
    if (result.iterations >= options.max_iterations)
      throw SolverError("solve: no convergence after " + std::to_string(result.iterations) +
                            " iterations (residual " + sci(beta) + ", target " +
                            sci(target) + ")",
                        beta, result.iterations);
    if (basis.empty()) basis.emplace_back(n);
    for (std::size_t i = 0; i < n; ++i) basis[0][i] = r[i] / beta;
    std::fill(g.begin(), g.end(), 0.0);
    g[0] = beta;
    int k = 0;
    while (k < m && result.iterations < options.max_iterations) {
      if (options.deadline && std::chrono::steady_clock::now() > *options.deadline)
        throw SolverError("solve: wall-clock limit reached after " +
                              std::to_string(result.iterations) + " iterations (residual " +
                              sci(std::abs(g[k])) + ", target " + sci(target) + ")",
                          std::abs(g[k]), result.iterations);
      op.precondition(basis[k], z, mode);
      op.apply(z, w, mode);
      for (int i = 0; i <= k; ++i) {
        const double hik = dot(w, basis[i]);
        H(i, k) = hik;
        for (std::size_t q = 0; q < n; ++q) w[q] -= hik * basis[i][q];
      }
      const double hk1 = norm(w);
      for (int i = 0; i < k; ++i) {
        const double t = cs[i] * H(i, k) + sn[i] * H(i + 1, k);
        H(i + 1, k) = -sn[i] * H(i, k) + cs[i] * H(i + 1, k);
        H(i, k) = t;
      }
      const double denom = std::hypot(H(k, k), hk1);
      cs[k] = denom > 0.0 ? H(k, k) / denom : 1.0;
      sn[k] = denom > 0.0 ? hk1 / denom : 0.0;
      H(k, k) = denom;
      H(k + 1, k) = 0.0;
      g[k + 1] = -sn[k] * g[k];
      g[k] = cs[k] * g[k];
      ++k;
      ++result.iterations;
      if (std::abs(g[k]) <= target || hk1 == 0.0) break;
      if (static_cast<int>(basis.size()) <= k) basis.emplace_back(n);
      for (std::size_t q = 0; q < n; ++q) basis[k][q] = w[q] / hk1;
    }
    for (int i = k - 1; i >= 0; --i) {
      double s = g[i];
      for (int j = i + 1; j < k; ++j) s -= H(i, j) * y[j];
      y[i] = H(i, i) != 0.0 ? s / H(i, i) : 0.0;
    }
    std::fill(w.begin(), w.end(), 0.0);
    for (int i = 0; i < k; ++i)
      for (std::size_t q = 0; q < n; ++q) w[q] += y[i] * basis[i][q];
    op.precondition(w, z, mode);
    for (std::size_t q = 0; q < n; ++q) result.x[q] += z[q];
    op.apply(result.x, w, mode);
    for (std::size_t q = 0; q < n; ++q) r[q] = rhs[q] - w[q];
    beta = norm(r);
    result.residual = beta;
  }
  return result;
}

std::vector<double> forward_source(const TransportOperator& op) {
  const auto& regions = op.mesh().mesh().regions;
  return op.isotropic_load([&](int region) { return regions.at(region).source / kFourPi; });
}

std::vector<double> adjoint_source(const TransportOperator& op, int goal_region) {
  const double volume = op.mesh().region_volume(goal_region);
  if (!(volume > 0.0))
    throw DomainError("adjoint_source: region " + std::to_string(goal_region) + " has no volume");
  return op.isotropic_load([&](int region) { return region == goal_region ? 1.0 / volume : 0.0; });
}

double functional(const TransportOperator& op, std::span<const double> x, int goal_region) {
  const double volume = op.mesh().region_volume(goal_region);
  if (!(volume > 0.0))
    throw DomainError("functional: region " + std::to_string(goal_region) + " has no volume");
  const std::vector<double> phi = op.scalar_flux(x);
  double sum = 0.0;
  for (int e = 0; e < op.mesh().num_elements(); ++e) {
    const DgMesh::Element& el = op.mesh().element(e);
    if (el.region != goal_region) continue;
    sum += el.area / 3.0 * (phi[3 * e] + phi[3 * e + 1] + phi[3 * e + 2]);
  }
  return sum / volume;
}

}  // namespace angadapt
