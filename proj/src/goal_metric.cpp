#include "angadapt/goal_metric.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "angadapt/errors.hpp"

namespace angadapt {

namespace {

void require_same(std::size_t a, std::size_t b, const char* what) {
  if (a != b)
    throw StructuralError(std::string(what) + ": fields of length " + std::to_string(a) + " and " +
                          std::to_string(b));
}

}  // namespace

std::vector<double> reduced_residual(const TransportOperator& op, std::span<const double> field) {
  require_same(op.size(), field.size(), "reduced_residual");
  return reduced_residual(op.diagonal(), field);
}

std::vector<double> reduced_residual(std::span<const double> diagonal,
                                     std::span<const double> field) {
  require_same(diagonal.size(), field.size(), "reduced_residual");
  std::vector<double> r(field.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = diagonal[i] * field[i];
  return r;
}

MetricField error_metric(std::span<const double> psi, std::span<const double> psi_adj,
                         std::span<const double> residual, std::span<const double> residual_adj,
                         double ndof, double tau) {
  if (!(tau > 0.0)) throw DomainError("error_metric: tau must be positive");
  require_same(psi.size(), psi_adj.size(), "error_metric");
  require_same(psi.size(), residual.size(), "error_metric");
  require_same(psi.size(), residual_adj.size(), "error_metric");
  MetricField m;
  m.ndof = ndof;
  m.tau = tau;
  m.values.resize(psi.size());
  const double scale = ndof / tau;
  for (std::size_t i = 0; i < psi.size(); ++i)
    m.values[i] = std::max(std::abs(psi[i] * residual_adj[i]), std::abs(psi_adj[i] * residual[i])) * scale;
  return m;
}

double error_estimate(std::span<const double> eps, std::span<const double> residual) {
  require_same(eps.size(), residual.size(), "error_estimate");
  double s = 0.0;
  for (std::size_t i = 0; i < eps.size(); ++i) s += eps[i] * residual[i];
  return s;
}

std::optional<double> effectivity_index(double estimate, double true_error, double floor) {
  if (!(std::abs(true_error) >= floor)) return std::nullopt;
  return std::abs(estimate) / std::abs(true_error);
}

}  // namespace angadapt
