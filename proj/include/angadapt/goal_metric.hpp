#pragma once

#include <optional>
#include <span>
#include <vector>

#include "angadapt/transport.hpp"

namespace angadapt {

/// Per-coefficient refinement indicator e, normalised so that e > 1 asks
/// for refinement.
struct MetricField {
  std::vector<double> values;
  double ndof = 0.0;
  double tau = 0.0;
};

/// Cheap residual surrogate: the operator diagonal times the field, with no
/// sources. The diagonal is shared by A and A^T, so the same call serves
/// forward and adjoint fields.
std::vector<double> reduced_residual(const TransportOperator& op, std::span<const double> field);
std::vector<double> reduced_residual(std::span<const double> diagonal,
                                     std::span<const double> field);

/// e_i = max(|psi_i R*_i|, |psi*_i R_i|) * ndof / tau.
MetricField error_metric(std::span<const double> psi, std::span<const double> psi_adj,
                         std::span<const double> residual, std::span<const double> residual_adj,
                         double ndof, double tau);

/// sum_i eps_i R_i.
double error_estimate(std::span<const double> eps, std::span<const double> residual);

inline constexpr double kTrueErrorFloor = 1e-300;

/// |estimate| / |true_error|; empty when the true error is below the floor.
std::optional<double> effectivity_index(double estimate, double true_error,
                                        double floor = kTrueErrorFloor);

}  // namespace angadapt
