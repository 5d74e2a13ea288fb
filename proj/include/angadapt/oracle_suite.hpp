#pragma once

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "angadapt/sphere_grid.hpp"
#include "angadapt/transport.hpp"

namespace angadapt::oracle {

/// Size limits for dense assembly.
inline constexpr int kMaxDenseElements = 20;
inline constexpr int kMaxDenseHaarLevel = 2;
inline constexpr int kMaxDenseFpnOrder = 3;

/// Explicit matrix of the operator (or its transpose in adjoint mode), built
/// column by column from unit vectors. Refuses problems over the size limits
/// with DomainError.
Eigen::MatrixXd dense_assemble(const TransportOperator& op, Mode mode = Mode::forward);

/// Points per direction of the production-resolution reference rule.
inline constexpr int kBaseResolution = 16;

/// Integral over the whole sphere with a Gauss rule in mu times a
/// trapezoidal rule in phi, each with multiplier * kBaseResolution points.
double quad_oracle(const std::function<double(const Direction&)>& f, int multiplier = 10);

/// Integral over one patch with a product Gauss rule in azimuth and polar angle.
double quad_oracle(const std::function<double(const Direction&)>& f, const SpherePatch& patch,
                   int multiplier = 10);

/// Gram matrix int Y_a Y_b of the real harmonics up to `order`, by the
/// whole-sphere reference rule.
Eigen::MatrixXd gram(int order, int multiplier = 10);

/// int Y_a Omega_k Y_b by the whole-sphere reference rule.
Eigen::MatrixXd moment(int order, Axis k, int multiplier = 10);

/// Least-squares slope of log(times) against log(sizes).
double scaling_fit(std::span<const double> sizes, std::span<const double> times);

/// sigma_f * -ln(sin(eta) / eta) with eta = l / (order + 1), evaluated in
/// long double.
double filter_reference(int l, int order, double sigma_f);

}  // namespace angadapt::oracle
