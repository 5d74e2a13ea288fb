#pragma once

#include <span>
#include <vector>

#include "angadapt/haar.hpp"
#include "angadapt/harmonics.hpp"

namespace angadapt {

/// Patch means of an FP_n expansion on the effective leaves of `tree`
/// (first `octants` octants only).
///
/// Each leaf integral separates into a closed-form azimuthal factor and a
/// polar factor integrated by Gauss-Legendre in the polar angle, where the
/// integrand is a trigonometric polynomial, so Gauss-Legendre converges
/// exponentially. `polar_points` = 0 picks max(16, 2 * order + 8) points.
std::vector<double> fpn_to_leafmeans(std::span<const double> coeffs, int order,
                                     const AngleTree& tree, int octants = 8,
                                     int polar_points = 0);

AngleMap fpn_to_anglemap(std::span<const double> coeffs, int order, const TreePtr& tree,
                         int polar_points = 0);

/// Haar coefficients of the projection over the first `octants` octants.
void fpn_to_coefficients(std::span<const double> coeffs, int order, const AngleTree& tree,
                         std::span<double> out, int octants = 8, int polar_points = 0);

double scalar_flux_haar(const AngleMap& m);
double scalar_flux_fpn(std::span<const double> coeffs);

}  // namespace angadapt
