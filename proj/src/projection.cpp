#include "angadapt/projection.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>

#include "angadapt/errors.hpp"
#include "angadapt/quadrature.hpp"

namespace angadapt {

namespace {

// Integrals of K_{l,m} P_l^m over [mu_lo, mu_hi] for 0 <= m <= l <= order.
std::vector<double> polar_integrals(int order, double mu_lo, double mu_hi, int points) {
  const int count = (order + 1) * (order + 2) / 2;
  std::vector<double> out(count, 0.0);
  std::vector<double> plm(count);
  const double theta_hi = std::acos(std::clamp(mu_lo, -1.0, 1.0));
  const double theta_lo = std::acos(std::clamp(mu_hi, -1.0, 1.0));
  const QuadratureRule rule = gauss_legendre(points, theta_lo, theta_hi);
  for (int q = 0; q < points; ++q) {
    const double theta = rule.nodes[q];
    normalised_legendre(order, std::cos(theta), plm);
    const double w = rule.weights[q] * std::sin(theta);
    for (int k = 0; k < count; ++k) out[k] += w * plm[k];
  }
  return out;
}

}  // namespace

std::vector<double> fpn_to_leafmeans(std::span<const double> coeffs, int order,
                                     const AngleTree& tree, int octants, int polar_points) {
  if (static_cast<int>(coeffs.size()) != harmonic_count(order))
    throw StructuralError("fpn_to_leafmeans: expected " + std::to_string(harmonic_count(order)) +
                          " coefficients, got " + std::to_string(coeffs.size()));
  const int points = polar_points > 0 ? polar_points : std::max(16, 2 * order + 8);
  const double root2 = std::sqrt(2.0);
  std::map<std::pair<double, double>, std::vector<double>> polar_cache;
  std::vector<double> means(tree.num_functions(octants));
  for (int leaf = 0; leaf < tree.num_functions(octants); ++leaf) {
    const SpherePatch& p = tree.patch(tree.leaf_node(leaf));
    auto it = polar_cache.find({p.mu_lo, p.mu_hi});
    if (it == polar_cache.end())
      it = polar_cache.emplace(std::make_pair(p.mu_lo, p.mu_hi),
                               polar_integrals(order, p.mu_lo, p.mu_hi, points)).first;
    const std::vector<double>& pint = it->second;
    double integral = 0.0;
    for (int l = 0; l <= order; ++l) {
      const int base = l * (l + 1) / 2;
      integral += coeffs[l * l + l] * pint[base] * (p.phi_hi - p.phi_lo);
      for (int m = 1; m <= l; ++m) {
        const double cos_part = (std::sin(m * p.phi_hi) - std::sin(m * p.phi_lo)) / m;
        const double sin_part = (std::cos(m * p.phi_lo) - std::cos(m * p.phi_hi)) / m;
        const double f = root2 * pint[base + m];
        integral += f * (coeffs[l * l + l + m] * cos_part + coeffs[l * l + l - m] * sin_part);
      }
    }
    means[leaf] = integral / p.area();
  }
  return means;
}

void fpn_to_coefficients(std::span<const double> coeffs, int order, const AngleTree& tree,
                         std::span<double> out, int octants, int polar_points) {
  const std::vector<double> means = fpn_to_leafmeans(coeffs, order, tree, octants, polar_points);
  analyse(tree, means, out, octants);
}

AngleMap fpn_to_anglemap(std::span<const double> coeffs, int order, const TreePtr& tree,
                         int polar_points) {
  const std::vector<double> means = fpn_to_leafmeans(coeffs, order, *tree, 8, polar_points);
  return mallat_forward(means, tree);
}

double scalar_flux_haar(const AngleMap& m) {
  // Wavelets integrate to zero; only the octant scaling functions contribute.
  double sum = 0.0;
  for (int o = 0; o < 8; ++o) sum += m.coeffs[m.tree->octant_offset(o)] * (kPi / 2);
  return sum;
}

double scalar_flux_fpn(std::span<const double> coeffs) { return std::sqrt(kFourPi) * coeffs[0]; }

}  // namespace angadapt
