#pragma once

#include <vector>

namespace angadapt {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Legendre rule with n points on [-1, 1]. Rules are cached; the
/// returned reference stays valid for the lifetime of the program.
const QuadratureRule& gauss_legendre(int n);

/// Gauss-Legendre rule mapped onto [a, b].
QuadratureRule gauss_legendre(int n, double a, double b);

}  // namespace angadapt
