#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "angadapt/sphere_grid.hpp"

namespace angadapt {

struct HarmonicIndex {
  int l = 0;
  int m = 0;

  int flat() const { return l * l + l + m; }
  static HarmonicIndex from_flat(int k);
};

inline int harmonic_count(int order) { return (order + 1) * (order + 1); }

/// sin(eta)/eta (literal) or sin(pi eta)/(pi eta) (Lanczos).
enum class FilterShape { sinc, lanczos };

struct FpnConfig {
  int order = 1;
  double sigma_f = 0.0;  ///< filter strength, 1/cm
  FilterShape shape = FilterShape::sinc;

  int num_functions() const { return harmonic_count(order); }
};

/// Real orthonormal spherical harmonic without the Condon-Shortley phase.
double eval_Y(HarmonicIndex idx, const Direction& d);

/// All harmonics up to `order` at one direction, in flat-index order.
void eval_Y_all(int order, const Direction& d, std::span<double> out);

/// Normalised associated Legendre values K_{l,m} P_l^m(mu) for 0 <= m <= l <= order,
/// stored at index l*(l+1)/2 + m.
void normalised_legendre(int order, double mu, std::span<double> out);

/// Extra removal for degree l: sigma_f * (-ln sigma(l / (N+1))); exactly 0 at l = 0.
double filter_coeff(int l, int order, double sigma_f, FilterShape shape = FilterShape::sinc);

/// Streaming moment matrices (M_k)_{ab} = int Y_a Omega_k Y_b dOmega.
struct MomentMatrices {
  int order = 0;
  Eigen::MatrixXd mx, my, mz;

  struct Entry {
    int row, col;
    double value;
  };
  /// Nonzero entries (|v| > 1e-14) for fast sparse products.
  std::vector<Entry> sx, sy, sz;
};

MomentMatrices moment_matrices(int order);

/// Rotation of an expansion about the z axis: result(phi) = original(phi - angle).
std::vector<double> rotate_z(std::span<const double> coeffs, int order, double angle);

/// Evaluates the expansion sum_a c_a Y_a(d).
double eval_expansion(std::span<const double> coeffs, int order, const Direction& d);

}  // namespace angadapt
