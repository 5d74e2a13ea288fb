#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace angadapt {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kFourPi = 4.0 * kPi;

/// A direction on the unit sphere, parameterised by azimuth and polar cosine.
struct Direction {
  double phi = 0.0;  ///< azimuth in [0, 2pi)
  double mu = 0.0;   ///< cosine of the polar angle in [-1, 1]

  std::array<double, 3> cartesian() const;
};

enum class Axis { x = 0, y = 1, z = 2 };

/// A latitude-longitude patch of the sphere, [phi_lo, phi_hi] x [mu_lo, mu_hi].
///
/// Patches are addressed by (octant, level, i_phi, i_mu): within an octant,
/// a patch at level L occupies cell (i_phi, i_mu) of a uniform 2^L x 2^L
/// split of the octant in phi and mu. Splitting in mu rather than in the
/// polar angle keeps all four children at exactly a quarter of the parent
/// area.
struct SpherePatch {
  double phi_lo = 0.0;
  double phi_hi = 0.0;
  double mu_lo = 0.0;
  double mu_hi = 0.0;
  int level = 0;
  int octant = 0;
  std::uint32_t i_phi = 0;
  std::uint32_t i_mu = 0;

  double area() const { return (phi_hi - phi_lo) * (mu_hi - mu_lo); }
  /// Child indices 0..3 from the root octant down to this patch.
  std::vector<int> path() const;
  bool operator==(const SpherePatch&) const = default;
};

/// Packed integer key of a patch, unique over the whole sphere.
using PatchKey = std::uint64_t;

PatchKey patch_key(int octant, int level, std::uint32_t i_phi, std::uint32_t i_mu);
PatchKey patch_key(const SpherePatch& p);
SpherePatch patch_from_key(PatchKey key);
PatchKey parent_key(PatchKey key);
PatchKey child_key(PatchKey key, int child);
int key_level(PatchKey key);
int key_octant(PatchKey key);
/// Reflection mu -> -mu.
PatchKey mirror_key(PatchKey key);

inline constexpr int kMaxPatchLevel = 24;

/// The eight base octants, mu-major (mu in [0,1] first), then phi quadrant.
std::array<SpherePatch, 8> base_octants();
SpherePatch base_octant(int octant);

/// Midpoint split in phi and mu; children ordered
/// (phi_lo,mu_lo), (phi_hi,mu_lo), (phi_lo,mu_hi), (phi_hi,mu_hi).
std::array<SpherePatch, 4> subdivide(const SpherePatch& p);

/// Closed-form integral of Omega_k over the patch.
double patch_moment(const SpherePatch& p, Axis k);

/// Integral of sqrt(1 - mu^2) over [mu_lo, mu_hi].
double sine_integral(double mu_lo, double mu_hi);

struct HalfRangeFlux {
  double plus = 0.0;   ///< integral of max(Omega.n, 0)
  double minus = 0.0;  ///< integral of min(Omega.n, 0)
};

/// Sign-split normal flux moments for an in-plane normal (n_z = 0).
///
/// For in-plane normals Omega.n = sqrt(1-mu^2) cos(phi - theta_n), so the
/// integral separates and the phi part has a closed form; this is exact.
HalfRangeFlux half_range_flux(const SpherePatch& p, double nx, double ny);

/// Same quantity by tensor Gauss-Legendre quadrature with `order` points per
/// direction. Kept as an independent route for cross-checking.
HalfRangeFlux half_range_flux_quadrature(const SpherePatch& p, double nx, double ny,
                                         int order = 4);

/// Per-patch quantities the transport kernels need, precomputed once.
struct PatchGeometry {
  double area = 0.0;
  double mx = 0.0;
  double my = 0.0;
  double mz = 0.0;
  double sine_int = 0.0;  ///< integral of sqrt(1 - mu^2) dmu
  double cos_lo = 0.0, sin_lo = 0.0, cos_hi = 0.0, sin_hi = 0.0;

  static PatchGeometry of(const SpherePatch& p);

  /// Fast equivalent of half_range_flux using the cached trig values.
  HalfRangeFlux half_range(double nx, double ny) const;
};

}  // namespace angadapt
