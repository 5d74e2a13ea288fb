#include "angadapt/sphere_grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "angadapt/quadrature.hpp"

namespace angadapt {

namespace {

constexpr int kLevelShift = 48;
constexpr int kOctantShift = 53;
constexpr std::uint64_t kIndexMask = (std::uint64_t{1} << kMaxPatchLevel) - 1;

double sine_antiderivative(double mu) {
  mu = std::clamp(mu, -1.0, 1.0);
  return 0.5 * (mu * std::sqrt(1.0 - mu * mu) + std::asin(mu));
}

}  // namespace

std::array<double, 3> Direction::cartesian() const {
  const double s = std::sqrt(std::max(0.0, 1.0 - mu * mu));
  return {s * std::cos(phi), s * std::sin(phi), mu};
}

std::vector<int> SpherePatch::path() const {
  std::vector<int> out(level);
  for (int l = level - 1, shift = 0; l >= 0; --l, ++shift) {
    const int dphi = static_cast<int>((i_phi >> shift) & 1u);
    const int dmu = static_cast<int>((i_mu >> shift) & 1u);
    out[l] = dphi + 2 * dmu;
  }
  return out;
}

PatchKey patch_key(int octant, int level, std::uint32_t i_phi, std::uint32_t i_mu) {
  return (static_cast<std::uint64_t>(octant) << kOctantShift) |
         (static_cast<std::uint64_t>(level) << kLevelShift) |
         (static_cast<std::uint64_t>(i_phi) << kMaxPatchLevel) | static_cast<std::uint64_t>(i_mu);
}

PatchKey patch_key(const SpherePatch& p) { return patch_key(p.octant, p.level, p.i_phi, p.i_mu); }

int key_level(PatchKey key) { return static_cast<int>((key >> kLevelShift) & 0x1f); }
int key_octant(PatchKey key) { return static_cast<int>((key >> kOctantShift) & 0x7); }

SpherePatch patch_from_key(PatchKey key) {
  const int octant = key_octant(key);
  const int level = key_level(key);
  const auto i_phi = static_cast<std::uint32_t>((key >> kMaxPatchLevel) & kIndexMask);
  const auto i_mu = static_cast<std::uint32_t>(key & kIndexMask);
  const SpherePatch base = base_octant(octant);
  const double n = std::ldexp(1.0, level);
  const double dphi = (base.phi_hi - base.phi_lo) / n;
  const double dmu = (base.mu_hi - base.mu_lo) / n;
  SpherePatch p;
  p.octant = octant;
  p.level = level;
  p.i_phi = i_phi;
  p.i_mu = i_mu;
  p.phi_lo = base.phi_lo + dphi * i_phi;
  p.phi_hi = (i_phi + 1 == static_cast<std::uint32_t>(n)) ? base.phi_hi : base.phi_lo + dphi * (i_phi + 1);
  p.mu_lo = base.mu_lo + dmu * i_mu;
  p.mu_hi = (i_mu + 1 == static_cast<std::uint32_t>(n)) ? base.mu_hi : base.mu_lo + dmu * (i_mu + 1);
  return p;
}

PatchKey parent_key(PatchKey key) {
  const int level = key_level(key);
  if (level == 0) throw std::invalid_argument("parent_key: base octant has no parent");
  const auto i_phi = static_cast<std::uint32_t>((key >> kMaxPatchLevel) & kIndexMask);
  const auto i_mu = static_cast<std::uint32_t>(key & kIndexMask);
  return patch_key(key_octant(key), level - 1, i_phi >> 1, i_mu >> 1);
}

PatchKey child_key(PatchKey key, int child) {
  const int level = key_level(key);
  if (level >= kMaxPatchLevel) throw std::invalid_argument("child_key: level cap exceeded");
  const auto i_phi = static_cast<std::uint32_t>((key >> kMaxPatchLevel) & kIndexMask);
  const auto i_mu = static_cast<std::uint32_t>(key & kIndexMask);
  return patch_key(key_octant(key), level + 1, 2 * i_phi + (child & 1), 2 * i_mu + (child >> 1));
}

PatchKey mirror_key(PatchKey key) {
  const int level = key_level(key);
  const int octant = key_octant(key);
  const auto i_phi = static_cast<std::uint32_t>((key >> kMaxPatchLevel) & kIndexMask);
  const auto i_mu = static_cast<std::uint32_t>(key & kIndexMask);
  const std::uint32_t n = std::uint32_t{1} << level;
  return patch_key((octant + 4) % 8, level, i_phi, n - 1 - i_mu);
}

SpherePatch base_octant(int octant) {
  if (octant < 0 || octant > 7) throw std::out_of_range("base_octant: index must be in 0..7");
  const int quadrant = octant % 4;
  SpherePatch p;
  p.octant = octant;
  p.phi_lo = quadrant * (kPi / 2);
  p.phi_hi = (quadrant + 1) * (kPi / 2);
  p.mu_lo = octant < 4 ? 0.0 : -1.0;
  p.mu_hi = octant < 4 ? 1.0 : 0.0;
  return p;
}

std::array<SpherePatch, 8> base_octants() {
  std::array<SpherePatch, 8> out;
  for (int o = 0; o < 8; ++o) out[o] = base_octant(o);
  return out;
}

std::array<SpherePatch, 4> subdivide(const SpherePatch& p) {
  const double phi_mid = 0.5 * (p.phi_lo + p.phi_hi);
  const double mu_mid = 0.5 * (p.mu_lo + p.mu_hi);
  std::array<SpherePatch, 4> out;
  for (int c = 0; c < 4; ++c) {
    SpherePatch& q = out[c];
    const bool hi_phi = (c & 1) != 0;
    const bool hi_mu = (c & 2) != 0;
    q.phi_lo = hi_phi ? phi_mid : p.phi_lo;
    q.phi_hi = hi_phi ? p.phi_hi : phi_mid;
    q.mu_lo = hi_mu ? mu_mid : p.mu_lo;
    q.mu_hi = hi_mu ? p.mu_hi : mu_mid;
    q.level = p.level + 1;
    q.octant = p.octant;
    q.i_phi = 2 * p.i_phi + (hi_phi ? 1 : 0);
    q.i_mu = 2 * p.i_mu + (hi_mu ? 1 : 0);
  }
  return out;
}

double sine_integral(double mu_lo, double mu_hi) {
  return sine_antiderivative(mu_hi) - sine_antiderivative(mu_lo);
}

double patch_moment(const SpherePatch& p, Axis k) {
  switch (k) {
    case Axis::z:
      return (p.phi_hi - p.phi_lo) * (p.mu_hi * p.mu_hi - p.mu_lo * p.mu_lo) / 2.0;
    case Axis::x:
      return (std::sin(p.phi_hi) - std::sin(p.phi_lo)) * sine_integral(p.mu_lo, p.mu_hi);
    case Axis::y:
      return (std::cos(p.phi_lo) - std::cos(p.phi_hi)) * sine_integral(p.mu_lo, p.mu_hi);
  }
  return 0.0;
}

PatchGeometry PatchGeometry::of(const SpherePatch& p) {
  PatchGeometry g;
  g.area = p.area();
  g.sine_int = sine_integral(p.mu_lo, p.mu_hi);
  g.cos_lo = std::cos(p.phi_lo);
  g.sin_lo = std::sin(p.phi_lo);
  g.cos_hi = std::cos(p.phi_hi);
  g.sin_hi = std::sin(p.phi_hi);
  g.mx = (g.sin_hi - g.sin_lo) * g.sine_int;
  g.my = (g.cos_lo - g.cos_hi) * g.sine_int;
  g.mz = patch_moment(p, Axis::z);
  return g;
}

HalfRangeFlux PatchGeometry::half_range(double nx, double ny) const {
  // phi-part: integral of cos(phi - theta) with antiderivative sin(phi - theta).
  const double s_lo = sin_lo * nx - cos_lo * ny;
  const double s_hi = sin_hi * nx - cos_hi * ny;
  const double c_lo = cos_lo * nx + sin_lo * ny;
  const double c_hi = cos_hi * nx + sin_hi * ny;
  const double total = s_hi - s_lo;
  double plus = 0.0;
  if (c_lo >= 0.0 && c_hi >= 0.0) {
    plus = total;
  } else if (c_lo <= 0.0 && c_hi <= 0.0) {
    plus = 0.0;
  } else if (c_lo > 0.0) {
    plus = 1.0 - s_lo;  // descending zero at phi - theta = pi/2
  } else {
    plus = s_hi + 1.0;  // ascending zero at phi - theta = -pi/2
  }
  return {plus * sine_int, (total - plus) * sine_int};
}

HalfRangeFlux half_range_flux(const SpherePatch& p, double nx, double ny) {
  return PatchGeometry::of(p).half_range(nx, ny);
}

HalfRangeFlux half_range_flux_quadrature(const SpherePatch& p, double nx, double ny, int order) {
  const QuadratureRule qphi = gauss_legendre(order, p.phi_lo, p.phi_hi);
  const QuadratureRule qmu = gauss_legendre(order, p.mu_lo, p.mu_hi);
  HalfRangeFlux out;
  for (int a = 0; a < order; ++a) {
    const double cx = std::cos(qphi.nodes[a]);
    const double cy = std::sin(qphi.nodes[a]);
    for (int b = 0; b < order; ++b) {
      const double s = std::sqrt(std::max(0.0, 1.0 - qmu.nodes[b] * qmu.nodes[b]));
      const double dot = s * (cx * nx + cy * ny);
      const double w = qphi.weights[a] * qmu.weights[b];
      if (dot > 0.0)
        out.plus += w * dot;
      else
        out.minus += w * dot;
    }
  }
  return out;
}

}  // namespace angadapt
