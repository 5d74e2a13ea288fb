#include "angadapt/harmonics.hpp"

#include <cmath>
#include <string>

#include "angadapt/errors.hpp"
#include "angadapt/quadrature.hpp"

namespace angadapt {

HarmonicIndex HarmonicIndex::from_flat(int k) {
  const int l = static_cast<int>(std::sqrt(static_cast<double>(k)));
  int ll = l;
  while (ll * ll > k) --ll;
  while ((ll + 1) * (ll + 1) <= k) ++ll;
  return {ll, k - ll * ll - ll};
}

void normalised_legendre(int order, double mu, std::span<double> out) {
  const double s = std::sqrt(std::max(0.0, 1.0 - mu * mu));
  auto at = [](int l, int m) { return l * (l + 1) / 2 + m; };
  out[0] = 1.0 / std::sqrt(kFourPi);
  for (int m = 1; m <= order; ++m)
    out[at(m, m)] = std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * s * out[at(m - 1, m - 1)];
  for (int m = 0; m < order; ++m) {
    out[at(m + 1, m)] = std::sqrt(2.0 * m + 3.0) * mu * out[at(m, m)];
    for (int l = m + 2; l <= order; ++l) {
      const double a = std::sqrt((4.0 * l * l - 1.0) / (static_cast<double>(l) * l - m * m));
      const double b = std::sqrt(((l - 1.0) * (l - 1.0) - m * m) / (4.0 * (l - 1.0) * (l - 1.0) - 1.0));
      out[at(l, m)] = a * (mu * out[at(l - 1, m)] - b * out[at(l - 2, m)]);
    }
  }
}

void eval_Y_all(int order, const Direction& d, std::span<double> out) {
  thread_local std::vector<double> plm;
  plm.resize((order + 1) * (order + 2) / 2);
  normalised_legendre(order, d.mu, plm);
  const double root2 = std::sqrt(2.0);
  for (int l = 0; l <= order; ++l) {
    const int base = l * (l + 1) / 2;
    out[l * l + l] = plm[base];
    for (int m = 1; m <= l; ++m) {
      const double p = root2 * plm[base + m];
      out[l * l + l + m] = p * std::cos(m * d.phi);
      out[l * l + l - m] = p * std::sin(m * d.phi);
    }
  }
}

double eval_Y(HarmonicIndex idx, const Direction& d) {
  if (idx.l < 0 || std::abs(idx.m) > idx.l)
    throw DomainError("eval_Y: need |m| <= l, got l=" + std::to_string(idx.l) +
                      " m=" + std::to_string(idx.m));
  std::vector<double> plm((idx.l + 1) * (idx.l + 2) / 2);
  normalised_legendre(idx.l, d.mu, plm);
  const int am = std::abs(idx.m);
  const double p = plm[idx.l * (idx.l + 1) / 2 + am];
  if (idx.m == 0) return p;
  if (idx.m > 0) return std::sqrt(2.0) * p * std::cos(am * d.phi);
  return std::sqrt(2.0) * p * std::sin(am * d.phi);
}

double eval_expansion(std::span<const double> coeffs, int order, const Direction& d) {
  std::vector<double> y(harmonic_count(order));
  eval_Y_all(order, d, y);
  double sum = 0.0;
  for (std::size_t a = 0; a < y.size(); ++a) sum += coeffs[a] * y[a];
  return sum;
}

double filter_coeff(int l, int order, double sigma_f, FilterShape shape) {
  if (l == 0) return 0.0;
  double eta = static_cast<double>(l) / (order + 1);
  if (shape == FilterShape::lanczos) eta *= kPi;
  return sigma_f * -std::log(std::sin(eta) / eta);
}

MomentMatrices moment_matrices(int order) {
  const int n = harmonic_count(order);
  MomentMatrices out;
  out.order = order;
  out.mx = Eigen::MatrixXd::Zero(n, n);
  out.my = Eigen::MatrixXd::Zero(n, n);
  out.mz = Eigen::MatrixXd::Zero(n, n);

  const QuadratureRule& gl = gauss_legendre(order + 2);
  const int nphi = 2 * (2 * order + 2) + 1;
  const double wphi = 2.0 * kPi / nphi;
  std::vector<double> y(n);
  for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
    const double mu = gl.nodes[q];
    const double s = std::sqrt(1.0 - mu * mu);
    for (int k = 0; k < nphi; ++k) {
      const double phi = k * wphi;
      eval_Y_all(order, {phi, mu}, y);
      const double w = gl.weights[q] * wphi;
      const double ox = s * std::cos(phi);
      const double oy = s * std::sin(phi);
      for (int a = 0; a < n; ++a) {
        const double wa = w * y[a];
        for (int b = 0; b <= a; ++b) {
          const double p = wa * y[b];
          out.mx(a, b) += p * ox;
          out.my(a, b) += p * oy;
          out.mz(a, b) += p * mu;
        }
      }
    }
  }
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < a; ++b) {
      out.mx(b, a) = out.mx(a, b);
      out.my(b, a) = out.my(a, b);
      out.mz(b, a) = out.mz(a, b);
    }
  }
  auto sparsify = [n](const Eigen::MatrixXd& m, std::vector<MomentMatrices::Entry>& dst) {
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        if (std::abs(m(a, b)) > 1e-14) dst.push_back({a, b, m(a, b)});
  };
  sparsify(out.mx, out.sx);
  sparsify(out.my, out.sy);
  sparsify(out.mz, out.sz);
  return out;
}

std::vector<double> rotate_z(std::span<const double> coeffs, int order, double angle) {
  if (static_cast<int>(coeffs.size()) != harmonic_count(order))
    throw DomainError("rotate_z: expected " + std::to_string(harmonic_count(order)) +
                      " coefficients, got " + std::to_string(coeffs.size()));
  std::vector<double> out(coeffs.begin(), coeffs.end());
  for (int l = 1; l <= order; ++l) {
    for (int m = 1; m <= l; ++m) {
      const int ip = l * l + l + m;
      const int im = l * l + l - m;
      const double c = std::cos(m * angle);
      const double s = std::sin(m * angle);
      const double a = coeffs[ip];
      const double b = coeffs[im];
      out[ip] = a * c - b * s;
      out[im] = a * s + b * c;
    }
  }
  return out;
}

}  // namespace angadapt
