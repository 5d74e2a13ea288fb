#include "angadapt/oracle_suite.hpp"

#include <cmath>
#include <string>

#include "angadapt/errors.hpp"
#include "angadapt/harmonics.hpp"

namespace angadapt::oracle {

namespace {

struct Rule {
  std::vector<long double> x, w;
};

// Newton iteration on the three-term recurrence, in long double.
Rule legendre_rule(int n, long double a, long double b) {
  const long double pi = 3.141592653589793238462643383279502884L;
  Rule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < n; ++i) {
    long double z = std::cos(pi * (i + 0.75L) / (n + 0.5L));
    long double dp = 0.0L;
    for (int it = 0; it < 100; ++it) {
      long double p0 = 1.0L, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const long double p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0L);
      const long double dz = p1 / dp;
      z -= dz;
      if (std::fabs(dz) < 1e-19L) break;
    }
    r.x[i] = 0.5L * (a + b) + 0.5L * (b - a) * z;
    r.w[i] = (b - a) / ((1.0L - z * z) * dp * dp);
  }
  return r;
}

// Sum over the whole-sphere rule of weight * f(direction) * y y^T.
Eigen::MatrixXd weighted_outer(int order, int multiplier,
                               const std::function<double(const Direction&)>& f) {
  if (multiplier < 1) throw DomainError("quad_oracle: multiplier must be positive");
  const int n = multiplier * kBaseResolution;
  const Rule mu = legendre_rule(n, -1.0L, 1.0L);
  const long double pi = 3.141592653589793238462643383279502884L;
  const long double dphi = 2.0L * pi / n;
  const int m = harmonic_count(order);
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(m, m);
  Eigen::VectorXd y(m);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) {
      const Direction d{static_cast<double>((k + 0.5L) * dphi), static_cast<double>(mu.x[i])};
      eval_Y_all(order, d, std::span<double>(y.data(), m));
      sum.noalias() += static_cast<double>(mu.w[i] * dphi) * f(d) * y * y.transpose();
    }
  }
  return sum;
}

}  // namespace

Eigen::MatrixXd gram(int order, int multiplier) {
  return weighted_outer(order, multiplier, [](const Direction&) { return 1.0; });
}

Eigen::MatrixXd moment(int order, Axis k, int multiplier) {
  return weighted_outer(order, multiplier,
                        [k](const Direction& d) { return d.cartesian()[static_cast<int>(k)]; });
}

Eigen::MatrixXd dense_assemble(const TransportOperator& op, Mode mode) {
  if (op.mesh().num_elements() > kMaxDenseElements)
    throw DomainError("dense_assemble: refused, " + std::to_string(op.mesh().num_elements()) +
                      " elements exceed the limit of " + std::to_string(kMaxDenseElements));
  if (const auto* haar = dynamic_cast<const HaarTransport*>(&op)) {
    for (const TreePtr& t : haar->trees())
      if (t->max_depth() > kMaxDenseHaarLevel)
        throw DomainError("dense_assemble: refused, Haar tree deeper than level " +
                          std::to_string(kMaxDenseHaarLevel));
  } else if (const auto* fpn = dynamic_cast<const FpnTransport*>(&op)) {
    if (fpn->config().order > kMaxDenseFpnOrder)
      throw DomainError("dense_assemble: refused, FP_n order above " +
                        std::to_string(kMaxDenseFpnOrder));
  } else {
    throw DomainError("dense_assemble: refused, unknown operator type");
  }
  const std::size_t n = op.size();
  Eigen::MatrixXd a(n, n);
  std::vector<double> e(n, 0.0), col(n);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    op.apply(e, col, mode);
    e[j] = 0.0;
    for (std::size_t i = 0; i < n; ++i) a(i, j) = col[i];
  }
  return a;
}

double quad_oracle(const std::function<double(const Direction&)>& f, int multiplier) {
  if (multiplier < 1) throw DomainError("quad_oracle: multiplier must be positive");
  const int n = multiplier * kBaseResolution;
  const Rule mu = legendre_rule(n, -1.0L, 1.0L);
  const long double pi = 3.141592653589793238462643383279502884L;
  const long double dphi = 2.0L * pi / n;
  long double sum = 0.0L;
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k)
      sum += mu.w[i] * dphi * f(Direction{static_cast<double>((k + 0.5L) * dphi), static_cast<double>(mu.x[i])});
  return static_cast<double>(sum);
}

double quad_oracle(const std::function<double(const Direction&)>& f, const SpherePatch& patch,
                   int multiplier) {
  if (multiplier < 1) throw DomainError("quad_oracle: multiplier must be positive");
  const int n = multiplier * kBaseResolution;
  // Polar angle as the integration variable keeps the integrand smooth at the poles.
  const Rule theta = legendre_rule(n, std::acos(static_cast<long double>(patch.mu_hi)),
                                   std::acos(static_cast<long double>(patch.mu_lo)));
  const Rule phi = legendre_rule(n, patch.phi_lo, patch.phi_hi);
  long double sum = 0.0L;
  for (int i = 0; i < n; ++i) {
    const double mu = static_cast<double>(std::cos(theta.x[i]));
    const long double w = theta.w[i] * std::sin(theta.x[i]);
    for (int k = 0; k < n; ++k)
      sum += w * phi.w[k] * f(Direction{static_cast<double>(phi.x[k]), mu});
  }
  return static_cast<double>(sum);
}

double scaling_fit(std::span<const double> sizes, std::span<const double> times) {
  if (sizes.size() != times.size() || sizes.size() < 2)
    throw DomainError("scaling_fit: need at least two (size, time) pairs");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double n = static_cast<double>(sizes.size());
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (!(sizes[i] > 0.0) || !(times[i] > 0.0))
      throw DomainError("scaling_fit: sizes and times must be positive");
    const double x = std::log(sizes[i]), y = std::log(times[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double den = n * sxx - sx * sx;
  if (!(den > 0.0)) throw DomainError("scaling_fit: sizes are all equal");
  return (n * sxy - sx * sy) / den;
}

double filter_reference(int l, int order, double sigma_f) {
  if (l == 0) return 0.0;
  const long double eta = static_cast<long double>(l) / (order + 1);
  return static_cast<double>(sigma_f * -std::log(std::sin(eta) / eta));
}

}  // namespace angadapt::oracle
