#include <doctest.h>

#include <cmath>
#include <random>

#include "angadapt/oracle_suite.hpp"
#include "angadapt/projection.hpp"

using namespace angadapt;

namespace {

std::vector<double> random_coeffs(int order, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> c(harmonic_count(order));
  for (double& x : c) x = u(rng);
  return c;
}

TreePtr ragged_tree() {
  std::vector<PatchKey> keys = AngleTree::uniform(1)->subdivided();
  const PatchKey k = child_key(patch_key(base_octant(6)), 3);
  keys.push_back(k);
  keys.push_back(child_key(k, 0));
  return AngleTree::build(std::move(keys));
}

}  // namespace

TEST_CASE("isotropic field projects to a constant") {
  std::vector<double> c(harmonic_count(3), 0.0);
  c[0] = std::sqrt(kFourPi);
  const TreePtr t = ragged_tree();
  for (double v : fpn_to_leafmeans(c, 3, *t)) CHECK(std::abs(v - 1.0) <= 1e-12);
  const AngleMap m = fpn_to_anglemap(c, 3, t);
  for (int o = 0; o < 8; ++o)
    for (int i = t->octant_offset(o) + 1; i < t->octant_offset(o + 1); ++i) CHECK(std::abs(m.coeffs[i]) <= 1e-12);
  CHECK(scalar_flux_haar(m) == doctest::Approx(kFourPi).epsilon(1e-12));
}

TEST_CASE("single degree-one harmonic on the first octant") {
  std::vector<double> c(harmonic_count(1), 0.0);
  c[HarmonicIndex{1, 0}.flat()] = 1.0;
  const std::vector<double> means = fpn_to_leafmeans(c, 1, *AngleTree::base());
  CHECK(means[0] == doctest::Approx(0.2443013).epsilon(1e-7));
}

TEST_CASE("octant zeroth moments and global scalar flux are preserved") {
  std::mt19937_64 rng(8);
  for (int order : {1, 3, 5}) {
    const std::vector<double> c = random_coeffs(order, rng);
    const TreePtr t = ragged_tree();
    const std::vector<double> means = fpn_to_leafmeans(c, order, *t);
    for (int o = 0; o < 8; ++o) {
      double sum = 0.0;
      for (int l = t->octant_offset(o); l < t->octant_offset(o + 1); ++l)
        sum += means[l] * t->patch(t->leaf_node(l)).area();
      const double ref = oracle::quad_oracle(
          [&](const Direction& d) { return eval_expansion(c, order, d); }, base_octant(o), 2);
      CHECK(std::abs(sum - ref) <= 1e-10);
    }
    CHECK(std::abs(scalar_flux_haar(fpn_to_anglemap(c, order, t)) - scalar_flux_fpn(c)) <= 1e-10);
  }
  std::vector<double> unit(harmonic_count(2), 0.0);
  unit[0] = 1.0;
  CHECK(scalar_flux_fpn(unit) == doctest::Approx(3.5449077).epsilon(1e-8));
}

TEST_CASE("leaf means match a per-patch oracle") {
  std::mt19937_64 rng(12);
  const int order = 4;
  const std::vector<double> c = random_coeffs(order, rng);
  const TreePtr t = ragged_tree();
  const std::vector<double> means = fpn_to_leafmeans(c, order, *t);
  for (int l = 0; l < t->num_functions(); ++l) {
    const SpherePatch p = t->patch(t->leaf_node(l));
    const double ref = oracle::quad_oracle([&](const Direction& d) { return eval_expansion(c, order, d); }, p, 1) / p.area();
    CHECK(std::abs(means[l] - ref) <= 1e-12);
  }
}

TEST_CASE("anglemap is the transform of the leaf means") {
  std::mt19937_64 rng(13);
  const std::vector<double> c = random_coeffs(3, rng);
  const TreePtr t = ragged_tree();
  const std::vector<double> means = fpn_to_leafmeans(c, 3, *t);
  const std::vector<double> back = mallat_inverse(fpn_to_anglemap(c, 3, t));
  for (std::size_t i = 0; i < means.size(); ++i) CHECK(std::abs(back[i] - means[i]) <= 1e-14);

  std::vector<double> coeffs(t->num_functions(4));
  fpn_to_coefficients(c, 3, *t, coeffs, 4);
  const AngleMap full = fpn_to_anglemap(c, 3, t);
  for (int i = 0; i < t->num_functions(4); ++i) CHECK(std::abs(coeffs[i] - full.coeffs[i]) <= 1e-14);
}

TEST_CASE("projection is linear") {
  std::mt19937_64 rng(14);
  const std::vector<double> a = random_coeffs(3, rng), b = random_coeffs(3, rng);
  std::vector<double> ab(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) ab[i] = 2.0 * a[i] - 0.5 * b[i];
  const TreePtr t = ragged_tree();
  const std::vector<double> ma = fpn_to_leafmeans(a, 3, *t), mb = fpn_to_leafmeans(b, 3, *t);
  const std::vector<double> mab = fpn_to_leafmeans(ab, 3, *t);
  for (std::size_t i = 0; i < ma.size(); ++i) CHECK(std::abs(mab[i] - (2.0 * ma[i] - 0.5 * mb[i])) <= 1e-12);
  CHECK(std::abs(scalar_flux_fpn(ab) - (2.0 * scalar_flux_fpn(a) - 0.5 * scalar_flux_fpn(b))) <= 1e-12);
}

TEST_CASE("deeper trees converge to pointwise values") {
  std::mt19937_64 rng(15);
  const int order = 3;
  const std::vector<double> general = random_coeffs(order, rng);
  std::vector<double> zonal(general.size(), 0.0);
  for (int l = 0; l <= order; ++l) zonal[HarmonicIndex{l, 0}.flat()] = general[HarmonicIndex{l, 0}.flat()];
  double prev_max = 0.0, prev_mean = 0.0;
  for (int level = 2; level <= 6; ++level) {
    const TreePtr t = AngleTree::uniform(level);
    const std::vector<double> zm = fpn_to_leafmeans(zonal, order, *t);
    const std::vector<double> gm = fpn_to_leafmeans(general, order, *t);
    double max_err = 0.0, mean_err = 0.0;
    for (int l = 0; l < t->num_functions(); ++l) {
      const SpherePatch p = t->patch(t->leaf_node(l));
      const Direction centre{0.5 * (p.phi_lo + p.phi_hi), 0.5 * (p.mu_lo + p.mu_hi)};
      max_err = std::max(max_err, std::abs(zm[l] - eval_expansion(zonal, order, centre)));
      mean_err += std::abs(gm[l] - eval_expansion(general, order, centre)) * p.area();
    }
    if (level > 2) {
      CHECK(max_err <= 0.5 * prev_max);
      CHECK(mean_err <= 0.5 * prev_mean);
    }
    prev_max = max_err;
    prev_mean = mean_err;
  }
}
