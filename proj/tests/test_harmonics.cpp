#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "angadapt/errors.hpp"
#include "angadapt/harmonics.hpp"
#include "angadapt/oracle_suite.hpp"

using namespace angadapt;

TEST_CASE("flat index is a bijection") {
  for (int k = 0; k < harmonic_count(9); ++k) {
    const HarmonicIndex i = HarmonicIndex::from_flat(k);
    CHECK(std::abs(i.m) <= i.l);
    CHECK(i.flat() == k);
  }
}

TEST_CASE("known harmonic values") {
  CHECK(eval_Y({0, 0}, {1.3, -0.2}) == doctest::Approx(0.2820947918).epsilon(1e-10));
  CHECK(eval_Y({1, 0}, {0.0, 1.0}) == doctest::Approx(0.4886025119).epsilon(1e-10));
  CHECK_THROWS_AS(eval_Y({1, 2}, {0.0, 0.0}), DomainError);
}

TEST_CASE("eval_Y_all agrees with eval_Y and the addition theorem") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> phi(0.0, 2.0 * kPi), mu(-1.0, 1.0);
  std::vector<double> all(harmonic_count(9));
  for (int s = 0; s < 50; ++s) {
    const Direction d{phi(rng), mu(rng)};
    eval_Y_all(9, d, all);
    for (int l = 0; l <= 9; ++l) {
      double sum = 0.0;
      for (int m = -l; m <= l; ++m) {
        const double y = eval_Y({l, m}, d);
        CHECK(std::abs(y - all[HarmonicIndex{l, m}.flat()]) <= 1e-13);
        sum += y * y;
      }
      CHECK(std::abs(sum - (2 * l + 1) / kFourPi) <= 1e-11);
    }
  }
}

TEST_CASE("Gram matrix is the identity") {
  const Eigen::MatrixXd g = oracle::gram(9, 10);
  CHECK((g - Eigen::MatrixXd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("filter coefficients") {
  for (int n = 0; n <= 21; ++n) CHECK(filter_coeff(0, n, 3.0) == 0.0);
  CHECK(std::abs(filter_coeff(1, 1, 1.0) - 0.0420191) <= 1e-6);
  for (int n = 1; n <= 21; ++n)
    for (int l = 0; l <= n; ++l) {
      CHECK(std::abs(filter_coeff(l, n, 0.4) - oracle::filter_reference(l, n, 0.4)) <= 1e-14);
      if (l > 0) CHECK(filter_coeff(l, n, 0.4) > filter_coeff(l - 1, n, 0.4));
    }
  CHECK(filter_coeff(2, 3, 1.0, FilterShape::lanczos) ==
        doctest::Approx(-std::log(std::sin(kPi * 0.5) / (kPi * 0.5))));
}

TEST_CASE("moment matrices") {
  const MomentMatrices m1 = moment_matrices(1);
  CHECK(m1.mz(HarmonicIndex{0, 0}.flat(), HarmonicIndex{1, 0}.flat()) ==
        doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-12));
  CHECK(std::abs(oracle::moment(1, Axis::z, 10)(0, 2) - 1.0 / std::sqrt(3.0)) <= 1e-12);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * kPi);
  for (int n : {1, 3, 9}) {
    const MomentMatrices m = moment_matrices(n);
    for (const Eigen::MatrixXd* k : {&m.mx, &m.my, &m.mz}) CHECK((*k - k->transpose()).cwiseAbs().maxCoeff() <= 1e-13);
    CHECK((m.mx - oracle::moment(n, Axis::x, 10)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((m.my - oracle::moment(n, Axis::y, 10)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((m.mz - oracle::moment(n, Axis::z, 10)).cwiseAbs().maxCoeff() <= 1e-12);
    for (int s = 0; s < 20; ++s) {
      const double t = ang(rng);
      const Eigen::MatrixXd a = std::cos(t) * m.mx + std::sin(t) * m.my;
      const double radius = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a).eigenvalues().cwiseAbs().maxCoeff();
      CHECK(radius <= 1.0 + 1e-10);
    }
  }
}

TEST_CASE("z rotation") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0), phi(0.0, 2.0 * kPi);
  const int n = 6;
  std::vector<double> c(harmonic_count(n));
  for (double& x : c) x = u(rng);
  CHECK(rotate_z(c, n, 0.0) == c);
  const std::vector<double> back = rotate_z(rotate_z(c, n, 0.7), n, -0.7);
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(std::abs(back[i] - c[i]) <= 1e-13);
  const double alpha = 1.1;
  const std::vector<double> r = rotate_z(c, n, alpha);
  for (int s = 0; s < 100; ++s) {
    const Direction d{phi(rng), u(rng)};
    CHECK(std::abs(eval_expansion(r, n, d) - eval_expansion(c, n, Direction{d.phi - alpha, d.mu})) <= 1e-11);
  }
  CHECK_THROWS_AS(rotate_z(std::vector<double>(5), 1, 0.3), DomainError);
}

TEST_CASE("filter damping commutes with rotation") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int n = 9;
  std::vector<double> c(harmonic_count(n));
  for (double& x : c) x = u(rng);
  for (double t : {0.1, 1.0, 5.0}) {
    auto damp = [&](std::vector<double> v) {
      for (int k = 0; k < harmonic_count(n); ++k)
        v[k] *= std::exp(-filter_coeff(HarmonicIndex::from_flat(k).l, n, 1.0) * t);
      return v;
    };
    const std::vector<double> a = damp(rotate_z(c, n, 0.9));
    const std::vector<double> b = rotate_z(damp(c), n, 0.9);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-12);
  }
}
