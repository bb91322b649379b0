#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "cfslab/core.hpp"
#include "cfslab/spin.hpp"
#include "doctest.h"

using namespace cfslab;

static Mat diag2(double a, double b) {
  Mat m = Mat::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

TEST_CASE("spin_products on diag(1,-1)") {
  Mat x = diag2(1, -1);
  Vec e1 = Vec::Zero(2), e2 = Vec::Zero(2);
  e1(0) = 1;
  e2(1) = 1;
  auto p2 = spin_products(x, e2, e2);
  CHECK(p2.spin_inner.real() == doctest::Approx(1.0));
  CHECK(p2.spin_scalar.real() == doctest::Approx(1.0));
  auto p1 = spin_products(x, e1, e1);
  CHECK(p1.spin_inner.real() == doctest::Approx(-1.0));
  CHECK(p1.spin_scalar.real() == doctest::Approx(1.0));
}

TEST_CASE("spin_products rejects vectors outside the spin space") {
  Mat x = diag2(1, 0);
  Vec e2 = Vec::Zero(2);
  e2(1) = 1;
  CHECK_THROWS(spin_products(x, e2, e2));
}

TEST_CASE("spin basis properties") {
  Rng rng(11);
  for (int k = 0; k < 10; ++k) {
    Mat x = random_point(4, 1, rng);
    SpinBasis sb = spin_basis(x);
    CHECK(sb.d <= 2);
    // orthonormal
    Mat g = sb.basis.adjoint() * sb.basis;
    CHECK((g - Mat::Identity(sb.d, sb.d)).cwiseAbs().maxCoeff() < 1e-12);
    // range invariance: x basis vectors stay in span
    Mat proj = sb.basis * sb.basis.adjoint();
    Mat xb = x * sb.basis;
    CHECK((xb - proj * xb).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("local correlation identity x = -Psi* Psi") {
  Rng rng(12);
  DiscreteSystem sys = random_system(4, 4, 2, 0.1, rng);
  SpinSetup ss = build_spin(sys);
  for (int i = 0; i < sys.size(); ++i) {
    Mat rec = -ss.psi_star(i) * ss.psi(i);
    CHECK((rec - sys.points[i]).cwiseAbs().maxCoeff() <
          1e-10 * std::max(1.0, op_norm(sys.points[i])));
  }
}

TEST_CASE("physical wave function: kernel vector maps to zero") {
  Mat x = diag2(1, 0);
  DiscreteSystem sys;
  sys.n = 1;
  sys.f = 2;
  sys.points = {x};
  sys.weights = {1.0};
  sys.times = {0.0};
  SpinSetup ss = build_spin(sys);
  Vec u = Vec::Zero(2);
  u(1) = 1;  // in ker(x)
  auto psi = physical_wave_function(ss, u);
  CHECK(psi[0].norm() < 1e-14);
  // projection fixed point
  Vec v = Vec::Zero(2);
  v(0) = 3.0;
  auto psi2 = physical_wave_function(ss, v);
  CHECK((ss.ambient(0, psi2[0]) - v).norm() < 1e-13);
}

TEST_CASE("projection idempotence") {
  Rng rng(13);
  Mat x = random_point(5, 2, rng);
  DiscreteSystem sys;
  sys.n = 2;
  sys.f = 5;
  sys.points = {x};
  sys.weights = {1.0};
  sys.times = {0.0};
  SpinSetup ss = build_spin(sys);
  Vec u = random_matrix(5, 1, rng);
  Vec once = ss.ambient(0, ss.project(0, u));
  Vec twice = ss.ambient(0, ss.project(0, once));
  CHECK((once - twice).norm() < 1e-12 * u.norm());
}

TEST_CASE("fermionic kernel symmetry and diagonal") {
  Rng rng(14);
  DiscreteSystem sys = random_system(4, 4, 1, 0.1, rng);
  SpinSetup ss = build_spin(sys);
  for (int i = 0; i < sys.size(); ++i) {
    for (int j = 0; j < sys.size(); ++j) {
      Mat pij = ss.P(i, j);
      Mat pji = ss.P(j, i);
      CHECK((ss.adjoint(i, j, pij) - pji).cwiseAbs().maxCoeff() < 1e-12);
    }
    // -P(x,x) equals x restricted to S_xM: P(x,x) coords = B* x B
    Mat xr = ss.bases[i].basis.adjoint() * sys.points[i] * ss.bases[i].basis;
    CHECK((ss.P(i, i) - xr).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("orthogonal ranges give vanishing kernel") {
  Mat x = diag2(1, 0), y = diag2(0, -1);
  DiscreteSystem sys;
  sys.n = 1;
  sys.f = 2;
  sys.points = {x, y};
  sys.weights = {0.5, 0.5};
  sys.times = {0, 1};
  SpinSetup ss = build_spin(sys);
  CHECK(ss.P(0, 1).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("isospectrality of xy and the closed chain") {
  Rng rng(15);
  for (int k = 0; k < 100; ++k) {
    DiscreteSystem sys = random_system(2, 4, 1, 0.1, rng);
    SpinSetup ss = build_spin(sys);
    auto rep = isospectrality_check(ss, 0, 1);
    CHECK(rep.max_mismatch < 1e-8);
  }
}

TEST_CASE("isospectrality commuting and zero cases") {
  Mat x = diag2(1, 0), y = diag2(0.5, 0);
  DiscreteSystem sys;
  sys.n = 1;
  sys.f = 2;
  sys.points = {x, y};
  sys.weights = {0.5, 0.5};
  sys.times = {0, 1};
  SpinSetup ss = build_spin(sys);
  CHECK(isospectrality_check(ss, 0, 1).max_mismatch < 1e-12);
}

TEST_CASE("spin inner product signature matches eigenvalue signs") {
  Rng rng(16);
  Mat x = random_point(4, 2, rng);
  SpinBasis sb = spin_basis(x);
  int pos = 0, neg = 0;
  for (int k = 0; k < sb.d; ++k) (sb.ev(k) > 0 ? pos : neg)++;
  // spin inner Gram is -diag(ev): signature flips
  DiscreteSystem sys;
  sys.n = 2;
  sys.f = 4;
  sys.points = {x};
  sys.weights = {1.0};
  sys.times = {0.0};
  SpinSetup ss = build_spin(sys);
  Mat g = ss.spin_inner_gram(0);
  int gp = 0, gn = 0;
  for (int k = 0; k < sb.d; ++k) (g(k, k).real() > 0 ? gp : gn)++;
  CHECK(gp == neg);
  CHECK(gn == pos);
  CHECK(gp <= 2);
  CHECK(gn <= 2);
  // spin scalar positive definite on the spin space
  Mat gs = ss.spin_scalar_gram(0);
  for (int k = 0; k < sb.d; ++k) CHECK(gs(k, k).real() > 0.0);
}

TEST_CASE("sign operator converts spin inner into spin scalar") {
  Rng rng(17);
  DiscreteSystem sys = random_system(3, 4, 2, 0.1, rng);
  SpinSetup ss = build_spin(sys);
  for (int i = 0; i < sys.size(); ++i) {
    Mat gi = ss.spin_inner_gram(i);
    Mat gs = ss.spin_scalar_gram(i);
    Mat s = ss.sign_op(i);
    CHECK((gi * s - gs).cwiseAbs().maxCoeff() < 1e-12);
  }
}
