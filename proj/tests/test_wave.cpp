#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "cfslab/core.hpp"
#include "cfslab/spin.hpp"
#include "cfslab/variations.hpp"
#include "cfslab/wave.hpp"
#include "doctest.h"

using namespace cfslab;

namespace {

struct Setup {
  DiscreteSystem sys;
  SpinSetup ss;
  QKernel qk;
  TimeStrip strip;
  StripOperator op;
};

void init_setup(Setup& s, unsigned seed, int N = 8, int f = 4, int n = 1,
                double r = 0.05) {
  Rng rng(seed);
  s.sys = random_system(N, f, n, 0.1, rng);
  s.sys.r = r;
  s.ss = build_spin(s.sys);
  s.ss.sys = &s.sys;
  s.qk = q_kernel(s.ss);
  s.strip = {-0.5, 1.5, N - 2.5, N - 0.5, 0.5};
  s.op = assemble_strip_operator(s.ss, s.qk, s.strip);
  s.op.ss = &s.ss;
  s.op.qk = &s.qk;
}

Vec random_future(const Setup& s, Rng& rng) {
  Vec phi = Vec::Zero(s.op.dim);
  for (size_t b = 0; b < s.op.members.size(); ++b) {
    int i = s.op.members[b];
    if (s.sys.times[i] >= s.strip.t_max)
      phi.segment(s.op.offset[b], s.ss.dim(i)) =
          random_matrix(s.ss.dim(i), 1, rng);
  }
  return phi;
}

QKernel zero_kernel(const SpinSetup& ss) {
  int N = ss.sys->size();
  QKernel qk;
  qk.q.assign(N, std::vector<Mat>(N));
  qk.degenerate.assign(N, std::vector<char>(N, 0));
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      qk.q[i][j] = Mat::Zero(ss.dim(i), ss.dim(j));
  return qk;
}

}  // namespace

TEST_CASE("time strip validation") {
  TimeStrip bad{0, 3, 2, 5, 0.1};
  CHECK_THROWS(bad.validate());
  TimeStrip thin{0, 1, 4, 5, 0.6};  // margins 1 < 2*delta
  CHECK_THROWS(thin.validate());
  TimeStrip ok{0, 1.5, 3.5, 5, 0.5};
  CHECK_NOTHROW(ok.validate());
}

TEST_CASE("kernel hygiene") {
  Rng rng(41);
  DiscreteSystem sys = random_system(4, 4, 1, 0.1, rng);
  SpinSetup ss = build_spin(sys);
  QKernel qk = q_kernel(ss);
  // generous bound passes, tiny bound reports every point
  auto ok = kernel_hygiene(ss, qk, 10.0, 1e6);
  CHECK(ok.l1_ok);
  auto bad = kernel_hygiene(ss, qk, 10.0, 1e-12);
  CHECK(bad.l1_violations.size() == 4);
  // hard windowing enforces the range property by construction
  QKernel win = qk;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (std::abs(sys.times[i] - sys.times[j]) > 1.0)
        win.q[i][j].setZero();
  CHECK(kernel_hygiene(ss, win, 1.0, 1e6).range_ok);
  CHECK_FALSE(kernel_hygiene(ss, qk, 1.0, 1e6).range_ok);
  // zero kernel passes everything
  QKernel z = zero_kernel(ss);
  auto zr = kernel_hygiene(ss, z, 0.0, 1e-3);
  CHECK(zr.l1_ok);
  CHECK(zr.range_ok);
  CHECK(zr.max_l1 == 0.0);
}

TEST_CASE("strip operator: zero kernel, symmetry, norm bound") {
  Rng rng(42);
  DiscreteSystem sys = random_system(6, 4, 1, 0.1, rng);
  SpinSetup ss = build_spin(sys);
  QKernel z = zero_kernel(ss);
  TimeStrip strip{-0.5, 1.5, 3.5, 5.5, 0.5};
  StripOperator zop = assemble_strip_operator(ss, z, strip);
  CHECK(zop.qmat.cwiseAbs().maxCoeff() == 0.0);  // r = 0, Q = 0

  QKernel qk = q_kernel(ss);
  sys.r = 0.1;
  StripOperator op = assemble_strip_operator(ss, qk, strip);
  CHECK(op.symmetry_error < 1e-10);
  CHECK(op.spectral_norm <= op.norm_bound * (1 + 1e-6));
}

TEST_CASE("single-point strip reduces to the local kernel") {
  Rng rng(43);
  DiscreteSystem sys = random_system(1, 4, 2, 0.1, rng);
  sys.r = 0.2;
  sys.times = {1.0};
  SpinSetup ss = build_spin(sys);
  QKernel qk = q_kernel(ss);
  TimeStrip strip{0.0, 0.4, 1.6, 2.0, 0.1};
  StripOperator op = assemble_strip_operator(ss, qk, strip);
  Vec v = random_matrix(ss.dim(0), 1, rng);
  Vec expect = sys.weights[0] * qk(0, 0) * v - sys.r * v;
  CHECK((op.apply_kernel(v) - expect).norm() < 1e-12);
}

TEST_CASE("inhomogeneous solve: in-range right-hand side") {
  Setup s;
  init_setup(s, 44);
  Rng rng(45);
  Vec chi = random_matrix(s.op.dim, 1, rng);
  Vec phi = s.op.apply_kernel(chi);
  SolveReport rep = solve_inhomogeneous(s.op, phi);
  CHECK(rep.residual < 1e-10);
  Vec back = s.op.apply_kernel(rep.psi);
  CHECK(s.op.strip_norm(back - phi) < 1e-8 * s.op.strip_norm(phi));
}

TEST_CASE("inhomogeneous solve: kernel right-hand side rejected") {
  Rng rng(46);
  DiscreteSystem sys = random_system(4, 4, 1, 0.1, rng);
  sys.r = 0.0;
  SpinSetup ss = build_spin(sys);
  QKernel z = zero_kernel(ss);
  TimeStrip strip{-0.5, 0.8, 2.2, 3.5, 0.3};
  StripOperator op = assemble_strip_operator(ss, z, strip);
  Vec phi = random_matrix(op.dim, 1, rng);
  CHECK_THROWS(solve_inhomogeneous(op, phi));
}

TEST_CASE("boundary-driven solutions are homogeneous inside") {
  Setup s;
  init_setup(s, 47);
  Rng rng(48);
  Vec phi1 = random_future(s, rng);
  Vec zero = Vec::Zero(s.op.dim);
  auto rep = homogeneous_from_boundary(s.op, phi1, zero, 0.0);
  CHECK(rep.interior_residual < 1e-8 * s.op.strip_norm(phi1));
  // trivial data give the zero solution
  auto triv = homogeneous_from_boundary(s.op, zero, zero, 0.0);
  CHECK(s.op.strip_norm(triv.psi) == 0.0);
  // support violation rejected
  Vec badphi = Vec::Ones(s.op.dim);
  CHECK_THROWS(homogeneous_from_boundary(s.op, badphi, zero, 0.0));
}

TEST_CASE("commutator inner product basics") {
  Setup s;
  init_setup(s, 49);
  Rng rng(50);
  Vec u = random_matrix(s.sys.f, 1, rng), v = random_matrix(s.sys.f, 1, rng);
  WaveFunction pu = physical_wave_function(s.ss, u);
  WaveFunction pv = physical_wave_function(s.ss, v);
  CHECK(std::abs(commutator_inner(s.ss, s.qk, pu, pv, -10.0)) == 0.0);
  cplx ab = commutator_inner(s.ss, s.qk, pu, pv, 3.0);
  cplx ba = commutator_inner(s.ss, s.qk, pv, pu, 3.0);
  CHECK(std::abs(ab - std::conj(ba)) < 1e-10 * std::max(1.0, std::abs(ab)));
  cplx aa = commutator_inner(s.ss, s.qk, pu, pu, 3.0);
  CHECK(std::abs(aa.imag()) < 1e-10 * std::max(1.0, std::abs(aa)));
}

TEST_CASE("cipzero: future-only-driven solutions have null norm") {
  Setup s;
  init_setup(s, 51);
  Rng rng(52);
  Vec phi1 = random_future(s, rng);
  auto rep = homogeneous_from_boundary(s.op, phi1, Vec(Vec::Zero(s.op.dim)),
                                       0.0);
  WaveFunction w = s.op.expand(rep.psi);
  double scale = std::pow(s.op.strip_norm(rep.psi), 2);
  for (double t : {0.0, 1.0, 2.0, 3.0, 4.0, 5.0}) {
    if (t > s.strip.t_max) break;
    cplx v = commutator_inner(s.ss, s.qk, w, w, t);
    CHECK(std::abs(v) < 1e-8 * std::max(scale, 1.0));
  }
}

TEST_CASE("conservation of the commutator inner product") {
  Setup s;
  init_setup(s, 53);
  Rng rng(54);
  Vec phi1 = random_future(s, rng);
  Vec phi1b = random_future(s, rng);
  Vec zero = Vec::Zero(s.op.dim);
  Vec psi = homogeneous_from_boundary(s.op, phi1, zero, 0.0).psi;
  Vec chi = homogeneous_from_boundary(s.op, phi1b, zero, 0.0).psi;
  std::vector<double> grid;
  for (double t = 2.1; t < s.strip.t_max - s.strip.delta; t += 0.4)
    grid.push_back(t);
  auto series = conservation_series(s.op, psi, chi, grid);
  REQUIRE(series.t.size() >= 3);
  double scale =
      std::max(1.0, s.op.strip_norm(psi) * s.op.strip_norm(chi));
  CHECK(series.max_drift < 1e-8 * scale);
  // zero wave gives an identically zero series
  auto zs = conservation_series(s.op, zero, chi, grid);
  for (cplx v : zs.value) CHECK(std::abs(v) == 0.0);
}

TEST_CASE("past-driven drift matches the explicit boundary formula") {
  Setup s;
  init_setup(s, 55);
  Rng rng(56);
  Vec phi1 = random_future(s, rng);
  Vec psi0 = homogeneous_from_boundary(s.op, phi1, Vec(Vec::Zero(s.op.dim)),
                                       0.0)
                 .psi;
  Vec phi0 = cplx(0, 0.25) * s.op.apply_sign(s.op.window(
                                 psi0, s.strip.t0, s.strip.t_min));
  double lambda = 1e-2;
  Vec psi = homogeneous_from_boundary(s.op, phi1, phi0, lambda).psi;
  WaveFunction w = s.op.expand(psi);
  for (double t : {2.5, 3.5, 4.5}) {
    cplx cip = commutator_inner(s.ss, s.qk, w, w, t);
    // 4 Im sum_{past} rho <psi|lambda phi0>
    cplx acc = 0;
    WaveFunction wphi = s.op.expand(Vec(lambda * phi0));
    for (int i = 0; i < s.sys.size(); ++i) {
      if (s.sys.times[i] > t) continue;
      acc += s.sys.weights[i] *
             (w[i].adjoint() * s.ss.spin_inner_gram(i) * wphi[i])(0);
    }
    double expect = 4.0 * acc.imag();
    CHECK(cip.real() == doctest::Approx(expect).epsilon(1e-6));
  }
}

TEST_CASE("sign operator realizes the spin scalar product") {
  Rng rng(57);
  DiscreteSystem sys = random_system(3, 5, 2, 0.1, rng);
  SpinSetup ss = build_spin(sys);
  for (int i = 0; i < 3; ++i) {
    int d = ss.dim(i);
    Vec a = random_matrix(d, 1, rng), b = random_matrix(d, 1, rng);
    cplx lhs = (a.adjoint() * ss.spin_inner_gram(i) * (ss.sign_op(i) * b))(0);
    cplx rhs = (a.adjoint() * ss.spin_scalar_gram(i) * b)(0);
    CHECK(std::abs(lhs - rhs) < 1e-12 * std::max(1.0, std::abs(rhs)));
  }
}

TEST_CASE("positivity perturbation: linear coefficient and slope") {
  Setup s;
  init_setup(s, 58);
  Rng rng(59);
  Vec phi1 = random_future(s, rng);
  Vec psi0 = homogeneous_from_boundary(s.op, phi1, Vec(Vec::Zero(s.op.dim)),
                                       0.0)
                 .psi;
  PositivityReport rep = positivity_perturbation(s.op, psi0);
  REQUIRE(rep.past_norm2 > 0);
  CHECK(rep.linear_coef ==
        doctest::Approx(rep.past_norm2).epsilon(1e-4));
  CHECK(rep.remainder_slope >= 1.8);
  // zero seed gives the zero pair
  PositivityReport z = positivity_perturbation(s.op, Vec(Vec::Zero(s.op.dim)));
  CHECK(z.past_norm2 == 0.0);
}

TEST_CASE("extended space: PSD gram, conservation, pair oracle") {
  Setup s;
  init_setup(s, 60);
  Rng rng(61);
  double tmid = 0.5 * (s.strip.t_min + s.strip.t_max);
  ExtendedSpaceReport rep = build_extended_space(
      s.op, {}, 1e-3, tmid, tmid + 0.9, 3, rng);
  CHECK(rep.psd);
  CHECK(rep.time_invariance <
        1e-8 * std::max(1.0, rep.gram.cwiseAbs().maxCoeff()));
  CHECK(rep.kernel_neutrality <= 1e-10);
  // independent oracle: the pair block equals lambda times the past-strip
  // Gram of the unperturbed solutions; verify its diagonal is >= 0
  for (int k = 0; k < rep.gram.rows(); ++k)
    CHECK(rep.gram(k, k).real() >=
          -1e-12 * rep.gram.cwiseAbs().maxCoeff());
}

TEST_CASE("extended space with embedded Hilbert vectors") {
  Setup s;
  init_setup(s, 62);
  Rng rng(63);
  std::vector<Vec> hf = {Vec(random_matrix(s.sys.f, 1, rng))};
  double tmid = 0.5 * (s.strip.t_min + s.strip.t_max);
  ExtendedSpaceReport rep =
      build_extended_space(s.op, hf, 1e-3, tmid, tmid + 0.9, 2, rng);
  CHECK(rep.gram.rows() == 3);
  CHECK(rep.support_defects.size() == 1);
  CHECK(rep.embedding_residuals.size() == 1);
  CHECK(rep.time_invariance <
        1e-6 * std::max(1.0, rep.gram.cwiseAbs().maxCoeff()));
}

TEST_CASE("coupling iteration") {
  Setup s;
  init_setup(s, 64, 6, 3, 1);
  Rng rng(65);
  VariationDirection phi = random_variation(s.ss, rng);
  for (auto& m : phi) m *= 0.1;
  // no coupling: converges immediately
  auto off = coupling_iteration(s.op, phi, 5, 1e-10, 0.0);
  CHECK(off.converged);
  CHECK(off.iters == 1);
  // weak coupling: geometric decay
  auto weak = coupling_iteration(s.op, phi, 12, 1e-10, 1e-3);
  CHECK((weak.converged || weak.inhomogeneity_norms.back() <
                               1e-6 * weak.inhomogeneity_norms.front()));
  for (double r : weak.ratios) CHECK(r < 1.0);
  // strong coupling: flagged
  auto strong = coupling_iteration(s.op, phi, 12, 1e-10, 1e6);
  CHECK((strong.diverged || !strong.converged));
}

TEST_CASE("appendix A obstruction check") {
  Rng rng(66);
  DiscreteSystem sys = random_system(5, 4, 1, 0.1, rng);
  SpinSetup ss = build_spin(sys);
  QKernel qk = q_kernel(ss);
  std::vector<char> omega = {1, 1, 0, 1, 0};
  Vec u = random_matrix(sys.f, 1, rng);
  AppendixAReport rep = appendix_a_check(ss, qk, omega, u);
  double cn = std::max(op_norm(rep.c_matrix), 1e-300);
  CHECK(rep.trace_c < 1e-10 * cn);
  CHECK(rep.quadratic_match < 1e-4);
  // all points inside: no cross pairs, C vanishes
  std::vector<char> all(5, 1);
  AppendixAReport trivial = appendix_a_check(ss, qk, all, u);
  CHECK(op_norm(trivial.c_matrix) < 1e-14);
  CHECK(std::abs(trivial.rhs) == 0.0);
  // u = 0
  AppendixAReport zero = appendix_a_check(ss, qk, omega, Vec(Vec::Zero(4)));
  CHECK(zero.lhs == 0.0);
}
