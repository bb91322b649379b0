#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "cfslab/core.hpp"
#include "cfslab/json_io.hpp"
#include "doctest.h"

using namespace cfslab;

static Mat diag2(double a, double b) {
  Mat m = Mat::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

TEST_CASE("chain_spectrum: idempotent projector") {
  Mat x = diag2(1, 0);
  auto cs = chain_spectrum(x, x, 1);
  REQUIRE(cs.values.size() == 2);
  CHECK(std::abs(cs.values[0] - cplx(1)) < 1e-12);
  CHECK(std::abs(cs.values[1]) < 1e-12);
}

TEST_CASE("chain_spectrum: tilted projector pair") {
  // x = e1 e1^T, y = v v^T with v = (cos t, sin t), t = pi/4
  double t = M_PI / 4;
  Mat x = diag2(1, 0);
  Vec v(2);
  v << std::cos(t), std::sin(t);
  Mat y = v * v.adjoint();
  auto cs = chain_spectrum(x, y, 1);
  // single nonzero eigenvalue cos^2 t = 1/2; cross-check by direct eigensolve
  CHECK(std::abs(cs.values[0] - cplx(0.5)) < 1e-12);
  CHECK(std::abs(cs.values[1]) < 1e-12);
  Eigen::ComplexEigenSolver<Mat> es(x * y);
  double got = es.eigenvalues().cwiseAbs().maxCoeff();
  CHECK(got == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("chain_spectrum: zero operator") {
  Rng rng(1);
  Mat x = random_point(2, 1, rng);
  Mat y = Mat::Zero(2, 2);
  auto cs = chain_spectrum(x, y, 1);
  CHECK(std::abs(cs.values[0]) == 0.0);
  CHECK(std::abs(cs.values[1]) == 0.0);
}

TEST_CASE("chain_spectrum ordering is deterministic") {
  std::vector<cplx> lam = {cplx(0, 1), cplx(0, -1), cplx(-1, 0), cplx(1, 0)};
  // same moduli: expect phase ascending in (-pi, pi]
  std::vector<cplx> sorted = lam;
  std::sort(sorted.begin(), sorted.end(), [](const cplx& a, const cplx& b) {
    if (std::abs(a) != std::abs(b)) return std::abs(a) > std::abs(b);
    return std::arg(a) < std::arg(b);
  });
  CHECK(std::arg(sorted[0]) <= std::arg(sorted[1]));
  CHECK(std::arg(sorted[2]) <= std::arg(sorted[3]));
}

TEST_CASE("classify: equal moduli spacelike") {
  CHECK(classify_spectrum({cplx(1), cplx(1)}) == CausalClass::spacelike);
}

TEST_CASE("classify: timelike diag(2,-1) squared") {
  Mat x = diag2(2, -1);
  CHECK(classify(x, x, 1) == CausalClass::timelike);
  auto cs = chain_spectrum(x, x, 1);
  CHECK(std::abs(cs.values[0] - cplx(4)) < 1e-12);
  CHECK(std::abs(cs.values[1] - cplx(1)) < 1e-12);
}

TEST_CASE("classify: lightlike complex unequal moduli") {
  CHECK(classify_spectrum({cplx(0, 2), cplx(1)}) == CausalClass::lightlike);
}

TEST_CASE("classify: all-zero spectrum is spacelike by convention") {
  CHECK(classify_spectrum({cplx(0), cplx(0)}) == CausalClass::spacelike);
}

TEST_CASE("lagrangian hand value") {
  // lambda = {1, 0}, n = 1, kappa = 0.1: (1/4)(1+1) + 0.1 = 0.6
  double v = lagrangian_of_spectrum({cplx(1), cplx(0)}, 1, 0.1);
  CHECK(v == doctest::Approx(0.6).epsilon(1e-14));
  // brute force over index pairs
  std::vector<double> mods = {1.0, 0.0};
  double s = 0;
  for (double a : mods)
    for (double b : mods) s += (a - b) * (a - b);
  CHECK(v == doctest::Approx(s / 4.0 + 0.1 * 1.0).epsilon(1e-14));
}

TEST_CASE("lagrangian spacelike pair pure kappa") {
  double c = 0.7;
  double v = lagrangian_of_spectrum({cplx(c), cplx(c)}, 1, 0.25);
  CHECK(v == doctest::Approx(0.25 * 4 * c * c).epsilon(1e-14));
}

TEST_CASE("lagrangian zero operator") {
  Rng rng(2);
  Mat x = random_point(3, 1, rng);
  CHECK(lagrangian(x, Mat::Zero(3, 3), 1, 0.1) == 0.0);
}

TEST_CASE("causal_action single point") {
  DiscreteSystem sys;
  sys.n = 1;
  sys.f = 2;
  sys.kappa = 0.1;
  sys.points = {diag2(1, 0)};
  sys.weights = {1.0};
  sys.times = {0.0};
  CHECK(causal_action(sys) == doctest::Approx(0.6).epsilon(1e-14));

  SUBCASE("splitting the weight leaves the action unchanged") {
    DiscreteSystem two = sys;
    two.points.push_back(sys.points[0]);
    two.weights = {0.5, 0.5};
    two.times = {0.0, 1.0};
    CHECK(causal_action(two) == doctest::Approx(0.6).epsilon(1e-13));
  }
}

TEST_CASE("causal_action zero points") {
  DiscreteSystem sys;
  sys.n = 1;
  sys.f = 2;
  sys.kappa = 0.3;
  sys.points = {Mat::Zero(2, 2), Mat::Zero(2, 2)};
  sys.weights = {0.5, 0.5};
  sys.times = {0, 1};
  CHECK(causal_action(sys) == 0.0);
}

TEST_CASE("Lagrangian symmetry and positivity on random pairs") {
  Rng rng(3);
  for (int k = 0; k < 30; ++k) {
    Mat x = random_point(4, 1, rng), y = random_point(4, 1, rng);
    double lxy = lagrangian(x, y, 1, 0.1);
    double lyx = lagrangian(y, x, 1, 0.1);
    CHECK(std::abs(lxy - lyx) <= 1e-10 * std::max(1.0, std::abs(lxy)));
    CHECK(lxy >= 0.0);
    auto cs = chain_spectrum(x, y, 1);
    double sum_abs = 0;
    for (auto& l : cs.values) sum_abs += std::abs(l);
    CHECK(lxy >= 0.1 * sum_abs * sum_abs - 1e-12);
    if (classify(x, y, 1) == CausalClass::spacelike)
      CHECK(lxy - 0.1 * sum_abs * sum_abs <= 1e-8 * std::max(1.0, lxy));
  }
}

TEST_CASE("classify invariant under joint unitary conjugation") {
  Rng rng(4);
  for (int k = 0; k < 20; ++k) {
    Mat x = random_point(3, 1, rng), y = random_point(3, 1, rng);
    Mat u = random_unitary(3, rng);
    CHECK(classify(x, y, 1) ==
          classify(hermitize(u * x * u.adjoint()),
                   hermitize(u * y * u.adjoint()), 1));
  }
}

TEST_CASE("causal_action invariant under point permutation") {
  Rng rng(5);
  DiscreteSystem sys = random_system(4, 3, 1, 0.2, rng);
  DiscreteSystem perm = sys;
  std::swap(perm.points[0], perm.points[2]);
  std::swap(perm.weights[0], perm.weights[2]);
  std::swap(perm.times[0], perm.times[2]);
  CHECK(causal_action(sys) == doctest::Approx(causal_action(perm)).epsilon(1e-12));
}

TEST_CASE("constraint_report") {
  DiscreteSystem sys;
  sys.n = 1;
  sys.f = 2;
  sys.points = {diag2(2, -1)};
  sys.weights = {1.0};
  sys.times = {0.0};
  auto rep = constraint_report(sys);
  CHECK(rep.volume == doctest::Approx(1.0));
  CHECK(rep.trace == doctest::Approx(1.0));
  CHECK(rep.local_traces[0] == doctest::Approx(1.0));
}

TEST_CASE("signature validation rejects too many positive eigenvalues") {
  Mat m = 0.5 * Mat::Identity(2, 2);
  CHECK_THROWS(validate_point(m, 1));
  CHECK_NOTHROW(validate_point(diag2(1, 0), 1));
}

TEST_CASE("ell basics") {
  DiscreteSystem sys;
  sys.n = 1;
  sys.f = 2;
  sys.kappa = 0.1;
  sys.points = {diag2(1, 0)};
  sys.weights = {1.0};
  sys.times = {0.0};
  sys.r = sys.s = 0.0;
  CHECK(ell(Mat::Zero(2, 2), sys) == doctest::Approx(0.0).epsilon(1e-14));
  sys.s = fit_s(sys);
  CHECK(std::abs(ell(sys.points[0], sys)) < 1e-12);
}

TEST_CASE("clip_signature keeps at most n positive and n negative") {
  Rng rng(6);
  Mat h = random_hermitian(5, rng);
  Mat c = clip_signature(h, 1);
  auto sig = signature_of(c, 1e-9 * op_norm(c));
  CHECK(sig.positive <= 1);
  CHECK(sig.negative <= 1);
}

TEST_CASE("minimize_action: N=1 projector stays at closed-form minimum") {
  double kappa = 0.1;
  DiscreteSystem sys;
  sys.n = 1;
  sys.f = 2;
  sys.kappa = kappa;
  // slight perturbation of a rank-1 unit-trace projector
  Mat x = diag2(1, 0);
  x(0, 1) = cplx(0.02, 0.01);
  x(1, 0) = std::conj(x(0, 1));
  sys.points = {clip_signature(x, 1)};
  sys.weights = {1.0};
  sys.times = {0.0};
  auto res = minimize_action(sys);
  CHECK(res.action == doctest::Approx(0.5 + kappa).epsilon(1e-6));
  CHECK(res.system.points[0].trace().real() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("minimize_action: critical start returned unchanged") {
  DiscreteSystem sys;
  sys.n = 1;
  sys.f = 2;
  sys.kappa = 0.1;
  sys.points = {diag2(1, 0)};
  sys.weights = {1.0};
  sys.times = {0.0};
  auto res = minimize_action(sys);
  CHECK(res.converged);
  CHECK(res.iters == 0);
  CHECK((res.system.points[0] - sys.points[0]).norm() < 1e-12);
}

TEST_CASE("minimize_action: random start descends with small gradient") {
  Rng rng(7);
  DiscreteSystem sys = random_system(2, 2, 1, 0.1, rng, true);
  double s0 = causal_action(sys);
  MinimizeOptions opts;
  opts.max_iters = 600;
  auto res = minimize_action(sys, opts);
  CHECK(res.action <= s0 + 1e-12);
  CHECK(res.grad_norm < 1e-5);
  double vol = 0;
  for (double w : res.system.weights) vol += w;
  CHECK(vol == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("json round trip") {
  Rng rng(8);
  DiscreteSystem sys = random_system(3, 3, 1, 0.15, rng);
  sys.r = 0.25;
  sys.s = 0.125;
  Json j = system_to_json(sys);
  DiscreteSystem back = system_from_json(j);
  CHECK(back.n == sys.n);
  CHECK(back.f == sys.f);
  CHECK(back.kappa == sys.kappa);
  CHECK(back.r == sys.r);
  for (int i = 0; i < sys.size(); ++i) {
    CHECK((back.points[i] - sys.points[i]).norm() == 0.0);
    CHECK(back.weights[i] == sys.weights[i]);
    CHECK(back.times[i] == sys.times[i]);
  }
  // byte-identical re-serialization
  CHECK(system_to_json(back).dump() == j.dump());
}
