#include "cfslab/spin.hpp"

#include <algorithm>
#include <cmath>

namespace cfslab {

SpinBasis spin_basis(const Mat& x) {
  Eigen::SelfAdjointEigenSolver<Mat> es(hermitize(x));
  double tol = 1e-9 * std::max(op_norm(x), 0.0);
  SpinBasis sb;
  int f = static_cast<int>(x.rows());
  std::vector<int> keep;
  for (int i = 0; i < f; ++i)
    if (std::abs(es.eigenvalues()(i)) > tol) keep.push_back(i);
  // descending eigenvalue order: positive part first
  std::sort(keep.begin(), keep.end(), [&](int a, int b) {
    return es.eigenvalues()(a) > es.eigenvalues()(b);
  });
  sb.d = static_cast<int>(keep.size());
  sb.basis = Mat(f, sb.d);
  sb.ev = Eigen::VectorXd(sb.d);
  for (int k = 0; k < sb.d; ++k) {
    sb.basis.col(k) = es.eigenvectors().col(keep[k]);
    sb.ev(k) = es.eigenvalues()(keep[k]);
  }
  return sb;
}

Mat SpinSetup::P(int i, int j) const {
  return bases[i].basis.adjoint() * bases[j].basis *
         bases[j].ev.asDiagonal();
}

Mat SpinSetup::spin_inner_gram(int i) const {
  return Mat((-bases[i].ev).asDiagonal());
}

Mat SpinSetup::spin_scalar_gram(int i) const {
  return Mat(bases[i].ev.cwiseAbs().asDiagonal());
}

Mat SpinSetup::sign_op(int i) const {
  Eigen::VectorXd s(bases[i].d);
  for (int k = 0; k < bases[i].d; ++k) s(k) = bases[i].ev(k) > 0 ? -1.0 : 1.0;
  return Mat(s.asDiagonal());
}

Mat SpinSetup::adjoint(int i, int j, const Mat& T) const {
  Mat Gi = spin_inner_gram(i), Gj = spin_inner_gram(j);
  return Gj.inverse() * T.adjoint() * Gi;
}

SpinSetup build_spin(const DiscreteSystem& sys) {
  SpinSetup ss;
  ss.sys = &sys;
  for (const auto& x : sys.points) ss.bases.push_back(spin_basis(x));
  return ss;
}

SpinProducts spin_products(const Mat& x, const Vec& u, const Vec& v,
                           double membership_tol) {
  SpinBasis sb = spin_basis(x);
  Mat proj = sb.basis * sb.basis.adjoint();
  double nu = u.norm(), nv = v.norm();
  if ((proj * u - u).norm() > membership_tol * std::max(nu, 1e-300) ||
      (proj * v - v).norm() > membership_tol * std::max(nv, 1e-300))
    throw std::invalid_argument("vector not in spin space");
  Eigen::SelfAdjointEigenSolver<Mat> es(hermitize(x));
  Mat absx = es.eigenvectors() *
             es.eigenvalues().cwiseAbs().asDiagonal() *
             es.eigenvectors().adjoint();
  SpinProducts sp;
  sp.spin_inner = -(u.adjoint() * (x * v))(0);
  sp.spin_scalar = (u.adjoint() * (absx * v))(0);
  return sp;
}

WaveFunction physical_wave_function(const SpinSetup& ss, const Vec& u) {
  WaveFunction psi;
  for (size_t i = 0; i < ss.bases.size(); ++i)
    psi.push_back(ss.project(static_cast<int>(i), u));
  return psi;
}

double spectrum_mismatch(std::vector<cplx> a, std::vector<cplx> b) {
  size_t m = std::max(a.size(), b.size());
  a.resize(m, cplx(0));
  b.resize(m, cplx(0));
  std::vector<bool> used(m, false);
  double worst = 0.0;
  // match largest first to its nearest unused partner
  std::sort(a.begin(), a.end(),
            [](const cplx& p, const cplx& q) { return std::abs(p) > std::abs(q); });
  for (const auto& av : a) {
    int best = -1;
    double bd = 0.0;
    for (size_t k = 0; k < m; ++k) {
      if (used[k]) continue;
      double d = std::abs(av - b[k]);
      if (best < 0 || d < bd) {
        best = static_cast<int>(k);
        bd = d;
      }
    }
    used[best] = true;
    worst = std::max(worst, bd);
  }
  return worst;
}

IsospectralityReport isospectrality_check(const SpinSetup& ss, int i, int j) {
  const DiscreteSystem& sys = *ss.sys;
  Mat prod = sys.points[i] * sys.points[j];
  Eigen::ComplexEigenSolver<Mat> es1(prod, false);
  Eigen::ComplexEigenSolver<Mat> es2(ss.closed_chain(i, j), false);
  double tol = 1e-9 * op_norm(sys.points[i]) * op_norm(sys.points[j]);
  std::vector<cplx> s1, s2;
  for (int k = 0; k < es1.eigenvalues().size(); ++k)
    if (std::abs(es1.eigenvalues()(k)) > tol) s1.push_back(es1.eigenvalues()(k));
  for (int k = 0; k < es2.eigenvalues().size(); ++k)
    if (std::abs(es2.eigenvalues()(k)) > tol) s2.push_back(es2.eigenvalues()(k));
  IsospectralityReport rep;
  rep.max_mismatch = spectrum_mismatch(s1, s2);
  return rep;
}

}  // namespace cfslab
