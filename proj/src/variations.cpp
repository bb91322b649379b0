#include "cfslab/variations.hpp"

#include <algorithm>
#include <cmath>

namespace cfslab {

namespace {

struct ChainEigen {
  Vec lam;                   // padded to 2n, modulus desc then phase asc
  std::vector<Mat> proj;     // spectral projectors (empty for padding)
  std::vector<Mat> right;    // right eigenvector columns (d x 1)
  std::vector<Mat> left;     // left eigenvector rows (1 x d)
  int d = 0;                 // actual dimension of S_i
  bool degenerate = false;
};

bool mod_phase_less(const cplx& a, const cplx& b) {
  double ma = std::abs(a), mb = std::abs(b);
  if (ma != mb) return ma > mb;
  return std::arg(a) < std::arg(b);
}

ChainEigen chain_eigen(const Mat& A, int n) {
  ChainEigen ce;
  ce.d = static_cast<int>(A.rows());
  Eigen::ComplexEigenSolver<Mat> es(A, true);
  std::vector<int> idx(ce.d);
  for (int k = 0; k < ce.d; ++k) idx[k] = k;
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    return mod_phase_less(es.eigenvalues()(a), es.eigenvalues()(b));
  });
  Mat V(ce.d, ce.d);
  ce.lam = Vec::Zero(2 * n);
  for (int k = 0; k < ce.d; ++k) {
    ce.lam(k) = es.eigenvalues()(idx[k]);
    V.col(k) = es.eigenvectors().col(idx[k]);
  }
  double maxmod = ce.lam.cwiseAbs().maxCoeff();
  double degen_tol = 1e-6 * std::max(maxmod, 1e-300);
  for (int a = 0; a < ce.d; ++a) {
    if (std::abs(ce.lam(a)) < degen_tol) ce.degenerate = true;
    for (int b = a + 1; b < ce.d; ++b)
      if (std::abs(ce.lam(a) - ce.lam(b)) < degen_tol) ce.degenerate = true;
  }
  Eigen::FullPivLU<Mat> lu(V);
  if (!lu.isInvertible()) {
    ce.degenerate = true;
    return ce;
  }
  Mat W = lu.inverse();
  for (int k = 0; k < ce.d; ++k) {
    ce.right.push_back(V.col(k));
    ce.left.push_back(W.row(k));
    ce.proj.push_back(V.col(k) * W.row(k));
  }
  return ce;
}

}  // namespace

double lagrangian_of_P(const SpinSetup& ss, int i, int j, const Mat& Pij) {
  Mat Pji = ss.adjoint(i, j, Pij);
  Mat A = Pij * Pji;
  Eigen::ComplexEigenSolver<Mat> es(A, false);
  int n = ss.sys->n;
  std::vector<cplx> lam(2 * n, cplx(0));
  for (int k = 0; k < A.rows() && k < 2 * n; ++k) lam[k] = es.eigenvalues()(k);
  return lagrangian_of_spectrum(lam, n, ss.sys->kappa);
}

Mat q_pair_fd(const SpinSetup& ss, int i, int j) {
  Mat P = ss.P(i, j);
  double scale = std::max(op_norm(P), 1e-8);
  double h = 1e-5 * scale;
  int di = static_cast<int>(P.rows()), dj = static_cast<int>(P.cols());
  Mat K(di, dj);
  Mat t = P;
  for (int a = 0; a < di; ++a)
    for (int b = 0; b < dj; ++b) {
      cplx orig = t(a, b);
      t(a, b) = orig + h;
      double fp = lagrangian_of_P(ss, i, j, t);
      t(a, b) = orig - h;
      double fm = lagrangian_of_P(ss, i, j, t);
      double gre = (fp - fm) / (2 * h);
      t(a, b) = orig + cplx(0, h);
      fp = lagrangian_of_P(ss, i, j, t);
      t(a, b) = orig - cplx(0, h);
      fm = lagrangian_of_P(ss, i, j, t);
      double gim = (fp - fm) / (2 * h);
      t(a, b) = orig;
      K(a, b) = 0.5 * cplx(gre, gim);
    }
  // delta L = 2 Re sum K_ab conj(dP_ab) = 2 Re Tr(Q dP^*), Q = G_i^-1 K G_j
  return ss.spin_inner_gram(i).inverse() * K * ss.spin_inner_gram(j);
}

Mat q_pair_fast(const SpinSetup& ss, int i, int j, bool* degenerate) {
  int n = ss.sys->n;
  double kappa = ss.sys->kappa;
  Mat A = ss.closed_chain(i, j);
  ChainEigen ce = chain_eigen(A, n);
  if (degenerate) *degenerate = ce.degenerate;
  if (ce.degenerate) return q_pair_fd(ss, i, j);
  double sum_abs = ce.lam.cwiseAbs().sum();
  Mat M = Mat::Zero(ce.d, ce.d);
  for (int k = 0; k < ce.d; ++k) {
    double mod = std::abs(ce.lam(k));
    double ck = 2 * kappa * sum_abs;
    for (int l = 0; l < 2 * n; ++l)
      ck += (mod - std::abs(ce.lam(l))) / n;
    M += ck * std::conj(ce.lam(k)) / (2 * mod) * ce.proj[k];
  }
  return 2.0 * M * ss.P(i, j);
}

QKernel q_kernel(const SpinSetup& ss) {
  int N = ss.sys->size();
  QKernel qk;
  qk.q.assign(N, std::vector<Mat>(N));
  qk.degenerate.assign(N, std::vector<char>(N, 0));
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      bool degen = false;
      qk.q[i][j] = q_pair_fast(ss, i, j, &degen);
      qk.degenerate[i][j] = degen ? 1 : 0;
    }
  return qk;
}

double fit_r(const SpinSetup& ss, const QKernel& qk) {
  int N = ss.sys->size();
  double num = 0.0, den = 0.0;
  for (int i = 0; i < N; ++i) {
    Mat psi_i = ss.psi(i);
    Mat qpsi = Mat::Zero(ss.dim(i), ss.sys->f);
    for (int j = 0; j < N; ++j)
      qpsi += ss.sys->weights[j] * qk(i, j) * ss.psi(j);
    Mat gs = ss.spin_scalar_gram(i);
    num += ss.sys->weights[i] * (psi_i.adjoint() * gs * qpsi).trace().real();
    den += ss.sys->weights[i] * (psi_i.adjoint() * gs * psi_i).trace().real();
  }
  return den > 0 ? num / den : 0.0;
}

Mat lagrangian_gradient_x(const Mat& x, const Mat& y, int n, double kappa) {
  double h = 1e-5 * std::max(op_norm(x), 1e-8);
  auto f = [&](const Mat& m) { return lagrangian(m, y, n, kappa); };
  return fd_gradient_matrix(f, x, h);
}

std::vector<double> restricted_el_residual(const SpinSetup& ss,
                                           const QKernel& qk,
                                           const std::vector<Vec>& vectors) {
  int N = ss.sys->size();
  std::vector<double> out;
  for (const Vec& u : vectors) {
    WaveFunction psi = physical_wave_function(ss, u);
    double worst = 0.0;
    for (int i = 0; i < N; ++i) {
      Vec qpsi = Vec::Zero(ss.dim(i));
      for (int j = 0; j < N; ++j)
        qpsi += ss.sys->weights[j] * qk(i, j) * psi[j];
      Vec res = qpsi - ss.sys->r * psi[i];
      Mat gs = ss.spin_scalar_gram(i);
      worst = std::max(worst,
                       std::sqrt(std::abs((res.adjoint() * gs * res)(0))));
    }
    out.push_back(worst);
  }
  return out;
}

EigenPerturbation eigen_perturbation(const Mat& A0, const Mat& dA, int order) {
  int d = static_cast<int>(A0.rows());
  ChainEigen ce = chain_eigen(A0, (d + 1) / 2);
  EigenPerturbation ep;
  ep.lam0 = ce.lam.head(d);
  ep.lam1 = Vec::Zero(d);
  ep.lam2 = Vec::Zero(d);
  ep.degenerate = ce.degenerate;
  if (ce.degenerate || order < 1) return ep;
  ep.projectors = ce.proj;
  for (int k = 0; k < d; ++k) ep.lam1(k) = (ce.proj[k] * dA).trace();
  if (order >= 2)
    for (int k = 0; k < d; ++k) {
      cplx acc = 0;
      for (int m = 0; m < d; ++m) {
        if (m == k) continue;
        cplx a = (ce.left[k] * dA * ce.right[m])(0);
        cplx b = (ce.left[m] * dA * ce.right[k])(0);
        acc += a * b / (ep.lam0(k) - ep.lam0(m));
      }
      ep.lam2(k) = acc;
    }
  return ep;
}

AbsVariation abs_variation(cplx lam, cplx dlam, cplx d2lam) {
  double mod = std::abs(lam);
  if (mod <= 1e-300)
    throw std::domain_error("abs_variation at non-differentiable point");
  AbsVariation av;
  av.first = (std::conj(lam) * dlam).real() / mod;
  double conv = (std::norm(dlam) - av.first * av.first) / mod;
  av.second = (std::conj(lam) * d2lam).real() / mod + conv;
  return av;
}

VariationDirection random_variation(const SpinSetup& ss, Rng& rng) {
  VariationDirection phi;
  for (size_t i = 0; i < ss.bases.size(); ++i)
    phi.push_back(random_matrix(ss.dim(static_cast<int>(i)), ss.sys->f, rng));
  return phi;
}

VariationDirection wave_variation(const SpinSetup& ss, const Vec& u,
                                  const WaveFunction& phi_wave) {
  VariationDirection phi;
  double uu = u.squaredNorm();
  for (size_t i = 0; i < ss.bases.size(); ++i)
    phi.push_back(phi_wave[i] * u.adjoint() / uu);
  return phi;
}

// spin adjoint of Phi(x_i): S_i -> H
static Mat phi_star(const SpinSetup& ss, const VariationDirection& phi,
                    int i) {
  return phi[i].adjoint() * ss.spin_inner_gram(i);
}

Mat delta_P(const SpinSetup& ss, const VariationDirection& phi, int i,
            int j) {
  return -phi[i] * ss.psi_star(j) - ss.psi(i) * phi_star(ss, phi, j);
}

Mat delta2_P(const SpinSetup& ss, const VariationDirection& phi, int i,
             int j) {
  return -2.0 * phi[i] * phi_star(ss, phi, j);
}

PairVariationTerms pair_second_variation(const SpinSetup& ss, int i, int j,
                                         const Mat& dP, const Mat& d2P_path,
                                         const Mat& Qij) {
  int n = ss.sys->n;
  double kappa = ss.sys->kappa;
  Mat Pij = ss.P(i, j), Pji = ss.P(j, i);
  Mat A = Pij * Pji;
  ChainEigen ce = chain_eigen(A, n);
  PairVariationTerms out;
  out.degenerate = ce.degenerate;

  Mat dPs = ss.adjoint(i, j, dP);
  Mat d2Ps = ss.adjoint(i, j, d2P_path);
  out.dl_d2p = 2.0 * (Qij * d2Ps).trace().real();
  if (ce.degenerate) return out;  // lfe/remainder need spectral data

  Mat A1 = dP * Pji + Pij * dPs;
  int m2n = 2 * n;
  Eigen::VectorXd mod(m2n), dmod = Eigen::VectorXd::Zero(m2n),
                  d2mod = Eigen::VectorXd::Zero(m2n);
  for (int k = 0; k < m2n; ++k) mod(k) = std::abs(ce.lam(k));
  for (int k = 0; k < ce.d; ++k) {
    cplx lam = ce.lam(k);
    cplx l1 = (ce.proj[k] * A1).trace();
    cplx s2 = 0;
    for (int m = 0; m < ce.d; ++m) {
      if (m == k) continue;
      s2 += (ce.left[k] * A1 * ce.right[m])(0) *
            (ce.left[m] * A1 * ce.right[k])(0) / (ce.lam(k) - ce.lam(m));
    }
    // D^2 lambda(dP,dP) as full second derivative of the pure-dP path
    cplx d2lam = 2.0 * (s2 + (ce.proj[k] * (dP * dPs)).trace());
    AbsVariation av = abs_variation(lam, l1, d2lam);
    dmod(k) = av.first;
    d2mod(k) = av.second;
  }
  double dsum = dmod.sum(), msum = mod.sum(), d2sum = d2mod.sum();
  double lfe = 0.0, rem = 0.0;
  for (int k = 0; k < m2n; ++k)
    for (int l = 0; l < m2n; ++l) {
      double dd = dmod(k) - dmod(l);
      lfe += dd * dd;
      rem += (mod(k) - mod(l)) * (d2mod(k) - d2mod(l));
    }
  out.lfe = lfe / (2.0 * n) + 2.0 * kappa * dsum * dsum;
  out.remainder = rem / (2.0 * n) + 2.0 * kappa * msum * d2sum;
  return out;
}

SecondVariationLagrangian second_variation_lagrangian(const SpinSetup& ss,
                                                      int i, int j,
                                                      const Mat& dP,
                                                      const Mat& d2P,
                                                      const Mat& Qij) {
  PairVariationTerms t =
      pair_second_variation(ss, i, j, dP, 0.5 * d2P, Qij);
  SecondVariationLagrangian out;
  out.lfe = t.lfe;
  out.q_term = t.dl_d2p;
  out.remainder = t.remainder;
  out.total = t.total();
  out.degenerate = t.degenerate;
  return out;
}

double fd2_lagrangian_path(const SpinSetup& ss, int i, int j, const Mat& dP,
                           const Mat& d2P_path, double h_rel) {
  Mat P = ss.P(i, j);
  double h = h_rel * std::max(op_norm(P), 1e-8);
  auto L = [&](double tau) {
    return lagrangian_of_P(ss, i, j, P + tau * dP + 0.5 * tau * tau * d2P_path);
  };
  return (-L(2 * h) + 16 * L(h) - 30 * L(0) + 16 * L(-h) - L(-2 * h)) /
         (12 * h * h);
}

SecondVariationReport second_variation_action(const SpinSetup& ss,
                                              const QKernel& qk,
                                              const VariationDirection& phi) {
  const DiscreteSystem& sys = *ss.sys;
  int N = sys.size();
  SecondVariationReport rep;
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < N; ++j) {
      Mat dP = delta_P(ss, phi, i, j);
      Mat d2P = delta2_P(ss, phi, i, j);
      PairVariationTerms t =
          pair_second_variation(ss, i, j, dP, d2P, qk(i, j));
      double w = sys.weights[i] * sys.weights[j];
      rep.lfe_term += w * t.lfe;
      rep.remainder += w * t.remainder;
      if (t.degenerate) rep.degenerate_pairs.push_back({i, j});
    }
    // q-term assembled directly in operator form
    Mat qphi = Mat::Zero(ss.dim(i), sys.f);
    for (int j = 0; j < N; ++j)
      qphi += sys.weights[j] * qk(i, j) * phi[j];
    qphi -= sys.r * phi[i];
    rep.q_term += -4.0 * sys.weights[i] *
                  (phi_star(ss, phi, i) * qphi).trace().real();
  }
  rep.total_assembled = rep.lfe_term + rep.q_term + rep.remainder;
  rep.total_fd = fd2_action(ss, phi);
  return rep;
}

double fd2_action(const SpinSetup& ss, const VariationDirection& phi,
                  double h_rel) {
  const DiscreteSystem& sys = *ss.sys;
  int N = sys.size();
  double scale = 0.0;
  for (int i = 0; i < N; ++i) scale = std::max(scale, op_norm(ss.psi(i)));
  double h = h_rel * std::max(scale, 1e-8);
  auto S = [&](double tau) {
    double val = 0.0;
    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < N; ++j) {
        Mat Pt = ss.P(i, j) + tau * delta_P(ss, phi, i, j) +
                 0.5 * tau * tau * delta2_P(ss, phi, i, j);
        val += sys.weights[i] * sys.weights[j] *
               lagrangian_of_P(ss, i, j, Pt);
      }
      // tr x_tau = -tr( (Psi + tau Phi)^* (Psi + tau Phi) )
      Mat psi_t = ss.psi(i) + tau * phi[i];
      Mat psi_ts = ss.psi_star(i) + tau * phi_star(ss, phi, i);
      val -= 2.0 * sys.r * sys.weights[i] * (-(psi_ts * psi_t).trace().real());
    }
    return val;
  };
  return (-S(2 * h) + 16 * S(h) - 30 * S(0) + 16 * S(-h) - S(-2 * h)) /
         (12 * h * h);
}

std::vector<DecouplingRow> decoupling_report(
    const SpinSetup& ss, const QKernel& qk, const VariationDirection& phi,
    const std::vector<std::pair<double, double>>& strips) {
  const DiscreteSystem& sys = *ss.sys;
  int N = sys.size();
  std::vector<DecouplingRow> rows;
  for (const auto& [a, b] : strips) {
    DecouplingRow row;
    row.t_lo = a;
    row.t_hi = b;
    double lfe = 0, rem = 0, qv = 0;
    for (int i = 0; i < N; ++i) {
      if (sys.times[i] < a || sys.times[i] > b) continue;
      for (int j = 0; j < N; ++j) {
        if (sys.times[j] < a || sys.times[j] > b) continue;
        Mat dP = delta_P(ss, phi, i, j);
        Mat d2P = delta2_P(ss, phi, i, j);
        PairVariationTerms t =
            pair_second_variation(ss, i, j, dP, d2P, qk(i, j));
        double w = sys.weights[i] * sys.weights[j];
        lfe += w * t.lfe;
        rem += w * t.remainder;
        qv += w * (phi_star(ss, phi, i) * (qk(i, j) * phi[j])).trace().real();
      }
      qv -= sys.r * sys.weights[i] *
            (phi_star(ss, phi, i) * phi[i]).trace().real();
    }
    row.lfe_strip = std::abs(lfe);
    row.q_strip = std::abs(qv);
    row.remainder_strip = std::abs(rem);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace cfslab
