#ifndef CFSLAB_VARIATIONS_HPP
#define CFSLAB_VARIATIONS_HPP

#include "cfslab/spin.hpp"

namespace cfslab {

// Variational kernel Q(x_i, x_j): S_j -> S_i, with Q(x,y)* = Q(y,x).
struct QKernel {
  std::vector<std::vector<Mat>> q;
  std::vector<std::vector<char>> degenerate;  // fast path disabled on pair
  const Mat& operator()(int i, int j) const { return q[i][j]; }
};

// Lagrangian as a function of the kernel matrix P(x_i, x_j) alone, with
// P(x_j, x_i) varied dependently as the spin adjoint.
double lagrangian_of_P(const SpinSetup& ss, int i, int j, const Mat& Pij);

// Reference oracle: central Wirtinger finite differences of L in the
// entries of P(x,y); h = 1e-5 * scale.
Mat q_pair_fd(const SpinSetup& ss, int i, int j);
// Spectral fast path Q = 2 M P; sets degenerate when the closed-chain
// spectrum has a gap below degen_tol = 1e-6 * max|lambda|.
Mat q_pair_fast(const SpinSetup& ss, int i, int j, bool* degenerate);

QKernel q_kernel(const SpinSetup& ss);

// Rayleigh fit of the Lagrange parameter r from Q Psi = r Psi.
double fit_r(const SpinSetup& ss, const QKernel& qk);

// Gradient D1 L(x,y): Hermitian f x f with dL(x + tau H, y)/dtau = tr(H G).
Mat lagrangian_gradient_x(const Mat& x, const Mat& y, int n, double kappa);

// residual max_i || sum_j rho_j Q(i,j) psi^u(x_j) - r psi^u(x_i) ||
// in the spin scalar norm, one entry per input vector
std::vector<double> restricted_el_residual(const SpinSetup& ss,
                                           const QKernel& qk,
                                           const std::vector<Vec>& vectors);

struct EigenPerturbation {
  Vec lam0, lam1, lam2;
  std::vector<Mat> projectors;
  bool degenerate = false;
};
EigenPerturbation eigen_perturbation(const Mat& A0, const Mat& dA,
                                     int order = 2);

struct AbsVariation {
  double first = 0.0;
  double second = 0.0;
};
AbsVariation abs_variation(cplx lam, cplx dlam, cplx d2lam);

// General variation of the wave evaluation operator: one block
// Phi(x_i): H -> S_i per point, in spin-basis coordinates.
using VariationDirection = std::vector<Mat>;

VariationDirection random_variation(const SpinSetup& ss, Rng& rng);
// single-wave variation psi^u -> psi^u + tau phi
VariationDirection wave_variation(const SpinSetup& ss, const Vec& u,
                                  const WaveFunction& phi);

// first variation of the kernel induced by Phi
Mat delta_P(const SpinSetup& ss, const VariationDirection& phi, int i, int j);
// second variation (d^2/dtau^2): -2 dPsi(x) dPsi(y)^*
Mat delta2_P(const SpinSetup& ss, const VariationDirection& phi, int i, int j);

// Components of the second derivative of L along the declared path
// P_tau = P + tau dP + (tau^2/2) d2P_path:
//   total = lfe + dl_d2p + remainder
struct PairVariationTerms {
  double lfe = 0.0;
  double dl_d2p = 0.0;
  double remainder = 0.0;
  double total() const { return lfe + dl_d2p + remainder; }
  bool degenerate = false;
};
PairVariationTerms pair_second_variation(const SpinSetup& ss, int i, int j,
                                         const Mat& dP, const Mat& d2P_path,
                                         const Mat& Qij);

// Spec-facing pair operation. Inputs follow the paper's conventions for
// single-wave variations (d2P = -2 |phi><phi| for separated supports);
// internally the path carries d2P/2.
struct SecondVariationLagrangian {
  double lfe = 0.0;
  double q_term = 0.0;
  double remainder = 0.0;
  double total = 0.0;
  bool degenerate = false;
};
SecondVariationLagrangian second_variation_lagrangian(const SpinSetup& ss,
                                                      int i, int j,
                                                      const Mat& dP,
                                                      const Mat& d2P,
                                                      const Mat& Qij);

// FD oracle: 5-point second derivative of L along the same declared path.
double fd2_lagrangian_path(const SpinSetup& ss, int i, int j, const Mat& dP,
                           const Mat& d2P_path, double h = 1e-3);

struct SecondVariationReport {
  double lfe_term = 0.0;
  double q_term = 0.0;
  double remainder = 0.0;
  double total_assembled = 0.0;
  double total_fd = 0.0;
  std::vector<std::pair<int, int>> degenerate_pairs;
};
SecondVariationReport second_variation_action(const SpinSetup& ss,
                                              const QKernel& qk,
                                              const VariationDirection& phi);

// 5-point FD second derivative of S^eff along Psi + tau Phi
double fd2_action(const SpinSetup& ss, const VariationDirection& phi,
                  double h = 1e-3);

struct DecouplingRow {
  double t_lo = 0.0, t_hi = 0.0;
  double lfe_strip = 0.0;
  double q_strip = 0.0;
  double remainder_strip = 0.0;
};
std::vector<DecouplingRow> decoupling_report(
    const SpinSetup& ss, const QKernel& qk, const VariationDirection& phi,
    const std::vector<std::pair<double, double>>& strips);

}  // namespace cfslab

#endif
