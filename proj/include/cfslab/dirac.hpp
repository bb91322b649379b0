#ifndef CFSLAB_DIRAC_HPP
#define CFSLAB_DIRAC_HPP

#include <array>
#include <functional>
#include <vector>

#include "cfslab/core.hpp"

namespace cfslab {

// 1+1D Dirac dynamics per spatial Fourier mode. Two-component spinors,
// gamma^0 = diag(1,-1), gamma^1 antisymmetric real with (gamma^1)^2 = -1.
struct DiracMode {
  double k = 0.0;
  double m = 1.0;
  double omega = 1.0;  // sqrt(k^2 + m^2)
  Mat g0, g1;          // 2x2 gamma matrices
  Mat B;               // -k g1 - m, so (i d/dx-slash - m) -> i g0 d/dt + B
  Vec u_plus, u_minus; // Dirac spinors, H u = +/- omega u, orthonormal
};

DiracMode dirac_mode(double k, double m);

// eta(tau) = n exp(-tau^2 delta_g), n = sqrt(delta_g/pi) when normalized
// (Dirac-sequence convention), else 1
struct CutoffProfile {
  double delta_g = 1.0;
  bool normalized = false;
  double operator()(double tau) const;
  double hat(double omega) const;        // Fourier transform, always > 0
  double hat_prime(double omega) const;  // d hat / d omega
};

// psi(t) = (a+ + t b+) e^{-i w t} u+  +  (a- + t b-) e^{+i w t} u-
struct ModeSolution {
  cplx a_plus = 0, a_minus = 0, b_plus = 0, b_minus = 0;
  Vec value(const DiracMode& md, double t) const;
  Vec dirac1(const DiracMode& md, double t) const;  // psi_1^D
  Vec dirac2(const DiracMode& md, double t) const;  // psi_2^D
};

// (i g0 d/dt + B) g0 (i g0 d/dt + B) = c2 d^2/dt^2 + c1 d/dt + c0
struct ELOperator {
  Mat c2, c1, c0;
  // the matrix acting on e^{-i k0 t} amplitudes, left-multiplied by g0 so
  // its eigenvalues are (|k0| +/- omega)^2
  Mat symbol(double k0) const;
};

ELOperator el_operator_mode(const DiracMode& md);

// max norm of the EL residual over interior grid points, 4th-order stencils;
// samples on a uniform grid with spacing h
double el_residual(const DiracMode& md, const std::vector<Vec>& samples,
                   double h);

struct BasisResidualReport {
  std::array<double, 4> residual{};  // per basis solution, coarse grid
  std::array<double, 4> order{};     // convergence order from halving h
};

BasisResidualReport solution_basis_and_residual(const DiracMode& md,
                                                double t_lo, double t_hi,
                                                int n);

// double trapezoid quadrature of the eta-smeared action on sampled psi;
// exact positivity: the Gaussian kernel matrix is positive definite
double action_mode(const DiracMode& md, const std::vector<Vec>& psi,
                   const CutoffProfile& eta, const std::vector<double>& grid);

struct DiracCommutatorReport {
  cplx value = 0;       // quadrature evaluation at t2
  cplx analytic = 0;    // closed form via hat(eta) and its derivative
  double quadrature_error = 0.0;
  double conservation_drift = 0.0;  // over a t2 sample grid
};

DiracCommutatorReport dirac_commutator(const DiracMode& md,
                                       const ModeSolution& psi,
                                       const ModeSolution& phi,
                                       const CutoffProfile& eta, double t2);

// Fourier transform of the lower mass shell away from the light cone;
// xi2 is the signed Minkowski square, positive timelike (future-directed)
cplx bessel_T_a(double a, double xi2, double lightcone_tol = 1e-8);

struct KernelAsymptoticsReport {
  std::vector<double> xi2;
  std::vector<double> ratio;  // |U| / |c a0 T_{a0} / xi2|
  double ratio_median = 0.0;
  double plateau_dev = 0.0;   // max relative deviation from the median
  double p_exponent = 0.0;    // envelope fit of ||P_m||, expect -3/4
  double q_exponent = 0.0;    // envelope fit of ||Q||/||P_m||, expect -3/2
};

// f piecewise smooth on (0, a0], vanishing at a0 with derivative jump c;
// quadrature of the mass-shell superposition on the timelike grid plus the
// P/M/Q composition chain at mass m
KernelAsymptoticsReport kernel_asymptotics(const std::function<double(double)>& f,
                                           double a0, double c,
                                           const std::vector<double>& xi2_grid,
                                           double m = 1.0);

}  // namespace cfslab

#endif
