#ifndef CFSLAB_WAVE_HPP
#define CFSLAB_WAVE_HPP

#include "cfslab/variations.hpp"

namespace cfslab {

struct TimeStrip {
  double t0 = 0.0, t_min = 0.0, t_max = 0.0, t1 = 0.0;
  double delta = 0.0;
  // margins required by the cutoff construction
  void validate() const;
};

std::vector<int> strip_members(const DiscreteSystem& sys,
                               double lo, double hi);

struct KernelHygieneReport {
  double max_l1 = 0.0;            // max_i sum_j rho_j ||Q(x_i,x_j)||
  bool l1_ok = false;
  std::vector<int> l1_violations;
  bool range_ok = false;
  std::vector<std::pair<int, int>> range_violations;
};

KernelHygieneReport kernel_hygiene(const SpinSetup& ss, const QKernel& qk,
                                   double delta, double c,
                                   double range_tol = 1e-12);

// The operator representing the effective action S^eff_Omega relative to
// the positive strip product <.|.>_Omega. In spin-basis coordinates the
// kernel action sum_j rho_j Q(x_i,x_j) psi_j - r psi_i picks up the
// Euclidean sign operator when represented against the scalar Gram.
struct StripOperator {
  const SpinSetup* ss = nullptr;
  const QKernel* qk = nullptr;
  TimeStrip strip;
  std::vector<int> members;   // point indices with t_i in [t0, t1]
  std::vector<int> offset;    // block offsets into strip vectors
  int dim = 0;

  Mat qmat;                   // Hermitian matrix in orthonormal coordinates
  Eigen::VectorXd evals;
  Mat evecs;
  double spectral_norm = 0.0;
  double norm_bound = 0.0;    // Schwarz estimate from the L1 constant
  double symmetry_error = 0.0;
  double rank_tol = 1e-10;

  int block_of(int point) const;            // -1 if outside the strip
  Vec pack(const WaveFunction& w) const;    // restrict to the strip
  WaveFunction expand(const Vec& v) const;  // zero off the strip
  Vec to_ortho(const Vec& natural) const;
  Vec from_ortho(const Vec& ortho) const;
  // kernel action in natural coordinates
  Vec apply_kernel(const Vec& natural) const;
  cplx strip_product(const Vec& a, const Vec& b) const;
  double strip_norm(const Vec& a) const;
  // restriction of a strip vector to a time window (zeroing elsewhere)
  Vec window(const Vec& natural, double lo, double hi) const;
  // blockwise Euclidean sign operator
  Vec apply_sign(const Vec& natural) const;
};

StripOperator assemble_strip_operator(const SpinSetup& ss, const QKernel& qk,
                                      const TimeStrip& strip);

struct SolveReport {
  Vec psi;                 // minimal-norm solution, natural coordinates
  double residual = 0.0;   // ||Q psi - phi||_Omega / ||phi||_Omega
  double range_defect = 0.0;
};

SolveReport solve_inhomogeneous(const StripOperator& op, const Vec& phi,
                                double adm_tol = 1e-8);

struct HomSolveReport {
  Vec psi;
  double interior_residual = 0.0;  // max block norm of the kernel action
  SolveReport solve;
};

HomSolveReport homogeneous_from_boundary(const StripOperator& op,
                                         const Vec& phi1, const Vec& phi0,
                                         double lambda);

cplx commutator_inner(const SpinSetup& ss, const QKernel& qk,
                      const WaveFunction& psi, const WaveFunction& phi,
                      double t);
// general region variant, membership by point index
cplx commutator_inner_region(const SpinSetup& ss, const QKernel& qk,
                             const WaveFunction& psi, const WaveFunction& phi,
                             const std::vector<char>& in_omega);

struct ConservationSeries {
  std::vector<double> t;
  std::vector<cplx> value;
  double max_drift = 0.0;
};

ConservationSeries conservation_series(const StripOperator& op,
                                       const Vec& psi, const Vec& phi,
                                       const std::vector<double>& grid);

struct PositivityReport {
  Vec psi1;                 // unit-lambda correction
  double lambda = 0.0;      // default derived when input <= 0
  double past_norm2 = 0.0;  // ||psi0||^2 on the past boundary strip
  double linear_coef = 0.0; // Richardson-extrapolated from the sweep
  double remainder_slope = 0.0;
  bool remainder_floor = false;  // remainder below noise, slope pinned at 2
  std::vector<double> sweep_lambda;
  std::vector<double> sweep_value;
};

PositivityReport positivity_perturbation(const StripOperator& op,
                                         const Vec& psi0, double lambda = 0.0);

struct ExtendedSpaceReport {
  Mat gram;                 // at t_eval, after assembling all blocks
  Mat gram_check;           // same at t_check
  int kernel_dim = 0;
  double min_eigenvalue = 0.0;
  bool psd = false;
  double time_invariance = 0.0;     // max entrywise |gram - gram_check|
  double kernel_neutrality = 0.0;   // max change under Q-kernel shifts
  double c_fit = 0.0;               // fitted constant of the representation
  std::vector<double> embedding_residuals;  // per Hilbert vector
  std::vector<double> support_defects;      // cutoff image leakage per u
  double lambda = 0.0;
};

ExtendedSpaceReport build_extended_space(const StripOperator& op,
                                         const std::vector<Vec>& hf,
                                         double lambda, double t_eval,
                                         double t_check, int n_samples,
                                         Rng& rng, double psd_tol = 1e-10);

struct CouplingReport {
  std::vector<double> inhomogeneity_norms;
  std::vector<double> ratios;
  int iters = 0;
  bool converged = false;
  bool diverged = false;
};

CouplingReport coupling_iteration(const StripOperator& op,
                                  const VariationDirection& initial,
                                  int max_iters, double couple_tol = 1e-10,
                                  double coupling_scale = 1.0);

struct AppendixAReport {
  Mat c_matrix;
  double trace_c = 0.0;
  double lhs = 0.0;   // <u|Cu>
  cplx rhs = 0.0;     // commutator inner product over Omega
  double quadratic_match = 0.0;  // relative mismatch
};

AppendixAReport appendix_a_check(const SpinSetup& ss, const QKernel& qk,
                                 const std::vector<char>& in_omega,
                                 const Vec& u);

}  // namespace cfslab

#endif
