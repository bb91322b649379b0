#ifndef CFSLAB_CORE_HPP
#define CFSLAB_CORE_HPP

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace cfslab {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

struct EigenFailure : std::runtime_error {
  int i = -1, j = -1;
  EigenFailure(const std::string& msg, int i_, int j_)
      : std::runtime_error(msg), i(i_), j(j_) {}
};

// Spectral norm (largest singular value).
double op_norm(const Mat& a);

// (a + a^†)/2
Mat hermitize(const Mat& a);

bool is_hermitian(const Mat& a, double rel_tol = 1e-12);

// Eigenvalue counts above +tol / below -tol.
struct Signature {
  int positive = 0;
  int negative = 0;
};
Signature signature_of(const Mat& x, double tol);

// A spacetime point operator is just a Hermitian matrix; validation is
// performed against the spin dimension of the enclosing system.
void validate_point(const Mat& x, int n, const std::string& where = "");

struct DiscreteSystem {
  int n = 1;
  int f = 2;
  double kappa = 0.1;
  double r = 0.0;
  double s = 0.0;
  std::vector<Mat> points;
  std::vector<double> weights;
  std::vector<double> times;

  int size() const { return static_cast<int>(points.size()); }
  void validate() const;
};

// Padded eigenvalues of the operator product xy, sorted by descending
// modulus, ties broken by ascending phase in (-pi, pi].
struct ChainSpectrum {
  std::vector<cplx> values;  // exactly 2n entries
};

ChainSpectrum chain_spectrum(const Mat& x, const Mat& y, int n,
                             int pair_i = -1, int pair_j = -1);

enum class CausalClass { spacelike, timelike, lightlike };
const char* to_string(CausalClass c);

CausalClass classify(const Mat& x, const Mat& y, int n,
                     double class_tol = 1e-8);
CausalClass classify_spectrum(const std::vector<cplx>& lam,
                              double class_tol = 1e-8);

double lagrangian_of_spectrum(const std::vector<cplx>& lam, int n,
                              double kappa);
double lagrangian(const Mat& x, const Mat& y, int n, double kappa);

double causal_action(const DiscreteSystem& sys);

struct ConstraintReport {
  double volume = 0.0;
  double trace = 0.0;
  std::vector<double> local_traces;
};
ConstraintReport constraint_report(const DiscreteSystem& sys);

// ell(z) = sum_j rho_j L(z, x_j) - r (tr z - 1) - s
double ell(const Mat& z, const DiscreteSystem& sys);

// Fits s so that the weighted mean of ell over the points vanishes
// (r acts on tr-1 which is zero for unit-trace points).
double fit_s(const DiscreteSystem& sys);

struct MinimizeOptions {
  int max_iters = 400;
  double gtol = 1e-6;
  double initial_step = 0.1;
  double armijo_c = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 40;
  bool rescale_trace = true;   // project each point to unit local trace
  double trace_penalty = 0.0;  // used instead of rescaling when > 0
  double fd_step = 1e-5;       // relative central-difference step
  bool vary_weights = false;
};

struct MinimizeResult {
  DiscreteSystem system;
  double action = 0.0;
  double grad_norm = 0.0;
  int iters = 0;
  bool converged = false;
  bool clipped = false;  // signature clipping was active at the solution
  std::string warning;
};

MinimizeResult minimize_action(const DiscreteSystem& initial,
                               const MinimizeOptions& opts = {});

// Keep at most n positive / n negative eigenvalues (largest by modulus).
Mat clip_signature(const Mat& x, int n);

// Hermitian gradient matrix G with df = tr(G dX) for Hermitian dX,
// central differences with absolute step h.
Mat fd_gradient_matrix(const std::function<double(const Mat&)>& f,
                       const Mat& x, double h);

// ---- random generators (deterministic given the engine state) ----

using Rng = std::mt19937_64;

Mat random_matrix(int rows, int cols, Rng& rng);
Mat random_hermitian(int f, Rng& rng);
Mat random_unitary(int f, Rng& rng);
// Rank <= 2n Hermitian with at most n positive / n negative eigenvalues.
Mat random_point(int f, int n, Rng& rng, bool unit_trace = false);
DiscreteSystem random_system(int N, int f, int n, double kappa, Rng& rng,
                             bool unit_trace = false);

}  // namespace cfslab

#endif
