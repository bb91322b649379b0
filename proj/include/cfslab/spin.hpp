#ifndef CFSLAB_SPIN_HPP
#define CFSLAB_SPIN_HPP

#include "cfslab/core.hpp"

namespace cfslab {

// Orthonormal basis of S_xM = range(x) from the Hermitian eigendecomposition
// of x; ev holds the matching nonzero eigenvalues.
struct SpinBasis {
  Mat basis;           // f x d, orthonormal columns
  Eigen::VectorXd ev;  // d nonzero eigenvalues
  int d = 0;
};

SpinBasis spin_basis(const Mat& x);

// Wave function in spin-basis coordinates, one block per point.
using WaveFunction = std::vector<Vec>;

struct SpinSetup {
  const DiscreteSystem* sys = nullptr;
  std::vector<SpinBasis> bases;

  int dim(int i) const { return bases[i].d; }
  // wave evaluation operator Psi(x_i): H -> S_i, coordinates
  Mat psi(int i) const { return bases[i].basis.adjoint(); }
  // spin adjoint of Psi(x_i): S_i -> H
  Mat psi_star(int i) const {
    return -bases[i].basis * bases[i].ev.asDiagonal();
  }
  // fermionic kernel block P(x_i, x_j): S_j -> S_i
  Mat P(int i, int j) const;
  // Gram of the spin inner product on S_i (diagonal, indefinite)
  Mat spin_inner_gram(int i) const;
  // Gram of the spin scalar product on S_i (diagonal, positive)
  Mat spin_scalar_gram(int i) const;
  // Euclidean sign operator s_x on S_i
  Mat sign_op(int i) const;
  // spin adjoint of T: S_j -> S_i; result maps S_i -> S_j
  Mat adjoint(int i, int j, const Mat& T) const;
  // closed chain A_xy = P(x,y) P(y,x) on S_i
  Mat closed_chain(int i, int j) const { return P(i, j) * P(j, i); }
  // ambient representative of a spin vector
  Vec ambient(int i, const Vec& coords) const {
    return bases[i].basis * coords;
  }
  Vec project(int i, const Vec& ambient_vec) const {
    return bases[i].basis.adjoint() * ambient_vec;
  }
};

SpinSetup build_spin(const DiscreteSystem& sys);

struct SpinProducts {
  cplx spin_inner;
  cplx spin_scalar;
};
// u, v ambient vectors required to lie in S_xM.
SpinProducts spin_products(const Mat& x, const Vec& u, const Vec& v,
                           double membership_tol = 1e-8);

WaveFunction physical_wave_function(const SpinSetup& ss, const Vec& u);

struct IsospectralityReport {
  double max_mismatch = 0.0;
};
IsospectralityReport isospectrality_check(const SpinSetup& ss, int i, int j);

// max over matched pairs of |a_k - b_k| with greedy nearest matching,
// both multisets padded with zeros to the same length
double spectrum_mismatch(std::vector<cplx> a, std::vector<cplx> b);

}  // namespace cfslab

#endif
