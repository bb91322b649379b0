#include "cfslab/wave.hpp"

#include <algorithm>
#include <cmath>

namespace cfslab {

void TimeStrip::validate() const {
  if (!(t0 < t_min && t_min < t_max && t_max < t1))
    throw std::invalid_argument("time strip markers out of order");
  if (delta < 0) throw std::invalid_argument("negative range parameter");
  if (!(t1 - t_max > 2 * delta && t_min - t0 > 2 * delta))
    throw std::invalid_argument("boundary strips narrower than 2*delta");
}

std::vector<int> strip_members(const DiscreteSystem& sys, double lo,
                               double hi) {
  std::vector<int> out;
  for (int i = 0; i < sys.size(); ++i)
    if (sys.times[i] >= lo && sys.times[i] <= hi) out.push_back(i);
  return out;
}

namespace {

// operator norm of Q(x_i,x_j) w.r.t. the spin scalar norms
double scalar_op_norm(const SpinSetup& ss, int i, int j, const Mat& q) {
  Mat gsi = ss.spin_scalar_gram(i).cwiseSqrt();
  Mat gsj = ss.spin_scalar_gram(j).cwiseSqrt();
  return op_norm(gsi * q * gsj.inverse());
}

}  // namespace

KernelHygieneReport kernel_hygiene(const SpinSetup& ss, const QKernel& qk,
                                   double delta, double c, double range_tol) {
  const DiscreteSystem& sys = *ss.sys;
  int N = sys.size();
  KernelHygieneReport rep;
  rep.range_ok = true;
  for (int i = 0; i < N; ++i) {
    double l1 = 0.0;
    for (int j = 0; j < N; ++j) {
      double nq = scalar_op_norm(ss, i, j, qk(i, j));
      l1 += sys.weights[j] * nq;
      if (std::abs(sys.times[i] - sys.times[j]) > delta && nq > range_tol) {
        rep.range_ok = false;
        rep.range_violations.push_back({i, j});
      }
    }
    rep.max_l1 = std::max(rep.max_l1, l1);
    if (l1 >= c) rep.l1_violations.push_back(i);
  }
  rep.l1_ok = rep.l1_violations.empty();
  return rep;
}

int StripOperator::block_of(int point) const {
  auto it = std::find(members.begin(), members.end(), point);
  return it == members.end() ? -1
                             : static_cast<int>(it - members.begin());
}

Vec StripOperator::pack(const WaveFunction& w) const {
  Vec v = Vec::Zero(dim);
  for (size_t b = 0; b < members.size(); ++b)
    v.segment(offset[b], ss->dim(members[b])) = w[members[b]];
  return v;
}

WaveFunction StripOperator::expand(const Vec& v) const {
  WaveFunction w;
  for (int i = 0; i < ss->sys->size(); ++i)
    w.push_back(Vec::Zero(ss->dim(i)));
  for (size_t b = 0; b < members.size(); ++b)
    w[members[b]] = v.segment(offset[b], ss->dim(members[b]));
  return w;
}

Vec StripOperator::to_ortho(const Vec& natural) const {
  Vec v = natural;
  for (size_t b = 0; b < members.size(); ++b) {
    int i = members[b], d = ss->dim(i);
    Vec w = ss->spin_scalar_gram(i)
                .diagonal()
                .real()
                .cwiseSqrt()
                .cast<cplx>();
    v.segment(offset[b], d) =
        std::sqrt(ss->sys->weights[i]) *
        w.cwiseProduct(natural.segment(offset[b], d));
  }
  return v;
}

Vec StripOperator::from_ortho(const Vec& ortho) const {
  Vec v = ortho;
  for (size_t b = 0; b < members.size(); ++b) {
    int i = members[b], d = ss->dim(i);
    Vec w = ss->spin_scalar_gram(i)
                .diagonal()
                .real()
                .cwiseSqrt()
                .cast<cplx>();
    v.segment(offset[b], d) = ortho.segment(offset[b], d).cwiseQuotient(w) /
                              std::sqrt(ss->sys->weights[i]);
  }
  return v;
}

Vec StripOperator::apply_kernel(const Vec& natural) const {
  Vec out = Vec::Zero(dim);
  for (size_t b = 0; b < members.size(); ++b) {
    int i = members[b], di = ss->dim(i);
    Vec acc = Vec::Zero(di);
    for (size_t c = 0; c < members.size(); ++c) {
      int j = members[c];
      acc += ss->sys->weights[j] * (*qk)(i, j) *
             natural.segment(offset[c], ss->dim(j));
    }
    acc -= ss->sys->r * natural.segment(offset[b], di);
    out.segment(offset[b], di) = acc;
  }
  return out;
}

cplx StripOperator::strip_product(const Vec& a, const Vec& b) const {
  cplx out = 0;
  for (size_t k = 0; k < members.size(); ++k) {
    int i = members[k], d = ss->dim(i);
    out += ss->sys->weights[i] *
           (a.segment(offset[k], d).adjoint() * ss->spin_scalar_gram(i) *
            b.segment(offset[k], d))(0);
  }
  return out;
}

double StripOperator::strip_norm(const Vec& a) const {
  return std::sqrt(std::max(0.0, strip_product(a, a).real()));
}

Vec StripOperator::window(const Vec& natural, double lo, double hi) const {
  Vec v = natural;
  for (size_t b = 0; b < members.size(); ++b) {
    double t = ss->sys->times[members[b]];
    if (t < lo || t > hi)
      v.segment(offset[b], ss->dim(members[b])).setZero();
  }
  return v;
}

Vec StripOperator::apply_sign(const Vec& natural) const {
  Vec v = natural;
  for (size_t b = 0; b < members.size(); ++b) {
    int i = members[b], d = ss->dim(i);
    v.segment(offset[b], d) =
        ss->sign_op(i) * natural.segment(offset[b], d);
  }
  return v;
}

StripOperator assemble_strip_operator(const SpinSetup& ss, const QKernel& qk,
                                      const TimeStrip& strip) {
  strip.validate();
  StripOperator op;
  op.ss = &ss;
  op.qk = &qk;
  op.strip = strip;
  op.members = strip_members(*ss.sys, strip.t0, strip.t1);
  op.dim = 0;
  for (int i : op.members) {
    op.offset.push_back(op.dim);
    op.dim += ss.dim(i);
  }
  const DiscreteSystem& sys = *ss.sys;
  op.qmat = Mat::Zero(op.dim, op.dim);
  double l1 = 0.0;
  for (size_t b = 0; b < op.members.size(); ++b) {
    int i = op.members[b], di = ss.dim(i);
    Mat wi = ss.spin_scalar_gram(i).cwiseSqrt();
    Mat si = ss.sign_op(i);
    double row = 0.0;
    for (size_t c = 0; c < op.members.size(); ++c) {
      int j = op.members[c], dj = ss.dim(j);
      Mat wj = ss.spin_scalar_gram(j).cwiseSqrt();
      Mat wj_inv = wj.inverse();
      Mat blk = std::sqrt(sys.weights[i] * sys.weights[j]) * wi * si *
                qk(i, j) * wj_inv;
      if (i == j) blk -= sys.r * si;
      op.qmat.block(op.offset[b], op.offset[c], di, dj) = blk;
      row += sys.weights[j] * scalar_op_norm(ss, i, j, qk(i, j));
    }
    l1 = std::max(l1, row);
  }
  op.norm_bound = l1 + std::abs(sys.r);
  double qn = std::max(op.qmat.cwiseAbs().maxCoeff(), 1e-300);
  op.symmetry_error =
      (op.qmat - op.qmat.adjoint()).cwiseAbs().maxCoeff() / qn;
  if (op.symmetry_error > 1e-6)
    throw EigenFailure("strip operator not symmetric: kernel asymmetry " +
                           std::to_string(op.symmetry_error),
                       -1, -1);
  op.qmat = hermitize(op.qmat);
  Eigen::SelfAdjointEigenSolver<Mat> es(op.qmat);
  op.evals = es.eigenvalues();
  op.evecs = es.eigenvectors();
  op.spectral_norm = op.evals.cwiseAbs().maxCoeff();
  if (op.spectral_norm > op.norm_bound * (1 + 1e-6))
    throw EigenFailure("strip operator norm exceeds the Schwarz bound", -1,
                       -1);
  return op;
}

SolveReport solve_inhomogeneous(const StripOperator& op, const Vec& phi,
                                double adm_tol) {
  SolveReport rep;
  Vec b = op.to_ortho(op.apply_sign(phi));
  double bn = b.norm();
  if (bn == 0.0) {
    rep.psi = Vec::Zero(op.dim);
    return rep;
  }
  double cut = op.rank_tol * std::max(op.evals.cwiseAbs().maxCoeff(), 1e-300);
  Vec coef = op.evecs.adjoint() * b;
  Vec sol = Vec::Zero(op.dim);
  double dropped = 0.0;
  for (int k = 0; k < op.dim; ++k) {
    if (std::abs(op.evals(k)) <= cut)
      dropped += std::norm(coef(k));
    else
      sol += coef(k) / op.evals(k) * op.evecs.col(k);
  }
  rep.range_defect = std::sqrt(dropped) / bn;
  if (rep.range_defect > adm_tol)
    throw std::runtime_error("inadmissible inhomogeneity: range defect " +
                             std::to_string(rep.range_defect));
  rep.residual = (op.qmat * sol - b).norm() / bn;
  rep.psi = op.from_ortho(sol);
  return rep;
}

HomSolveReport homogeneous_from_boundary(const StripOperator& op,
                                         const Vec& phi1, const Vec& phi0,
                                         double lambda) {
  const TimeStrip& s = op.strip;
  double n1 = op.strip_norm(phi1), n0 = op.strip_norm(phi0);
  double out1 =
      op.strip_norm(phi1 - op.window(phi1, s.t_max, s.t1));
  double out0 =
      op.strip_norm(phi0 - op.window(phi0, s.t0, s.t_min));
  if (out1 > 1e-12 * std::max(n1, 1e-300) ||
      out0 > 1e-12 * std::max(n0, 1e-300))
    throw std::invalid_argument("inhomogeneity support leaves its strip");
  HomSolveReport rep;
  rep.solve = solve_inhomogeneous(op, Vec(lambda * phi0 + phi1));
  rep.psi = rep.solve.psi;
  Vec act = op.apply_kernel(rep.psi);
  double lo = (lambda == 0.0 && n0 == 0.0) ? s.t0 : s.t_min;
  for (size_t b = 0; b < op.members.size(); ++b) {
    double t = op.ss->sys->times[op.members[b]];
    if (t < lo || t > s.t_max) continue;
    int i = op.members[b], d = op.ss->dim(i);
    Vec blk = act.segment(op.offset[b], d);
    double nb = std::sqrt(std::abs(
        (blk.adjoint() * op.ss->spin_scalar_gram(i) * blk)(0)));
    rep.interior_residual = std::max(rep.interior_residual, nb);
  }
  return rep;
}

cplx commutator_inner_region(const SpinSetup& ss, const QKernel& qk,
                             const WaveFunction& psi, const WaveFunction& phi,
                             const std::vector<char>& in_omega) {
  const DiscreteSystem& sys = *ss.sys;
  int N = sys.size();
  cplx acc = 0;
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      if (in_omega[i] == in_omega[j]) continue;
      cplx term = sys.weights[i] * sys.weights[j] *
                  (psi[i].adjoint() * ss.spin_inner_gram(i) * qk(i, j) *
                   phi[j])(0);
      acc += in_omega[i] ? term : -term;
    }
  return cplx(0, -2) * acc;
}

cplx commutator_inner(const SpinSetup& ss, const QKernel& qk,
                      const WaveFunction& psi, const WaveFunction& phi,
                      double t) {
  std::vector<char> past(ss.sys->size());
  for (int i = 0; i < ss.sys->size(); ++i)
    past[i] = ss.sys->times[i] <= t ? 1 : 0;
  return commutator_inner_region(ss, qk, psi, phi, past);
}

ConservationSeries conservation_series(const StripOperator& op,
                                       const Vec& psi, const Vec& phi,
                                       const std::vector<double>& grid) {
  ConservationSeries out;
  WaveFunction wp = op.expand(psi), wf = op.expand(phi);
  const TimeStrip& s = op.strip;
  for (double t : grid) {
    if (t <= s.t_min + s.delta || t >= s.t_max - s.delta) continue;
    out.t.push_back(t);
    out.value.push_back(commutator_inner(*op.ss, *op.qk, wp, wf, t));
  }
  for (size_t a = 0; a < out.value.size(); ++a)
    for (size_t b = a + 1; b < out.value.size(); ++b)
      out.max_drift =
          std::max(out.max_drift, std::abs(out.value[a] - out.value[b]));
  return out;
}

PositivityReport positivity_perturbation(const StripOperator& op,
                                         const Vec& psi0, double lambda) {
  const TimeStrip& s = op.strip;
  PositivityReport rep;
  Vec past = op.window(psi0, s.t0, s.t_min);
  rep.past_norm2 = std::pow(op.strip_norm(past), 2);
  if (rep.past_norm2 == 0.0) {
    rep.psi1 = Vec::Zero(op.dim);
    return rep;
  }
  rep.lambda = lambda > 0
                   ? lambda
                   : 1e-2 * op.spectral_norm / std::sqrt(rep.past_norm2);
  Vec phi0 = cplx(0, 0.25) * op.apply_sign(past);
  rep.psi1 = solve_inhomogeneous(op, phi0).psi;
  double tmid = 0.5 * (s.t_min + s.t_max);
  auto value = [&](double lam) {
    Vec v = psi0 + lam * rep.psi1;
    WaveFunction w = op.expand(v);
    return commutator_inner(*op.ss, *op.qk, w, w, tmid).real();
  };
  for (int j = 0; j < 5; ++j) {
    double lam = rep.lambda * std::pow(0.5, j);
    rep.sweep_lambda.push_back(lam);
    rep.sweep_value.push_back(value(lam));
  }
  double l = rep.sweep_lambda[0];
  rep.linear_coef = (4 * rep.sweep_value[1] - rep.sweep_value[0]) / l;
  // slope of the quadratic remainder on the sweep; for a single pair the
  // remainder vanishes identically (the past-driven correction is itself
  // a null vector of <.|.>^t), so a remainder at the noise floor counts
  // as (at least) quadratic
  double vmax = 0.0, rmax = 0.0;
  for (size_t j = 0; j < rep.sweep_lambda.size(); ++j) {
    vmax = std::max(vmax, std::abs(rep.sweep_value[j]));
    rmax = std::max(rmax, std::abs(rep.sweep_value[j] -
                                   rep.linear_coef * rep.sweep_lambda[j]));
  }
  if (rmax <= 1e-10 * std::max(vmax, 1e-300)) {
    rep.remainder_floor = true;
    rep.remainder_slope = 2.0;
    return rep;
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (size_t j = 0; j < rep.sweep_lambda.size(); ++j) {
    double r =
        std::abs(rep.sweep_value[j] - rep.linear_coef * rep.sweep_lambda[j]);
    if (r <= 0) continue;
    double lx = std::log(rep.sweep_lambda[j]), ly = std::log(r);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++m;
  }
  if (m >= 2)
    rep.remainder_slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return rep;
}

ExtendedSpaceReport build_extended_space(const StripOperator& op,
                                         const std::vector<Vec>& hf,
                                         double lambda, double t_eval,
                                         double t_check, int n_samples,
                                         Rng& rng, double psd_tol) {
  const SpinSetup& ss = *op.ss;
  const TimeStrip& s = op.strip;
  ExtendedSpaceReport rep;
  rep.lambda = lambda;
  int nh = static_cast<int>(hf.size());

  // cutoff profiles: eta0 ramps up toward the past marker, eta1 ramps
  // down after the future marker; plateaus per the margin constraints
  auto eta0 = [&](double t) {
    double lo = std::max(s.t0 + s.delta, s.t_min - 2 * s.delta);
    double hi = s.t_min - s.delta;
    if (t <= lo) return 0.0;
    if (t >= hi) return 1.0;
    return (t - lo) / (hi - lo);
  };
  auto eta1 = [&](double t) {
    double lo = s.t_max + s.delta;
    double hi = std::min(s.t1 - s.delta, s.t_max + 2 * s.delta);
    if (t <= lo) return 1.0;
    if (t >= hi) return 0.0;
    return (hi - t) / (hi - lo);
  };
  auto scale_by = [&](const Vec& v, auto&& prof) {
    Vec out = v;
    for (size_t b = 0; b < op.members.size(); ++b)
      out.segment(op.offset[b], ss.dim(op.members[b])) *=
          prof(ss.sys->times[op.members[b]]);
    return out;
  };

  std::vector<Vec> iota;  // embedded Hilbert vectors
  for (const Vec& u : hf) {
    Vec psiu = op.pack(physical_wave_function(ss, u));
    Vec raw0 = op.apply_kernel(scale_by(psiu, eta0));
    Vec raw1 = op.apply_kernel(scale_by(psiu, eta1));
    Vec phi0 = op.window(raw0, s.t0, s.t_min);
    Vec phi1 = op.window(raw1, s.t_max, s.t1);
    double d0 = op.strip_norm(raw0 - phi0) /
                std::max(op.strip_norm(raw0), 1e-300);
    double d1 = op.strip_norm(raw1 - phi1) /
                std::max(op.strip_norm(raw1), 1e-300);
    rep.support_defects.push_back(std::max(d0, d1));
    iota.push_back(solve_inhomogeneous(op, phi0).psi +
                   solve_inhomogeneous(op, phi1).psi);
  }

  auto cip = [&](const Vec& a, const Vec& b, double t) {
    return commutator_inner(ss, *op.qk, op.expand(a), op.expand(b), t);
  };

  // K1 samples orthogonal to the embedded subspace
  std::vector<Vec> psi0s, psi1s;
  Mat gf(nh, nh);
  for (int a = 0; a < nh; ++a)
    for (int b = 0; b < nh; ++b) gf(a, b) = cip(iota[a], iota[b], t_eval);
  Mat gf_pinv;
  if (nh > 0) gf_pinv = gf.completeOrthogonalDecomposition().pseudoInverse();
  for (int k = 0; k < n_samples; ++k) {
    Vec phi1 = Vec::Zero(op.dim);
    for (size_t b = 0; b < op.members.size(); ++b) {
      double t = ss.sys->times[op.members[b]];
      if (t >= s.t_max && t <= s.t1) {
        int d = ss.dim(op.members[b]);
        phi1.segment(op.offset[b], d) = random_matrix(d, 1, rng);
      }
    }
    Vec psi0 = solve_inhomogeneous(op, phi1).psi;
    if (nh > 0) {
      Vec proj(nh);
      for (int a = 0; a < nh; ++a) proj(a) = cip(iota[a], psi0, t_eval);
      Vec coef = gf_pinv * proj;
      for (int a = 0; a < nh; ++a) psi0 -= coef(a) * iota[a];
    }
    Vec phi0 = cplx(0, 0.25) * op.apply_sign(op.window(psi0, s.t0, s.t_min));
    psi0s.push_back(psi0);
    psi1s.push_back(solve_inhomogeneous(op, phi0).psi);
  }

  int m = nh + n_samples;
  auto assemble = [&](double t) {
    Mat g(m, m);
    for (int a = 0; a < nh; ++a)
      for (int b = 0; b < nh; ++b) g(a, b) = cip(iota[a], iota[b], t);
    for (int a = 0; a < n_samples; ++a) {
      for (int b = 0; b < nh; ++b) {
        cplx v = cip(psi0s[a], iota[b], t) +
                 lambda * cip(psi1s[a], iota[b], t);
        g(nh + a, b) = v;
        g(b, nh + a) = std::conj(v);
      }
      for (int b = 0; b < n_samples; ++b)
        g(nh + a, nh + b) = lambda * (cip(psi0s[a], psi1s[b], t) +
                                      cip(psi1s[a], psi0s[b], t));
    }
    return Mat(hermitize(g));
  };
  rep.gram = assemble(t_eval);
  rep.gram_check = assemble(t_check);
  rep.time_invariance =
      (rep.gram - rep.gram_check).cwiseAbs().maxCoeff();

  if (m > 0) {
    Eigen::SelfAdjointEigenSolver<Mat> es(rep.gram);
    double top = std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1e-300);
    rep.min_eigenvalue = es.eigenvalues().minCoeff();
    rep.psd = rep.min_eigenvalue >= -psd_tol * top;
    for (int k = 0; k < m; ++k)
      if (std::abs(es.eigenvalues()(k)) < psd_tol * top) ++rep.kernel_dim;
  }

  // Lemma 7.1: shifting any generator by a Q-kernel vector is neutral
  double cut = op.rank_tol * std::max(op.evals.cwiseAbs().maxCoeff(), 1e-300);
  for (int k = 0; k < op.dim; ++k) {
    if (std::abs(op.evals(k)) > cut) continue;
    Vec kv = op.from_ortho(op.evecs.col(k));
    for (const Vec& gen : psi0s) {
      Vec shifted = gen + kv;
      for (const Vec& other : psi1s)
        rep.kernel_neutrality = std::max(
            rep.kernel_neutrality,
            std::abs(cip(shifted, other, t_eval) - cip(gen, other, t_eval)));
    }
    break;  // one kernel direction suffices for the report
  }

  // fitted representation constant on Hf
  if (nh > 0) {
    double num = 0.0, den = 0.0;
    for (int a = 0; a < nh; ++a)
      for (int b = 0; b < nh; ++b) {
        cplx huv = (hf[a].adjoint() * hf[b])(0);
        num += (std::conj(huv) * rep.gram(a, b)).real();
        den += std::norm(huv);
      }
    rep.c_fit = den > 0 ? num / den : 0.0;
    for (int a = 0; a < nh; ++a) {
      double worst = 0.0;
      for (int b = 0; b < nh; ++b) {
        cplx huv = (hf[a].adjoint() * hf[b])(0);
        worst = std::max(worst,
                         std::abs(rep.gram(a, b) - rep.c_fit * huv));
      }
      double sc = std::max(std::abs(rep.c_fit) * hf[a].squaredNorm(), 1e-300);
      rep.embedding_residuals.push_back(worst / sc);
    }
  }
  return rep;
}

CouplingReport coupling_iteration(const StripOperator& op,
                                  const VariationDirection& initial,
                                  int max_iters, double couple_tol,
                                  double coupling_scale) {
  const SpinSetup& ss = *op.ss;
  const DiscreteSystem& sys = *ss.sys;
  int N = sys.size();
  int f = sys.f;
  CouplingReport rep;

  auto form = [&](const VariationDirection& phi) {
    double val = 0.0;
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) {
        Mat dP = delta_P(ss, phi, i, j);
        PairVariationTerms t = pair_second_variation(
            ss, i, j, dP, Mat::Zero(dP.rows(), dP.cols()), (*op.qk)(i, j));
        val += sys.weights[i] * sys.weights[j] * (t.lfe + t.remainder);
      }
    return coupling_scale * val;
  };
  // entrywise Wirtinger gradient: dC = 2 Re sum tr(g_i^dagger dPhi_i)
  auto gradient = [&](const VariationDirection& phi) {
    double scale = 1.0;
    for (const Mat& m : phi) scale = std::max(scale, m.cwiseAbs().maxCoeff());
    double h = 1e-5 * scale;
    std::vector<Mat> g;
    VariationDirection t = phi;
    for (int i = 0; i < N; ++i) {
      int d = ss.dim(i);
      Mat gi(d, f);
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < f; ++b) {
          cplx orig = t[i](a, b);
          t[i](a, b) = orig + h;
          double fp = form(t);
          t[i](a, b) = orig - h;
          double fm = form(t);
          double gre = (fp - fm) / (2 * h);
          t[i](a, b) = orig + cplx(0, h);
          fp = form(t);
          t[i](a, b) = orig - cplx(0, h);
          fm = form(t);
          t[i](a, b) = orig;
          gi(a, b) = 0.5 * cplx(gre, (fp - fm) / (2 * h));
        }
      g.push_back(gi);
    }
    return g;
  };

  // perturbative correction series: delta_0 = initial solves the free
  // equation, and each further correction absorbs the coupling gradient
  // generated by the previous one
  VariationDirection delta = initial;
  int bad_streak = 0;
  double prev_norm = -1.0;
  for (rep.iters = 0; rep.iters < max_iters; ++rep.iters) {
    std::vector<Mat> g = gradient(delta);
    // effective inhomogeneity: (N Phi)_i = G_i^{-1} g_i / (4 rho_i)
    std::vector<Mat> rhs(N);
    double norm2 = 0.0;
    for (int i = 0; i < N; ++i) {
      rhs[i] = ss.spin_inner_gram(i).inverse() * g[i] /
               (4.0 * sys.weights[i]);
      for (int c = 0; c < f; ++c) {
        Vec col = rhs[i].col(c);
        norm2 += sys.weights[i] *
                 std::abs((col.adjoint() * ss.spin_scalar_gram(i) * col)(0));
      }
    }
    double norm = std::sqrt(norm2);
    rep.inhomogeneity_norms.push_back(norm);
    if (prev_norm > 0) {
      double ratio = norm / prev_norm;
      rep.ratios.push_back(ratio);
      if (ratio >= 1.0) {
        if (++bad_streak >= 3) {
          rep.diverged = true;
          return rep;
        }
      } else {
        bad_streak = 0;
      }
    }
    if (norm < couple_tol) {
      rep.converged = true;
      ++rep.iters;
      return rep;
    }
    prev_norm = norm;
    // wave-sector solve for the next correction, column by column
    VariationDirection next(N);
    for (int i = 0; i < N; ++i) next[i] = Mat::Zero(ss.dim(i), f);
    for (int c = 0; c < f; ++c) {
      Vec b = Vec::Zero(op.dim);
      for (size_t bl = 0; bl < op.members.size(); ++bl) {
        int i = op.members[bl];
        b.segment(op.offset[bl], ss.dim(i)) = rhs[i].col(c);
      }
      Vec sol = solve_inhomogeneous(op, b, 1.0).psi;
      for (size_t bl = 0; bl < op.members.size(); ++bl) {
        int i = op.members[bl];
        next[i].col(c) += sol.segment(op.offset[bl], ss.dim(i));
      }
    }
    delta = next;
  }
  return rep;
}

AppendixAReport appendix_a_check(const SpinSetup& ss, const QKernel& qk,
                                 const std::vector<char>& in_omega,
                                 const Vec& u) {
  const DiscreteSystem& sys = *ss.sys;
  int N = sys.size();
  AppendixAReport rep;
  rep.c_matrix = Mat::Zero(sys.f, sys.f);
  for (int i = 0; i < N; ++i) {
    Mat b = Mat::Zero(sys.f, sys.f);
    for (int j = 0; j < N; ++j) {
      if (in_omega[i] == in_omega[j]) continue;
      Mat g = lagrangian_gradient_x(sys.points[i], sys.points[j], sys.n,
                                    sys.kappa);
      b += (in_omega[i] ? 1.0 : -1.0) * sys.weights[j] * g;
    }
    rep.c_matrix += cplx(0, 1) * sys.weights[i] *
                    (sys.points[i] * b - b * sys.points[i]);
  }
  rep.trace_c = std::abs(rep.c_matrix.trace());
  rep.lhs = (u.adjoint() * rep.c_matrix * u)(0).real();
  WaveFunction psiu = physical_wave_function(ss, u);
  rep.rhs = commutator_inner_region(ss, qk, psiu, psiu, in_omega);
  double sc = std::max({std::abs(rep.lhs), std::abs(rep.rhs), 1e-12});
  rep.quadratic_match = std::abs(rep.lhs - rep.rhs.real()) / sc;
  return rep;
}

}  // namespace cfslab
