#include "cfslab/core.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace cfslab {

double op_norm(const Mat& a) {
  if (a.rows() == 0 || a.cols() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(a);
  return svd.singularValues()(0);
}

Mat hermitize(const Mat& a) { return 0.5 * (a + a.adjoint()); }

bool is_hermitian(const Mat& a, double rel_tol) {
  double scale = a.cwiseAbs().maxCoeff();
  if (scale == 0.0) return true;
  return (a - Mat(a.adjoint())).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

Signature signature_of(const Mat& x, double tol) {
  Eigen::SelfAdjointEigenSolver<Mat> es(x);
  Signature sig;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    double e = es.eigenvalues()(i);
    if (e > tol) ++sig.positive;
    if (e < -tol) ++sig.negative;
  }
  return sig;
}

void validate_point(const Mat& x, int n, const std::string& where) {
  if (x.rows() != x.cols()) throw std::invalid_argument("point not square " + where);
  if (!is_hermitian(x))
    throw std::invalid_argument("point not Hermitian " + where);
  double tol = 1e-9 * op_norm(x);
  Signature sig = signature_of(hermitize(x), tol);
  if (sig.positive > n || sig.negative > n)
    throw std::invalid_argument("signature bound violated " + where);
}

void DiscreteSystem::validate() const {
  if (n < 1 || f < 1) throw std::invalid_argument("bad dimensions");
  if (points.size() != weights.size() || points.size() != times.size())
    throw std::invalid_argument("inconsistent system arrays");
  double vol = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (std::abs(vol - 1.0) > 1e-12)
    throw std::invalid_argument("volume constraint violated");
  for (int i = 0; i < size(); ++i) {
    if (weights[i] <= 0.0) throw std::invalid_argument("nonpositive weight");
    if (points[i].rows() != f) throw std::invalid_argument("point dim mismatch");
    validate_point(points[i], n, "point " + std::to_string(i));
  }
}

static bool spectral_less(const cplx& a, const cplx& b) {
  double ma = std::abs(a), mb = std::abs(b);
  if (ma != mb) return ma > mb;
  double pa = std::arg(a), pb = std::arg(b);
  // phase in (-pi, pi], ascending
  return pa < pb;
}

ChainSpectrum chain_spectrum(const Mat& x, const Mat& y, int n, int pair_i,
                             int pair_j) {
  Mat prod = x * y;
  Eigen::ComplexEigenSolver<Mat> es(prod, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success)
    throw EigenFailure("eigensolver failed on product", pair_i, pair_j);
  double sigma_tol = 1e-9 * op_norm(x) * op_norm(y);
  std::vector<cplx> nz;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    cplx lam = es.eigenvalues()(i);
    if (std::abs(lam) > sigma_tol) nz.push_back(lam);
  }
  std::sort(nz.begin(), nz.end(), spectral_less);
  if (static_cast<int>(nz.size()) > 2 * n) nz.resize(2 * n);
  nz.resize(2 * n, cplx(0.0, 0.0));
  return ChainSpectrum{std::move(nz)};
}

const char* to_string(CausalClass c) {
  switch (c) {
    case CausalClass::spacelike: return "spacelike";
    case CausalClass::timelike: return "timelike";
    default: return "lightlike";
  }
}

CausalClass classify_spectrum(const std::vector<cplx>& lam, double class_tol) {
  double maxmod = 0.0;
  for (const auto& l : lam) maxmod = std::max(maxmod, std::abs(l));
  if (maxmod == 0.0) return CausalClass::spacelike;  // vacuously equal moduli
  double minmod = maxmod;
  double maxim = 0.0;
  for (const auto& l : lam) {
    minmod = std::min(minmod, std::abs(l));
    maxim = std::max(maxim, std::abs(l.imag()));
  }
  if (maxmod - minmod <= class_tol * maxmod) return CausalClass::spacelike;
  if (maxim <= class_tol * maxmod) return CausalClass::timelike;
  return CausalClass::lightlike;
}

CausalClass classify(const Mat& x, const Mat& y, int n, double class_tol) {
  return classify_spectrum(chain_spectrum(x, y, n).values, class_tol);
}

double lagrangian_of_spectrum(const std::vector<cplx>& lam, int n,
                              double kappa) {
  double sum_sq = 0.0, sum_abs = 0.0;
  for (const auto& li : lam) sum_abs += std::abs(li);
  for (const auto& li : lam)
    for (const auto& lj : lam) {
      double d = std::abs(li) - std::abs(lj);
      sum_sq += d * d;
    }
  return sum_sq / (4.0 * n) + kappa * sum_abs * sum_abs;
}

double lagrangian(const Mat& x, const Mat& y, int n, double kappa) {
  return lagrangian_of_spectrum(chain_spectrum(x, y, n).values, n, kappa);
}

double causal_action(const DiscreteSystem& sys) {
  double S = 0.0;
  for (int i = 0; i < sys.size(); ++i)
    for (int j = 0; j < sys.size(); ++j)
      S += sys.weights[i] * sys.weights[j] *
           lagrangian(sys.points[i], sys.points[j], sys.n, sys.kappa);
  return S;
}

ConstraintReport constraint_report(const DiscreteSystem& sys) {
  ConstraintReport rep;
  for (int i = 0; i < sys.size(); ++i) {
    double tr = sys.points[i].trace().real();
    rep.local_traces.push_back(tr);
    rep.volume += sys.weights[i];
    rep.trace += sys.weights[i] * tr;
  }
  return rep;
}

double ell(const Mat& z, const DiscreteSystem& sys) {
  double acc = 0.0;
  for (int j = 0; j < sys.size(); ++j)
    acc += sys.weights[j] * lagrangian(z, sys.points[j], sys.n, sys.kappa);
  return acc - sys.r * (z.trace().real() - 1.0) - sys.s;
}

double fit_s(const DiscreteSystem& sys) {
  double s = 0.0;
  for (int i = 0; i < sys.size(); ++i) {
    double acc = 0.0;
    for (int j = 0; j < sys.size(); ++j)
      acc += sys.weights[j] *
             lagrangian(sys.points[i], sys.points[j], sys.n, sys.kappa);
    s += sys.weights[i] * (acc - sys.r * (sys.points[i].trace().real() - 1.0));
  }
  return s;
}

Mat clip_signature(const Mat& x, int n) {
  Eigen::SelfAdjointEigenSolver<Mat> es(hermitize(x));
  Eigen::VectorXd ev = es.eigenvalues();
  int f = static_cast<int>(ev.size());
  // eigenvalues ascending: keep the n most negative and n most positive
  Eigen::VectorXd kept = Eigen::VectorXd::Zero(f);
  std::vector<int> pos, neg;
  for (int i = 0; i < f; ++i) (ev(i) >= 0.0 ? pos : neg).push_back(i);
  std::sort(pos.begin(), pos.end(),
            [&](int a, int b) { return ev(a) > ev(b); });
  std::sort(neg.begin(), neg.end(),
            [&](int a, int b) { return ev(a) < ev(b); });
  for (int k = 0; k < std::min<int>(n, pos.size()); ++k) kept(pos[k]) = ev(pos[k]);
  for (int k = 0; k < std::min<int>(n, neg.size()); ++k) kept(neg[k]) = ev(neg[k]);
  return es.eigenvectors() * kept.asDiagonal() *
         es.eigenvectors().adjoint();
}

// ---- optimizer ----

// Hermitian gradient matrix G with df = tr(G dX) for Hermitian dX.
Mat fd_gradient_matrix(const std::function<double(const Mat&)>& f,
                       const Mat& x, double h) {
  int n = static_cast<int>(x.rows());
  Mat g = Mat::Zero(n, n);
  Mat t = x;
  auto central = [&](cplx delta, int a, int b) {
    cplx oa = t(a, b), ob = t(b, a);
    t(a, b) = oa + delta;
    if (a != b) t(b, a) = ob + std::conj(delta);
    double fp = f(t);
    t(a, b) = oa - delta;
    if (a != b) t(b, a) = ob - std::conj(delta);
    double fm = f(t);
    t(a, b) = oa;
    t(b, a) = ob;
    return (fp - fm) / (2.0 * h);
  };
  for (int a = 0; a < n; ++a) {
    g(a, a) = central(cplx(h, 0), a, a);
    for (int b = a + 1; b < n; ++b) {
      double gre = central(cplx(h, 0), a, b);
      double gim = central(cplx(0, h), a, b);
      g(a, b) = 0.5 * cplx(gre, gim);
      g(b, a) = std::conj(g(a, b));
    }
  }
  return g;
}

namespace {

// Projects a Hermitian direction onto the tangent cone of the constraints
// at x: zero trace (optional) and no eigenvalue pushed past the signature
// budget out of ker(x). Dykstra alternating projections.
Mat project_direction(const Mat& d, const Mat& x, int n, bool zero_trace,
                      double ker_scale = 1e-7) {
  int f = static_cast<int>(x.rows());
  double tol = ker_scale * std::max(op_norm(x), 1e-300);
  Signature sig = signature_of(x, tol);
  bool pos_full = sig.positive >= n;
  bool neg_full = sig.negative >= n;
  Eigen::SelfAdjointEigenSolver<Mat> es(hermitize(x));
  Mat ker(f, 0);
  for (int a = 0; a < f; ++a)
    if (std::abs(es.eigenvalues()(a)) <= tol) {
      ker.conservativeResize(f, ker.cols() + 1);
      ker.col(ker.cols() - 1) = es.eigenvectors().col(a);
    }
  bool need_cone = (pos_full || neg_full) && ker.cols() > 0;
  if (!need_cone && !zero_trace) return d;

  auto trace_proj = [&](const Mat& m) {
    if (!zero_trace) return m;
    return Mat(m - (m.trace() / static_cast<double>(f)) * Mat::Identity(f, f));
  };
  auto cone_proj = [&](const Mat& m) {
    if (!need_cone) return m;
    Mat k = ker.adjoint() * m * ker;
    Eigen::SelfAdjointEigenSolver<Mat> ek(hermitize(k));
    Eigen::VectorXd ev = ek.eigenvalues();
    for (int a = 0; a < ev.size(); ++a) {
      if (pos_full && ev(a) > 0) ev(a) = 0;
      if (neg_full && ev(a) < 0) ev(a) = 0;
    }
    Mat kc = ek.eigenvectors() * ev.asDiagonal() * ek.eigenvectors().adjoint();
    return Mat(m - ker * (k - kc) * ker.adjoint());
  };

  Mat xk = d;
  Mat corr = Mat::Zero(f, f);
  for (int it = 0; it < 40; ++it) {
    xk = trace_proj(xk);
    Mat y = xk + corr;
    Mat xn = cone_proj(y);
    corr = y - xn;
    if ((xn - xk).cwiseAbs().maxCoeff() < 1e-14 && it > 2) {
      xk = xn;
      break;
    }
    xk = xn;
  }
  return hermitize(xk);
}

}  // namespace

MinimizeResult minimize_action(const DiscreteSystem& initial,
                               const MinimizeOptions& opts) {
  DiscreteSystem sys = initial;
  const int N = sys.size();

  auto project = [&](DiscreteSystem& s) {
    for (int i = 0; i < s.size(); ++i) {
      Mat c = clip_signature(s.points[i], s.n);
      if (opts.rescale_trace) {
        double tr = c.trace().real();
        if (std::abs(tr) > 1e-10) c /= tr;
      }
      s.points[i] = c;
    }
  };

  auto objective = [&](const DiscreteSystem& s) {
    double val = causal_action(s);
    if (opts.trace_penalty > 0.0)
      for (int i = 0; i < s.size(); ++i) {
        double d = s.points[i].trace().real() - 1.0;
        val += opts.trace_penalty * s.weights[i] * d * d;
      }
    return val;
  };

  project(sys);
  double fval = objective(sys);

  double scale = 0.0;
  for (const auto& m : sys.points) scale = std::max(scale, op_norm(m));
  if (scale == 0.0) scale = 1.0;
  double h = opts.fd_step * scale;

  auto point_grads = [&](const DiscreteSystem& s) {
    std::vector<Mat> g(N);
    for (int i = 0; i < N; ++i) {
      // only the terms of the double sum touching x_i; the rest is
      // constant under the central difference and would cancel anyway
      auto fi = [&](const Mat& m) {
        double val = s.weights[i] * s.weights[i] *
                     lagrangian(m, m, s.n, s.kappa);
        for (int j = 0; j < N; ++j) {
          if (j == i) continue;
          val += s.weights[i] * s.weights[j] *
                 (lagrangian(m, s.points[j], s.n, s.kappa) +
                  lagrangian(s.points[j], m, s.n, s.kappa));
        }
        if (opts.trace_penalty > 0.0) {
          double d = m.trace().real() - 1.0;
          val += opts.trace_penalty * s.weights[i] * d * d;
        }
        return val;
      };
      g[i] = fd_gradient_matrix(fi, s.points[i], h);
    }
    return g;
  };

  MinimizeResult res;
  double step = opts.initial_step;
  double ker_scale = 1e-7;
  std::vector<Mat> prev_g, prev_dir;
  double last_alpha = 0.0;
  std::vector<Mat> g = point_grads(sys);
  std::vector<Mat> dir(N);

  auto projected_dirs = [&]() {
    double pg2 = 0.0;
    for (int i = 0; i < N; ++i) {
      dir[i] = project_direction(-g[i], sys.points[i], sys.n,
                                 opts.rescale_trace, ker_scale);
      pg2 += dir[i].squaredNorm();
    }
    return std::sqrt(pg2);
  };
  res.grad_norm = projected_dirs();

  for (int it = 0; it < opts.max_iters; ++it) {
    res.iters = it;
    if (res.grad_norm < opts.gtol) {
      res.converged = true;
      break;
    }
    double dd = 0.0;  // directional derivative along dir
    for (int i = 0; i < N; ++i) dd += (g[i] * dir[i]).trace().real();
    if (dd >= 0.0) {
      res.warning = "no feasible descent direction";
      break;
    }
    bool accepted = false;
    double alpha = step;
    if (!prev_dir.empty()) {
      // Barzilai-Borwein step from the last accepted move
      double sy = 0.0, ss = 0.0;
      for (int i = 0; i < N; ++i) {
        Mat sm = last_alpha * prev_dir[i];
        Mat ym = g[i] - prev_g[i];
        ss += sm.squaredNorm();
        sy += (sm.adjoint() * ym).trace().real();
      }
      if (sy > 1e-300) alpha = std::clamp(ss / sy, 1e-8, 1e3);
    }
    for (int bt = 0; bt < opts.max_backtracks; ++bt) {
      DiscreteSystem cand = sys;
      for (int i = 0; i < N; ++i) cand.points[i] += alpha * dir[i];
      project(cand);
      double fc = objective(cand);
      if (fc <= fval + opts.armijo_c * alpha * dd) {
        sys = cand;
        fval = fc;
        step = std::min(alpha * 2.0, 1e3);
        prev_g = g;
        prev_dir = dir;
        last_alpha = alpha;
        accepted = true;
        break;
      }
      alpha *= opts.backtrack;
    }
    if (!accepted) {
      // widen the boundary detection and retry before giving up
      if (ker_scale < 1e-4) {
        ker_scale *= 100.0;
        res.grad_norm = projected_dirs();
        continue;
      }
      res.warning = "step-size underflow";
      break;
    }
    g = point_grads(sys);
    res.grad_norm = projected_dirs();
  }

  res.system = sys;
  res.action = causal_action(sys);
  if (res.grad_norm < opts.gtol) res.converged = true;
  // boundary criticality: the unconstrained (trace-tangent) gradient is
  // still large even though no feasible descent direction remains
  double free_norm = 0.0;
  for (int i = 0; i < N; ++i) {
    Mat gt = g[i];
    if (opts.rescale_trace)
      gt -= (gt.trace() / static_cast<double>(sys.f)) *
            Mat::Identity(sys.f, sys.f);
    free_norm += gt.squaredNorm();
  }
  free_norm = std::sqrt(free_norm);
  // signature-boundary contact: some point spends less than its budget
  // of nonzero eigenvalues on one side, so descent stalls on the |lambda|
  // kink instead of reaching a vanishing gradient
  bool boundary = false;
  int npos_budget = std::min(sys.n, sys.f);
  int nneg_budget = std::min(sys.n, sys.f - npos_budget);
  for (int i = 0; i < N; ++i) {
    double tol = 1e-5 * std::max(op_norm(sys.points[i]), 1e-300);
    Signature sig = signature_of(sys.points[i], tol);
    if (sig.positive < npos_budget || sig.negative < nneg_budget)
      boundary = true;
  }
  bool stalled = res.warning == "step-size underflow" ||
                 res.warning == "no feasible descent direction";
  res.clipped = (res.converged && free_norm > 10.0 * opts.gtol) ||
                (stalled && boundary);
  if (!res.converged && res.warning.empty())
    res.warning = "max iterations reached";
  return res;
}


// ---- random generators ----

Mat random_matrix(int rows, int cols, Rng& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = cplx(nd(rng), nd(rng));
  return m;
}

Mat random_hermitian(int f, Rng& rng) {
  return hermitize(random_matrix(f, f, rng));
}

Mat random_unitary(int f, Rng& rng) {
  Eigen::HouseholderQR<Mat> qr(random_matrix(f, f, rng));
  Mat q = qr.householderQ();
  Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < f; ++i) {
    cplx d = r(i, i);
    q.col(i) *= (std::abs(d) > 0 ? d / std::abs(d) : cplx(1.0));
  }
  return q;
}

Mat random_point(int f, int n, Rng& rng, bool unit_trace) {
  std::uniform_real_distribution<double> ud(0.2, 1.5);
  Mat u = random_unitary(f, rng);
  Eigen::VectorXd ev = Eigen::VectorXd::Zero(f);
  int npos = std::min(n, f);
  int nneg = std::min(n, f - npos);
  for (int k = 0; k < npos; ++k) ev(k) = ud(rng);
  for (int k = 0; k < nneg; ++k) ev(npos + k) = -0.5 * ud(rng);
  Mat x = u * ev.asDiagonal() * u.adjoint();
  x = hermitize(x);
  if (unit_trace) {
    double tr = x.trace().real();
    if (std::abs(tr) > 1e-8) x /= tr;
  }
  return x;
}

DiscreteSystem random_system(int N, int f, int n, double kappa, Rng& rng,
                             bool unit_trace) {
  DiscreteSystem sys;
  sys.n = n;
  sys.f = f;
  sys.kappa = kappa;
  std::uniform_real_distribution<double> wd(0.5, 1.5);
  double tot = 0.0;
  std::vector<double> w(N);
  for (int i = 0; i < N; ++i) {
    sys.points.push_back(random_point(f, n, rng, unit_trace));
    w[i] = wd(rng);
    tot += w[i];
  }
  for (int i = 0; i < N; ++i) {
    sys.weights.push_back(w[i] / tot);
    sys.times.push_back(static_cast<double>(i));
  }
  return sys;
}

}  // namespace cfslab
