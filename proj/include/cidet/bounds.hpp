#pragma once

#include <cidet/ciglrt_l.hpp>
#include <cidet/common.hpp>
#include <cidet/network.hpp>
#include <cidet/sensing.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

namespace cidet {

// All decay exponents in this module are reported as nonnegative rates: a
// value X means the corresponding error probability is bounded by exp(-X t)
// asymptotically (per tick of the base clock; the k-round statistic is
// indexed so that 1/(kt) log P is already per tick).  Where a bound is
// vacuous for the given inputs the rate is 0 and a flag says so.

/// ||W^{k-1} - J|| expressed through the spectral gap: r^{k-1} for k >= 2,
/// ||I - J|| for k = 1 (which is 0 only in the single-agent case).
inline double consensus_deviation(double r, int k, int n) {
  if (k < 1) throw InvalidInput("k must be >= 1");
  if (k == 1) return n == 1 ? 0.0 : 1.0;
  return std::pow(r, k - 1);
}

/// False-alarm decay rate of the chi-squared Chernoff bound, optimized over
/// lambda in (0,1):
///   rate(eta) = eta/c - (mbar/2) (1 + log(2 eta / (c mbar)))
/// with c the consensus row-weight bound.  The interior optimizer
/// lambda* = 1 - c*mbar/(2 eta) leaves (0,1) at the threshold floor
/// eta = c*mbar/2, below which no decay is guaranteed and the rate is 0.
inline double fa_decay_rate(double eta, double c, double mbar) {
  if (!(c > 0.0) || !(mbar > 0.0)) throw InvalidInput("fa_decay_rate needs positive c, mbar");
  if (!(eta > 0.5 * c * mbar)) return 0.0;
  return eta / c - 0.5 * mbar * (1.0 + std::log(2.0 * eta / (c * mbar)));
}

// ---------------------------------------------------------------------------
// Nonlinear algorithm: threshold interval and false-alarm exponent.
// ---------------------------------------------------------------------------

/// LE(lambda) = eta*lambda/(1/N + sqrt(N))
///            + (sum M_n / 2) log(1 - lambda (1/N + sqrt(N) r)/(1/N + sqrt(N))).
inline double nl_le(double lambda, double eta, int n, double sum_mn, double r) {
  double lo = 1.0 / n + std::sqrt(static_cast<double>(n)) * r;
  double hi = 1.0 / n + std::sqrt(static_cast<double>(n));
  double arg = 1.0 - lambda * lo / hi;
  if (!(arg > 0.0)) throw InvalidInput("LE argument outside its domain");
  return eta * lambda / hi + 0.5 * sum_mn * std::log(arg);
}

struct NlBounds {
  double eta_lo = 0.0;
  double eta_hi = 0.0;
  double lambda_star = 0.0;
  double fa_exponent = 0.0;        // LE(min{lambda*, 1}), 0 when infeasible
  bool feasible = false;           // eta_hi > eta_lo (signal strong enough)
  bool threshold_feasible = false; // requested eta inside the open interval
  bool inconclusive_signal = false;
};

inline NlBounds nl_bounds(int n, const std::vector<int>& mn, double r, const NonlinearModel& m,
                          const Vec& theta_star, double eta) {
  if (!(r >= 0.0 && r < 1.0)) throw InvalidInput("r must lie in [0,1)");
  double sum_mn = 0.0;
  for (int v : mn) sum_mn += v;
  double sqn = std::sqrt(static_cast<double>(n));

  // h(theta*_N)^T Sigma^-1 h(theta*_N) and ||h(theta*_N)||^2
  double quad = 0.0, h_sqnorm = 0.0, sig_inv_max = 0.0;
  for (int a = 0; a < m.n_agents(); ++a) {
    Vec h = m.h[a](theta_star);
    quad += h.dot(m.sigma[a].llt().solve(h));
    h_sqnorm += h.squaredNorm();
    Eigen::SelfAdjointEigenSolver<Mat> es(m.sigma[a]);
    sig_inv_max = std::max(sig_inv_max, 1.0 / es.eigenvalues()[0]);
  }

  NlBounds b;
  b.eta_lo = 0.5 * (1.0 / n + sqn * r) * sum_mn;
  b.eta_hi = quad / (2.0 * n);
  b.feasible = b.eta_hi > b.eta_lo;
  b.threshold_feasible = eta > b.eta_lo && eta < b.eta_hi;
  b.inconclusive_signal = h_sqnorm < (1.0 + n * sqn * r) * sum_mn / sig_inv_max;

  double lo = 1.0 / n + sqn * r;
  double hi = 1.0 / n + sqn;
  b.lambda_star = hi / lo - hi * sum_mn / (2.0 * eta);
  if (b.lambda_star > 0.0)
    b.fa_exponent = nl_le(std::min(b.lambda_star, 1.0), eta, n, sum_mn, r);
  return b;
}

// ---------------------------------------------------------------------------
// Linear algorithm: burn-in times, contraction constants, exponents.
// ---------------------------------------------------------------------------

struct BurninTimes {
  long t2 = 0;  // beta_t lam_N(L) + alpha_t lam_max(GG) < 1 from here on
  long t3 = 0;  // c1 alpha_t < 1 from here on
  long t1 = 0;  // max(t2, t3)
};

/// ||I - beta X - alpha Y||_2 for symmetric PSD X, Y.
inline double a_matrix_norm(const Mat& x, const Mat& y, double beta, double alpha) {
  Eigen::SelfAdjointEigenSolver<Mat> es(beta * x + alpha * y, Eigen::EigenvaluesOnly);
  double lo = es.eigenvalues()[0];
  double hi = es.eigenvalues()[es.eigenvalues().size() - 1];
  return std::max(std::abs(1.0 - lo), std::abs(1.0 - hi));
}

inline BurninTimes l_burnin_times(const Spectrum& spec, const LinearModel& m,
                                  const LSchedule& sched) {
  double c1 = c1_linear(spec, m);
  Mat gg = gh_sigma_gh(m);
  Eigen::SelfAdjointEigenSolver<Mat> es(gg, Eigen::EigenvaluesOnly);
  double lam_gg = es.eigenvalues()[es.eigenvalues().size() - 1];
  double lam_l = spec.lambda_max();
  // both conditions have strictly decreasing left-hand sides, so the first
  // satisfying t works for every later t
  BurninTimes out;
  long t = 0;
  while (!(sched.beta(t) * lam_l + sched.alpha(t) * lam_gg < 1.0)) ++t;
  out.t2 = t;
  t = 0;
  while (!(c1 * sched.alpha(t) < 1.0)) ++t;
  out.t3 = t;
  out.t1 = std::max(out.t2, out.t3);
  return out;
}

/// log of c3 = sum_{v<t1} alpha_v^2 prod_{u=v+1}^{t1-1} ||A(u)||, computed in
/// log space because pre-burn-in operator norms can exceed one substantially.
inline double log_c3_value(const Mat& x, const Mat& y, const LSchedule& sched, long t1) {
  if (t1 <= 0) return -inf();
  std::vector<double> log_norm(t1, 0.0);
  for (long u = 0; u < t1; ++u)
    log_norm[u] = std::log(a_matrix_norm(x, y, sched.beta(u), sched.alpha(u)));
  // suffix[v] = sum_{u=v}^{t1-1} log||A(u)||
  std::vector<double> suffix(t1 + 1, 0.0);
  for (long v = t1 - 1; v >= 0; --v) suffix[v] = suffix[v + 1] + log_norm[v];
  double peak = -inf();
  std::vector<double> terms(t1);
  for (long v = 0; v < t1; ++v) {
    terms[v] = 2.0 * std::log(sched.alpha(v)) + suffix[v + 1];
    peak = std::max(peak, terms[v]);
  }
  double acc = 0.0;
  for (double tv : terms) acc += std::exp(tv - peak);
  return peak + std::log(acc);
}

struct LBounds {
  long t1 = 0, t2 = 0, t3 = 0;
  double c1 = 0.0;
  double log_c3 = 0.0;  // c3 in log space; exp() may overflow for wild schedules
  double c4 = 0.0;
  double c4_star = 0.0;
  double eta2 = 0.0;
  double eta_lo = 0.0;
  double eta_hi = 0.0;
  double ld0 = 0.0;          // false-alarm decay rate
  double ld1 = 0.0;          // guaranteed miss decay rate (min of both branches)
  double gauss_rate = 0.0;   // Gaussian-tail branch
  double ld_branch_rate = 0.0;
  bool feasible = false;
  bool threshold_feasible = false;
  bool inconclusive_signal = false;
  bool miss_bound_undefined = false;
  bool fa_bound_defined = false;
  bool b6_satisfied = false;
};

namespace detail {

/// Shared miss-branch computation given the scalar summaries of the model.
/// Fills c4, c4_star, eta2, gauss_rate, ld_branch_rate, ld1 and the undefined
/// flag.  quad = theta*^T G theta*, gg_norm = ||G_H Sigma^-1 G_H^T||,
/// nm = N*M.
inline void miss_branches(LBounds& b, double eta, int n, double rho, double quad,
                          double gg_norm, double nm, double alpha0, double log_c3, long t1,
                          int k) {
  double sqn = std::sqrt(static_cast<double>(n));
  double two_c1a = 2.0 * b.c1 * alpha0;
  b.eta2 = (-2.0 * n * eta + quad * (1.0 - n * sqn * rho)) /
           (4.0 * gg_norm * (1.0 + n * sqn * rho));

  bool ld_ok = two_c1a > 1.0 && b.eta2 > 0.0;
  if (ld_ok) {
    long t1e = std::max<long>(1, t1);
    double lead = std::exp(log_c3 + two_c1a * std::log(static_cast<double>(t1e + 1)) -
                           std::log(static_cast<double>(k)) -
                           (two_c1a - 1.0) * std::log(static_cast<double>(t1e)));
    double denom = gg_norm * (lead + alpha0 * alpha0 / (k * t1e) +
                              alpha0 * alpha0 / (two_c1a - 1.0));
    b.c4 = std::isfinite(denom) && denom > 0.0 ? 1.0 / denom : 0.0;
    b.c4_star = (two_c1a - 1.0) / (alpha0 * alpha0 * gg_norm) - nm / (2.0 * b.eta2);
    double lam = std::min(b.c4, b.c4_star);
    double arg = 1.0 - lam * alpha0 * alpha0 * gg_norm / (two_c1a - 1.0);
    if (lam > 0.0 && arg > 0.0) {
      double ld = lam * b.eta2 + 0.5 * nm * std::log(arg);
      if (ld > 0.0)
        b.ld_branch_rate = ld;
      else
        ld_ok = false;
    } else {
      ld_ok = false;
    }
  }

  double gnum = -eta / 4.0 + quad * (1.0 / n - sqn * rho) / 8.0;
  bool gauss_ok = gnum > 0.0 && quad > 0.0;
  if (gauss_ok) {
    double gden = 2.0 * quad * std::pow(1.0 / n + sqn * rho, 2.0);
    b.gauss_rate = gnum * gnum / gden;
  }

  if (ld_ok && gauss_ok) {
    b.ld1 = std::min(b.gauss_rate, b.ld_branch_rate);
  } else {
    b.ld1 = 0.0;
    b.miss_bound_undefined = true;
  }
}

}  // namespace detail

inline LBounds l_bounds(const Spectrum& spec, const LinearModel& m, const LSchedule& sched,
                        int k, const Vec& theta_star, double eta, double r) {
  sched.validate();
  if (k < 1) throw InvalidInput("k must be >= 1");
  int n = m.n_agents();
  int nm = n * m.param_dim();
  double rho = consensus_deviation(r, k, n);
  double sqn = std::sqrt(static_cast<double>(n));
  double sum_mn = m.total_obs_dim();

  LBounds b;
  b.c1 = c1_linear(spec, m);
  BurninTimes bt = l_burnin_times(spec, m, sched);
  b.t1 = bt.t1;
  b.t2 = bt.t2;
  b.t3 = bt.t3;
  b.b6_satisfied = sched.b6_holds(b.c1);

  Mat x = kron_identity(spec.laplacian, m.param_dim());
  Mat y = gh_sigma_gh(m);
  Eigen::SelfAdjointEigenSolver<Mat> es(y, Eigen::EigenvaluesOnly);
  double gg_norm = es.eigenvalues()[es.eigenvalues().size() - 1];
  b.log_c3 = log_c3_value(x, y, sched, b.t1);

  Mat g = gram_matrix(m);
  double quad = theta_star.dot(g * theta_star);
  double alpha0 = sched.alpha(0);
  double two_c1a = 2.0 * b.c1 * alpha0;

  b.eta_lo = 0.5 * (1.0 / n + sqn * rho) * sum_mn;
  b.eta_hi = quad * (1.0 - n * sqn * rho) / (2.0 * n);
  if (two_c1a > 1.0)
    b.eta_hi -= m.param_dim() * alpha0 * alpha0 * gg_norm * gg_norm * (1.0 + n * sqn * rho) /
                (two_c1a - 1.0);
  else
    b.eta_hi = -inf();
  b.feasible = b.eta_hi > b.eta_lo;
  b.threshold_feasible = eta > b.eta_lo && eta < b.eta_hi;

  b.fa_bound_defined = eta > b.eta_lo;
  b.ld0 = fa_decay_rate(eta, 1.0 / n + sqn * rho, sum_mn);

  detail::miss_branches(b, eta, n, rho, quad, gg_norm, nm, alpha0, b.log_c3, b.t1, k);

  // weak-signal sufficient condition for the theorem to be inconclusive
  Eigen::SelfAdjointEigenSolver<Mat> eg(g, Eigen::EigenvaluesOnly);
  double gmin = eg.eigenvalues()[0];
  double one_minus = 1.0 - n * sqn * rho;
  if (one_minus <= 0.0 || gmin <= 0.0 || two_c1a <= 1.0) {
    b.inconclusive_signal = true;
  } else {
    double lim = (1.0 + n * sqn * rho) * sum_mn / (gmin * one_minus) +
                 2.0 * m.param_dim() * n * alpha0 * alpha0 * gg_norm * gg_norm *
                     (1.0 + n * sqn * rho) / (gmin * (two_c1a - 1.0) * one_minus);
    b.inconclusive_signal = theta_star.squaredNorm() < lim;
  }
  return b;
}

// ---------------------------------------------------------------------------
// Scalar field model: distributed and centralized exponents.
// ---------------------------------------------------------------------------

struct ScalarBounds {
  LBounds distributed;      // with the N1-observation false-alarm floor
  // centralized detector
  double eta_c = 0.0;       // Gaussian mean shift constant
  double d1_star = 0.0;
  double ld0_central = 0.0;
  double ld1_central = 0.0;
  double gauss_rate_central = 0.0;
  double ld_branch_rate_central = 0.0;
  double eta_lo_central = 0.5;
  double eta_hi_central = 0.0;
  bool feasible_central = false;
  bool threshold_feasible_central = false;
  bool miss_bound_undefined_central = false;
  bool theta_feasible = false;           // distributed signal-strength condition
  bool theta_feasible_central = false;
};

inline ScalarBounds scalar_bounds(int n, int n1, double h, double sigma2, const Spectrum& spec,
                                  const LSchedule& sched, int k, double theta_star, double eta,
                                  double r, double g_central) {
  if (n1 < 1) throw InvalidInput("global observability requires N1 >= 1");
  if (h == 0.0) throw InvalidInput("h = 0 breaks global observability");
  LinearModel m = scalar_field_model(n, n1, h, sigma2);

  ScalarBounds sb;
  double rho = consensus_deviation(r, k, n);
  double sqn = std::sqrt(static_cast<double>(n));
  double alpha0 = sched.alpha(0);

  // distributed side, written out in the scalar forms
  LBounds& d = sb.distributed;
  d.c1 = c1_linear(spec, m);
  BurninTimes bt = l_burnin_times(spec, m, sched);
  d.t1 = bt.t1;
  d.t2 = bt.t2;
  d.t3 = bt.t3;
  d.b6_satisfied = sched.b6_holds(d.c1);
  Mat gg = gh_sigma_gh(m);  // diag(h^2/sigma^2 for informative agents, 0 otherwise)
  d.log_c3 = log_c3_value(spec.laplacian, gg, sched, d.t1);
  double two_c1a = 2.0 * d.c1 * alpha0;
  double quad = n1 * h * h * theta_star * theta_star / sigma2;  // theta*^T G theta*

  d.eta_lo = 0.5 * (1.0 / n + sqn * rho) * n1;
  d.eta_hi = n1 * h * h * theta_star * theta_star * (1.0 - n * sqn * rho) / (2.0 * n * sigma2);
  if (two_c1a > 1.0)
    d.eta_hi -= alpha0 * alpha0 * std::pow(h, 4.0) * (1.0 + n * sqn * rho) /
                (sigma2 * sigma2 * (two_c1a - 1.0));
  else
    d.eta_hi = -inf();
  d.feasible = d.eta_hi > d.eta_lo;
  d.threshold_feasible = eta > d.eta_lo && eta < d.eta_hi;
  d.fa_bound_defined = eta > d.eta_lo;
  d.ld0 = fa_decay_rate(eta, 1.0 / n + sqn * rho, static_cast<double>(n1));
  detail::miss_branches(d, eta, n, rho, quad, h * h / sigma2, static_cast<double>(n), alpha0,
                        d.log_c3, d.t1, k);

  if (two_c1a > 1.0 && n * sqn * rho < 1.0) {
    double lim = (1.0 + n * sqn * rho) / (1.0 - n * sqn * rho) *
                 (n * sigma2 / (n1 * h * h) +
                  2.0 * n * alpha0 * alpha0 * h * h / (n1 * sigma2 * (two_c1a - 1.0)));
    sb.theta_feasible = theta_star * theta_star >= lim;
  }
  d.inconclusive_signal = !sb.theta_feasible;

  // centralized detector with kappa_t = g/(t+1)
  double kap0 = g_central;
  double h2 = h * h;
  sb.theta_feasible_central =
      2.0 * h2 * kap0 > sigma2 &&
      theta_star * theta_star >=
          2.0 * n1 * h2 * kap0 * kap0 / (2.0 * h2 * kap0 - sigma2) + n1 * sigma2 / h2;
  sb.eta_lo_central = 0.5;
  sb.eta_hi_central = h2 * theta_star * theta_star / (2.0 * n1 * sigma2);
  if (h2 * kap0 - sigma2 > 0.0)
    sb.eta_hi_central -=
        2.0 * kap0 * kap0 * h2 * h2 / (n1 * sigma2 * (h2 * kap0 - sigma2));
  else
    sb.eta_hi_central = -inf();
  sb.feasible_central = sb.eta_hi_central > sb.eta_lo_central;
  sb.threshold_feasible_central = eta > sb.eta_lo_central && eta < sb.eta_hi_central;

  // false-alarm rate: full mixing (c = 1/N1) over the N1 informative streams
  sb.ld0_central = fa_decay_rate(eta, 1.0 / n1, static_cast<double>(n1));

  sb.eta_c = n1 * sigma2 / h2 * (-eta / 2.0 + h2 * theta_star * theta_star / (4.0 * n1 * sigma2));
  bool ld_ok = 2.0 * h2 * kap0 - sigma2 > 0.0 && sb.eta_c > 0.0;
  if (ld_ok) {
    sb.d1_star = (2.0 * h2 * n1 * kap0 - n1 * sigma2) / (kap0 * kap0 * h2) -
                 n1 / (2.0 * sb.eta_c);
    double arg = 1.0 - sb.d1_star * kap0 * kap0 * h2 / (2.0 * h2 * kap0 - sigma2);
    if (sb.d1_star > 0.0 && arg > 0.0) {
      double ld = sb.d1_star * sb.eta_c + n1 * std::log(arg);
      if (ld > 0.0)
        sb.ld_branch_rate_central = ld;
      else
        ld_ok = false;
    } else {
      ld_ok = false;
    }
  }
  double gnum = -eta / 4.0 + h2 * theta_star * theta_star / (8.0 * sigma2);
  bool gauss_ok = gnum > 0.0 && theta_star != 0.0;
  if (gauss_ok)
    sb.gauss_rate_central = sigma2 * gnum * gnum / (2.0 * h2 * theta_star * theta_star);
  if (ld_ok && gauss_ok) {
    sb.ld1_central = std::min(sb.gauss_rate_central, sb.ld_branch_rate_central);
  } else {
    sb.ld1_central = 0.0;
    sb.miss_bound_undefined_central = true;
  }
  return sb;
}

// ---------------------------------------------------------------------------
// Noise-history covariance diagnostics.
// ---------------------------------------------------------------------------

struct PtDiagnostic {
  long t = 0;
  long t1 = 0;
  double pt_norm_times_t = 0.0;
  double bound = 0.0;
  double min_eigenvalue = 0.0;
  double pt_norm_crosscheck = 0.0;  // via the Gram route ||sum alpha_i^2 Phi_i^2||
};

/// Dense assembly of the NMt x NMt noise-history covariance with blocks
/// alpha_i alpha_j Phi_i^T Phi_j, Phi_i = A(t-1) ... A(i+1), exactly the
/// matrix in the quadratic-form expansion of ||theta(t) - theta*_N||^2
/// (coinciding with the product-form blocks whenever the A's commute), and
/// the tail bound
///   t||P_t|| <= c3 (t1+1)^{2c1a0} / t^{2c1a0-1} + a0^2/t + a0^2/(2c1a0-1).
inline PtDiagnostic pt_diagnostic(const Spectrum& spec, const LinearModel& m,
                                  const LSchedule& sched, long t) {
  sched.validate();
  int nm = m.n_agents() * m.param_dim();
  if (t < 1) throw InvalidInput("horizon must be >= 1");
  if (t * nm > 4000) throw ResourceExhausted("dense construction capped at t*N*M <= 4000");
  double c1 = c1_linear(spec, m);
  double alpha0 = sched.alpha(0);
  double two_c1a = 2.0 * c1 * alpha0;
  if (two_c1a <= 1.0)
    throw InvalidInput("bound needs 2 c1 alpha_0 > 1; increase a");

  Mat x = kron_identity(spec.laplacian, m.param_dim());
  Mat y = gh_sigma_gh(m);
  BurninTimes bt = l_burnin_times(spec, m, sched);

  // suffix products Phi_i = A(t-1) ... A(i+1), cached back to front
  std::vector<Mat> phi(t);
  phi[t - 1] = Mat::Identity(nm, nm);
  for (long i = t - 2; i >= 0; --i) {
    Mat a_next = Mat::Identity(nm, nm) - sched.beta(i + 1) * x - sched.alpha(i + 1) * y;
    phi[i] = phi[i + 1] * a_next;  // accumulates in chronological order
  }
  Mat p(nm * t, nm * t);
  for (long i = 0; i < t; ++i)
    for (long j = i; j < t; ++j) {
      Mat blk = sched.alpha(i) * sched.alpha(j) * (phi[i].transpose() * phi[j]);
      p.block(i * nm, j * nm, nm, nm) = blk;
      if (j > i) p.block(j * nm, i * nm, nm, nm) = blk.transpose();
    }

  Eigen::SelfAdjointEigenSolver<Mat> es(p, Eigen::EigenvaluesOnly);
  PtDiagnostic d;
  d.t = t;
  d.t1 = bt.t1;
  d.min_eigenvalue = es.eigenvalues()[0];
  d.pt_norm_times_t = t * std::max(std::abs(es.eigenvalues()[0]),
                                   std::abs(es.eigenvalues()[nm * t - 1]));

  Mat gram = Mat::Zero(nm, nm);
  for (long i = 0; i < t; ++i)
    gram += sched.alpha(i) * sched.alpha(i) * (phi[i] * phi[i].transpose());
  Eigen::SelfAdjointEigenSolver<Mat> eg(gram, Eigen::EigenvaluesOnly);
  d.pt_norm_crosscheck = eg.eigenvalues()[nm - 1];

  long t1e = std::max<long>(1, bt.t1);
  double log_c3 = log_c3_value(x, y, sched, bt.t1);
  d.bound = std::exp(log_c3 + two_c1a * std::log(static_cast<double>(t1e + 1)) -
                     (two_c1a - 1.0) * std::log(static_cast<double>(t))) +
            alpha0 * alpha0 / t + alpha0 * alpha0 / (two_c1a - 1.0);
  return d;
}

}  // namespace cidet
