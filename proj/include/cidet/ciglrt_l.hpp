#pragma once

#include <cidet/common.hpp>
#include <cidet/network.hpp>
#include <cidet/rng.hpp>
#include <cidet/sensing.hpp>
#include <cidet/trajectory.hpp>

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

namespace cidet {

/// Weight sequences for the linear recursion: alpha_t = a/(t+1),
/// beta_t = a/(t+1)^delta2.  The innovation-gain bound a >= 1/(2c1)+2 is a
/// validated precondition of the bounds, not a structural requirement; check
/// it with b6_holds.
struct LSchedule {
  double a = 1.0;
  double delta2 = 0.5;

  double alpha(long t) const { return a / static_cast<double>(t + 1); }
  double beta(long t) const { return a / std::pow(static_cast<double>(t + 1), delta2); }

  void validate() const {
    if (!(a >= 1.0)) throw InvalidInput("schedule needs a >= 1");
    if (!(delta2 > 0.0 && delta2 <= 1.0)) throw InvalidInput("delta2 must lie in (0, 1]");
  }

  bool b6_holds(double c1) const { return a >= 1.0 / (2.0 * c1) + 2.0; }
};

/// Precomputed per-agent operators; avoids refactorizing Sigma_n every tick.
struct LinearOps {
  std::vector<Mat> sig_inv;     // Sigma_n^-1
  std::vector<Mat> ht_sig_inv;  // H_n^T Sigma_n^-1  (M x M_n)

  explicit LinearOps(const LinearModel& m) {
    for (int n = 0; n < m.n_agents(); ++n) {
      Mat si = m.sigma[n].llt().solve(Mat::Identity(m.obs_dim(n), m.obs_dim(n)));
      sig_inv.push_back(si);
      ht_sig_inv.push_back(m.H[n].transpose() * si);
    }
  }
};

struct LState {
  long t = 0;
  Mat theta;                   // N x M
  Mat theta_snap;              // estimate at the last tick divisible by k
  std::vector<Vec> s;          // running observation averages, s_n(t-1)
  Vec z_hat;                   // auxiliary statistic awaiting publication
  Vec z;                       // held decision statistic
  long publish_tick = -1;      // tick at which z_hat becomes z
  int k = 1;

  static LState zero(const LinearModel& m, int k) {
    LState st;
    st.theta = Mat::Zero(m.n_agents(), m.param_dim());
    st.theta_snap = st.theta;
    for (int n = 0; n < m.n_agents(); ++n) st.s.emplace_back(Vec::Zero(m.obs_dim(n)));
    st.z_hat = Vec::Zero(m.n_agents());
    st.z = Vec::Zero(m.n_agents());
    st.k = k;
    return st;
  }
};

/// theta(t+1) = theta(t) - beta_t (L (x) I) theta(t)
///            + alpha_t G_H Sigma^-1 (y(t) - G_H^T theta(t)), per-agent form.
inline Mat l_next_theta(const LinearModel& m, const LinearOps& ops,
                        const std::vector<std::vector<int>>& nbrs, double alpha_t,
                        double beta_t, const Mat& theta, const Vec& y) {
  Mat next = theta;
  int at = 0;
  for (int n = 0; n < m.n_agents(); ++n) {
    Vec tn = theta.row(n).transpose();
    Vec cons = Vec::Zero(theta.cols());
    for (int l : nbrs[n]) cons += tn - theta.row(l).transpose();
    Vec resid = y.segment(at, m.obs_dim(n)) - m.H[n] * tn;
    next.row(n) = (tn - beta_t * cons + alpha_t * (ops.ht_sig_inv[n] * resid)).transpose();
    at += m.obs_dim(n);
  }
  return next;
}

/// s_n(t) = s_n(t-1) t/(t+1) + y_n(t)/(t+1); s_n(0) = y_n(0).
inline Vec l_update_running_average(const Vec& s_prev, const Vec& y, long t) {
  if (t < 0) throw InvalidInput("negative time index");
  if (t == 0) return y;
  double tt = static_cast<double>(t);
  return s_prev * (tt / (tt + 1.0)) + y / (tt + 1.0);
}

/// Local statistic values theta_n^T H_n^T Sigma_n^-1 (s_n - H_n theta_n / 2).
inline Vec l_local_statistics(const LinearModel& m, const LinearOps& ops, const Mat& theta,
                              const std::vector<Vec>& s) {
  Vec out(m.n_agents());
  for (int n = 0; n < m.n_agents(); ++n) {
    Vec tn = theta.row(n).transpose();
    out[n] = tn.dot(ops.ht_sig_inv[n] * (s[n] - 0.5 * (m.H[n] * tn)));
  }
  return out;
}

/// Refresh at ticks one modulo k: local values from the snapshot at k(t-1),
/// mixed through W^{k-1}, published k-1 ticks later and then held.
inline void l_refresh_statistic(LState& state, const LinearModel& m, const LinearOps& ops,
                                const Mat& w_pow_km1) {
  if (state.t < 1 || (state.t - 1) % state.k != 0)
    throw ContractViolation("refresh called off-schedule (t must be 1 mod k)");
  Vec local = l_local_statistics(m, ops, state.theta_snap, state.s);
  state.z_hat = w_pow_km1 * local;
  state.publish_tick = state.t + state.k - 1;
}

inline void l_publish_if_due(LState& state) {
  if (state.publish_tick == state.t) state.z = state.z_hat;
}

inline Hypothesis l_decide(double z, double eta) {
  return z > eta ? Hypothesis::H1 : Hypothesis::H0;
}

struct LTrialConfig {
  LinearModel model;
  Graph graph;
  ConsensusWeights weights;
  LSchedule schedule;
  int k = 1;
  TruthConfig truth;
  double eta = 0.0;
  long horizon = 1000;
  int stride = 10;
  std::uint64_t seed = 42;
  bool cap_consensus_weight = true;
  bool allow_k_below_min = false;
  double divergence_guard = kDivergenceGuard;
  std::vector<long> probe_times;
  bool zero_noise = false;
  Mat theta0;
};

inline Trajectory l_run_trial(const LTrialConfig& cfg) {
  cfg.schedule.validate();
  const LinearModel& m = cfg.model;
  if (cfg.k < 1) throw InvalidInput("k must be >= 1");
  if (cfg.graph.n_agents != m.n_agents()) throw InvalidInput("graph/model agent count mismatch");
  if (cfg.weights.r > 0.0 && cfg.weights.r < 1.0) {
    int kmin = min_consensus_rounds(m.n_agents(), cfg.weights.r);
    if (cfg.k < kmin && !cfg.allow_k_below_min)
      throw AssumptionViolated("k below the minimum consensus rounds " + std::to_string(kmin) +
                               "; set allow_k_below_min to override");
  }

  LinearOps ops(m);
  auto nbrs = cfg.graph.neighbors();
  Mat wk = matrix_power(cfg.weights.w, cfg.k - 1);
  NoiseSampler sampler(m.sigma, cfg.seed);
  sampler.force_zero(cfg.zero_noise);
  double beta_cap = cfg.cap_consensus_weight ? cfg.weights.delta : inf();

  LState state = LState::zero(m, cfg.k);
  if (cfg.theta0.size() > 0) {
    state.theta = cfg.theta0;
    state.theta_snap = cfg.theta0;
  }
  Vec theta_ref = cfg.truth.hypothesis == Hypothesis::H1 ? cfg.truth.theta_star
                                                         : Vec::Zero(m.param_dim());

  Trajectory traj;
  traj.z.resize(cfg.horizon + 1, m.n_agents());
  traj.z_times.reserve(cfg.horizon + 1);
  traj.refresh_mark.assign(cfg.horizon + 1, 0);
  std::vector<long> theta_times;
  std::vector<Vec> errs;
  traj.probe_times = cfg.probe_times;

  for (long t = 0; t <= cfg.horizon; ++t) {
    state.t = t;
    if (t >= 1 && (t - 1) % cfg.k == 0) l_refresh_statistic(state, m, ops, wk);
    l_publish_if_due(state);
    if (state.publish_tick == t) traj.refresh_mark[t] = 1;

    traj.z_times.push_back(t);
    traj.z.row(t) = state.z.transpose();
    if (t % cfg.stride == 0 || t == cfg.horizon) {
      theta_times.push_back(t);
      Vec e(m.n_agents());
      for (int n = 0; n < m.n_agents(); ++n)
        e[n] = (state.theta.row(n).transpose() - theta_ref).norm();
      errs.push_back(e);
    }
    for (long pt : cfg.probe_times)
      if (pt == t)
        traj.probe_abs_err.push_back(
            (state.theta.rowwise() - theta_ref.transpose()).cwiseAbs());
    if (t == cfg.horizon) break;

    Vec y = sample_observation(m, cfg.truth, sampler);
    int at = 0;
    for (int n = 0; n < m.n_agents(); ++n) {
      state.s[n] = l_update_running_average(state.s[n], y.segment(at, m.obs_dim(n)), t);
      at += m.obs_dim(n);
    }
    double alpha_t = cfg.schedule.alpha(t);
    double beta_t = std::min(cfg.schedule.beta(t), beta_cap);
    state.theta = l_next_theta(m, ops, nbrs, alpha_t, beta_t, state.theta, y);
    if ((t + 1) % cfg.k == 0) state.theta_snap = state.theta;

    if (!state.theta.allFinite())
      throw NumericalDivergence("non-finite state in linear recursion", t);
    if (state.theta.cwiseAbs().maxCoeff() > cfg.divergence_guard)
      throw NumericalDivergence("estimate exceeded divergence guard", t);
  }

  traj.theta_times = std::move(theta_times);
  traj.err_norm.resize(traj.theta_times.size(), m.n_agents());
  for (std::size_t i = 0; i < errs.size(); ++i) traj.err_norm.row(i) = errs[i].transpose();
  traj.theta_final = state.theta;
  return traj;
}

// ---------------------------------------------------------------------------
// Centralized baseline for the scalar field model.
// ---------------------------------------------------------------------------

struct CentralParams {
  double h = 1.0;
  double sigma2 = 1.0;
  int n1 = 1;
  double g = 1.0;  // kappa_t = g/(t+1)

  void validate() const {
    if (n1 < 1) throw InvalidInput("centralized baseline needs N1 >= 1");
    if (!(h != 0.0)) throw InvalidInput("h must be nonzero for observability");
    if (!(sigma2 > 0.0)) throw InvalidInput("sigma2 must be positive");
    if (!(2.0 * h * h * g > sigma2))
      throw AssumptionViolated("weight constant violates 2 h^2 g > sigma^2");
  }

  double kappa(long t) const { return g / static_cast<double>(t + 1); }
};

struct CentralState {
  long t = 0;
  double theta_c = 0.0;
  double theta_prev = 0.0;  // theta_c(t-1)
  double z_c = 0.0;
  std::vector<double> s;  // running averages at the informative agents
};

/// One fusion-center step consuming the informative agents' observations.
inline void central_step(CentralState& st, const CentralParams& p, const Vec& y) {
  if (y.size() != p.n1) throw InvalidInput("expected N1 observations");
  double s_sum_prev = 0.0;
  for (double v : st.s) s_sum_prev += v;
  double z_next = 0.0;
  if (st.t >= 1) {
    double th = st.theta_prev;  // theta_c(t-1)
    z_next = (p.h * th / (p.n1 * p.sigma2)) * (s_sum_prev - 0.5 * p.h * th);
  }
  if (st.s.empty()) st.s.assign(p.n1, 0.0);
  for (int j = 0; j < p.n1; ++j)
    st.s[j] = st.t == 0 ? y[j]
                        : st.s[j] * (static_cast<double>(st.t) / (st.t + 1.0)) + y[j] / (st.t + 1.0);
  double innov = p.h * y.sum() - p.n1 * p.h * p.h * st.theta_c;
  double theta_next = st.theta_c + p.kappa(st.t) / (p.n1 * p.sigma2) * innov;
  st.theta_prev = st.theta_c;
  st.theta_c = theta_next;
  st.z_c = z_next;
  ++st.t;
}

struct CentralTrialConfig {
  CentralParams params;
  TruthConfig truth;  // scalar theta_star
  double eta = 0.0;
  long horizon = 1000;
  std::uint64_t seed = 42;
  bool zero_noise = false;
  double theta0 = 0.0;
};

/// Returns (z_c history, theta_c history) at every tick.
inline std::pair<Vec, Vec> central_run_trial(const CentralTrialConfig& cfg) {
  cfg.params.validate();
  std::vector<Mat> sig(cfg.params.n1, cfg.params.sigma2 * Mat::Identity(1, 1));
  NoiseSampler sampler(sig, cfg.seed);
  sampler.force_zero(cfg.zero_noise);
  CentralState st;
  st.theta_c = cfg.theta0;
  st.theta_prev = cfg.theta0;
  st.s.assign(cfg.params.n1, 0.0);
  Vec zs(cfg.horizon + 1), ths(cfg.horizon + 1);
  double target = cfg.truth.hypothesis == Hypothesis::H1 ? cfg.truth.theta_star[0] : 0.0;
  for (long t = 0; t <= cfg.horizon; ++t) {
    zs[t] = st.z_c;
    ths[t] = st.theta_c;
    if (t == cfg.horizon) break;
    Vec y = sampler.maybe_draw_stacked();
    if (cfg.truth.hypothesis == Hypothesis::H1)
      y.array() += cfg.params.h * target;
    central_step(st, cfg.params, y);
    if (!std::isfinite(st.theta_c)) throw NumericalDivergence("central estimate diverged", t);
  }
  return {zs, ths};
}

}  // namespace cidet
