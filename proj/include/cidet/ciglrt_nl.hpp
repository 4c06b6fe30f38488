#pragma once

#include <cidet/common.hpp>
#include <cidet/network.hpp>
#include <cidet/rng.hpp>
#include <cidet/sensing.hpp>
#include <cidet/trajectory.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

namespace cidet {

/// Decaying weight sequences for the nonlinear recursion:
/// alpha_t = a/(t+1), beta_t = b/(t+1)^tau2 with tau2 in (0, 1/2).
struct NlSchedule {
  double a = 1.0;
  double b = 1.0;
  double tau2 = 0.45;

  double alpha(long t) const { return a / static_cast<double>(t + 1); }
  double beta(long t) const { return b / std::pow(static_cast<double>(t + 1), tau2); }

  void validate() const {
    if (!(a > 0.0)) throw InvalidInput("schedule needs a > 0");
    if (!(b > 0.0)) throw InvalidInput("schedule needs b > 0");
    if (!(tau2 > 0.0 && tau2 < 0.5)) throw InvalidInput("tau2 must lie in (0, 1/2)");
  }

  /// a*c1 >= 1 gate; c1hat comes from the monotonicity probe.
  bool gain_condition_holds(double c1hat) const { return a * c1hat >= 1.0; }
};

struct NlState {
  long t = 0;
  Mat theta;  // N x M, row n is agent n's estimate
  Vec z;      // length N

  static NlState zero(int n_agents, int param_dim) {
    return NlState{0, Mat::Zero(n_agents, param_dim), Vec::Zero(n_agents)};
  }
};

/// Log-likelihood ratio of one observation at the plug-in estimate:
/// h_n^T Sigma_n^-1 y_n - h_n^T Sigma_n^-1 h_n / 2 with h_n = h_n(theta_n).
inline double nl_llr(const NonlinearModel& m, int n, const Vec& theta_n, const Vec& y_n) {
  Vec h = m.h[n](theta_n);
  Vec si_h = m.sigma[n].llt().solve(h);
  return si_h.dot(y_n) - 0.5 * si_h.dot(h);
}

/// One estimate step, per-agent form.  theta rows are updated from the
/// neighborhood disagreement and the innovation
/// grad_n(theta_n) Sigma_n^-1 (y_n - h_n(theta_n)).
inline Mat nl_next_theta(const NonlinearModel& m, const std::vector<std::vector<int>>& nbrs,
                         double alpha_t, double beta_t, const Mat& theta, const Vec& y) {
  Mat next = theta;
  int at = 0;
  for (int n = 0; n < m.n_agents(); ++n) {
    Vec tn = theta.row(n).transpose();
    Vec cons = Vec::Zero(theta.cols());
    for (int l : nbrs[n]) cons += tn - theta.row(l).transpose();
    Vec resid = y.segment(at, m.obs_dim(n)) - m.h[n](tn);
    Vec innov = m.grad[n](tn) * m.sigma[n].llt().solve(resid);
    next.row(n) = (tn - beta_t * cons + alpha_t * innov).transpose();
    at += m.obs_dim(n);
  }
  return next;
}

/// Stacked form of the same step, via L (x) I_M and block-diagonal gain
/// matrices.  Kept as an independent route for cross-checking.
inline Mat nl_next_theta_stacked(const NonlinearModel& m, const Spectrum& spec, double alpha_t,
                                 double beta_t, const Mat& theta, const Vec& y) {
  int n_agents = m.n_agents();
  int mm = static_cast<int>(theta.cols());
  Vec tv(n_agents * mm);
  for (int n = 0; n < n_agents; ++n) tv.segment(n * mm, mm) = theta.row(n).transpose();

  Mat gain = Mat::Zero(n_agents * mm, m.total_obs_dim());  // G(theta) Sigma^-1
  Vec h(m.total_obs_dim());
  int at = 0;
  for (int n = 0; n < n_agents; ++n) {
    Vec tn = theta.row(n).transpose();
    h.segment(at, m.obs_dim(n)) = m.h[n](tn);
    Mat si = m.sigma[n].llt().solve(Mat::Identity(m.obs_dim(n), m.obs_dim(n)));
    gain.block(n * mm, at, mm, m.obs_dim(n)) = m.grad[n](tn) * si;
    at += m.obs_dim(n);
  }
  Vec next = tv - beta_t * (kron_identity(spec.laplacian, mm) * tv) + alpha_t * (gain * (y - h));
  Mat out(n_agents, mm);
  for (int n = 0; n < n_agents; ++n) out.row(n) = next.segment(n * mm, mm).transpose();
  return out;
}

/// One statistic step: z(t+1) = (t/(t+1)) W z(t) + llr(theta(t), y(t))/(t+1).
/// theta must be the pre-update estimate for the same tick.
inline Vec nl_next_z(const NonlinearModel& m, const Mat& w, long t, const Vec& z,
                     const Mat& theta, const Vec& y) {
  int n_agents = m.n_agents();
  Vec llr(n_agents);
  int at = 0;
  for (int n = 0; n < n_agents; ++n) {
    llr[n] = nl_llr(m, n, theta.row(n).transpose(), y.segment(at, m.obs_dim(n)));
    at += m.obs_dim(n);
  }
  double tt = static_cast<double>(t);
  return (tt / (tt + 1.0)) * (w * z) + llr / (tt + 1.0);
}

/// Boundary goes to H0: decide H1 only for z strictly above the threshold.
inline Hypothesis nl_decide(double z, double eta) {
  return z > eta ? Hypothesis::H1 : Hypothesis::H0;
}

struct NlTrialConfig {
  NonlinearModel model;
  Graph graph;
  ConsensusWeights weights;
  NlSchedule schedule;
  TruthConfig truth;
  double eta = 0.0;
  long horizon = 1000;
  int stride = 10;
  std::uint64_t seed = 42;
  bool project_box = false;
  bool cap_consensus_weight = true;  // clamp beta_t at the mixing step delta
  double divergence_guard = kDivergenceGuard;
  std::vector<long> probe_times;
  bool zero_noise = false;
  Mat theta0;  // optional N x M initial estimates
  Vec z0;      // optional initial statistics
};

inline Trajectory nl_run_trial(const NlTrialConfig& cfg) {
  cfg.schedule.validate();
  const NonlinearModel& m = cfg.model;
  int n_agents = m.n_agents();
  int mm = m.param_dim;
  if (cfg.graph.n_agents != n_agents) throw InvalidInput("graph/model agent count mismatch");

  NlState state = NlState::zero(n_agents, mm);
  if (cfg.theta0.size() > 0) state.theta = cfg.theta0;
  if (cfg.z0.size() > 0) state.z = cfg.z0;

  Vec theta_ref = cfg.truth.hypothesis == Hypothesis::H1 ? cfg.truth.theta_star
                                                         : Vec::Zero(mm);
  auto nbrs = cfg.graph.neighbors();
  NoiseSampler sampler(m.sigma, cfg.seed);
  sampler.force_zero(cfg.zero_noise);
  double beta_cap = cfg.cap_consensus_weight ? cfg.weights.delta : inf();

  Trajectory traj;
  traj.z_times.reserve(cfg.horizon + 1);
  traj.z.resize(cfg.horizon + 1, n_agents);
  std::vector<long> theta_times;
  std::vector<Vec> errs;
  traj.probe_times = cfg.probe_times;

  for (long t = 0; t <= cfg.horizon; ++t) {
    // record state indexed t before consuming y(t)
    traj.z_times.push_back(t);
    traj.z.row(t) = state.z.transpose();
    if (t % cfg.stride == 0 || t == cfg.horizon) {
      theta_times.push_back(t);
      Vec e(n_agents);
      for (int n = 0; n < n_agents; ++n)
        e[n] = (state.theta.row(n).transpose() - theta_ref).norm();
      errs.push_back(e);
    }
    for (long pt : cfg.probe_times)
      if (pt == t)
        traj.probe_abs_err.push_back(
            (state.theta.rowwise() - theta_ref.transpose()).cwiseAbs());
    if (t == cfg.horizon) break;

    Vec y = sample_observation(m, cfg.truth, sampler);
    double alpha_t = cfg.schedule.alpha(t);
    double beta_t = std::min(cfg.schedule.beta(t), beta_cap);

    state.z = nl_next_z(m, cfg.weights.w, t, state.z, state.theta, y);
    state.theta = nl_next_theta(m, nbrs, alpha_t, beta_t, state.theta, y);
    if (cfg.project_box && m.domain_box)
      for (int n = 0; n < n_agents; ++n)
        state.theta.row(n) = m.project(state.theta.row(n).transpose()).transpose();
    state.t = t + 1;

    if (!state.theta.allFinite() || !state.z.allFinite())
      throw NumericalDivergence("non-finite state in nonlinear recursion", t);
    if (state.theta.cwiseAbs().maxCoeff() > cfg.divergence_guard)
      throw NumericalDivergence("estimate exceeded divergence guard", t);
  }

  traj.theta_times = std::move(theta_times);
  traj.err_norm.resize(traj.theta_times.size(), n_agents);
  for (std::size_t i = 0; i < errs.size(); ++i) traj.err_norm.row(i) = errs[i].transpose();
  traj.theta_final = state.theta;
  traj.refresh_mark.assign(traj.z_times.size(), 0);
  return traj;
}

}  // namespace cidet
