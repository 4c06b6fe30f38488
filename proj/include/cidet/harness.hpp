#pragma once

#include <cidet/bounds.hpp>
#include <cidet/ciglrt_l.hpp>
#include <cidet/ciglrt_nl.hpp>
#include <cidet/common.hpp>
#include <cidet/network.hpp>
#include <cidet/sensing.hpp>
#include <cidet/trajectory.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace cidet {

enum class Algorithm { NL, L, Central };

enum class CurveKind { Miss, FalseAlarm };

struct ExperimentConfig {
  Algorithm algorithm = Algorithm::NL;
  std::optional<NlTrialConfig> nl;
  std::optional<LTrialConfig> l;
  std::optional<CentralTrialConfig> central;
  int trials = 1;
  int threads = 1;
  std::uint64_t master_seed = 42;
  int sample_trajectories = 3;

  long horizon() const {
    switch (algorithm) {
      case Algorithm::NL: return nl->horizon;
      case Algorithm::L: return l->horizon;
      default: return central->horizon;
    }
  }
  double eta() const {
    switch (algorithm) {
      case Algorithm::NL: return nl->eta;
      case Algorithm::L: return l->eta;
      default: return central->eta;
    }
  }
  Hypothesis hypothesis() const {
    switch (algorithm) {
      case Algorithm::NL: return nl->truth.hypothesis;
      case Algorithm::L: return l->truth.hypothesis;
      default: return central->truth.hypothesis;
    }
  }
  int n_agents() const {
    switch (algorithm) {
      case Algorithm::NL: return nl->model.n_agents();
      case Algorithm::L: return l->model.n_agents();
      default: return 1;
    }
  }
  const std::vector<long>& probe_times() const {
    static const std::vector<long> kNone;
    switch (algorithm) {
      case Algorithm::NL: return nl->probe_times;
      case Algorithm::L: return l->probe_times;
      default: return kNone;
    }
  }
};

struct ErrorCurve {
  std::vector<long> times;
  Vec p_hat;
  Vec ci_halfwidth;
  CurveKind kind = CurveKind::Miss;
  int agent = 0;
  long trials = 0;
};

struct ExponentEstimate {
  double slope = 0.0;    // per-tick decay rate from the least-squares fit
  double stderr_ = 0.0;  // standard error of the slope
  long t_lo = 0, t_hi = 0;
  int n_points = 0;
};

struct AgentExponent {
  int agent = 0;
  bool ok = false;
  ExponentEstimate est;
  std::string note;
};

/// 95% binomial half-width: normal approximation, Wilson when the success
/// count is small.
inline double binomial_ci_halfwidth(double p_hat, long trials) {
  constexpr double z = 1.959963984540054;
  if (trials <= 0) return 0.0;
  double nt = static_cast<double>(trials);
  if (p_hat * nt < 5.0) {
    double z2 = z * z;
    return z * std::sqrt(p_hat * (1.0 - p_hat) / nt + z2 / (4.0 * nt * nt)) / (1.0 + z2 / nt);
  }
  return z * std::sqrt(p_hat * (1.0 - p_hat) / nt);
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw InvalidInput("median of empty set");
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double skewness(const std::vector<double>& v) {
  if (v.size() < 3) throw InsufficientData("skewness needs at least 3 samples");
  double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double m2 = 0.0, m3 = 0.0;
  for (double x : v) {
    double d = x - mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= n;
  m3 /= n;
  return m3 / std::pow(m2, 1.5);
}

/// Least-squares slope of -log p_hat against t over [window.first, window.second],
/// using only times with p_hat > 0.
inline ExponentEstimate fit_exponent(const ErrorCurve& curve, std::pair<long, long> window) {
  std::vector<double> ts, ys;
  int interior = 0;
  for (std::size_t i = 0; i < curve.times.size(); ++i) {
    long t = curve.times[i];
    if (t < window.first || t > window.second) continue;
    double p = curve.p_hat[i];
    if (!(p > 0.0)) continue;
    if (p < 1.0) ++interior;
    ts.push_back(static_cast<double>(t));
    ys.push_back(-std::log(p));
  }
  if (interior < 3)
    throw InsufficientData("exponent fit needs >= 3 window times with p_hat in (0,1)");
  double n = static_cast<double>(ts.size());
  double tbar = 0.0, ybar = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    tbar += ts[i];
    ybar += ys[i];
  }
  tbar /= n;
  ybar /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    sxx += (ts[i] - tbar) * (ts[i] - tbar);
    sxy += (ts[i] - tbar) * (ys[i] - ybar);
  }
  if (sxx <= 0.0) throw InsufficientData("degenerate time window");
  ExponentEstimate est;
  est.slope = sxy / sxx;
  double rss = 0.0;
  double icpt = ybar - est.slope * tbar;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    double r = ys[i] - (icpt + est.slope * ts[i]);
    rss += r * r;
  }
  est.stderr_ = ts.size() > 2 ? std::sqrt(rss / (n - 2.0) / sxx) : 0.0;
  est.t_lo = window.first;
  est.t_hi = window.second;
  est.n_points = static_cast<int>(ts.size());
  return est;
}

/// Default tail window: the last half of the times where the estimate is
/// statistically interior, p_hat in (1/trials, 1 - 1/trials).
inline std::pair<long, long> default_fit_window(const ErrorCurve& curve) {
  std::vector<long> eligible;
  double lo = 1.0 / curve.trials, hi = 1.0 - 1.0 / curve.trials;
  for (std::size_t i = 0; i < curve.times.size(); ++i)
    if (curve.p_hat[i] > lo && curve.p_hat[i] < hi) eligible.push_back(curve.times[i]);
  if (eligible.size() < 3) throw InsufficientData("too few interior points for a fit window");
  return {eligible[eligible.size() / 2], eligible.back()};
}

struct ExperimentResult {
  std::vector<ErrorCurve> curves;  // one per agent
  std::vector<AgentExponent> exponents;
  std::vector<Trajectory> sample;
  std::vector<long> probe_times;
  std::vector<Mat> probe_median_abs_err;  // per probe time: N x M medians over trials
  std::vector<Vec> probe_median_err_norm;
  long trials = 0;
};

inline Trajectory run_one_trial(const ExperimentConfig& cfg, std::uint64_t seed) {
  switch (cfg.algorithm) {
    case Algorithm::NL: {
      NlTrialConfig c = *cfg.nl;
      c.seed = seed;
      return nl_run_trial(c);
    }
    case Algorithm::L: {
      LTrialConfig c = *cfg.l;
      c.seed = seed;
      return l_run_trial(c);
    }
    default: {
      CentralTrialConfig c = *cfg.central;
      c.seed = seed;
      auto [zs, ths] = central_run_trial(c);
      Trajectory tr;
      tr.z_times.resize(zs.size());
      for (std::size_t i = 0; i < tr.z_times.size(); ++i) tr.z_times[i] = static_cast<long>(i);
      tr.z = zs;
      tr.refresh_mark.assign(tr.z_times.size(), 0);
      double ref = c.truth.hypothesis == Hypothesis::H1 ? c.truth.theta_star[0] : 0.0;
      tr.theta_times = tr.z_times;
      tr.err_norm = (ths.array() - ref).abs().matrix();
      return tr;
    }
  }
}

/// Monte Carlo error-probability estimation.  Deterministic for a fixed
/// master seed and trial count: per-trial seeds are derived independently
/// and aggregation uses integer counts and trial-indexed slots, so the
/// thread count does not affect the output.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  if (cfg.trials < 1) throw InvalidInput("trials must be >= 1");
  long horizon = cfg.horizon();
  int n_agents = cfg.n_agents();
  double eta = cfg.eta();
  bool under_h1 = cfg.hypothesis() == Hypothesis::H1;
  const auto& probes = cfg.probe_times();

  std::vector<std::vector<std::uint32_t>> counts(
      static_cast<std::size_t>(cfg.threads),
      std::vector<std::uint32_t>((horizon + 1) * n_agents, 0));
  std::vector<std::vector<Mat>> probe_errs(probes.size());
  for (auto& pe : probe_errs) pe.resize(cfg.trials);
  int n_sample = std::min<int>(cfg.sample_trajectories, cfg.trials);
  std::vector<Trajectory> samples(n_sample);

  auto worker = [&](int thread_idx, int lo, int hi) {
    auto& my_counts = counts[thread_idx];
    for (int trial = lo; trial < hi; ++trial) {
      Trajectory tr = run_one_trial(cfg, trial_seed(cfg.master_seed, trial));
      for (long t = 0; t <= horizon; ++t)
        for (int a = 0; a < n_agents; ++a) {
          double z = tr.z(t, a);
          bool err = under_h1 ? !(z > eta) : (z > eta);
          if (err) ++my_counts[t * n_agents + a];
        }
      for (std::size_t p = 0; p < probes.size(); ++p)
        if (p < tr.probe_abs_err.size()) probe_errs[p][trial] = tr.probe_abs_err[p];
      if (trial < n_sample) samples[trial] = std::move(tr);
    }
  };

  int threads = std::max(1, cfg.threads);
  if (threads == 1) {
    worker(0, 0, cfg.trials);
  } else {
    std::vector<std::thread> pool;
    int chunk = (cfg.trials + threads - 1) / threads;
    for (int i = 0; i < threads; ++i) {
      int lo = i * chunk, hi = std::min(cfg.trials, (i + 1) * chunk);
      if (lo >= hi) break;
      pool.emplace_back(worker, i, lo, hi);
    }
    for (auto& th : pool) th.join();
  }
  for (int i = 1; i < threads; ++i)
    for (std::size_t j = 0; j < counts[0].size(); ++j) counts[0][j] += counts[i][j];

  ExperimentResult res;
  res.trials = cfg.trials;
  res.sample = std::move(samples);
  std::vector<long> times(horizon + 1);
  for (long t = 0; t <= horizon; ++t) times[t] = t;
  for (int a = 0; a < n_agents; ++a) {
    ErrorCurve c;
    c.times = times;
    c.kind = under_h1 ? CurveKind::Miss : CurveKind::FalseAlarm;
    c.agent = a;
    c.trials = cfg.trials;
    c.p_hat.resize(horizon + 1);
    c.ci_halfwidth.resize(horizon + 1);
    for (long t = 0; t <= horizon; ++t) {
      double p = static_cast<double>(counts[0][t * n_agents + a]) / cfg.trials;
      c.p_hat[t] = p;
      c.ci_halfwidth[t] = binomial_ci_halfwidth(p, cfg.trials);
    }
    AgentExponent ae;
    ae.agent = a;
    try {
      auto window = default_fit_window(c);
      ae.est = fit_exponent(c, window);
      ae.ok = true;
    } catch (const InsufficientData& e) {
      ae.note = e.what();
    }
    res.exponents.push_back(std::move(ae));
    res.curves.push_back(std::move(c));
  }

  res.probe_times.assign(probes.begin(), probes.end());
  for (std::size_t p = 0; p < probes.size(); ++p) {
    const auto& per_trial = probe_errs[p];
    if (per_trial.empty() || per_trial[0].size() == 0) {
      res.probe_median_abs_err.emplace_back();
      res.probe_median_err_norm.emplace_back();
      continue;
    }
    int rows = static_cast<int>(per_trial[0].rows());
    int cols = static_cast<int>(per_trial[0].cols());
    Mat med(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) {
        std::vector<double> vals;
        vals.reserve(per_trial.size());
        for (const auto& m : per_trial) vals.push_back(m(i, j));
        med(i, j) = median(std::move(vals));
      }
    Vec mednorm(rows);
    for (int i = 0; i < rows; ++i) {
      std::vector<double> vals;
      vals.reserve(per_trial.size());
      for (const auto& m : per_trial) vals.push_back(m.row(i).norm());
      mednorm[i] = median(std::move(vals));
    }
    res.probe_median_abs_err.push_back(std::move(med));
    res.probe_median_err_norm.push_back(std::move(mednorm));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Canned replication configs.
// ---------------------------------------------------------------------------

struct ReproduceOptions {
  int trials = 2000;
  long horizon = -1;  // -1 keeps the canned default
  std::uint64_t seed = 42;
  int threads = 1;
  int stride = 10;
};

/// Geometric-graph seed for the nonlinear replication, fixed by a one-off
/// scan: the seed minimizing |r - 0.3904| over the first few thousand seeds,
/// so eta = 7 sits inside the feasible threshold interval of the generated
/// connected 10-agent, radius-0.4 graph (r = 0.3968 here).
inline std::uint64_t nl_vib_graph_seed() { return 1875; }

/// Observation rows of the ring replication: every one of the ten coordinate
/// pairs of a 5-dimensional parameter, unit entries.
inline LinearModel l_vic_model() {
  static const std::pair<int, int> kPairs[10] = {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {0, 4},
                                                 {0, 2}, {1, 3}, {2, 4}, {0, 3}, {1, 4}};
  std::vector<Mat> rows;
  for (auto [i, j] : kPairs) {
    Mat h = Mat::Zero(1, 5);
    h(0, i) = 1.0;
    h(0, j) = 1.0;
    rows.push_back(h);
  }
  return linear_model_iso(std::move(rows), 3.0);
}

inline Vec l_vic_theta_star() {
  Vec t(5);
  t << 1.0, 0.9, 1.2, 1.1, 1.5;
  return t;
}

inline Vec nl_vib_theta_star() {
  Vec t(5);
  t << M_PI / 6.0, -M_PI / 4.0, M_PI / 4.0, -M_PI / 5.0, M_PI / 6.0;
  return t;
}

struct ReportBundle {
  std::string name;
  ExperimentConfig config;
  ExperimentResult result;
  std::optional<NlBounds> nl_bound;
  std::optional<LBounds> l_bound;
  double eta_used = 0.0;
  double eta_formula_floor = 0.0;  // recomputed (1/N + sqrt(N) rho) sum(M_n)/2
  double graph_r = 0.0;
  // quoted reference values recorded next to the recomputed ones
  double quoted_eta = std::nan("");
  double quoted_miss_rate = std::nan("");
  double quoted_r = std::nan("");
};

inline ExperimentConfig nl_vib_config(const ReproduceOptions& opt) {
  Graph g = build_random_geometric(10, 0.4, nl_vib_graph_seed());
  Spectrum spec = spectrum(g);
  NlTrialConfig tc;
  tc.model = trig_model();
  tc.graph = g;
  tc.weights = make_weights(spec);
  tc.schedule = NlSchedule{1.0, 1.0, 0.45};
  tc.truth = TruthConfig::alternative(nl_vib_theta_star());
  tc.eta = 7.0;
  tc.horizon = opt.horizon > 0 ? opt.horizon : 5000;
  tc.stride = opt.stride;
  tc.project_box = true;
  tc.probe_times = {100, tc.horizon};
  ExperimentConfig cfg;
  cfg.algorithm = Algorithm::NL;
  cfg.nl = std::move(tc);
  cfg.trials = opt.trials;
  cfg.threads = opt.threads;
  cfg.master_seed = opt.seed;
  return cfg;
}

inline ExperimentConfig l_vic_config(const ReproduceOptions& opt) {
  Graph g = build_ring(10);
  Spectrum spec = spectrum(g);
  LTrialConfig tc;
  tc.model = l_vic_model();
  tc.graph = g;
  tc.weights = make_weights(spec);
  tc.schedule = LSchedule{9.1, 0.4};
  tc.k = 20;
  tc.truth = TruthConfig::alternative(l_vic_theta_star());
  tc.eta = 0.8280;  // quoted threshold; the formula floor sits above the
                    // attainable statistic for this network, so the quoted
                    // value is what produces a decaying miss curve
  tc.horizon = opt.horizon > 0 ? opt.horizon : 10000;
  tc.stride = opt.stride;
  tc.probe_times = {100, 10000};
  ExperimentConfig cfg;
  cfg.algorithm = Algorithm::L;
  cfg.l = std::move(tc);
  cfg.trials = opt.trials;
  cfg.threads = opt.threads;
  cfg.master_seed = opt.seed;
  return cfg;
}

inline ReportBundle reproduce_paper_experiments(const std::string& which,
                                                const ReproduceOptions& opt = {}) {
  ReportBundle rb;
  rb.name = which;
  if (which == "nl_vib") {
    rb.config = nl_vib_config(opt);
    const auto& tc = *rb.config.nl;
    rb.graph_r = tc.weights.r;
    rb.eta_used = tc.eta;
    std::vector<int> mn(10, 1);
    rb.nl_bound = nl_bounds(10, mn, tc.weights.r, tc.model, tc.truth.theta_star, tc.eta);
    rb.eta_formula_floor = rb.nl_bound->eta_lo;
    rb.quoted_r = 0.3904;
    rb.result = run_experiment(rb.config);
  } else if (which == "l_vic") {
    rb.config = l_vic_config(opt);
    const auto& tc = *rb.config.l;
    rb.graph_r = tc.weights.r;
    rb.eta_used = tc.eta;
    Spectrum spec = spectrum(tc.graph);
    rb.l_bound = l_bounds(spec, tc.model, tc.schedule, tc.k, tc.truth.theta_star, tc.eta,
                          tc.weights.r);
    rb.eta_formula_floor = rb.l_bound->eta_lo;
    rb.quoted_eta = 0.8280;
    rb.quoted_miss_rate = 0.045;
    rb.quoted_r = 0.8404;
    rb.result = run_experiment(rb.config);
  } else {
    throw InvalidInput("unknown replication config '" + which + "' (use nl_vib or l_vic)");
  }
  return rb;
}

}  // namespace cidet
