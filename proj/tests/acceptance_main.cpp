// Acceptance suite: one line per criterion, nonzero exit on any failure.
// Smoke-scale Monte Carlo settings run by default; set CIDET_ACCEPT_FULL=1
// for the full 2000-trial nonlinear miss-decay replication.

#include <cidet/cidet.hpp>

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

using namespace cidet;

namespace {

int g_failures = 0;

void report(int idx, const std::string& name, bool pass, const std::string& detail) {
  std::printf("%s  %2d. %-34s %s\n", pass ? "PASS" : "FAIL", idx, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

// 1. k_min formula reproduces the replication's consensus-round count.
void criterion_1() {
  int k = min_consensus_rounds(10, 0.8404);
  report(1, "minimum consensus rounds", k == 20, fmt("k_min(10, 0.8404) = %d (want 20)", k));
}

// 2. Mixing-step spectral gap: closed form vs eigendecomposition.
void criterion_2() {
  ConsensusWeights w = make_weights(spectrum(build_ring(10)));
  double brute = spectral_gap_bruteforce(w.w);
  bool pass = std::abs(w.r - 0.825664) <= 1e-6 && std::abs(w.r - brute) <= 1e-10;
  report(2, "ring-10 spectral gap", pass,
         fmt("r = %.9f, |r - 0.825664| = %.2e, |r - ||W-J||| = %.2e (quoted 0.8404 recorded, "
             "not asserted)",
             w.r, std::abs(w.r - 0.825664), std::abs(w.r - brute)));
}

// 3. Nonlinear estimate consistency on the trig replication.
void criterion_3(int threads) {
  ReproduceOptions opt;
  opt.trials = 50;
  opt.horizon = 5000;
  opt.threads = threads;
  ExperimentConfig cfg = nl_vib_config(opt);
  cfg.nl->probe_times = {100, 5000};
  ExperimentResult res = run_experiment(cfg);
  double worst = 0.0;
  for (int n = 0; n < 10; ++n)
    worst = std::max(worst, res.probe_median_err_norm[1][n] / res.probe_median_err_norm[0][n]);
  report(3, "nonlinear estimate consistency", worst < 0.25,
         fmt("max_n median||err||(5000)/median||err||(100) = %.3f (want < 0.25)", worst));
}

// 4. Nonlinear miss decay at the quoted threshold 7.
void criterion_4(int threads) {
  bool full = std::getenv("CIDET_ACCEPT_FULL") != nullptr;
  ReproduceOptions opt;
  opt.trials = full ? 2000 : 200;
  opt.horizon = 5000;
  opt.threads = threads;
  ExperimentConfig cfg = nl_vib_config(opt);
  ExperimentResult res = run_experiment(cfg);
  double worst_ratio = 0.0;
  for (const auto& c : res.curves) {
    double peak = c.p_hat.maxCoeff();
    double tail = c.p_hat.segment(3750, c.p_hat.size() - 3750).maxCoeff();
    worst_ratio = std::max(worst_ratio, tail / peak);
  }
  report(4, full ? "nonlinear miss decay (full)" : "nonlinear miss decay (smoke)",
         worst_ratio <= 0.20,
         fmt("%d trials, eta = 7: max_n tail/peak = %.4f (want <= 0.20)", opt.trials,
             worst_ratio));
}

// 5. Linear estimate consistency, per dimension.
void criterion_5(int threads) {
  ReproduceOptions opt;
  opt.trials = 50;
  opt.horizon = 10000;
  opt.threads = threads;
  ExperimentConfig cfg = l_vic_config(opt);
  cfg.l->probe_times = {100, 10000};
  ExperimentResult res = run_experiment(cfg);
  double worst = inf();
  for (int n = 0; n < 10; ++n)
    for (int d = 0; d < 5; ++d)
      worst = std::min(worst,
                       res.probe_median_abs_err[0](n, d) / res.probe_median_abs_err[1](n, d));
  report(5, "linear estimate consistency", worst >= 4.0,
         fmt("min_(n,d) err(100)/err(10000) = %.2fx (want >= 4x)", worst));
}

// 6. Fitted miss exponent against the recomputed large-deviations rate.
void criterion_6(int threads) {
  ReproduceOptions opt;
  opt.trials = 2000;
  opt.horizon = 10000;
  opt.threads = threads;
  ReportBundle rb = reproduce_paper_experiments("l_vic", opt);
  const LBounds& b = *rb.l_bound;
  bool pass = true;
  double min_slope = inf();
  for (const auto& ae : rb.result.exponents) {
    if (!ae.ok) {
      pass = false;
      continue;
    }
    min_slope = std::min(min_slope, ae.est.slope);
    if (!(ae.est.slope >= b.ld1 - 2.0 * ae.est.stderr_)) pass = false;
  }
  report(6, "linear miss exponent vs bound", pass,
         fmt("min fitted slope = %.4f/tick vs LD1 = %.4f (undefined=%d; quoted bound 0.045 and "
             "eta 0.8280 recorded; formula floor %.4f)",
             min_slope, b.ld1, int(b.miss_bound_undefined), b.eta_lo));
}

// 7. Post-burn-in contraction of the estimate propagator.
void criterion_7() {
  LinearModel m = l_vic_model();
  Spectrum spec = spectrum(build_ring(10));
  LSchedule sched{9.1, 0.4};
  double c1 = c1_linear(spec, m);
  BurninTimes bt = l_burnin_times(spec, m, sched);
  Mat x = kron_identity(spec.laplacian, 5);
  Mat y = gh_sigma_gh(m);
  bool pass = true;
  double worst_slack = inf();
  for (int i = 0; i < 20; ++i) {
    long t = bt.t1 + i * 997;
    double lhs = a_matrix_norm(x, y, sched.beta(t), sched.alpha(t));
    double rhs = 1.0 - c1 * sched.alpha(t);
    worst_slack = std::min(worst_slack, rhs - lhs);
    if (!(lhs <= rhs + 1e-9)) pass = false;
  }
  report(7, "contraction after burn-in", pass,
         fmt("t1 = %ld, 20 checkpoints, min slack = %.3e (tolerance 1e-9)", bt.t1, worst_slack));
}

// 8. Noise-history covariance bound on the two-agent path.
void criterion_8() {
  Graph g = graph_from_edges(2, {{0, 1}});
  Spectrum spec = spectrum(g);
  LinearModel m = scalar_field_model(2, 1, 1.0, 1.0);
  LSchedule sched{3.4, 0.5};
  BurninTimes bt = l_burnin_times(spec, m, sched);
  bool pass = true;
  double worst_margin = inf(), worst_eig = inf();
  for (long t = bt.t1; t <= 200; ++t) {
    PtDiagnostic d = pt_diagnostic(spec, m, sched, t);
    worst_margin = std::min(worst_margin, d.bound - d.pt_norm_times_t);
    worst_eig = std::min(worst_eig, d.min_eigenvalue);
    if (d.pt_norm_times_t > d.bound || d.min_eigenvalue < -1e-9) pass = false;
  }
  report(8, "noise-history covariance bound", pass,
         fmt("t in [%ld, 200]: min(bound - t||P_t||) = %.3e, min eigenvalue = %.2e", bt.t1,
             worst_margin, worst_eig));
}

// 9. Dual-route oracles.
void criterion_9() {
  bool pass = true;
  std::string detail;

  {  // recursive running mean vs batch mean
    GaussianStream rng(77);
    Vec s = Vec::Zero(2), batch = Vec::Zero(2);
    double worst = 0.0;
    for (long t = 0; t < 10000; ++t) {
      Vec y = rng.next_vec(2);
      batch += y;
      s = l_update_running_average(s, y, t);
      worst = std::max(worst, (s - batch / (t + 1)).cwiseAbs().maxCoeff());
    }
    if (worst > 1e-12) pass = false;
    detail += fmt("running-mean %.1e", worst);
  }
  {  // stacked vs per-agent nonlinear update
    Graph g = build_random_geometric(10, 0.45, 3);
    Spectrum spec = spectrum(g);
    NonlinearModel m = trig_model();
    auto nbrs = g.neighbors();
    GaussianStream rng(5);
    double worst = 0.0;
    for (int rep = 0; rep < 25; ++rep) {
      Mat theta(10, 5);
      for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 5; ++j) theta(i, j) = 0.4 * rng.next();
      Vec y = rng.next_vec(10);
      Mat a = nl_next_theta(m, nbrs, 0.7, 0.2, theta, y);
      Mat b = nl_next_theta_stacked(m, spec, 0.7, 0.2, theta, y);
      worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
    }
    if (worst > 1e-12) pass = false;
    detail += fmt(", stacked-vs-agent %.1e", worst);
  }
  {  // linear specialization of the nonlinear estimator vs the linear one
    LTrialConfig lc;
    lc.model = l_vic_model();
    lc.graph = build_ring(10);
    lc.weights = make_weights(spectrum(lc.graph));
    lc.schedule = LSchedule{9.1, 0.4};
    lc.k = 20;
    lc.truth = TruthConfig::alternative(l_vic_theta_star());
    lc.horizon = 600;
    lc.seed = 99;
    Trajectory lt = l_run_trial(lc);
    NlTrialConfig nc;
    nc.model = linearize(lc.model);
    nc.graph = lc.graph;
    nc.weights = lc.weights;
    nc.schedule = NlSchedule{9.1, 9.1, 0.4};
    nc.truth = lc.truth;
    nc.horizon = 600;
    nc.seed = 99;
    Trajectory nt = nl_run_trial(nc);
    double worst = (lt.theta_final - nt.theta_final).cwiseAbs().maxCoeff();
    if (worst > 1e-12) pass = false;
    detail += fmt(", nl-vs-l %.1e", worst);
  }
  {  // plug-in log-likelihood ratio vs the Gaussian density ratio
    Mat sig(2, 2);
    sig << 1.5, 0.4, 0.4, 0.8;
    Mat hm(2, 3);
    hm << 1, 0, 2, 0, 1, -1;
    LinearModel lm{{hm}, {sig}};
    lm.validate();
    NonlinearModel nm = linearize(lm);
    GaussianStream rng(15);
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
      Vec th = rng.next_vec(3);
      Vec yy = rng.next_vec(2);
      Vec mean = hm * th;
      double q1 = (yy - mean).dot(sig.llt().solve(yy - mean));
      double q0 = yy.dot(sig.llt().solve(yy));
      worst = std::max(worst, std::abs(nl_llr(nm, 0, th, yy) - (-0.5 * q1 + 0.5 * q0)));
    }
    if (worst > 1e-10) pass = false;
    detail += fmt(", llr-vs-density %.1e", worst);
  }
  report(9, "dual-route oracle equivalences", pass, detail);
}

// 10. Boundary semantics.
void criterion_10() {
  bool pass = true;
  if (nl_decide(3.25, 3.25) != Hypothesis::H0) pass = false;
  if (l_decide(3.25, 3.25) != Hypothesis::H0) pass = false;
  double le0 = nl_le(0.0, 2.0, 10, 10.0, 0.5);
  if (le0 != 0.0) pass = false;
  double c = 1.0 / 10 + std::sqrt(10.0) * 0.12;
  double floor_rate = fa_decay_rate(0.5 * c * 10.0, c, 10.0);
  if (std::abs(floor_rate) > 1e-9) pass = false;
  report(10, "boundary semantics", pass,
         fmt("decide(eta)=H0 both algorithms, LE(0) = %g, LD0(floor) = %.2e", le0, floor_rate));
}

// Loose normality check of the statistic at the horizon (not a numbered
// criterion; printed for the record and gated at the quoted skewness level).
void normality_note(int threads) {
  ReproduceOptions opt;
  opt.trials = 2000;
  opt.horizon = 1500;
  opt.threads = threads;
  ExperimentConfig cfg = nl_vib_config(opt);
  cfg.sample_trajectories = 0;
  long horizon = cfg.nl->horizon;
  int n_agents = 10;
  std::vector<std::vector<double>> z_at(n_agents);
  for (int trial = 0; trial < cfg.trials; ++trial) {
    Trajectory tr = run_one_trial(cfg, trial_seed(cfg.master_seed, trial));
    for (int n = 0; n < n_agents; ++n) z_at[n].push_back(tr.z(horizon, n));
  }
  double worst = 0.0;
  for (int n = 0; n < n_agents; ++n) worst = std::max(worst, std::abs(skewness(z_at[n])));
  report(11, "statistic normality (note)", worst < 0.5,
         fmt("max_n |skewness(z_n(T))| = %.3f at 2000 trials (want < 0.5)", worst));
}

}  // namespace

int main(int argc, char** argv) {
  int threads = 1;
  if (const char* env = std::getenv("CIDET_ACCEPT_THREADS")) threads = std::atoi(env);
  bool quick = argc > 1 && std::strcmp(argv[1], "--quick") == 0;

  auto t0 = std::chrono::steady_clock::now();
  criterion_1();
  criterion_2();
  if (!quick) {
    criterion_3(threads);
    criterion_4(threads);
    criterion_5(threads);
    criterion_6(threads);
  }
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_10();
  if (!quick) normality_note(threads);
  auto dt = std::chrono::duration_cast<std::chrono::seconds>(std::chrono::steady_clock::now() - t0);

  std::printf("%s (%d failure%s, %lds)\n", g_failures == 0 ? "ACCEPTANCE PASSED" : "ACCEPTANCE FAILED",
              g_failures, g_failures == 1 ? "" : "s", static_cast<long>(dt.count()));
  return g_failures == 0 ? 0 : 1;
}
