#include <catch_amalgamated.hpp>

#include <cidet/ciglrt_nl.hpp>
#include <cidet/harness.hpp>

#include <cmath>

using namespace cidet;
using Catch::Approx;

namespace {

NlTrialConfig trig_trial(long horizon, std::uint64_t seed) {
  Graph g = build_random_geometric(10, 0.4, nl_vib_graph_seed());
  NlTrialConfig cfg;
  cfg.model = trig_model();
  cfg.graph = g;
  cfg.weights = make_weights(spectrum(g));
  cfg.schedule = NlSchedule{1.0, 1.0, 0.45};
  cfg.truth = TruthConfig::alternative(nl_vib_theta_star());
  cfg.eta = 7.0;
  cfg.horizon = horizon;
  cfg.seed = seed;
  cfg.project_box = true;
  return cfg;
}

}  // namespace

TEST_CASE("schedule validation") {
  CHECK_THROWS_AS((NlSchedule{0.0, 1.0, 0.4}.validate()), InvalidInput);
  CHECK_THROWS_AS((NlSchedule{1.0, -1.0, 0.4}.validate()), InvalidInput);
  CHECK_THROWS_AS((NlSchedule{1.0, 1.0, 0.5}.validate()), InvalidInput);
  NlSchedule s{2.0, 1.0, 0.45};
  s.validate();
  CHECK(s.alpha(0) == 2.0);
  CHECK(s.alpha(3) == Approx(0.5));
  CHECK(s.beta(0) == 1.0);
  CHECK(s.gain_condition_holds(0.5));
  CHECK_FALSE(s.gain_condition_holds(0.4));
}

TEST_CASE("true parameter is a zero-noise fixed point") {
  NlTrialConfig cfg = trig_trial(50, 1);
  cfg.zero_noise = true;
  Vec ts = nl_vib_theta_star();
  cfg.theta0 = ts.transpose().replicate(10, 1);
  Trajectory tr = nl_run_trial(cfg);
  for (int n = 0; n < 10; ++n)
    CHECK((tr.theta_final.row(n).transpose() - ts).norm() == Approx(0.0).margin(1e-13));
}

TEST_CASE("single agent with identity map reduces to the running mean") {
  Mat h(1, 1);
  h << 1.0;
  LinearModel lin = linear_model_iso({h}, 1.0);
  NonlinearModel m = linearize(lin);
  std::vector<std::vector<int>> nbrs{{}};

  GaussianStream rng(4);
  Mat theta = Mat::Zero(1, 1);
  double batch = 0.0;
  for (long t = 0; t < 200; ++t) {
    Vec y(1);
    y << rng.next();
    batch += y[0];
    theta = nl_next_theta(m, nbrs, 1.0 / (t + 1), 0.0, theta, y);
    CHECK(theta(0, 0) == Approx(batch / (t + 1)).margin(1e-12));
  }
}

TEST_CASE("stacked and per-agent updates agree") {
  Graph g = build_random_geometric(10, 0.45, 3);
  Spectrum spec = spectrum(g);
  NonlinearModel m = trig_model();
  auto nbrs = g.neighbors();
  GaussianStream rng(8);
  for (int rep = 0; rep < 20; ++rep) {
    Mat theta(10, 5);
    for (int i = 0; i < 10; ++i)
      for (int j = 0; j < 5; ++j) theta(i, j) = 0.5 * rng.next();
    Vec y = rng.next_vec(10);
    double a = 0.3 + rng.next_uniform(), b = 0.1 + 0.2 * rng.next_uniform();
    Mat p = nl_next_theta(m, nbrs, a, b, theta, y);
    Mat s = nl_next_theta_stacked(m, spec, a, b, theta, y);
    CHECK((p - s).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("plug-in log-likelihood ratio") {
  NonlinearModel m = trig_model();
  Vec zero = Vec::Zero(5);
  Vec y(1);
  y << 3.7;
  CHECK(nl_llr(m, 0, zero, y) == 0.0);  // h(0) = 0 kills both terms

  Vec theta = nl_vib_theta_star();
  Vec h = m.h[4](theta);
  CHECK(nl_llr(m, 4, theta, h) == Approx(h.squaredNorm() / (2.0 * 0.5)).margin(1e-12));

  SECTION("matches the Gaussian density ratio") {
    Mat sig(2, 2);
    sig << 1.5, 0.4, 0.4, 0.8;
    Mat hm(2, 3);
    hm << 1, 0, 2, 0, 1, -1;
    LinearModel lm{{hm}, {sig}};
    lm.validate();
    NonlinearModel nm = linearize(lm);
    GaussianStream rng(15);
    for (int rep = 0; rep < 100; ++rep) {
      Vec th = rng.next_vec(3);
      Vec yy = rng.next_vec(2);
      Vec mean = hm * th;
      // log N(y; mean, Sigma) - log N(y; 0, Sigma), normalizations cancel
      double q1 = (yy - mean).dot(sig.llt().solve(yy - mean));
      double q0 = yy.dot(sig.llt().solve(yy));
      double direct = -0.5 * q1 + 0.5 * q0;
      CHECK(nl_llr(nm, 0, th, yy) == Approx(direct).margin(1e-10));
    }
  }
}

TEST_CASE("statistic update") {
  NonlinearModel m = trig_model();
  Vec theta_star = nl_vib_theta_star();
  Mat theta = theta_star.transpose().replicate(10, 1);

  SECTION("first tick equals the raw likelihood ratios") {
    ConsensusWeights w = make_weights(spectrum(build_ring(10)));
    GaussianStream rng(2);
    Vec y = rng.next_vec(10);
    Vec z = nl_next_z(m, w.w, 0, Vec::Ones(10) * 99.0, theta, y);
    for (int n = 0; n < 10; ++n) {
      Vec yn(1);
      yn << y[n];
      CHECK(z[n] == Approx(nl_llr(m, n, theta_star, yn)).margin(1e-12));
    }
  }

  SECTION("complete graph averages away all memory") {
    // under full mixing the only per-agent part of z(t+1) is the same-tick
    // innovation; the carried memory is common to every agent
    ConsensusWeights w = make_weights(spectrum(build_complete(10)));
    NoiseSampler smp(m.sigma, 77);
    Vec z = Vec::Zero(10);
    for (long t = 0; t < 40; ++t) {
      Vec y = sample_observation(m, TruthConfig::alternative(theta_star), smp);
      Vec znext = nl_next_z(m, w.w, t, z, theta, y);
      for (int n = 0; n < 10; ++n) {
        Vec yn(1);
        yn << y[n];
        double memory = znext[n] - nl_llr(m, n, theta_star, yn) / (t + 1);
        double memory0 = znext[0] - nl_llr(m, 0, theta_star, Vec::Constant(1, y[0])) / (t + 1);
        CHECK(memory == Approx(memory0).margin(1e-12));
      }
      z = znext;
    }
    // and the spread dies off at the 1/t innovation scale
    double spread = z.maxCoeff() - z.minCoeff();
    CHECK(spread < 1.0);
  }

  SECTION("network average telescopes to the running mean of average LLRs") {
    ConsensusWeights w = make_weights(spectrum(build_ring(10)));
    NoiseSampler smp(m.sigma, 31);
    Vec z = Vec::Zero(10);
    double llr_sum = 0.0;
    for (long t = 0; t < 60; ++t) {
      Vec y = sample_observation(m, TruthConfig::alternative(theta_star), smp);
      double avg = 0.0;
      for (int n = 0; n < 10; ++n) {
        Vec yn(1);
        yn << y[n];
        avg += nl_llr(m, n, theta_star, yn);
      }
      llr_sum += avg / 10.0;
      z = nl_next_z(m, w.w, t, z, theta, y);
      CHECK(z.mean() == Approx(llr_sum / (t + 1)).margin(1e-10));
    }
  }

  SECTION("frozen-estimate mean matches the noiseless recursion over trials") {
    ConsensusWeights w = make_weights(spectrum(build_ring(10)));
    const long horizon = 300;
    const int trials = 2000;
    // exact mean path: same recursion driven by the mean observation
    Vec mean_path = Vec::Zero(10);
    Vec h_mean(10);
    for (int n = 0; n < 10; ++n) h_mean[n] = m.h[n](theta_star)[0];
    for (long t = 0; t < horizon; ++t)
      mean_path = nl_next_z(m, w.w, t, mean_path, theta, h_mean);
    double quad = 0.0;
    for (int n = 0; n < 10; ++n) quad += h_mean[n] * h_mean[n] / 0.5;
    CHECK(mean_path.mean() == Approx(quad / 20.0).epsilon(0.02));

    Vec acc = Vec::Zero(10);
    Vec acc2 = Vec::Zero(10);
    for (int trial = 0; trial < trials; ++trial) {
      NoiseSampler smp(m.sigma, trial_seed(99, trial));
      Vec z = Vec::Zero(10);
      for (long t = 0; t < horizon; ++t) {
        Vec y = sample_observation(m, TruthConfig::alternative(theta_star), smp);
        z = nl_next_z(m, w.w, t, z, theta, y);
      }
      acc += z;
      acc2 += z.cwiseProduct(z);
    }
    for (int n = 0; n < 10; ++n) {
      double mean = acc[n] / trials;
      double sd = std::sqrt(acc2[n] / trials - mean * mean);
      CHECK(std::abs(mean - mean_path[n]) < 5.0 * sd / std::sqrt(double(trials)) + 1e-9);
    }
  }
}

TEST_CASE("decision rule boundary goes to the null") {
  CHECK(nl_decide(1.0, 1.0) == Hypothesis::H0);
  CHECK(nl_decide(1.0 + 1e-12, 1.0) == Hypothesis::H1);
  CHECK(nl_decide(-std::numeric_limits<double>::infinity(), 1.0) == Hypothesis::H0);
}

TEST_CASE("trial runner") {
  SECTION("zero-length run echoes the initial state") {
    NlTrialConfig cfg = trig_trial(0, 5);
    Trajectory tr = nl_run_trial(cfg);
    CHECK(tr.z_times.size() == 1);
    CHECK(tr.z.row(0).norm() == 0.0);
    CHECK(tr.theta_final.norm() == 0.0);
  }

  SECTION("same seed reproduces the trajectory exactly") {
    NlTrialConfig cfg = trig_trial(400, 12);
    Trajectory a = nl_run_trial(cfg);
    Trajectory b = nl_run_trial(cfg);
    CHECK((a.z - b.z).norm() == 0.0);
    CHECK((a.err_norm - b.err_norm).norm() == 0.0);
    cfg.seed = 13;
    Trajectory c = nl_run_trial(cfg);
    CHECK((a.z - c.z).norm() != 0.0);
  }

  SECTION("replication config stays finite and errors trend down") {
    NlTrialConfig cfg = trig_trial(5000, 21);
    Trajectory tr = nl_run_trial(cfg);
    CHECK(tr.z.allFinite());
    double early = tr.err_norm.row(10).mean();   // t = 100
    double late = tr.err_norm.row(500).mean();   // t = 5000
    CHECK(late < early);
  }

  SECTION("divergence guard reports the tick") {
    Mat h(1, 1);
    h << 1.0;
    NlTrialConfig cfg;
    cfg.model = linearize(linear_model_iso({h, h, h}, 1.0));
    cfg.graph = build_ring(3);
    cfg.weights = make_weights(spectrum(cfg.graph));
    cfg.schedule = NlSchedule{1e12, 1.0, 0.45};
    cfg.truth = TruthConfig::alternative(Vec::Ones(1));
    cfg.horizon = 10;
    try {
      nl_run_trial(cfg);
      FAIL("expected divergence");
    } catch (const NumericalDivergence& e) {
      CHECK(e.tick() >= 0);
    }
  }
}

TEST_CASE("estimate and statistic consensus tighten over time") {
  // distinct initializations inside the box, zero noise
  GaussianStream rng(3);
  Mat theta0(10, 5);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 5; ++j) theta0(i, j) = rng.next_uniform(-0.7, 0.7);

  auto theta_spread = [](const Mat& th) {
    double worst = 0.0;
    for (int i = 0; i < 10; ++i)
      for (int j = i + 1; j < 10; ++j)
        worst = std::max(worst, (th.row(i) - th.row(j)).norm());
    return worst;
  };

  // zero-noise paths are deterministic, so two horizons sample the same
  // trajectory at t and 10t
  double spread_at[2];
  long horizons[2] = {400, 4000};
  Trajectory tr;
  for (int i = 0; i < 2; ++i) {
    NlTrialConfig cfg = trig_trial(horizons[i], 9);
    cfg.zero_noise = true;
    cfg.theta0 = theta0;
    tr = nl_run_trial(cfg);
    spread_at[i] = theta_spread(tr.theta_final);
  }
  CHECK(spread_at[1] < spread_at[0]);
  CHECK(spread_at[1] < 0.01 * theta_spread(theta0));

  // statistic spread shrinks between t and 10t
  auto z_spread = [&](long t) {
    return tr.z.row(t).maxCoeff() - tr.z.row(t).minCoeff();
  };
  CHECK(z_spread(4000) < z_spread(400));
}

TEST_CASE("null-hypothesis statistic stays under the chi-squared ceiling") {
  NlTrialConfig cfg = trig_trial(800, 30);
  cfg.truth = TruthConfig::null_hypothesis(5);
  double bound = 0.5 * (1.0 / 10 + std::sqrt(10.0) * cfg.weights.r) * 10.0;
  double acc = 0.0;
  const int trials = 60;
  for (int trial = 0; trial < trials; ++trial) {
    cfg.seed = trial_seed(500, trial);
    Trajectory tr = nl_run_trial(cfg);
    acc += tr.z.row(800).mean();
  }
  CHECK(acc / trials < bound + 0.5);
}
