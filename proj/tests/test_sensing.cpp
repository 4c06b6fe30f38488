#include <catch_amalgamated.hpp>

#include <cidet/harness.hpp>
#include <cidet/sensing.hpp>

#include <cmath>

using namespace cidet;
using Catch::Approx;

TEST_CASE("gram matrix") {
  LinearModel id = linear_model_iso({Mat::Identity(3, 3)}, 1.0);
  CHECK((gram_matrix(id) - Mat::Identity(3, 3)).norm() == Approx(0.0).margin(1e-12));

  // ten coordinate-pair rows with variance 3: G = I + ones/3
  LinearModel vic = l_vic_model();
  Mat g = gram_matrix(vic);
  Mat want = Mat::Identity(5, 5) + Mat::Constant(5, 5, 1.0 / 3.0);
  CHECK((g - want).norm() == Approx(0.0).margin(1e-10));
  CHECK(check_global_observability(vic).observable);

  LinearModel zero = linear_model_iso({Mat::Zero(2, 2), Mat::Zero(2, 2)}, 1.0);
  CHECK(gram_matrix(zero).norm() == 0.0);
  auto diag = check_global_observability(zero);
  CHECK_FALSE(diag.observable);
  CHECK(diag.min_eigenvalue == Approx(0.0).margin(1e-12));
}

TEST_CASE("observability diagnostics") {
  Mat h(1, 2);
  h << 1.0, 0.0;
  LinearModel partial = linear_model_iso({h}, 1.0);
  CHECK_FALSE(check_global_observability(partial).observable);

  // scalar field model observable whenever at least one informative agent
  CHECK(check_global_observability(scalar_field_model(5, 1, 2.0, 1.0)).observable);
  CHECK_FALSE(check_global_observability(scalar_field_model(5, 0, 2.0, 1.0)).observable);
}

TEST_CASE("innovation-gain floor c1") {
  // single agent, no graph coupling: c1 = h^2 / sigma^2
  Graph single = graph_from_edges(1, {});
  Mat h(1, 1);
  h << 2.0;
  LinearModel m1 = linear_model_iso({h}, 1.0);
  CHECK(c1_linear(spectrum(single), m1) == Approx(4.0).margin(1e-12));

  // two-agent complete graph, one informative agent: 2x2 closed form
  // lambda_min([[2,-1],[-1,1]]) = (3 - sqrt(5))/2
  LinearModel sc = scalar_field_model(2, 1, 1.0, 1.0);
  double c1 = c1_linear(spectrum(build_complete(2)), sc);
  CHECK(c1 == Approx((3.0 - std::sqrt(5.0)) / 2.0).margin(1e-12));

  // ring replication model: strictly positive, cross-checked by inverse
  // power iteration
  LinearModel vic = l_vic_model();
  Spectrum ring = spectrum(build_ring(10));
  double c1_vic = c1_linear(ring, vic);
  CHECK(c1_vic > 0.0);
  Mat a = kron_identity(ring.laplacian, 5) + gh_sigma_gh(vic);
  Eigen::LLT<Mat> llt(a);
  Vec v = Vec::Ones(50).normalized();
  for (int it = 0; it < 2000; ++it) v = llt.solve(v).normalized();
  double rayleigh = v.dot(a * v);
  CHECK(c1_vic == Approx(rayleigh).epsilon(1e-8));

  LinearModel degenerate = linear_model_iso({Mat::Zero(1, 1), Mat::Zero(1, 1)}, 1.0);
  Graph two_disconnected{2, {}};
  CHECK_THROWS_AS(c1_linear(spectrum(two_disconnected), degenerate), ModelDegenerate);
}

TEST_CASE("observation sampling") {
  LinearModel vic = l_vic_model();
  Vec theta = l_vic_theta_star();

  SECTION("zero-noise hook gives the exact mean") {
    NoiseSampler s(vic.sigma, 1);
    s.force_zero(true);
    Vec y = sample_observation(vic, TruthConfig::alternative(theta), s);
    for (int n = 0; n < 10; ++n)
      CHECK(y[n] == Approx((vic.H[n] * theta)(0)).margin(1e-15));
  }

  SECTION("H0 sample mean vanishes at the CLT scale") {
    Mat h1(2, 2), h2(2, 2);
    h1 << 1, 0, 0, 1;
    h2 << 1, 1, 0, 1;
    LinearModel m = linear_model_iso({h1, h2}, 2.0);
    NoiseSampler s(m.sigma, 99);
    const int draws = 100000;
    Vec mean = Vec::Zero(4);
    for (int i = 0; i < draws; ++i)
      mean += sample_observation(m, TruthConfig::null_hypothesis(2), s);
    mean /= draws;
    double tol = 4.0 * std::sqrt(2.0) / std::sqrt(double(draws));
    for (int d = 0; d < 4; ++d) CHECK(std::abs(mean[d]) < tol);
  }

  SECTION("H1 sample covariance approaches Sigma") {
    Mat h(2, 2);
    h << 1, 2, 0, 1;
    Mat sig(2, 2);
    sig << 2.0, 0.5, 0.5, 1.0;
    LinearModel m{{h}, {sig}};
    m.validate();
    NoiseSampler s(m.sigma, 5);
    Vec t2(2);
    t2 << 0.3, -0.7;
    const int draws = 100000;
    Vec mean = Vec::Zero(2);
    Mat second = Mat::Zero(2, 2);
    for (int i = 0; i < draws; ++i) {
      Vec y = sample_observation(m, TruthConfig::alternative(t2), s);
      mean += y;
      second += y * y.transpose();
    }
    mean /= draws;
    Mat cov = second / draws - mean * mean.transpose();
    CHECK((cov - sig).cwiseAbs().maxCoeff() < 0.05);
  }

  SECTION("identical seeds give identical streams") {
    NoiseSampler a(vic.sigma, 1234), b(vic.sigma, 1234);
    for (int i = 0; i < 50; ++i) CHECK((a.draw_stacked() - b.draw_stacked()).norm() == 0.0);
  }

  SECTION("dimension mismatch is rejected") {
    NoiseSampler s(vic.sigma, 1);
    Vec bad(3);
    bad << 1, 2, 3;
    CHECK_THROWS_AS(sample_observation(vic, TruthConfig::alternative(bad), s), InvalidInput);
  }
}

TEST_CASE("trigonometric model") {
  NonlinearModel m = trig_model();
  Vec zero = Vec::Zero(5);

  CHECK(m.h[0](zero)[0] == 0.0);
  Mat g0 = m.grad[0](zero);
  CHECK(g0(0, 0) == Approx(5.0));
  CHECK(g0(1, 0) == Approx(5.0));
  CHECK(g0.col(0).segment(2, 3).norm() == 0.0);

  Vec ts = nl_vib_theta_star();
  CHECK(m.h[0](ts)[0] == Approx(5.0 * std::sin(-M_PI / 12.0)).margin(1e-14));

  SECTION("Lipschitz constant holds on sampled pairs") {
    for (int n = 0; n < 10; ++n)
      CHECK(lipschitz_probe(m, n, 1000, 17 + n) <= 5.0 * std::sqrt(2.0) + 1e-9);
    CHECK(lipschitz_probe(m, 0, 10000, 3) <= 5.0 * std::sqrt(2.0) + 1e-9);
  }

  SECTION("gradients match central finite differences") {
    GaussianStream rng(11);
    double step = 1e-5;
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
      Vec t(5);
      for (int d = 0; d < 5; ++d) t[d] = rng.next_uniform(-M_PI / 4, M_PI / 4);
      for (int n = 0; n < 10; ++n) {
        Mat g = m.grad[n](t);
        for (int d = 0; d < 5; ++d) {
          Vec tp = t, tm = t;
          tp[d] += step;
          tm[d] -= step;
          double fd = (m.h[n](tp)[0] - m.h[n](tm)[0]) / (2 * step);
          worst = std::max(worst, std::abs(fd - g(d, 0)));
        }
      }
    }
    CHECK(worst <= 1e-6);
  }
}

TEST_CASE("aggregate monotonicity probe") {
  // linear specialization: the quotient is bounded below by lambda_min(G)
  LinearModel vic = l_vic_model();
  NonlinearModel lin = linearize(vic);
  lin.domain_box = std::make_pair(Vec::Constant(5, -2.0), Vec::Constant(5, 2.0));
  double lam_min = check_global_observability(vic).min_eigenvalue;
  CHECK(monotonicity_constant_nl(lin, 2000, 7) >= lam_min - 1e-9);

  CHECK(monotonicity_constant_nl(trig_model(), 5000, 13) > 0.0);

  CHECK_THROWS_AS(monotonicity_constant_nl(trig_model(), 50, 1), InvalidInput);
}
