#pragma once

#include <cidet/common.hpp>
#include <cidet/network.hpp>
#include <cidet/rng.hpp>

#include <functional>
#include <optional>
#include <utility>
#include <vector>

namespace cidet {

/// Per-agent linear observation maps y_n = H_n theta + noise, with Gaussian
/// noise covariance Sigma_n per agent.
struct LinearModel {
  std::vector<Mat> H;      // each M_n x M
  std::vector<Mat> sigma;  // each M_n x M_n, symmetric positive definite

  int n_agents() const { return static_cast<int>(H.size()); }
  int param_dim() const { return H.empty() ? 0 : static_cast<int>(H[0].cols()); }
  int obs_dim(int n) const { return static_cast<int>(H[n].rows()); }
  int total_obs_dim() const {
    int s = 0;
    for (const auto& h : H) s += static_cast<int>(h.rows());
    return s;
  }

  void validate() const {
    if (H.empty()) throw InvalidInput("linear model has no agents");
    if (H.size() != sigma.size()) throw InvalidInput("H/Sigma agent count mismatch");
    for (int n = 0; n < n_agents(); ++n) {
      if (H[n].cols() != param_dim()) throw InvalidInput("inconsistent parameter dimension");
      if (sigma[n].rows() != H[n].rows() || sigma[n].cols() != H[n].rows())
        throw InvalidInput("Sigma_n dimension mismatch");
      Eigen::SelfAdjointEigenSolver<Mat> es(sigma[n]);
      if (es.eigenvalues()[0] <= 0.0) throw InvalidInput("Sigma_n is not positive definite");
    }
  }
};

/// Convenience: all agents share scalar noise variance sigma2 (Sigma_n = sigma2 * I).
inline LinearModel linear_model_iso(std::vector<Mat> H, double sigma2) {
  LinearModel m;
  m.H = std::move(H);
  for (const auto& h : m.H) m.sigma.push_back(sigma2 * Mat::Identity(h.rows(), h.rows()));
  m.validate();
  return m;
}

/// The scalar field model: N1 informative agents observe h*theta, the rest noise.
inline LinearModel scalar_field_model(int n, int n1, double h, double sigma2) {
  if (n1 < 0 || n1 > n) throw InvalidInput("need 0 <= N1 <= N");
  std::vector<Mat> rows;
  for (int i = 0; i < n; ++i) {
    Mat hi(1, 1);
    hi(0, 0) = i < n1 ? h : 0.0;
    rows.push_back(hi);
  }
  return linear_model_iso(std::move(rows), sigma2);
}

/// Nonlinear observation model: per-agent maps h_n and gradients
/// grad_n(theta) of shape M x M_n, plus Lipschitz constants.  h_n(0) = 0 is
/// required so the null hypothesis is theta = 0.
struct NonlinearModel {
  int param_dim = 0;
  std::vector<std::function<Vec(const Vec&)>> h;
  std::vector<std::function<Mat(const Vec&)>> grad;
  std::vector<double> lipschitz;
  std::vector<Mat> sigma;
  std::optional<std::pair<Vec, Vec>> domain_box;  // (lo, hi) componentwise

  int n_agents() const { return static_cast<int>(h.size()); }
  int obs_dim(int n) const { return static_cast<int>(sigma[n].rows()); }
  int total_obs_dim() const {
    int s = 0;
    for (const auto& sn : sigma) s += static_cast<int>(sn.rows());
    return s;
  }

  Vec h_stacked(const Mat& theta_rows) const {
    Vec out(total_obs_dim());
    int at = 0;
    for (int n = 0; n < n_agents(); ++n) {
      out.segment(at, obs_dim(n)) = h[n](theta_rows.row(n).transpose());
      at += obs_dim(n);
    }
    return out;
  }

  Vec project(const Vec& theta) const {
    if (!domain_box) return theta;
    return theta.cwiseMax(domain_box->first).cwiseMin(domain_box->second);
  }
};

struct TruthConfig {
  Hypothesis hypothesis = Hypothesis::H0;
  Vec theta_star;  // forced to zero under H0

  static TruthConfig null_hypothesis(int param_dim) {
    return TruthConfig{Hypothesis::H0, Vec::Zero(param_dim)};
  }
  static TruthConfig alternative(Vec theta) {
    return TruthConfig{Hypothesis::H1, std::move(theta)};
  }
};

/// Zero-mean Gaussian noise, i.i.d. over time, independent across agents.
/// Cholesky factors are computed once at construction.
class NoiseSampler {
 public:
  NoiseSampler(const std::vector<Mat>& sigma, std::uint64_t seed) : stream_(seed) {
    for (const auto& s : sigma) {
      Eigen::LLT<Mat> llt(s);
      if (llt.info() != Eigen::Success) throw InvalidInput("Sigma_n is not positive definite");
      chol_.push_back(llt.matrixL());
    }
  }

  /// Noise for one agent; agents must be drawn in order 0..N-1 per tick for
  /// stream reproducibility.
  Vec draw(int agent) {
    const Mat& l = chol_[agent];
    return l * stream_.next_vec(static_cast<int>(l.rows()));
  }

  Vec draw_stacked() {
    int total = 0;
    for (const auto& l : chol_) total += static_cast<int>(l.rows());
    Vec out(total);
    int at = 0;
    for (int n = 0; n < static_cast<int>(chol_.size()); ++n) {
      out.segment(at, chol_[n].rows()) = draw(n);
      at += static_cast<int>(chol_[n].rows());
    }
    return out;
  }

  /// Test hook: disable noise entirely (gamma = 0).
  void force_zero(bool on) { zero_ = on; }
  bool zeroed() const { return zero_; }

  Vec maybe_draw_stacked() {
    if (!zero_) return draw_stacked();
    int total = 0;
    for (const auto& l : chol_) total += static_cast<int>(l.rows());
    return Vec::Zero(total);
  }

 private:
  std::vector<Mat> chol_;
  GaussianStream stream_;
  bool zero_ = false;
};

/// G = sum_n H_n^T Sigma_n^-1 H_n.
inline Mat gram_matrix(const LinearModel& m) {
  Mat g = Mat::Zero(m.param_dim(), m.param_dim());
  for (int n = 0; n < m.n_agents(); ++n)
    g += m.H[n].transpose() * m.sigma[n].llt().solve(m.H[n]);
  return 0.5 * (g + g.transpose());
}

struct ObservabilityDiag {
  bool observable = false;
  double min_eigenvalue = 0.0;
};

inline ObservabilityDiag check_global_observability(const LinearModel& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(gram_matrix(m));
  double mn = es.eigenvalues()[0];
  return ObservabilityDiag{mn > 1e-9, mn};
}

/// Block diagonal stacked operator G_H = diag(H_1^T, ..., H_N^T), NM x sum(M_n).
inline Mat stacked_gh(const LinearModel& m) {
  int nm = m.n_agents() * m.param_dim();
  Mat gh = Mat::Zero(nm, m.total_obs_dim());
  int col = 0;
  for (int n = 0; n < m.n_agents(); ++n) {
    gh.block(n * m.param_dim(), col, m.param_dim(), m.obs_dim(n)) = m.H[n].transpose();
    col += m.obs_dim(n);
  }
  return gh;
}

inline Mat stacked_sigma_inv(const std::vector<Mat>& sigma) {
  int total = 0;
  for (const auto& s : sigma) total += static_cast<int>(s.rows());
  Mat out = Mat::Zero(total, total);
  int at = 0;
  for (const auto& s : sigma) {
    int d = static_cast<int>(s.rows());
    out.block(at, at, d, d) = s.llt().solve(Mat::Identity(d, d));
    at += d;
  }
  return out;
}

/// G_H Sigma^-1 G_H^T, block diagonal with blocks H_n^T Sigma_n^-1 H_n.
inline Mat gh_sigma_gh(const LinearModel& m) {
  int nm = m.n_agents() * m.param_dim();
  Mat out = Mat::Zero(nm, nm);
  int mm = m.param_dim();
  for (int n = 0; n < m.n_agents(); ++n) {
    Mat blk = m.H[n].transpose() * m.sigma[n].llt().solve(m.H[n]);
    out.block(n * mm, n * mm, mm, mm) = 0.5 * (blk + blk.transpose());
  }
  return out;
}

/// c1 = lambda_min(L (x) I_M + G_H Sigma^-1 G_H^T); positive whenever the
/// graph is connected and G is full rank.
inline double c1_linear(const Spectrum& spec, const LinearModel& m) {
  Mat lkron = kron_identity(spec.laplacian, m.param_dim());
  Eigen::SelfAdjointEigenSolver<Mat> es(lkron + gh_sigma_gh(m));
  double c1 = es.eigenvalues()[0];
  if (c1 <= 1e-12)
    throw ModelDegenerate("L (x) I + G_H Sigma^-1 G_H^T is not positive definite");
  return c1;
}

/// Stacked observation under the hypothesis in force: y_n = h_n(theta*) + noise
/// under H1, pure noise under H0.
inline Vec sample_observation(const NonlinearModel& m, const TruthConfig& truth,
                              NoiseSampler& sampler) {
  Vec y = sampler.maybe_draw_stacked();
  if (truth.hypothesis == Hypothesis::H1) {
    if (truth.theta_star.size() != m.param_dim) throw InvalidInput("theta_star dimension");
    int at = 0;
    for (int n = 0; n < m.n_agents(); ++n) {
      y.segment(at, m.obs_dim(n)) += m.h[n](truth.theta_star);
      at += m.obs_dim(n);
    }
  }
  return y;
}

inline Vec sample_observation(const LinearModel& m, const TruthConfig& truth,
                              NoiseSampler& sampler) {
  Vec y = sampler.maybe_draw_stacked();
  if (truth.hypothesis == Hypothesis::H1) {
    if (truth.theta_star.size() != m.param_dim()) throw InvalidInput("theta_star dimension");
    int at = 0;
    for (int n = 0; n < m.n_agents(); ++n) {
      y.segment(at, m.obs_dim(n)) += m.H[n] * truth.theta_star;
      at += m.obs_dim(n);
    }
  }
  return y;
}

/// Wrap a linear model as a nonlinear one (h_n = H_n theta, grad_n = H_n^T).
inline NonlinearModel linearize(const LinearModel& lm) {
  NonlinearModel m;
  m.param_dim = lm.param_dim();
  m.sigma = lm.sigma;
  for (int n = 0; n < lm.n_agents(); ++n) {
    Mat h = lm.H[n];
    m.h.emplace_back([h](const Vec& theta) -> Vec { return h * theta; });
    m.grad.emplace_back([h](const Vec&) -> Mat { return h.transpose(); });
    Eigen::JacobiSVD<Mat> svd(h);
    m.lipschitz.push_back(svd.singularValues()[0]);
  }
  return m;
}

/// The ten trigonometric sensing maps f_k(theta) = 5 sin(theta_i + theta_j)
/// on the box [-pi/4, pi/4]^5, scalar observation per agent.
inline NonlinearModel trig_model(int n_agents = 10, double noise_var = 0.5) {
  if (n_agents != 10) throw InvalidInput("trig model is defined for 10 agents");
  static const std::pair<int, int> kPairs[10] = {{0, 1}, {2, 1}, {2, 3}, {3, 4}, {0, 4},
                                                 {0, 2}, {3, 1}, {2, 4}, {0, 3}, {0, 4}};
  NonlinearModel m;
  m.param_dim = 5;
  for (int n = 0; n < 10; ++n) {
    auto [i, j] = kPairs[n];
    m.h.emplace_back([i, j](const Vec& t) -> Vec {
      Vec v(1);
      v[0] = 5.0 * std::sin(t[i] + t[j]);
      return v;
    });
    m.grad.emplace_back([i, j](const Vec& t) -> Mat {
      Mat g = Mat::Zero(5, 1);
      double c = 5.0 * std::cos(t[i] + t[j]);
      g(i, 0) = c;
      g(j, 0) = c;
      return g;
    });
    m.lipschitz.push_back(5.0 * std::sqrt(2.0));
    Mat s(1, 1);
    s(0, 0) = noise_var;
    m.sigma.push_back(s);
  }
  double b = M_PI / 4.0;
  m.domain_box = std::make_pair(Vec::Constant(5, -b), Vec::Constant(5, b));
  return m;
}

/// Empirical minimum of the aggregate monotonicity quotient
///   sum_n (t - t')^T grad_n(t) Sigma_n^-1 (h_n(t) - h_n(t')) / ||t - t'||^2
/// over random pairs in the domain box.  A probe, not a certificate: it can
/// refute the monotonicity assumption but not prove it.
inline double monotonicity_constant_nl(const NonlinearModel& m, int probes, std::uint64_t seed) {
  if (probes < 100) throw InvalidInput("need at least 100 probes");
  Vec lo, hi;
  if (m.domain_box) {
    lo = m.domain_box->first;
    hi = m.domain_box->second;
  } else {
    lo = Vec::Constant(m.param_dim, -1.0);
    hi = Vec::Constant(m.param_dim, 1.0);
  }
  std::vector<Mat> sig_inv;
  for (const auto& s : m.sigma)
    sig_inv.push_back(s.llt().solve(Mat::Identity(s.rows(), s.cols())));
  GaussianStream rng(seed);
  double best = inf();
  int used = 0;
  for (int p = 0; p < probes; ++p) {
    Vec a(m.param_dim), b(m.param_dim);
    for (int d = 0; d < m.param_dim; ++d) {
      a[d] = rng.next_uniform(lo[d], hi[d]);
      b[d] = rng.next_uniform(lo[d], hi[d]);
    }
    Vec diff = a - b;
    double nd = diff.squaredNorm();
    if (nd < 1e-18) continue;
    double q = 0.0;
    for (int n = 0; n < m.n_agents(); ++n)
      q += diff.dot(m.grad[n](a) * (sig_inv[n] * (m.h[n](a) - m.h[n](b))));
    best = std::min(best, q / nd);
    ++used;
  }
  if (used == 0) throw InvalidInput("degenerate probe set: all pairs coincided");
  return best;
}

/// Max observed Lipschitz quotient over random pairs; for validating supplied
/// constants.
inline double lipschitz_probe(const NonlinearModel& m, int agent, int probes,
                              std::uint64_t seed) {
  Vec lo = m.domain_box ? m.domain_box->first : Vec::Constant(m.param_dim, -1.0);
  Vec hi = m.domain_box ? m.domain_box->second : Vec::Constant(m.param_dim, 1.0);
  GaussianStream rng(seed);
  double worst = 0.0;
  for (int p = 0; p < probes; ++p) {
    Vec a(m.param_dim), b(m.param_dim);
    for (int d = 0; d < m.param_dim; ++d) {
      a[d] = rng.next_uniform(lo[d], hi[d]);
      b[d] = rng.next_uniform(lo[d], hi[d]);
    }
    double nd = (a - b).norm();
    if (nd < 1e-12) continue;
    worst = std::max(worst, (m.h[agent](a) - m.h[agent](b)).norm() / nd);
  }
  return worst;
}

}  // namespace cidet
