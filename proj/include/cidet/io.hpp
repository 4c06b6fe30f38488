#pragma once

#include <cidet/bounds.hpp>
#include <cidet/harness.hpp>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace cidet {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Plain-text graph and matrix formats.
// ---------------------------------------------------------------------------

/// Edge-list text format: one "i j" pair per line, 0-indexed.
inline std::string graph_to_edge_list(const Graph& g) {
  std::ostringstream os;
  for (auto [i, j] : g.edges) os << i << " " << j << "\n";
  return os.str();
}

inline Graph graph_from_edge_list(int n, std::istream& is) {
  std::vector<std::pair<int, int>> edges;
  int i, j;
  while (is >> i >> j) edges.emplace_back(i, j);
  return graph_from_edges(n, std::move(edges));
}

/// Dense row-major CSV.
inline std::string matrix_to_csv(const Mat& m) {
  std::ostringstream os;
  os.precision(17);
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      if (j) os << ",";
      os << m(i, j);
    }
    os << "\n";
  }
  return os.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot open for writing: " + path.string());
  out << content;
}

// ---------------------------------------------------------------------------
// Result exports.
// ---------------------------------------------------------------------------

inline std::string curves_to_csv(const ExperimentResult& res) {
  std::ostringstream os;
  os.precision(12);
  os << "t,agent,kind,p_hat,ci\n";
  for (const auto& c : res.curves) {
    const char* kind = c.kind == CurveKind::Miss ? "miss" : "false_alarm";
    for (std::size_t i = 0; i < c.times.size(); ++i)
      os << c.times[i] << "," << c.agent << "," << kind << "," << c.p_hat[i] << ","
         << c.ci_halfwidth[i] << "\n";
  }
  return os.str();
}

inline std::string trajectory_to_csv(const Trajectory& tr, bool with_refresh_col) {
  std::ostringstream os;
  os.precision(12);
  os << "t,agent,err_norm,z";
  if (with_refresh_col) os << ",z_refresh_tick";
  os << "\n";
  // err_norm is strided; emit rows at the strided times, z at the same times
  for (std::size_t i = 0; i < tr.theta_times.size(); ++i) {
    long t = tr.theta_times[i];
    for (int a = 0; a < tr.err_norm.cols(); ++a) {
      os << t << "," << a << "," << tr.err_norm(i, a) << "," << tr.z(t, a);
      if (with_refresh_col) os << "," << static_cast<int>(tr.refresh_mark[t]);
      os << "\n";
    }
  }
  return os.str();
}

inline std::string decisions_to_csv(const Trajectory& tr, double eta) {
  std::ostringstream os;
  os << "t,agent,decision\n";
  for (std::size_t i = 0; i < tr.z_times.size(); ++i)
    for (int a = 0; a < tr.z.cols(); ++a)
      os << tr.z_times[i] << "," << a << ","
         << (tr.z(i, a) > eta ? "H1" : "H0") << "\n";
  return os.str();
}

inline json exponents_to_json(const ExperimentResult& res) {
  json out = json::array();
  for (const auto& ae : res.exponents) {
    json e;
    e["agent"] = ae.agent;
    e["ok"] = ae.ok;
    if (ae.ok) {
      e["slope"] = ae.est.slope;
      e["stderr"] = ae.est.stderr_;
      e["window"] = {ae.est.t_lo, ae.est.t_hi};
      e["n_points"] = ae.est.n_points;
    } else {
      e["note"] = ae.note;
    }
    out.push_back(e);
  }
  return out;
}

inline json bounds_to_json(const NlBounds& b) {
  return json{{"eta_lo", b.eta_lo},
              {"eta_hi", b.eta_hi},
              {"lambda_star", b.lambda_star},
              {"LE", b.fa_exponent},
              {"feasible", b.feasible},
              {"threshold_feasible", b.threshold_feasible},
              {"inconclusive_signal", b.inconclusive_signal}};
}

inline json bounds_to_json(const LBounds& b) {
  return json{{"t1", b.t1},
              {"t2", b.t2},
              {"t3", b.t3},
              {"c1", b.c1},
              {"c3", std::isfinite(b.log_c3) ? std::exp(b.log_c3) : 0.0},
              {"log_c3", b.log_c3},
              {"c4", b.c4},
              {"c4_star", b.c4_star},
              {"eta2", b.eta2},
              {"eta_lo", b.eta_lo},
              {"eta_hi", b.eta_hi},
              {"LD0", b.ld0},
              {"LD1", b.ld1},
              {"LD1_gauss_branch", b.gauss_rate},
              {"LD1_ld_branch", b.ld_branch_rate},
              {"feasible", b.feasible},
              {"threshold_feasible", b.threshold_feasible},
              {"inconclusive_signal", b.inconclusive_signal},
              {"miss_bound_undefined", b.miss_bound_undefined},
              {"b6_satisfied", b.b6_satisfied}};
}

inline json bounds_to_json(const ScalarBounds& b) {
  json out;
  out["distributed"] = bounds_to_json(b.distributed);
  out["theta_feasible"] = b.theta_feasible;
  out["central"] = json{{"eta_lo", b.eta_lo_central},
                        {"eta_hi", b.eta_hi_central},
                        {"eta_c", b.eta_c},
                        {"d1_star", b.d1_star},
                        {"LD0", b.ld0_central},
                        {"LD1", b.ld1_central},
                        {"LD1_gauss_branch", b.gauss_rate_central},
                        {"LD1_ld_branch", b.ld_branch_rate_central},
                        {"feasible", b.feasible_central},
                        {"threshold_feasible", b.threshold_feasible_central},
                        {"miss_bound_undefined", b.miss_bound_undefined_central},
                        {"theta_feasible", b.theta_feasible_central}};
  return out;
}

inline json bundle_to_json(const ReportBundle& rb) {
  json out;
  out["name"] = rb.name;
  out["eta_used"] = rb.eta_used;
  out["eta_formula_floor"] = rb.eta_formula_floor;
  out["graph_r"] = rb.graph_r;
  if (!std::isnan(rb.quoted_eta)) out["quoted_eta"] = rb.quoted_eta;
  if (!std::isnan(rb.quoted_miss_rate)) out["quoted_miss_rate"] = rb.quoted_miss_rate;
  if (!std::isnan(rb.quoted_r)) out["quoted_r"] = rb.quoted_r;
  if (rb.nl_bound) out["bounds"] = bounds_to_json(*rb.nl_bound);
  if (rb.l_bound) out["bounds"] = bounds_to_json(*rb.l_bound);
  out["empirical_exponents"] = exponents_to_json(rb.result);
  return out;
}

// ---------------------------------------------------------------------------
// Experiment config schema (strict: unknown keys are rejected).
// ---------------------------------------------------------------------------

inline void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                                const std::string& where) {
  if (!obj.is_object()) throw InvalidInput("expected an object at " + where);
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      throw InvalidInput("unknown key '" + it.key() + "' in " + where);
}

inline Graph parse_graph(const json& j) {
  reject_unknown_keys(j, {"type", "n", "radius", "seed", "edges"}, "graph");
  std::string type = j.at("type").get<std::string>();
  int n = j.at("n").get<int>();
  if (type == "ring") return build_ring(n);
  if (type == "complete") return build_complete(n);
  if (type == "geometric")
    return build_random_geometric(n, j.at("radius").get<double>(),
                                  j.value("seed", std::uint64_t{1}));
  if (type == "edges") {
    std::vector<std::pair<int, int>> edges;
    for (const auto& e : j.at("edges")) edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    return graph_from_edges(n, std::move(edges));
  }
  throw InvalidInput("unknown graph type '" + type + "'");
}

inline Mat parse_matrix(const json& j) {
  if (!j.is_array() || j.empty()) throw InvalidInput("matrix must be a nonempty array of rows");
  int rows = static_cast<int>(j.size());
  int cols = static_cast<int>(j[0].size());
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (static_cast<int>(j[i].size()) != cols) throw InvalidInput("ragged matrix rows");
    for (int c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

inline LinearModel parse_linear_model(const json& j) {
  reject_unknown_keys(j, {"type", "H", "Sigma"}, "model");
  LinearModel m;
  for (const auto& h : j.at("H")) m.H.push_back(parse_matrix(h));
  const json& sig = j.at("Sigma");
  if (sig.is_number()) {
    double s2 = sig.get<double>();
    for (const auto& h : m.H) m.sigma.push_back(s2 * Mat::Identity(h.rows(), h.rows()));
  } else {
    for (const auto& s : sig) m.sigma.push_back(parse_matrix(s));
  }
  m.validate();
  return m;
}

inline ExperimentConfig parse_config(const json& j) {
  reject_unknown_keys(j,
                      {"version", "algorithm", "graph", "model", "schedule", "central", "truth",
                       "eta", "horizon", "trials", "stride", "seed", "threads", "project_box",
                       "cap_consensus_weight", "probe_times", "delta", "sample_trajectories",
                       "allow_k_below_min"},
                      "config");
  if (j.at("version").get<int>() != 1) throw InvalidInput("unsupported config version");
  ExperimentConfig cfg;
  std::string algo = j.at("algorithm").get<std::string>();
  cfg.trials = j.value("trials", 1);
  cfg.threads = j.value("threads", 1);
  cfg.master_seed = j.value("seed", std::uint64_t{42});
  cfg.sample_trajectories = j.value("sample_trajectories", 3);

  auto parse_truth = [&](int param_dim) {
    const json& t = j.at("truth");
    reject_unknown_keys(t, {"hypothesis", "theta_star"}, "truth");
    std::string hy = t.at("hypothesis").get<std::string>();
    if (hy == "H0") return TruthConfig::null_hypothesis(param_dim);
    if (hy != "H1") throw InvalidInput("hypothesis must be H0 or H1");
    const json& ts = t.at("theta_star");
    Vec theta(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) theta[i] = ts[i].get<double>();
    if (theta.size() != param_dim) throw InvalidInput("theta_star dimension mismatch");
    return TruthConfig::alternative(theta);
  };
  auto probe_times = [&]() {
    std::vector<long> pts;
    if (j.contains("probe_times"))
      for (const auto& p : j.at("probe_times")) pts.push_back(p.get<long>());
    std::sort(pts.begin(), pts.end());
    return pts;
  };

  if (algo == "central") {
    cfg.algorithm = Algorithm::Central;
    const json& c = j.at("central");
    reject_unknown_keys(c, {"h", "sigma2", "n1", "g"}, "central");
    CentralTrialConfig tc;
    tc.params.h = c.at("h").get<double>();
    tc.params.sigma2 = c.at("sigma2").get<double>();
    tc.params.n1 = c.at("n1").get<int>();
    tc.params.g = c.at("g").get<double>();
    tc.truth = parse_truth(1);
    tc.eta = j.at("eta").get<double>();
    tc.horizon = j.at("horizon").get<long>();
    cfg.central = std::move(tc);
    return cfg;
  }

  Graph g = parse_graph(j.at("graph"));
  Spectrum spec = spectrum(g);
  ConsensusWeights w = j.contains("delta") ? make_weights_with_delta(spec, j.at("delta").get<double>())
                                           : make_weights(spec);
  if (algo == "nl") {
    cfg.algorithm = Algorithm::NL;
    const json& mj = j.at("model");
    std::string mtype = mj.at("type").get<std::string>();
    NlTrialConfig tc;
    if (mtype == "trig10") {
      reject_unknown_keys(mj, {"type", "noise_var"}, "model");
      tc.model = trig_model(10, mj.value("noise_var", 0.5));
    } else if (mtype == "linear") {
      tc.model = linearize(parse_linear_model(mj));
    } else {
      throw InvalidInput("unknown nonlinear model '" + mtype + "' (registry: trig10, linear)");
    }
    const json& s = j.at("schedule");
    reject_unknown_keys(s, {"a", "b", "tau2"}, "schedule");
    tc.schedule = NlSchedule{s.at("a").get<double>(), s.at("b").get<double>(),
                             s.at("tau2").get<double>()};
    tc.graph = std::move(g);
    tc.weights = std::move(w);
    tc.truth = parse_truth(tc.model.param_dim);
    tc.eta = j.at("eta").get<double>();
    tc.horizon = j.at("horizon").get<long>();
    tc.stride = j.value("stride", 10);
    tc.project_box = j.value("project_box", false);
    tc.cap_consensus_weight = j.value("cap_consensus_weight", true);
    tc.probe_times = probe_times();
    cfg.nl = std::move(tc);
    return cfg;
  }
  if (algo == "l") {
    cfg.algorithm = Algorithm::L;
    LTrialConfig tc;
    tc.model = parse_linear_model(j.at("model"));
    const json& s = j.at("schedule");
    reject_unknown_keys(s, {"a", "delta2", "k"}, "schedule");
    tc.schedule = LSchedule{s.at("a").get<double>(), s.at("delta2").get<double>()};
    tc.k = s.at("k").get<int>();
    tc.graph = std::move(g);
    tc.weights = std::move(w);
    tc.truth = parse_truth(tc.model.param_dim());
    tc.eta = j.at("eta").get<double>();
    tc.horizon = j.at("horizon").get<long>();
    tc.stride = j.value("stride", 10);
    tc.cap_consensus_weight = j.value("cap_consensus_weight", true);
    tc.allow_k_below_min = j.value("allow_k_below_min", false);
    tc.probe_times = probe_times();
    cfg.l = std::move(tc);
    return cfg;
  }
  throw InvalidInput("unknown algorithm '" + algo + "' (use nl, l, or central)");
}

/// Effective config back to JSON; parse(dump(parse(x))) == parse(x).
inline json config_to_json(const json& original, const ExperimentConfig& cfg) {
  json out = original;
  out["version"] = 1;
  out["trials"] = cfg.trials;
  out["threads"] = cfg.threads;
  out["seed"] = cfg.master_seed;
  if (cfg.algorithm == Algorithm::NL) {
    out["horizon"] = cfg.nl->horizon;
    out["eta"] = cfg.nl->eta;
    out["stride"] = cfg.nl->stride;
  } else if (cfg.algorithm == Algorithm::L) {
    out["horizon"] = cfg.l->horizon;
    out["eta"] = cfg.l->eta;
    out["stride"] = cfg.l->stride;
  } else {
    out["horizon"] = cfg.central->horizon;
    out["eta"] = cfg.central->eta;
  }
  return out;
}

}  // namespace cidet
