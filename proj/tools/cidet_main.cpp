// Command-line front end: run simulations, compute threshold/exponent
// reports, replicate the canned experiments, inspect graphs, and self-test.

#include <cidet/cidet.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using cidet::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalidInput = 1;
constexpr int kExitDivergence = 2;
constexpr int kExitInfeasible = 3;

struct CommonOpts {
  std::string config_path;
  std::string output_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<int> threads;
  std::optional<int> stride;
  bool strict = false;
  bool dump_config = false;
  std::vector<std::string> overrides;
};

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw cidet::InvalidInput("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw cidet::InvalidInput(std::string("config is not valid JSON: ") + e.what());
  }
  return j;
}

// Apply a dotted-key override "a.b.c=value"; the value is parsed as JSON and
// must match the type already present (new keys are rejected by the schema
// when the config is re-parsed).
void apply_override(json& doc, const std::string& kv) {
  auto eq = kv.find('=');
  if (eq == std::string::npos) throw cidet::InvalidInput("override must be key=value: " + kv);
  std::string path = kv.substr(0, eq);
  std::string raw = kv.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (...) {
    value = raw;  // bare strings allowed
  }
  json* at = &doc;
  std::size_t pos = 0;
  while (true) {
    auto dot = path.find('.', pos);
    std::string key = path.substr(pos, dot == std::string::npos ? dot : dot - pos);
    if (dot == std::string::npos) {
      if (at->contains(key) && (*at)[key].type() != value.type() &&
          !((*at)[key].is_number() && value.is_number()))
        throw cidet::InvalidInput("override type mismatch for '" + path + "'");
      (*at)[key] = value;
      return;
    }
    if (!at->contains(key)) throw cidet::InvalidInput("unknown override path '" + path + "'");
    at = &(*at)[key];
    pos = dot + 1;
  }
}

json effective_config(const CommonOpts& opt) {
  json doc = load_json(opt.config_path);
  for (const auto& kv : opt.overrides) apply_override(doc, kv);
  if (opt.seed) doc["seed"] = *opt.seed;
  if (opt.trials) doc["trials"] = *opt.trials;
  if (opt.threads) doc["threads"] = *opt.threads;
  if (opt.stride) doc["stride"] = *opt.stride;
  return doc;
}

void write_result_files(const fs::path& dir, const cidet::ExperimentResult& res, double eta,
                        bool with_refresh) {
  fs::create_directories(dir);
  cidet::write_file(dir / "curves.csv", cidet::curves_to_csv(res));
  cidet::write_file(dir / "exponents.json", cidet::exponents_to_json(res).dump(2) + "\n");
  if (!res.sample.empty()) {
    cidet::write_file(dir / "trajectory_sample.csv",
                      cidet::trajectory_to_csv(res.sample[0], with_refresh));
    cidet::write_file(dir / "decisions.csv", cidet::decisions_to_csv(res.sample[0], eta));
  }
}

int cmd_simulate(const CommonOpts& opt) {
  json doc = effective_config(opt);
  cidet::ExperimentConfig cfg = cidet::parse_config(doc);
  if (opt.dump_config) {
    std::cout << cidet::config_to_json(doc, cfg).dump(2) << "\n";
    return kExitOk;
  }
  cidet::ExperimentResult res = cidet::run_experiment(cfg);
  write_result_files(opt.output_dir, res, cfg.eta(), cfg.algorithm == cidet::Algorithm::L);
  std::cout << "wrote " << opt.output_dir << "/curves.csv (" << res.curves.size()
            << " agents, " << res.trials << " trials)\n";
  return kExitOk;
}

int cmd_bounds(const CommonOpts& opt) {
  json doc = effective_config(opt);
  cidet::ExperimentConfig cfg = cidet::parse_config(doc);
  if (opt.dump_config) {
    std::cout << cidet::config_to_json(doc, cfg).dump(2) << "\n";
    return kExitOk;
  }
  json out;
  bool infeasible = false;
  if (cfg.algorithm == cidet::Algorithm::NL) {
    const auto& tc = *cfg.nl;
    std::vector<int> mn;
    for (int n = 0; n < tc.model.n_agents(); ++n) mn.push_back(tc.model.obs_dim(n));
    cidet::NlBounds b = cidet::nl_bounds(tc.model.n_agents(), mn, tc.weights.r, tc.model,
                                         tc.truth.theta_star, tc.eta);
    out = cidet::bounds_to_json(b);
    infeasible = !b.feasible || !b.threshold_feasible;
  } else if (cfg.algorithm == cidet::Algorithm::L) {
    const auto& tc = *cfg.l;
    cidet::Spectrum spec = cidet::spectrum(tc.graph);
    cidet::LBounds b = cidet::l_bounds(spec, tc.model, tc.schedule, tc.k, tc.truth.theta_star,
                                       tc.eta, tc.weights.r);
    out = cidet::bounds_to_json(b);
    infeasible = !b.feasible || !b.threshold_feasible;
  } else {
    throw cidet::InvalidInput("bounds reports cover the nl and l algorithms");
  }
  fs::create_directories(opt.output_dir);
  cidet::write_file(fs::path(opt.output_dir) / "bounds.json", out.dump(2) + "\n");
  std::cout << out.dump(2) << "\n";
  if (opt.strict && infeasible) {
    std::cerr << "ERROR " << kExitInfeasible << ": threshold or signal infeasible under --strict\n";
    return kExitInfeasible;
  }
  return kExitOk;
}

int cmd_reproduce(const std::string& which, const CommonOpts& opt) {
  cidet::ReproduceOptions ro;
  if (opt.trials) ro.trials = *opt.trials;
  if (opt.seed) ro.seed = *opt.seed;
  if (opt.threads) ro.threads = *opt.threads;
  if (opt.stride) ro.stride = *opt.stride;
  cidet::ReportBundle rb = cidet::reproduce_paper_experiments(which, ro);
  fs::path dir = fs::path(opt.output_dir) / which;
  write_result_files(dir, rb.result, rb.eta_used, which == "l_vic");
  cidet::write_file(dir / "bounds_vs_empirical.json", cidet::bundle_to_json(rb).dump(2) + "\n");
  std::cout << "wrote " << (dir / "bounds_vs_empirical.json").string() << "\n";
  return kExitOk;
}

int cmd_graph_info(const CommonOpts& opt) {
  json doc = load_json(opt.config_path);
  for (const auto& kv : opt.overrides) apply_override(doc, kv);
  cidet::Graph g = cidet::parse_graph(doc.at("graph"));
  cidet::Spectrum spec = cidet::spectrum(g);
  json out;
  out["n_agents"] = g.n_agents;
  out["n_edges"] = g.edges.size();
  out["lambda2"] = spec.lambda2();
  out["lambda_max"] = spec.lambda_max();
  out["connected"] = spec.connected();
  if (spec.connected()) {
    auto w = cidet::make_weights(spec);
    out["delta"] = w.delta;
    out["r"] = w.r;
    out["k_min"] = cidet::min_consensus_rounds(g.n_agents, w.r);
  }
  std::cout << out.dump(2) << "\n";
  fs::create_directories(opt.output_dir);
  cidet::write_file(fs::path(opt.output_dir) / "graph.edges", cidet::graph_to_edge_list(g));
  cidet::write_file(fs::path(opt.output_dir) / "laplacian.csv",
                    cidet::matrix_to_csv(spec.laplacian));
  return kExitOk;
}

#define SELFTEST(name, expr)                                   \
  do {                                                         \
    if (!(expr)) {                                             \
      std::cerr << "selftest FAILED: " << name << "\n";        \
      return false;                                            \
    }                                                          \
    std::cout << "selftest ok: " << name << "\n";              \
  } while (0)

bool run_selftest() {
  using namespace cidet;
  {
    Graph ring = build_ring(3);
    SELFTEST("ring3 topology", ring.edges.size() == 3);
    Spectrum s = spectrum(build_complete(4));
    SELFTEST("K4 spectrum", std::abs(s.lambda_max() - 4.0) < 1e-9 && s.connected());
    SELFTEST("kmin trivial", min_consensus_rounds(7, 1e-9) == 1);
  }
  {
    LinearModel m = linear_model_iso({Mat::Identity(2, 2)}, 1.0);
    SELFTEST("gram identity", (gram_matrix(m) - Mat::Identity(2, 2)).norm() < 1e-12);
    SELFTEST("observable", check_global_observability(m).observable);
  }
  {
    NonlinearModel tm = trig_model();
    Vec zero = Vec::Zero(5);
    SELFTEST("trig h(0)=0", tm.h[0](zero).norm() == 0.0);
    SELFTEST("trig grad(0)", std::abs(tm.grad[0](zero)(0, 0) - 5.0) < 1e-12);
  }
  {
    NonlinearModel m = linearize(linear_model_iso({Mat::Identity(1, 1)}, 1.0));
    Vec th = Vec::Zero(1);
    Vec y(1);
    y << 2.5;
    SELFTEST("llr at h=0", nl_llr(m, 0, th, y) == 0.0);
    SELFTEST("decide boundary", nl_decide(1.0, 1.0) == Hypothesis::H0);
    SELFTEST("l decide boundary", l_decide(1.0, 1.0) == Hypothesis::H0);
  }
  {
    Vec s0(1), y1(1);
    s0 << 0.0;
    y1 << 2.0;
    Vec s1 = l_update_running_average(s0, y1, 1);
    SELFTEST("running mean {0,2}", std::abs(s1[0] - 1.0) < 1e-15);
  }
  {
    SELFTEST("LE(0)=0", std::abs(nl_le(0.0, 1.0, 4, 4.0, 0.3)) < 1e-15);
    double floor_eta = 0.5 * (1.0 / 4 + 2.0 * 0.3) * 4.0;
    SELFTEST("LD0 floor", std::abs(fa_decay_rate(floor_eta, 1.0 / 4 + 2.0 * 0.3, 4.0)) < 1e-12);
  }
  return true;
}

#undef SELFTEST

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"consensus+innovations distributed GLRT simulator and bounds engine"};
  app.require_subcommand(1);

  CommonOpts opt;
  auto add_common = [&](CLI::App* sub, bool needs_config) {
    if (needs_config)
      sub->add_option("--config", opt.config_path, "JSON experiment config")->required();
    sub->add_option("--output", opt.output_dir, "output directory");
    sub->add_option("--seed", opt.seed, "master seed (default 42)");
    sub->add_option("--trials", opt.trials, "Monte Carlo trials");
    sub->add_option("--threads", opt.threads, "trial-level parallelism");
    sub->add_option("--stride", opt.stride, "estimate recording stride");
    sub->add_flag("--strict", opt.strict, "exit 3 on infeasibility flags");
    sub->add_flag("--dump-config", opt.dump_config, "print the effective config and exit");
    sub->add_option("--set", opt.overrides, "dotted-key overrides, key=value");
  };

  auto* sim = app.add_subcommand("simulate", "run a Monte Carlo experiment");
  add_common(sim, true);
  auto* bnd = app.add_subcommand("bounds", "compute threshold ranges and decay exponents");
  add_common(bnd, true);
  auto* rep = app.add_subcommand("reproduce", "run a canned replication (nl_vib, l_vic)");
  std::string which;
  rep->add_option("name", which, "nl_vib or l_vic")->required();
  add_common(rep, false);
  auto* gin = app.add_subcommand("graph-info", "spectral report for a graph spec");
  add_common(gin, true);
  auto* st = app.add_subcommand("selftest", "quick end-to-end sanity checks");
  (void)st;

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(opt);
    if (bnd->parsed()) return cmd_bounds(opt);
    if (rep->parsed()) return cmd_reproduce(which, opt);
    if (gin->parsed()) return cmd_graph_info(opt);
    if (st->parsed()) return run_selftest() ? kExitOk : kExitInvalidInput;
  } catch (const cidet::NumericalDivergence& e) {
    std::cerr << "ERROR " << kExitDivergence << ": " << e.what() << "\n";
    return kExitDivergence;
  } catch (const cidet::Error& e) {
    std::cerr << "ERROR " << kExitInvalidInput << ": " << e.what() << "\n";
    return kExitInvalidInput;
  } catch (const std::exception& e) {
    std::cerr << "ERROR " << kExitInvalidInput << ": " << e.what() << "\n";
    return kExitInvalidInput;
  }
  return kExitOk;
}
