#pragma once
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "perfrec/dynamics.hpp"

namespace perfrec {

// One experiment run, loaded from a JSON config file. Defaults reproduce the
// small synthetic setting (m=50, n=200, K=k=10, d=2) with the standard
// optimizer settings (lr 0.1, 200 epochs, temperatures 0.1 / 1 / 5).
struct ExperimentConfig {
  std::string experiment = "verify";  // overlap|dispersion|cost-time|dynamics|pareto|verify

  // world
  std::size_t m = 50, n = 200, d = 2;
  double sigma_x = 1.0, sigma_u_star = 0.1;

  // graph
  std::string graph_kind = "block";  // block|uniform|ring|two_item
  std::size_t K = 10, blocks = 10, swaps = 0;

  TrainConfig train;

  // sweep grids
  std::vector<double> lambda_grid = {0.0};
  std::vector<double> alpha_grid = {0.0};
  std::vector<std::size_t> swap_grid = {0};
  std::vector<double> sigma_u_grid = {0.1};
  std::vector<double> ndcg_targets = {0.9};

  // dynamics
  std::vector<std::string> methods = {"baseline"};
  std::string target_kind = "fixed";  // fixed|ndcg_target|lambda_base
  std::size_t hybrid_switch_round = 5;
  double theta_mmr = 0.5;
  bool semi_synthetic = false;
  double tune_tolerance = 0.01;

  std::size_t T = 10;
  std::size_t repetitions = 1;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::string verify_level = "fast";  // fast|full

  // plot
  std::string plot_csv;
  std::string plot_kind = "auto";
};

namespace cfgdetail {

inline void fail(const std::string& field, const std::string& why) {
  throw std::runtime_error("config: field '" + field + "' " + why);
}

inline void check_known(const nlohmann::json& obj, const std::string& where,
                        const std::set<std::string>& known) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!known.count(it.key()))
      throw std::runtime_error("config: unknown key '" +
                               (where.empty() ? it.key() : where + "." + it.key()) + "'");
}

template <typename T>
inline void get(const nlohmann::json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

inline void require_positive(double v, const std::string& field) {
  if (!(v > 0)) fail(field, "must be > 0");
}
inline void require_nonneg(double v, const std::string& field) {
  if (!(v >= 0)) fail(field, "must be >= 0");
}

}  // namespace cfgdetail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using namespace cfgdetail;
  ExperimentConfig c;
  check_known(j, "", {"experiment", "world", "graph", "train", "sweeps", "dynamics", "T",
                      "repetitions", "seed", "out_dir", "verify_level", "plot"});
  get(j, "experiment", c.experiment);
  static const std::set<std::string> kinds = {"overlap",  "dispersion", "cost-time",
                                              "dynamics", "pareto",     "verify"};
  if (!kinds.count(c.experiment)) fail("experiment", "must be one of overlap|dispersion|cost-time|dynamics|pareto|verify");

  if (j.contains("world")) {
    const auto& w = j.at("world");
    check_known(w, "world", {"m", "n", "d", "sigma_x", "sigma_u_star"});
    get(w, "m", c.m);
    get(w, "n", c.n);
    get(w, "d", c.d);
    get(w, "sigma_x", c.sigma_x);
    get(w, "sigma_u_star", c.sigma_u_star);
    if (c.m < 1) fail("world.m", "must be >= 1");
    if (c.n < 1) fail("world.n", "must be >= 1");
    if (c.d < 2) fail("world.d", "must be >= 2");
    require_nonneg(c.sigma_x, "world.sigma_x");
    require_nonneg(c.sigma_u_star, "world.sigma_u_star");
  }

  if (j.contains("graph")) {
    const auto& g = j.at("graph");
    check_known(g, "graph", {"kind", "K", "blocks", "swaps"});
    get(g, "kind", c.graph_kind);
    get(g, "K", c.K);
    get(g, "blocks", c.blocks);
    get(g, "swaps", c.swaps);
    static const std::set<std::string> gk = {"block", "uniform", "ring", "two_item"};
    if (!gk.count(c.graph_kind)) fail("graph.kind", "must be block|uniform|ring|two_item");
    if (c.K < 2) fail("graph.K", "must be >= 2");
  }

  if (j.contains("train")) {
    const auto& t = j.at("train");
    check_known(t, "train",
                {"lambda", "alpha", "k", "tau_ndcg", "tau_perm", "tau_topk",
                 "learning_rate", "max_epochs", "patience", "restarts"});
    get(t, "lambda", c.train.lambda);
    get(t, "alpha", c.train.alpha);
    get(t, "k", c.train.k);
    get(t, "tau_ndcg", c.train.temps.tau_ndcg);
    get(t, "tau_perm", c.train.temps.tau_perm);
    get(t, "tau_topk", c.train.temps.tau_topk);
    get(t, "learning_rate", c.train.learning_rate);
    get(t, "max_epochs", c.train.max_epochs);
    get(t, "patience", c.train.patience);
    get(t, "restarts", c.train.restarts);
    if (c.train.restarts < 1) fail("train.restarts", "must be >= 1");
    require_nonneg(c.train.lambda, "lambda");
    require_nonneg(c.train.alpha, "alpha");
    if (c.train.k < 2) fail("train.k", "must be >= 2");
    require_positive(c.train.temps.tau_ndcg, "train.tau_ndcg");
    require_positive(c.train.temps.tau_perm, "train.tau_perm");
    require_positive(c.train.temps.tau_topk, "train.tau_topk");
    require_nonneg(c.train.learning_rate, "train.learning_rate");
  }

  if (j.contains("sweeps")) {
    const auto& s = j.at("sweeps");
    check_known(s, "sweeps",
                {"lambda_grid", "alpha_grid", "swap_grid", "sigma_u_grid", "ndcg_targets"});
    get(s, "lambda_grid", c.lambda_grid);
    get(s, "alpha_grid", c.alpha_grid);
    get(s, "swap_grid", c.swap_grid);
    get(s, "sigma_u_grid", c.sigma_u_grid);
    get(s, "ndcg_targets", c.ndcg_targets);
    for (double v : c.lambda_grid) require_nonneg(v, "sweeps.lambda_grid");
    for (double v : c.alpha_grid) require_nonneg(v, "sweeps.alpha_grid");
    for (double v : c.sigma_u_grid) require_nonneg(v, "sweeps.sigma_u_grid");
  }

  if (j.contains("dynamics")) {
    const auto& dsec = j.at("dynamics");
    check_known(dsec, "dynamics",
                {"methods", "target_kind", "hybrid_switch_round", "theta_mmr",
                 "semi_synthetic", "tune_tolerance"});
    get(dsec, "methods", c.methods);
    get(dsec, "target_kind", c.target_kind);
    get(dsec, "hybrid_switch_round", c.hybrid_switch_round);
    get(dsec, "theta_mmr", c.theta_mmr);
    get(dsec, "semi_synthetic", c.semi_synthetic);
    get(dsec, "tune_tolerance", c.tune_tolerance);
    static const std::set<std::string> mk = {"baseline", "nonstrategic", "strategic",
                                             "mmr", "hybrid", "random"};
    for (const auto& name : c.methods)
      if (!mk.count(name)) fail("dynamics.methods", "unknown method '" + name + "'");
    static const std::set<std::string> tk = {"fixed", "ndcg_target", "lambda_base"};
    if (!tk.count(c.target_kind)) fail("dynamics.target_kind", "must be fixed|ndcg_target|lambda_base");
    if (c.theta_mmr < 0 || c.theta_mmr > 1) fail("dynamics.theta_mmr", "must be in [0,1]");
    require_nonneg(c.tune_tolerance, "dynamics.tune_tolerance");
  }

  get(j, "T", c.T);
  get(j, "repetitions", c.repetitions);
  get(j, "seed", c.seed);
  get(j, "out_dir", c.out_dir);
  get(j, "verify_level", c.verify_level);
  if (c.T < 1) fail("T", "must be >= 1");
  if (c.repetitions < 1) fail("repetitions", "must be >= 1");
  if (c.verify_level != "fast" && c.verify_level != "full")
    fail("verify_level", "must be fast|full");

  if (j.contains("plot")) {
    const auto& p = j.at("plot");
    check_known(p, "plot", {"csv", "kind"});
    get(p, "csv", c.plot_csv);
    get(p, "kind", c.plot_kind);
  }

  // per-experiment grid requirements
  if (c.experiment == "overlap" && c.swap_grid.empty()) fail("sweeps.swap_grid", "must be nonempty for overlap");
  if (c.experiment == "dispersion" && c.sigma_u_grid.empty()) fail("sweeps.sigma_u_grid", "must be nonempty for dispersion");
  if (c.experiment == "cost-time" && c.alpha_grid.empty()) fail("sweeps.alpha_grid", "must be nonempty for cost-time");
  if ((c.experiment == "overlap" || c.experiment == "dispersion" ||
       c.experiment == "pareto") && c.lambda_grid.empty())
    fail("sweeps.lambda_grid", "must be nonempty");
  if (c.experiment == "dynamics" && c.methods.empty()) fail("dynamics.methods", "must be nonempty");
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("config: parse error in " + path + ": " + e.what());
  }
  return parse_config(j);
}

// Normalized serialization (all fields, sorted keys). parse -> serialize is
// idempotent: serialize(parse(serialize(parse(f)))) == serialize(parse(f)).
inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["experiment"] = c.experiment;
  j["world"] = {{"m", c.m}, {"n", c.n}, {"d", c.d}, {"sigma_x", c.sigma_x},
                {"sigma_u_star", c.sigma_u_star}};
  j["graph"] = {{"kind", c.graph_kind}, {"K", c.K}, {"blocks", c.blocks}, {"swaps", c.swaps}};
  j["train"] = {{"lambda", c.train.lambda},
                {"alpha", c.train.alpha},
                {"k", c.train.k},
                {"tau_ndcg", c.train.temps.tau_ndcg},
                {"tau_perm", c.train.temps.tau_perm},
                {"tau_topk", c.train.temps.tau_topk},
                {"learning_rate", c.train.learning_rate},
                {"max_epochs", c.train.max_epochs},
                {"patience", c.train.patience},
                {"restarts", c.train.restarts}};
  j["sweeps"] = {{"lambda_grid", c.lambda_grid},
                 {"alpha_grid", c.alpha_grid},
                 {"swap_grid", c.swap_grid},
                 {"sigma_u_grid", c.sigma_u_grid},
                 {"ndcg_targets", c.ndcg_targets}};
  j["dynamics"] = {{"methods", c.methods},
                   {"target_kind", c.target_kind},
                   {"hybrid_switch_round", c.hybrid_switch_round},
                   {"theta_mmr", c.theta_mmr},
                   {"semi_synthetic", c.semi_synthetic},
                   {"tune_tolerance", c.tune_tolerance}};
  j["T"] = c.T;
  j["repetitions"] = c.repetitions;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  j["verify_level"] = c.verify_level;
  j["plot"] = {{"csv", c.plot_csv}, {"kind", c.plot_kind}};
  return j;
}

inline std::string serialize_config(const ExperimentConfig& c) { return to_json(c).dump(2); }

// Builds the graph described by the config. Block graphs leave items outside
// the shared per-block subsets without an audience; the response path leaves
// such items unmoved.
inline RecGraph make_graph(const ExperimentConfig& c, std::uint64_t seed) {
  if (c.graph_kind == "block")
    return gen_block_shuffled(c.m, c.n, c.K, c.blocks, c.swaps, seed);
  if (c.graph_kind == "uniform") return gen_uniform(c.m, c.n, c.K, seed);
  if (c.graph_kind == "ring") return gen_ring(c.n);
  if (c.graph_kind == "two_item") return gen_two_item(c.m, false);
  throw std::runtime_error("config: unknown graph kind " + c.graph_kind);
}

inline Method make_method(const ExperimentConfig& c, const std::string& name) {
  Method m;
  if (name == "baseline") m.kind = MethodKind::baseline;
  else if (name == "nonstrategic") m.kind = MethodKind::nonstrategic;
  else if (name == "strategic") m.kind = MethodKind::strategic;
  else if (name == "mmr") m.kind = MethodKind::mmr;
  else if (name == "hybrid") m.kind = MethodKind::hybrid;
  else if (name == "random") m.kind = MethodKind::random_rank;
  else throw std::runtime_error("config: unknown method " + name);
  m.switch_round = c.hybrid_switch_round;
  m.theta_mmr = c.theta_mmr;
  m.lambda = c.train.lambda;
  if (m.kind == MethodKind::nonstrategic || m.kind == MethodKind::strategic ||
      m.kind == MethodKind::hybrid) {
    if (c.target_kind == "ndcg_target") m.target = TargetKind::ndcg_target;
    else if (c.target_kind == "lambda_base") m.target = TargetKind::lambda_base;
    else m.target = TargetKind::fixed_lambda;
  }
  return m;
}

}  // namespace perfrec
