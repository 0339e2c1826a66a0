#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "perfrec/experiments.hpp"

using namespace perfrec;
using nlohmann::json;

namespace {

std::string write_tmp(const std::string& name, const std::string& content) {
  std::string path = "/tmp/" + name;
  std::ofstream out(path, std::ios::binary);
  out << content;
  return path;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

#ifdef PERFREC_BIN
int run_bin(const std::string& args) {
  int rc = std::system((std::string(PERFREC_BIN) + " " + args + " >/dev/null 2>&1").c_str());
  return WEXITSTATUS(rc);
}
#endif

}  // namespace

TEST_CASE("config parsing") {
  SUBCASE("defaults") {
    ExperimentConfig c = parse_config(json::object());
    CHECK(c.experiment == "verify");
    CHECK(c.m == 50);
    CHECK(c.n == 200);
    CHECK(c.train.k == 10);
    CHECK(c.train.restarts == 1);
    CHECK(c.T == 10);
    CHECK(c.seed == 0);
  }
  SUBCASE("unknown top-level key") {
    CHECK_THROWS_WITH_AS(parse_config(json::parse(R"({"grids":{}})")),
                         doctest::Contains("unknown key 'grids'"), std::runtime_error);
  }
  SUBCASE("unknown nested key names its section") {
    CHECK_THROWS_WITH_AS(parse_config(json::parse(R"({"train":{"momentum":0.9}})")),
                         doctest::Contains("train.momentum"), std::runtime_error);
  }
  SUBCASE("range errors") {
    CHECK_THROWS_WITH_AS(parse_config(json::parse(R"({"world":{"d":1}})")),
                         doctest::Contains("world.d"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_config(json::parse(R"({"train":{"k":1}})")),
                         doctest::Contains("train.k"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_config(json::parse(R"({"train":{"tau_perm":0}})")),
                         doctest::Contains("tau_perm"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_config(json::parse(R"({"train":{"restarts":0}})")),
                         doctest::Contains("restarts"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_config(json::parse(R"({"train":{"lambda":-1}})")),
                         doctest::Contains("lambda"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_config(json::parse(R"({"T":0})")), doctest::Contains("'T'"),
                         std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_config(json::parse(R"({"experiment":"mystery"})")),
                         doctest::Contains("experiment"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_config(json::parse(R"({"graph":{"kind":"torus"}})")),
                         doctest::Contains("graph.kind"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_config(json::parse(R"({"dynamics":{"methods":["greedy"]}})")),
                         doctest::Contains("greedy"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_config(json::parse(R"({"dynamics":{"target_kind":"x"}})")),
                         doctest::Contains("target_kind"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_config(json::parse(R"({"dynamics":{"theta_mmr":1.5}})")),
                         doctest::Contains("theta_mmr"), std::runtime_error);
  }
  SUBCASE("per-experiment grid requirements") {
    CHECK_THROWS_WITH_AS(
        parse_config(json::parse(R"({"experiment":"overlap","sweeps":{"swap_grid":[]}})")),
        doctest::Contains("swap_grid"), std::runtime_error);
    CHECK_THROWS_WITH_AS(
        parse_config(json::parse(R"({"experiment":"dynamics","dynamics":{"methods":[]}})")),
        doctest::Contains("methods"), std::runtime_error);
    CHECK_THROWS_WITH_AS(
        parse_config(json::parse(R"({"experiment":"pareto","sweeps":{"lambda_grid":[]}})")),
        doctest::Contains("lambda_grid"), std::runtime_error);
  }
  SUBCASE("round-trip is idempotent") {
    json j = json::parse(R"({
      "experiment": "dynamics",
      "world": {"m": 7, "n": 30, "d": 3, "sigma_u_star": 0.4},
      "graph": {"kind": "uniform", "K": 5},
      "train": {"lambda": 0.7, "alpha": 1.5, "k": 3, "restarts": 2},
      "sweeps": {"alpha_grid": [0.1, 1], "ndcg_targets": [0.85]},
      "dynamics": {"methods": ["strategic", "mmr"], "target_kind": "ndcg_target"},
      "T": 4, "repetitions": 2, "seed": 99
    })");
    std::string once = serialize_config(parse_config(j));
    std::string twice = serialize_config(parse_config(json::parse(once)));
    CHECK(once == twice);
    ExperimentConfig c = parse_config(json::parse(once));
    CHECK(c.m == 7);
    CHECK(c.train.alpha == 1.5);
    CHECK(c.methods == std::vector<std::string>{"strategic", "mmr"});
    CHECK(c.target_kind == "ndcg_target");
  }
  SUBCASE("load_config rejects missing file and bad JSON") {
    CHECK_THROWS_WITH_AS(load_config("/tmp/does-not-exist.json"),
                         doctest::Contains("cannot open"), std::runtime_error);
    auto p = write_tmp("cfg_bad.json", "{oops");
    CHECK_THROWS_WITH_AS(load_config(p), doctest::Contains("parse error"),
                         std::runtime_error);
  }
}

TEST_CASE("csv io") {
  SUBCASE("write/read round trip preserves schema, header and cells") {
    CsvWriter w("pareto", {"lambda", "seed", "round", "ndcg", "div"});
    w.add_row({fmt_double(0.5), "7", "1", fmt_double(0.93), fmt_double(0.21)});
    w.add_row({fmt_double(2.0), "7", "1", fmt_double(0.88), fmt_double(0.44)});
    auto p = write_tmp("roundtrip.csv", w.str());
    CsvTable t = read_csv(p);
    CHECK(t.schema == "pareto");
    CHECK(t.columns == std::vector<std::string>{"lambda", "seed", "round", "ndcg", "div"});
    REQUIRE(t.rows.size() == 2);
    CHECK(cell_double(t.rows[1][4]) == 0.44);
  }
  SUBCASE("first line carries the schema tag") {
    CsvWriter w("overlap", {"N"});
    std::string s = w.str();
    CHECK(s.rfind("#schema=overlap/v1\n", 0) == 0);
  }
  SUBCASE("row width is enforced on write and read") {
    CsvWriter w("x", {"a", "b"});
    CHECK_THROWS_AS(w.add_row({"1"}), std::invalid_argument);
    auto p = write_tmp("ragged.csv", "#schema=x/v1\na,b\n1,2,3\n");
    CHECK_THROWS_WITH_AS(read_csv(p), doctest::Contains("3 cells"), std::runtime_error);
  }
  SUBCASE("missing or malformed schema line rejected") {
    auto p1 = write_tmp("noschema.csv", "a,b\n1,2\n");
    CHECK_THROWS_WITH_AS(read_csv(p1), doctest::Contains("#schema"), std::runtime_error);
    auto p2 = write_tmp("badver.csv", "#schema=overlap/v2\na\n1\n");
    CHECK_THROWS_WITH_AS(read_csv(p2), doctest::Contains("schema version"),
                         std::runtime_error);
  }
  SUBCASE("fmt_double round-trips exactly") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 12345.6789, 0.0})
      CHECK(std::stod(fmt_double(v)) == v);
  }
}

TEST_CASE("experiment runners are deterministic") {
  ExperimentConfig c = parse_config(json::parse(R"({
    "experiment": "overlap",
    "world": {"m": 4, "n": 16, "d": 2},
    "graph": {"kind": "block", "K": 4, "blocks": 2},
    "train": {"k": 2, "max_epochs": 3, "patience": 3},
    "sweeps": {"lambda_grid": [0, 1], "swap_grid": [0, 4]},
    "T": 1, "repetitions": 2, "seed": 5
  })"));
  std::string a = run_synth(c, 1).str();
  std::string b = run_synth(c, 1).str();
  CHECK(a == b);
  // cell-indexed output slots keep multi-threaded runs byte-identical too
  std::string c2 = run_synth(c, 2).str();
  CHECK(a == c2);
  CsvTable t = read_csv(write_tmp("ov_det.csv", a));
  CHECK(t.schema == "overlap");
  CHECK(t.rows.size() == 2 * 2 * 2);  // swaps x lambdas x reps, T=1
}

TEST_CASE("plot rendering") {
  SUBCASE("each known schema renders an svg") {
    auto mk = [&](const std::string& schema, const std::vector<std::string>& cols,
                  const std::vector<std::vector<std::string>>& rows) {
      CsvWriter w(schema, cols);
      for (const auto& r : rows) w.add_row(r);
      return read_csv(write_tmp("plot_" + schema + ".csv", w.str()));
    };
    auto has_svg = [](const std::string& s) {
      return s.find("<svg") != std::string::npos && s.find("</svg>") != std::string::npos;
    };
    CHECK(has_svg(plot_csv(mk("overlap", {"N", "lambda", "rep", "round", "ndcg", "div_post"},
                              {{"0", "1", "0", "1", "0.9", "0.1"},
                               {"8", "1", "0", "1", "0.9", "0.3"}}))));
    CHECK(has_svg(plot_csv(mk("dispersion",
                              {"sigma_u", "lambda", "rep", "round", "ndcg", "div_post"},
                              {{"0.1", "0", "0", "1", "0.9", "0.02"},
                               {"0.5", "0", "0", "1", "0.9", "0.05"}}))));
    CHECK(has_svg(plot_csv(mk("costtime", {"alpha", "lambda", "rep", "round", "ndcg", "div_post"},
                              {{"0.5", "2", "0", "1", "0.9", "0.1"},
                               {"0.5", "2", "0", "2", "0.9", "0.2"}}))));
    CHECK(has_svg(plot_csv(mk("dynamics",
                              {"method", "alpha", "target", "lambda", "seed", "round",
                               "ndcg_test", "div_pre", "div_post"},
                              {{"strategic", "0.1", "0.9", "0.5", "1", "1", "0.9", "0.1", "0.2"},
                               {"baseline", "0.1", "0.9", "0", "1", "1", "0.95", "0.05", "0.04"}}))));
    CHECK(has_svg(plot_csv(mk("pareto", {"lambda", "seed", "round", "ndcg", "div"},
                              {{"0", "1", "1", "0.95", "0.05"},
                               {"1", "1", "1", "0.9", "0.3"}}))));
  }
  SUBCASE("unknown schema is an error that lists the known ones") {
    CsvWriter w("mystery", {"a"});
    w.add_row({"1"});
    CsvTable t = read_csv(write_tmp("plot_unknown.csv", w.str()));
    CHECK_THROWS_WITH_AS(plot_csv(t), doctest::Contains("unknown schema"),
                         std::runtime_error);
  }
  SUBCASE("empty csv is an error") {
    CsvWriter w("pareto", {"lambda", "seed", "round", "ndcg", "div"});
    CsvTable t = read_csv(write_tmp("plot_empty.csv", w.str()));
    CHECK_THROWS_WITH_AS(plot_csv(t), doctest::Contains("no data rows"),
                         std::runtime_error);
  }
}

#ifdef PERFREC_BIN
TEST_CASE("binary exit codes") {
  SUBCASE("bad invocation and config errors exit 2") {
    CHECK(run_bin("") == 2);                                     // missing subcommand
    CHECK(run_bin("synth") == 2);                                // missing --config
    CHECK(run_bin("synth --config /tmp/missing-cfg.json") == 2); // unreadable config
    auto bad = write_tmp("cli_badfield.json", R"({"experiment":"overlap","train":{"k":1}})");
    CHECK(run_bin("synth --config " + bad) == 2);
    auto plot_missing = write_tmp("cli_plot_none.json", R"({"experiment":"verify"})");
    CHECK(run_bin("plot --config " + plot_missing) == 2);        // plot.csv required
  }
  SUBCASE("small synth run succeeds and reruns byte-identically") {
    auto cfg = write_tmp("cli_small.json", R"({
      "experiment": "overlap",
      "world": {"m": 4, "n": 16, "d": 2},
      "graph": {"kind": "block", "K": 4, "blocks": 2},
      "train": {"k": 2, "max_epochs": 3, "patience": 3},
      "sweeps": {"lambda_grid": [1], "swap_grid": [0, 4]},
      "T": 1, "repetitions": 1, "seed": 3
    })");
    CHECK(run_bin("synth --config " + cfg + " --out /tmp/cli_out_a") == 0);
    CHECK(run_bin("synth --config " + cfg + " --out /tmp/cli_out_b") == 0);
    std::string a = slurp("/tmp/cli_out_a/overlap.csv");
    CHECK(!a.empty());
    CHECK(a == slurp("/tmp/cli_out_b/overlap.csv"));
    // a different --seed changes the body
    CHECK(run_bin("synth --config " + cfg + " --out /tmp/cli_out_c --seed 4") == 0);
    CHECK(a != slurp("/tmp/cli_out_c/overlap.csv"));
    // and the result plots
    auto pc = write_tmp("cli_plot.json",
                        R"({"experiment":"verify","plot":{"csv":"/tmp/cli_out_a/overlap.csv"}})");
    CHECK(run_bin("plot --config " + pc + " --out /tmp/cli_out_a") == 0);
    CHECK(slurp("/tmp/cli_out_a/overlap.svg").find("<svg") != std::string::npos);
  }
  SUBCASE("PERFREC_JOBS must be a positive integer") {
    auto cfg = write_tmp("cli_jobs.json", R"({
      "experiment": "overlap",
      "world": {"m": 4, "n": 16, "d": 2},
      "graph": {"kind": "block", "K": 4, "blocks": 2},
      "train": {"k": 2, "max_epochs": 2, "patience": 2},
      "sweeps": {"lambda_grid": [0], "swap_grid": [0]},
      "T": 1, "repetitions": 1, "seed": 3
    })");
    int rc = std::system(("PERFREC_JOBS=banana " + std::string(PERFREC_BIN) +
                          " synth --config " + cfg + " --out /tmp/cli_out_j >/dev/null 2>&1")
                             .c_str());
    CHECK(WEXITSTATUS(rc) == 2);
    rc = std::system(("PERFREC_JOBS=2 " + std::string(PERFREC_BIN) + " synth --config " +
                      cfg + " --out /tmp/cli_out_j >/dev/null 2>&1")
                         .c_str());
    CHECK(WEXITSTATUS(rc) == 0);
  }
}
#endif
