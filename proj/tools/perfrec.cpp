// perfrec: performative-recommendation experiment driver.
//
//   perfrec synth|dynamics|pareto|verify|plot --config <path>
//           [--out <dir>] [--seed <u64>] [--jobs <n>]
//
// Exit codes: 0 success, 1 verification failure, 2 config error.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "perfrec/experiments.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::size_t jobs = 1;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "path to a JSON experiment config")
      ->required();
  cmd->add_option("--out", o.out_dir, "output directory (overrides config out_dir)");
  cmd->add_option("--seed", o.seed, "base seed (overrides config seed)")
      ->each([&o](const std::string&) { o.seed_set = true; });
  cmd->add_option("--jobs", o.jobs, "worker threads for independent cells");
}

perfrec::ExperimentConfig load(const CommonOpts& o) {
  perfrec::ExperimentConfig cfg = perfrec::load_config(o.config_path);
  if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
  if (o.seed_set) cfg.seed = o.seed;
  return cfg;
}

std::size_t effective_jobs(const CommonOpts& o) {
  if (const char* env = std::getenv("PERFREC_JOBS")) {
    char* end = nullptr;
    unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<std::size_t>(v);
    throw std::runtime_error(std::string("PERFREC_JOBS must be a positive integer, got '") +
                             env + "'");
  }
  return o.jobs >= 1 ? o.jobs : 1;
}

std::string out_path(const perfrec::ExperimentConfig& cfg, const std::string& file) {
  std::filesystem::create_directories(cfg.out_dir);
  return (std::filesystem::path(cfg.out_dir) / file).string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"performative-recommendation simulator"};
  app.require_subcommand(1);

  CommonOpts synth_o, dyn_o, pareto_o, verify_o, plot_o;
  CLI::App* synth = app.add_subcommand("synth", "single-shot synthetic sweeps");
  CLI::App* dynamics = app.add_subcommand("dynamics", "retraining dynamics over T rounds");
  CLI::App* pareto = app.add_subcommand("pareto", "accuracy-diversity sweep over lambda");
  CLI::App* verify = app.add_subcommand("verify", "run the verification suite");
  CLI::App* plot = app.add_subcommand("plot", "render a result CSV to SVG");
  add_common(synth, synth_o);
  add_common(dynamics, dyn_o);
  add_common(pareto, pareto_o);
  add_common(verify, verify_o);
  add_common(plot, plot_o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // bad invocation is a config error
  }

  try {
    if (synth->parsed()) {
      auto cfg = load(synth_o);
      auto csv = perfrec::run_synth(cfg, effective_jobs(synth_o));
      std::string path = out_path(cfg, cfg.experiment + ".csv");
      csv.write(path);
      std::cout << "wrote " << path << " (" << csv.row_count() << " rows)\n";
    } else if (dynamics->parsed()) {
      auto cfg = load(dyn_o);
      auto csv = perfrec::run_dynamics_cmd(cfg, effective_jobs(dyn_o));
      std::string path = out_path(cfg, "dynamics.csv");
      csv.write(path);
      std::cout << "wrote " << path << " (" << csv.row_count() << " rows)\n";
    } else if (pareto->parsed()) {
      auto cfg = load(pareto_o);
      auto csv = perfrec::run_pareto_cmd(cfg, effective_jobs(pareto_o));
      std::string path = out_path(cfg, "pareto.csv");
      csv.write(path);
      std::cout << "wrote " << path << " (" << csv.row_count() << " rows)\n";
    } else if (verify->parsed()) {
      auto cfg = load(verify_o);
      auto results = perfrec::run_verify(cfg.verify_level == "full");
      perfrec::CsvWriter csv("verify", {"check", "pass", "detail"});
      bool all = true;
      for (const auto& r : results) {
        all = all && r.pass;
        std::cout << (r.pass ? "PASS" : "FAIL") << "  " << r.name << "  (" << r.detail
                  << ")\n";
        csv.add_row({r.name, r.pass ? "1" : "0", r.detail});
      }
      csv.write(out_path(cfg, "verify.csv"));
      if (!all) {
        std::cout << "verification FAILED\n";
        return 1;
      }
      std::cout << "verification passed\n";
    } else if (plot->parsed()) {
      auto cfg = load(plot_o);
      if (cfg.plot_csv.empty())
        throw std::runtime_error("config: field 'plot.csv' is required for plot");
      auto table = perfrec::read_csv(cfg.plot_csv);
      std::string svg = perfrec::plot_csv(table);
      std::string path = out_path(cfg, table.schema + ".svg");
      std::ofstream f(path, std::ios::binary);
      f << svg;
      std::cout << "wrote " << path << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
