#pragma once
#include <atomic>
#include <map>
#include <mutex>
#include <thread>

#include "perfrec/config.hpp"
#include "perfrec/csv.hpp"
#include "perfrec/svg.hpp"
#include "perfrec/verify.hpp"

namespace perfrec {

// Runs fn(0..count) across `jobs` worker threads. Each task owns its output
// slot, so results are deterministic regardless of scheduling.
inline void parallel_for(std::size_t count, std::size_t jobs,
                         const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mu;
  for (std::size_t w = 0; w < std::min(jobs, count); ++w)
    pool.emplace_back([&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

namespace expdetail {

inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  return base * 1000003ULL + a * 7919ULL + b + 1;
}

inline DynamicsConfig dyn_config(const ExperimentConfig& c) {
  DynamicsConfig d;
  d.train = c.train;
  d.tune_tolerance = c.tune_tolerance;
  d.semi_synthetic = c.semi_synthetic;
  return d;
}

}  // namespace expdetail

// Overlap sweep: post-response diversity as user/item overlap is broken up
// by degree-preserving swaps.
inline CsvWriter run_overlap(const ExperimentConfig& c, std::size_t jobs) {
  struct Cell {
    std::size_t swaps, rep;
    double lambda;
    std::vector<RoundRecord> recs;
  };
  std::vector<Cell> cells;
  for (std::size_t N : c.swap_grid)
    for (double lam : c.lambda_grid)
      for (std::size_t rep = 0; rep < c.repetitions; ++rep)
        cells.push_back({N, rep, lam, {}});
  parallel_for(cells.size(), jobs, [&](std::size_t i) {
    Cell& cell = cells[i];
    std::uint64_t s = expdetail::mix_seed(c.seed, cell.rep);
    World w = sample_world(c.m, c.n, c.d, c.sigma_x, c.sigma_u_star, s);
    RecGraph g = gen_block_shuffled(c.m, c.n, c.K, c.blocks, cell.swaps, s + 17);
    Method m;
    m.kind = MethodKind::strategic;
    m.lambda = cell.lambda;
    cell.recs = run_trajectory(w, g, m, c.T, expdetail::dyn_config(c), s);
  });
  CsvWriter out("overlap", {"N", "lambda", "rep", "round", "ndcg", "div_post"});
  for (const Cell& cell : cells)
    for (const RoundRecord& r : cell.recs)
      out.add_row({std::to_string(cell.swaps), fmt_double(cell.lambda),
                   std::to_string(cell.rep), std::to_string(r.round),
                   fmt_double(r.ndcg_test), fmt_double(r.div_post)});
  return out;
}

// Dispersion sweep: post-response diversity vs user dispersion.
inline CsvWriter run_dispersion(const ExperimentConfig& c, std::size_t jobs) {
  struct Cell {
    double sigma, lambda;
    std::size_t rep;
    std::vector<RoundRecord> recs;
  };
  std::vector<Cell> cells;
  for (double sigma : c.sigma_u_grid)
    for (double lam : c.lambda_grid)
      for (std::size_t rep = 0; rep < c.repetitions; ++rep)
        cells.push_back({sigma, lam, rep, {}});
  parallel_for(cells.size(), jobs, [&](std::size_t i) {
    Cell& cell = cells[i];
    std::uint64_t s = expdetail::mix_seed(c.seed, cell.rep);
    World w = sample_world(c.m, c.n, c.d, c.sigma_x, cell.sigma, s);
    RecGraph g = make_graph(c, s + 17);
    Method m;
    m.kind = MethodKind::strategic;
    m.lambda = cell.lambda;
    cell.recs = run_trajectory(w, g, m, c.T, expdetail::dyn_config(c), s);
  });
  CsvWriter out("dispersion", {"sigma_u", "lambda", "rep", "round", "ndcg", "div_post"});
  for (const Cell& cell : cells)
    for (const RoundRecord& r : cell.recs)
      out.add_row({fmt_double(cell.sigma), fmt_double(cell.lambda), std::to_string(cell.rep),
                   std::to_string(r.round), fmt_double(r.ndcg_test), fmt_double(r.div_post)});
  return out;
}

// Cost-time sweep: diversity across rounds for different cost scales.
inline CsvWriter run_cost_time(const ExperimentConfig& c, std::size_t jobs) {
  struct Cell {
    double alpha;
    std::size_t rep;
    std::vector<RoundRecord> recs;
  };
  std::vector<Cell> cells;
  for (double alpha : c.alpha_grid)
    for (std::size_t rep = 0; rep < c.repetitions; ++rep) cells.push_back({alpha, rep, {}});
  parallel_for(cells.size(), jobs, [&](std::size_t i) {
    Cell& cell = cells[i];
    std::uint64_t s = expdetail::mix_seed(c.seed, cell.rep);
    World w = sample_world(c.m, c.n, c.d, c.sigma_x, c.sigma_u_star, s);
    RecGraph g = make_graph(c, s + 17);
    DynamicsConfig dc = expdetail::dyn_config(c);
    dc.train.alpha = cell.alpha;
    Method m;
    m.kind = MethodKind::strategic;
    m.lambda = c.train.lambda;
    cell.recs = run_trajectory(w, g, m, c.T, dc, s);
  });
  CsvWriter out("costtime", {"alpha", "lambda", "rep", "round", "ndcg", "div_post"});
  for (const Cell& cell : cells)
    for (const RoundRecord& r : cell.recs)
      out.add_row({fmt_double(cell.alpha), fmt_double(c.train.lambda),
                   std::to_string(cell.rep), std::to_string(r.round),
                   fmt_double(r.ndcg_test), fmt_double(r.div_post)});
  return out;
}

// Retraining-dynamics protocol: methods x alpha grid x NDCG targets x seeds.
inline CsvWriter run_dynamics_cmd(const ExperimentConfig& c, std::size_t jobs) {
  struct Cell {
    std::string method;
    double alpha, target;
    std::size_t rep;
    std::vector<RoundRecord> recs;
  };
  std::vector<Cell> cells;
  for (const std::string& name : c.methods)
    for (double alpha : c.alpha_grid)
      for (double target : c.ndcg_targets)
        for (std::size_t rep = 0; rep < c.repetitions; ++rep)
          cells.push_back({name, alpha, target, rep, {}});
  parallel_for(cells.size(), jobs, [&](std::size_t i) {
    Cell& cell = cells[i];
    std::uint64_t s = expdetail::mix_seed(c.seed, cell.rep);
    World w = sample_world(c.m, c.n, c.d, c.sigma_x, c.sigma_u_star, s);
    RecGraph g = make_graph(c, s + 17);
    DynamicsConfig dc = expdetail::dyn_config(c);
    dc.train.alpha = cell.alpha;
    Method m = make_method(c, cell.method);
    m.ndcg_target = cell.target;
    cell.recs = run_trajectory(w, g, m, c.T, dc, s);
  });
  CsvWriter out("dynamics", {"method", "alpha", "target", "lambda", "seed", "round",
                             "ndcg_test", "div_pre", "div_post"});
  for (const Cell& cell : cells)
    for (const RoundRecord& r : cell.recs)
      out.add_row({r.method, fmt_double(cell.alpha), fmt_double(cell.target),
                   fmt_double(r.lambda_used), std::to_string(r.seed),
                   std::to_string(r.round), fmt_double(r.ndcg_test), fmt_double(r.div_pre),
                   fmt_double(r.div_post)});
  return out;
}

// One strategic trajectory per lambda in the grid, per repetition seed.
inline CsvWriter run_pareto_cmd(const ExperimentConfig& c, std::size_t jobs) {
  struct Cell {
    double lambda;
    std::size_t rep;
    std::vector<RoundRecord> recs;
  };
  std::vector<Cell> cells;
  for (double lam : c.lambda_grid)
    for (std::size_t rep = 0; rep < c.repetitions; ++rep) cells.push_back({lam, rep, {}});
  parallel_for(cells.size(), jobs, [&](std::size_t i) {
    Cell& cell = cells[i];
    std::uint64_t s = expdetail::mix_seed(c.seed, cell.rep);
    World w = sample_world(c.m, c.n, c.d, c.sigma_x, c.sigma_u_star, s);
    RecGraph g = make_graph(c, s + 17);
    Method m;
    m.kind = MethodKind::strategic;
    m.lambda = cell.lambda;
    cell.recs = run_trajectory(w, g, m, c.T, expdetail::dyn_config(c), s);
  });
  CsvWriter out("pareto", {"lambda", "seed", "round", "ndcg", "div"});
  for (const Cell& cell : cells)
    for (const RoundRecord& r : cell.recs)
      out.add_row({fmt_double(cell.lambda), std::to_string(r.seed), std::to_string(r.round),
                   fmt_double(r.ndcg_test), fmt_double(r.div_post)});
  return out;
}

inline CsvWriter run_synth(const ExperimentConfig& c, std::size_t jobs) {
  if (c.experiment == "overlap") return run_overlap(c, jobs);
  if (c.experiment == "dispersion") return run_dispersion(c, jobs);
  if (c.experiment == "cost-time") return run_cost_time(c, jobs);
  throw std::runtime_error("config: field 'experiment' must be overlap|dispersion|cost-time for synth");
}

// ---- plotting ----------------------------------------------------------

namespace expdetail {

// Mean of `value_col` grouped by (series_col, x_col).
inline std::vector<Series> grouped_means(const CsvTable& t, const std::string& series_col,
                                         const std::string& x_col,
                                         const std::string& value_col,
                                         const std::string& series_prefix) {
  std::size_t si = t.column_index(series_col), xi = t.column_index(x_col),
              vi = t.column_index(value_col);
  std::map<std::string, std::map<double, std::pair<double, std::size_t>>> acc;
  std::vector<std::string> order;  // first-appearance series order
  for (const auto& row : t.rows) {
    if (!acc.count(row[si])) order.push_back(row[si]);
    auto& slot = acc[row[si]][cell_double(row[xi])];
    slot.first += cell_double(row[vi]);
    slot.second += 1;
  }
  std::sort(order.begin(), order.end());
  order.erase(std::unique(order.begin(), order.end()), order.end());
  std::vector<Series> out;
  for (const auto& key : order) {
    Series s;
    s.name = series_prefix + key;
    for (const auto& [x, sum_n] : acc[key])
      s.points.emplace_back(x, sum_n.first / static_cast<double>(sum_n.second));
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace expdetail

// Renders a known-schema CSV to an SVG figure.
inline std::string plot_csv(const CsvTable& t) {
  if (t.rows.empty()) throw std::runtime_error("plot: CSV has no data rows");
  using expdetail::grouped_means;
  if (t.schema == "dynamics") {
    SvgPanel top{grouped_means(t, "method", "round", "ndcg_test", ""),
                 "Test NDCG per round", "round", "NDCG", false};
    SvgPanel bottom{grouped_means(t, "method", "round", "div_post", ""),
                    "Post-response diversity per round", "round", "diversity", false};
    return render_svg({top, bottom});
  }
  if (t.schema == "overlap")
    return render_svg({{grouped_means(t, "lambda", "N", "div_post", "lambda="),
                        "Diversity vs overlap shuffles", "swaps", "diversity", false}});
  if (t.schema == "dispersion")
    return render_svg({{grouped_means(t, "lambda", "sigma_u", "div_post", "lambda="),
                        "Diversity vs user dispersion", "sigma_u", "diversity", false}});
  if (t.schema == "costtime")
    return render_svg({{grouped_means(t, "alpha", "round", "div_post", "alpha="),
                        "Diversity across rounds by cost scale", "round", "diversity",
                        false}});
  if (t.schema == "pareto") {
    std::size_t li = t.column_index("lambda"), ni = t.column_index("ndcg"),
                di = t.column_index("div");
    std::map<std::string, Series> by_lambda;
    for (const auto& row : t.rows) {
      Series& s = by_lambda[row[li]];
      s.name = "lambda=" + row[li];
      s.points.emplace_back(cell_double(row[di]), cell_double(row[ni]));
    }
    std::vector<Series> series;
    for (auto& [_, s] : by_lambda) series.push_back(std::move(s));
    return render_svg({{series, "Accuracy-diversity Pareto paths", "diversity", "NDCG",
                        true}});
  }
  throw std::runtime_error(
      "plot: unknown schema '" + t.schema +
      "'; expected one of dynamics(method,alpha,target,lambda,seed,round,ndcg_test,div_pre,"
      "div_post), overlap(N,lambda,rep,round,ndcg,div_post), dispersion(sigma_u,lambda,rep,"
      "round,ndcg,div_post), costtime(alpha,lambda,rep,round,ndcg,div_post), "
      "pareto(lambda,seed,round,ndcg,div)");
}

}  // namespace perfrec
