#pragma once
#include <string>
#include <vector>

#include "perfrec/learning.hpp"

namespace perfrec {

enum class MethodKind { baseline, nonstrategic, strategic, mmr, hybrid, random_rank };
enum class TargetKind { fixed_lambda, ndcg_target, lambda_base };

struct Method {
  MethodKind kind = MethodKind::baseline;
  std::size_t switch_round = 5;  // hybrid: strategic through this round, then lambda=0
  double theta_mmr = 0.5;
  TargetKind target = TargetKind::fixed_lambda;
  double lambda = 0.0;
  double ndcg_target = 0.9;

  std::string tag() const {
    switch (kind) {
      case MethodKind::baseline: return "baseline";
      case MethodKind::nonstrategic: return "nonstrategic";
      case MethodKind::strategic: return "strategic";
      case MethodKind::mmr: return "mmr";
      case MethodKind::hybrid: return "hybrid@" + std::to_string(switch_round);
      case MethodKind::random_rank: return "random";
    }
    return "?";
  }
};

struct RoundRecord {
  std::size_t round = 0;
  std::string method;
  double lambda_used = 0.0;
  double ndcg_test = 0.0;
  double div_pre = 0.0;
  double div_post = 0.0;
  double alpha = 0.0;
  std::uint64_t seed = 0;
};

struct DynamicsConfig {
  TrainConfig train;
  double tune_tolerance = 0.01;
  bool semi_synthetic = false;  // per-round item subsampling and 2:1 train/val split
  double visible_frac = 0.75;
  double train_frac = 2.0 / 3.0;  // of the visible items
};

struct RoundState {
  ModelState model;
  Matrix X;
  EdgeLabels y;
};

namespace detail {

// Per-round train/validation/test views. Synthetic mode trains on everything;
// semi-synthetic subsamples visible items per user, reseeded from
// (trajectory seed, round) for reproducibility.
struct RoundViews {
  GraphView train, val, test;
};

inline RoundViews make_views(const RecGraph& g, const EdgeLabels& y,
                             const DynamicsConfig& cfg, std::uint64_t traj_seed,
                             std::size_t round) {
  RoundViews v;
  v.test = full_view(g, y);
  if (!cfg.semi_synthetic) {
    v.train = v.test;
    v.val = v.test;
    return v;
  }
  std::mt19937_64 rng(traj_seed * 1000003ULL + round);
  v.train.resize(g.m);
  v.val.resize(g.m);
  for (std::size_t i = 0; i < g.m; ++i) {
    std::size_t K = g.lists[i].size();
    std::size_t visible = std::max(cfg.train.k, static_cast<std::size_t>(
                                                    cfg.visible_frac * static_cast<double>(K)));
    visible = std::min(visible, K);
    std::size_t n_train =
        std::max(cfg.train.k, static_cast<std::size_t>(cfg.train_frac *
                                                       static_cast<double>(visible)));
    n_train = std::min(n_train, visible);
    auto pick = sample_subset(K, visible, rng);
    for (std::size_t p = 0; p < visible; ++p) {
      UserView& dst = (p < n_train) ? v.train[i] : v.val[i];
      dst.items.push_back(g.lists[i][pick[p]]);
      dst.labels.push_back(y[i][pick[p]]);
    }
    // validation lists can fall below k; pad from train so NDCG@k is defined
    if (v.val[i].items.size() < cfg.train.k) {
      v.val[i] = v.train[i];
    }
  }
  return v;
}

inline double mean_div_post(const Matrix& U, const Matrix& Xf, const GraphView& view,
                            std::size_t k) {
  return eval_div(U, Xf, view, k);
}

}  // namespace detail

// One retraining round: (1) train or tune per the method, (2) evaluate on the
// current items, (3) apply the best response, (4) relabel.
inline RoundRecord run_round(RoundState& rs, const World& world, const RecGraph& g,
                             const Method& method, const DynamicsConfig& cfg,
                             std::uint64_t traj_seed, std::size_t round) {
  detail::RoundViews views = detail::make_views(g, rs.y, cfg, traj_seed, round);

  bool strategic_now = method.kind == MethodKind::strategic ||
                       (method.kind == MethodKind::hybrid && round <= method.switch_round);
  ObjectiveKind kind =
      strategic_now ? ObjectiveKind::strategic : ObjectiveKind::nonstrategic;
  bool tunable = method.kind == MethodKind::nonstrategic ||
                 method.kind == MethodKind::strategic ||
                 (method.kind == MethodKind::hybrid && strategic_now);

  double lambda_used = 0.0;
  if (tunable && method.target == TargetKind::fixed_lambda) lambda_used = method.lambda;

  // A held-out split exists only in semi-synthetic mode; synthetic mode
  // trains on everything and early-stops on the training objective.
  const GraphView* val_for_stop = cfg.semi_synthetic ? &views.val : nullptr;

  TrainConfig tc = cfg.train;
  tc.lambda = lambda_used;
  tc.seed = traj_seed * 9176ULL + round;  // restart inits, per trajectory and round
  if (tunable && method.target != TargetKind::fixed_lambda) {
    double target = method.ndcg_target;
    if (method.target == TargetKind::lambda_base) {
      TrainConfig base_cfg = cfg.train;
      base_cfg.lambda = 0.0;
      TrainResult base = train(rs.model, rs.X, views.train, g, base_cfg,
                               ObjectiveKind::nonstrategic, val_for_stop);
      target = eval_ndcg(base.state.U, rs.X, views.val, tc.k);
    }
    TrainerContext ctx;
    ctx.X = &rs.X;
    ctx.g = &g;
    ctx.train_view = views.train;
    ctx.val_view = views.val;
    ctx.val_early_stop = cfg.semi_synthetic;
    ctx.config = tc;
    ctx.kind = kind;
    ctx.init = rs.model;
    TuneResult tuned = tune_lambda(target, cfg.tune_tolerance, ctx);
    rs.model = tuned.state;
    lambda_used = tuned.lambda;
  } else {
    TrainResult tr = train_multistart(rs.model, rs.X, views.train, g, tc, kind, val_for_stop);
    rs.model = tr.state;
  }

  RoundRecord rec;
  rec.round = round;
  rec.method = method.tag();
  rec.lambda_used = lambda_used;
  rec.alpha = cfg.train.alpha;
  rec.seed = traj_seed;

  // evaluation on current items; mmr and random change only the presented
  // ranking, never the strategic update
  std::size_t k = cfg.train.k;
  if (method.kind == MethodKind::mmr) {
    double nd = 0, dv = 0;
    for (std::size_t i = 0; i < g.m; ++i) {
      const UserView& uv = views.test[i];
      auto s = scores_for_user(rs.model.U, i, rs.X, uv.items);
      Matrix Xi(uv.items.size(), rs.X.cols);
      for (std::size_t p = 0; p < uv.items.size(); ++p)
        for (std::size_t c = 0; c < rs.X.cols; ++c) Xi.at(p, c) = rs.X.at(uv.items[p], c);
      Ranking r = mmr_rerank(s, Xi, k, method.theta_mmr);
      nd += ndcg_at_k(uv.labels, r, k).value;
      dv += div_at_k(Xi, r, k);
    }
    rec.ndcg_test = nd / static_cast<double>(g.m);
    rec.div_pre = dv / static_cast<double>(g.m);
  } else if (method.kind == MethodKind::random_rank) {
    std::mt19937_64 rng(traj_seed * 7919ULL + round);
    double nd = 0, dv = 0;
    for (std::size_t i = 0; i < g.m; ++i) {
      const UserView& uv = views.test[i];
      std::vector<std::size_t> perm(uv.items.size());
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      Ranking r;
      r.order = perm;
      r.rank_of.resize(perm.size());
      for (std::size_t l = 0; l < perm.size(); ++l) r.rank_of[perm[l]] = l + 1;
      Matrix Xi(uv.items.size(), rs.X.cols);
      for (std::size_t p = 0; p < uv.items.size(); ++p)
        for (std::size_t c = 0; c < rs.X.cols; ++c) Xi.at(p, c) = rs.X.at(uv.items[p], c);
      nd += ndcg_at_k(uv.labels, r, k).value;
      dv += div_at_k(Xi, r, k);
    }
    rec.ndcg_test = nd / static_cast<double>(g.m);
    rec.div_pre = dv / static_cast<double>(g.m);
  } else {
    rec.ndcg_test = eval_ndcg(rs.model.U, rs.X, views.test, k);
    rec.div_pre = eval_div(rs.model.U, rs.X, views.test, k);
  }

  // strategic update and relabel
  Matrix Xf = best_response_all(rs.X, rs.model.U, g, cfg.train.alpha,
                                /*skip_uncovered=*/true);
  rec.div_post = detail::mean_div_post(rs.model.U, Xf, views.test, k);
  rs.X = std::move(Xf);
  rs.y = label_edges(rs.X, world, g);
  return rec;
}

// Threads state through run_round T times. Trajectories are path-dependent
// and must be compared as wholes.
inline std::vector<RoundRecord> run_trajectory(const World& world, const RecGraph& g,
                                               const Method& method, std::size_t T,
                                               const DynamicsConfig& cfg,
                                               std::uint64_t traj_seed) {
  if (T < 1) throw std::invalid_argument("run_trajectory: T must be >= 1");
  RoundState rs;
  rs.model = init_model(g.m, world.X0.cols, traj_seed);
  rs.X = world.X0;
  rs.y = label_edges(rs.X, world, g);
  std::vector<RoundRecord> out;
  out.reserve(T);
  for (std::size_t t = 1; t <= T; ++t)
    out.push_back(run_round(rs, world, g, method, cfg, traj_seed, t));
  return out;
}

struct ParetoRow {
  double lambda;
  std::size_t round;
  double ndcg;
  double div;
};

// One strategic trajectory per lambda in the grid.
inline std::vector<ParetoRow> pareto_sweep(const World& world, const RecGraph& g,
                                           const std::vector<double>& lambda_grid,
                                           std::size_t T, const DynamicsConfig& cfg,
                                           std::uint64_t seed) {
  if (lambda_grid.empty()) throw std::invalid_argument("pareto_sweep: empty grid");
  std::vector<ParetoRow> rows;
  for (double lam : lambda_grid) {
    Method m;
    m.kind = MethodKind::strategic;
    m.target = TargetKind::fixed_lambda;
    m.lambda = lam;
    auto recs = run_trajectory(world, g, m, T, cfg, seed);
    for (const auto& r : recs) rows.push_back({lam, r.round, r.ndcg_test, r.div_post});
  }
  return rows;
}

}  // namespace perfrec
