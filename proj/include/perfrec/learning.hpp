#pragma once
#include <optional>
#include <random>
#include <vector>

#include "perfrec/groundtruth.hpp"
#include "perfrec/ranking.hpp"
#include "perfrec/strategic.hpp"

namespace perfrec {

struct TrainConfig {
  double lambda = 0.0;
  double alpha = 0.0;
  std::size_t k = 10;
  Temperatures temps;
  double learning_rate = 0.1;
  std::size_t max_epochs = 200;
  std::size_t patience = 25;
  std::size_t restarts = 1;  // best-of-R multistart (1 = single run)
  std::uint64_t seed = 0;
};

// W holds the unconstrained parameters; U = normalize(W) is the published
// model (normalization happens inside the forward pass, so gradients are
// exact on the sphere).
struct ModelState {
  Matrix W;
  Matrix U;
};

inline ModelState init_model(std::size_t m, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix W(m, d);
  for (std::size_t i = 0; i < m; ++i) {
    double nrm = 0;
    do {
      for (std::size_t j = 0; j < d; ++j) W.at(i, j) = gauss(rng);
      nrm = row_norm(W, i);
    } while (nrm < 1e-12);
    for (std::size_t j = 0; j < d; ++j) W.at(i, j) /= nrm;
  }
  return {W, W};
}

// A user's visible slice of the graph: candidate items plus their labels.
struct UserView {
  std::vector<std::size_t> items;
  std::vector<double> labels;
};
using GraphView = std::vector<UserView>;

inline GraphView full_view(const RecGraph& g, const EdgeLabels& labels) {
  GraphView v(g.m);
  for (std::size_t i = 0; i < g.m; ++i) {
    v[i].items = g.lists[i];
    v[i].labels = labels[i];
  }
  return v;
}

enum class ObjectiveKind { nonstrategic, strategic };

struct ObjectiveNodes {
  NodeId objective;  // ndcg_mean + lambda * div_mean
  NodeId ndcg_mean;
  NodeId div_mean;
};

// Builds the joint training objective on the tape: mean over users of
// soft NDCG on current items plus lambda times soft diversity, where the
// diversity term is evaluated either on current items (nonstrategic) or on
// the anticipated best responses (strategic, gradients flow through Delta).
inline ObjectiveNodes build_objective(Tape& t, NodeId W, const Matrix& X,
                                      const GraphView& view, const RecGraph& g,
                                      const TrainConfig& cfg, ObjectiveKind kind) {
  NodeId U = t.row_l2_normalize(W);
  const std::size_t m = t.value(W).rows;
  bool want_div = cfg.lambda != 0.0;
  NodeId Xf = 0;
  if (want_div && kind == ObjectiveKind::strategic)
    Xf = best_response_all_node(t, X, U, g, cfg.alpha, /*skip_uncovered=*/true);

  std::optional<NodeId> ndcg_sum, div_sum;
  std::size_t active = 0;
  for (std::size_t i = 0; i < view.size(); ++i) {
    const UserView& uv = view[i];
    if (uv.items.empty()) continue;
    if (uv.items.size() < cfg.k)
      throw std::invalid_argument("objective: user " + std::to_string(i) + " has only " +
                                  std::to_string(uv.items.size()) + " items, k=" +
                                  std::to_string(cfg.k));
    ++active;
    std::size_t K = uv.items.size();

    Matrix onehot(1, m);
    onehot.at(0, i) = 1.0;
    NodeId ui_col = t.transpose(t.matmul(t.leaf(std::move(onehot)), U));  // d x 1

    Matrix Xi(K, X.cols);
    for (std::size_t p = 0; p < K; ++p)
      for (std::size_t c = 0; c < X.cols; ++c) Xi.at(p, c) = X.at(uv.items[p], c);
    NodeId xi = t.leaf(Xi);
    NodeId scores = t.matmul(xi, ui_col);  // K x 1, current items

    NodeId ndcg_i = soft_ndcg(t, uv.labels, scores, cfg.k, cfg.temps);
    ndcg_sum = ndcg_sum ? t.add(*ndcg_sum, ndcg_i) : ndcg_i;

    if (!want_div) continue;
    NodeId div_items, div_scores;
    if (kind == ObjectiveKind::strategic) {
      Matrix sel(K, X.rows);
      for (std::size_t p = 0; p < K; ++p) sel.at(p, uv.items[p]) = 1.0;
      div_items = t.matmul(t.leaf(std::move(sel)), Xf);
      div_scores = t.matmul(div_items, ui_col);
    } else {
      div_items = xi;
      div_scores = scores;
    }
    NodeId rhat = soft_rank(t, soft_permutation(t, div_scores, cfg.temps.tau_perm));
    NodeId div_i = soft_div(t, div_items, rhat, cfg.k, cfg.temps.tau_topk);
    div_sum = div_sum ? t.add(*div_sum, div_i) : div_i;
  }
  if (active == 0) throw std::invalid_argument("objective: no user has any items");

  double inv = 1.0 / static_cast<double>(active);
  NodeId ndcg_mean = t.scalar_mul(inv, *ndcg_sum);
  NodeId div_mean = div_sum ? t.scalar_mul(inv, *div_sum) : t.leaf(Matrix(1, 1, {0.0}));
  NodeId obj = t.add(ndcg_mean, t.scalar_mul(cfg.lambda, div_mean));
  return {obj, ndcg_mean, div_mean};
}

inline std::vector<double> scores_for_user(const Matrix& U, std::size_t i, const Matrix& X,
                                           const std::vector<std::size_t>& items) {
  std::vector<double> s(items.size());
  for (std::size_t p = 0; p < items.size(); ++p) {
    double dp = 0;
    for (std::size_t c = 0; c < X.cols; ++c) dp += U.at(i, c) * X.at(items[p], c);
    s[p] = dp;
  }
  return s;
}

// Mean hard NDCG@k of the model over a view.
inline double eval_ndcg(const Matrix& U, const Matrix& X, const GraphView& view,
                        std::size_t k) {
  double sum = 0;
  std::size_t cnt = 0;
  for (std::size_t i = 0; i < view.size(); ++i) {
    if (view[i].items.empty()) continue;
    auto s = scores_for_user(U, i, X, view[i].items);
    sum += ndcg_at_k(view[i].labels, hard_rank(s), k).value;
    ++cnt;
  }
  return cnt ? sum / static_cast<double>(cnt) : 0.0;
}

// Mean hard div@k of the model's top-k over a view.
inline double eval_div(const Matrix& U, const Matrix& X, const GraphView& view,
                       std::size_t k) {
  double sum = 0;
  std::size_t cnt = 0;
  for (std::size_t i = 0; i < view.size(); ++i) {
    if (view[i].items.empty()) continue;
    auto s = scores_for_user(U, i, X, view[i].items);
    Matrix Xi(view[i].items.size(), X.cols);
    for (std::size_t p = 0; p < view[i].items.size(); ++p)
      for (std::size_t c = 0; c < X.cols; ++c) Xi.at(p, c) = X.at(view[i].items[p], c);
    sum += div_at_k(Xi, hard_rank(s), k);
    ++cnt;
  }
  return cnt ? sum / static_cast<double>(cnt) : 0.0;
}

struct TrainResult {
  ModelState state;
  std::vector<double> curve;  // training objective per epoch
  double best_val_ndcg = 0.0;
  std::size_t epochs_run = 0;
};

// Adam gradient ascent on W with early stopping on validation NDCG (or on
// the training objective when no separate validation view is given).
inline TrainResult train(const ModelState& init, const Matrix& X, const GraphView& train_view,
                         const RecGraph& g, const TrainConfig& cfg, ObjectiveKind kind,
                         const GraphView* val_view = nullptr) {
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  ModelState cur = init;
  Matrix mom(cur.W.rows, cur.W.cols), vel(cur.W.rows, cur.W.cols);
  TrainResult res;
  res.state = cur;
  double best_metric = -std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    Tape t;
    NodeId w = t.leaf(cur.W);
    ObjectiveNodes obj = build_objective(t, w, X, train_view, g, cfg, kind);
    double val = t.value(obj.objective).at(0, 0);
    if (!std::isfinite(val))
      throw std::runtime_error("train: non-finite objective at epoch " +
                               std::to_string(epoch));
    res.curve.push_back(val);
    cur.U = normalize_rows(cur.W);

    double metric = val_view ? eval_ndcg(cur.U, X, *val_view, cfg.k) : val;
    if (metric > best_metric) {
      best_metric = metric;
      res.state = cur;
      res.best_val_ndcg = val_view ? metric : eval_ndcg(cur.U, X, train_view, cfg.k);
      since_best = 0;
    } else if (++since_best > cfg.patience) {
      break;
    }

    t.backward(obj.objective);
    const Matrix& grad = t.grad(w);
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(epoch + 1));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(epoch + 1));
    for (std::size_t idx = 0; idx < cur.W.size(); ++idx) {
      mom.data[idx] = beta1 * mom.data[idx] + (1.0 - beta1) * grad.data[idx];
      vel.data[idx] = beta2 * vel.data[idx] + (1.0 - beta2) * grad.data[idx] * grad.data[idx];
      double mhat = mom.data[idx] / bc1;
      double vhat = vel.data[idx] / bc2;
      cur.W.data[idx] += cfg.learning_rate * mhat / (std::sqrt(vhat) + eps);  // ascent
    }
    ++res.epochs_run;
  }
  res.state.U = normalize_rows(res.state.W);
  return res;
}

// Hard (non-relaxed) counterpart of the training objective on a view:
// NDCG of current items plus lambda times diversity of the items the
// objective actually scores (anticipated responses when strategic).
inline double hard_objective(const ModelState& st, const Matrix& X, const GraphView& view,
                             const RecGraph& g, const TrainConfig& cfg, ObjectiveKind kind) {
  double obj = eval_ndcg(st.U, X, view, cfg.k);
  if (cfg.lambda != 0.0) {
    if (kind == ObjectiveKind::strategic) {
      Matrix Xf = best_response_all(X, st.U, g, cfg.alpha, /*skip_uncovered=*/true);
      obj += cfg.lambda * eval_div(st.U, Xf, view, cfg.k);
    } else {
      obj += cfg.lambda * eval_div(st.U, X, view, cfg.k);
    }
  }
  return obj;
}

// The soft objective is multimodal (notably when the diversity term is
// active), so a single ascent run can stall far below the reachable optimum.
// Runs train() from the given state plus restarts-1 fresh inits and keeps the
// run with the best hard objective on the early-stop view.
inline TrainResult train_multistart(const ModelState& init, const Matrix& X,
                                    const GraphView& train_view, const RecGraph& g,
                                    const TrainConfig& cfg, ObjectiveKind kind,
                                    const GraphView* val_view = nullptr) {
  TrainResult best = train(init, X, train_view, g, cfg, kind, val_view);
  if (cfg.restarts <= 1) return best;
  const GraphView& pick_view = val_view ? *val_view : train_view;
  double best_obj = hard_objective(best.state, X, pick_view, g, cfg, kind);
  for (std::size_t r = 1; r < cfg.restarts; ++r) {
    ModelState fresh = init_model(init.W.rows, init.W.cols, cfg.seed * 1000003ULL + r);
    TrainResult cand = train(fresh, X, train_view, g, cfg, kind, val_view);
    double obj = hard_objective(cand.state, X, pick_view, g, cfg, kind);
    if (obj > best_obj) {
      best_obj = obj;
      best = std::move(cand);
    }
  }
  return best;
}

struct TrainerContext {
  const Matrix* X = nullptr;
  const RecGraph* g = nullptr;
  GraphView train_view;
  GraphView val_view;  // may equal train_view in synthetic mode
  // With a real held-out split, training early-stops on validation NDCG;
  // otherwise it stops on the training objective and val_view is used only
  // to measure the achieved NDCG for the bisection.
  bool val_early_stop = true;
  TrainConfig config;
  ObjectiveKind kind = ObjectiveKind::strategic;
  ModelState init;
};

struct TuneResult {
  double lambda = 0.0;
  double achieved_ndcg = 0.0;
  ModelState state;
  std::size_t trainings = 0;
};

// Bracketed bisection on log-lambda: selects the largest lambda whose trained
// validation NDCG stays within tolerance of the target. At most max_trainings
// training runs per call.
inline TuneResult tune_lambda(double target_ndcg, double tolerance, TrainerContext& ctx,
                              std::size_t max_trainings = 12) {
  std::size_t used = 0;
  auto run = [&](double lam) {
    TrainConfig c = ctx.config;
    c.lambda = lam;
    ++used;
    TrainResult tr = train(ctx.init, *ctx.X, ctx.train_view, *ctx.g, c, ctx.kind,
                           ctx.val_early_stop ? &ctx.val_view : nullptr);
    return std::pair<double, ModelState>(eval_ndcg(tr.state.U, *ctx.X, ctx.val_view, c.k),
                                         tr.state);
  };
  auto pass = [&](double ndcg) { return ndcg >= target_ndcg - tolerance; };

  double hi = 1e3;
  auto [hi_ndcg, hi_state] = run(hi);
  if (pass(hi_ndcg)) return {hi, hi_ndcg, hi_state, used};

  double lo = 1e-3;
  auto [lo_ndcg, lo_state] = run(lo);
  while (!pass(lo_ndcg) && lo > 1e-6 && used < max_trainings) {
    lo *= 0.1;
    std::tie(lo_ndcg, lo_state) = run(lo);
  }
  if (!pass(lo_ndcg)) {
    auto [z_ndcg, z_state] = run(0.0);
    if (!pass(z_ndcg) && used < max_trainings) {
      // a warm start from a diversity-tilted model can stall below the
      // target even at lambda=0; retry once from a fresh init and, if that
      // works, anchor the remaining probes on the recovered state
      ModelState saved = ctx.init;
      ctx.init = init_model(ctx.init.W.rows, ctx.init.W.cols,
                            ctx.config.seed * 1000003ULL + 777);
      auto [f_ndcg, f_state] = run(0.0);
      if (f_ndcg > z_ndcg) {
        z_ndcg = f_ndcg;
        z_state = f_state;
        ctx.init = z_state;
      } else {
        ctx.init = saved;
      }
    }
    if (!pass(z_ndcg))
      throw std::runtime_error("tune_lambda: target " + std::to_string(target_ndcg) +
                               " unreachable; best NDCG at lambda=0 is " +
                               std::to_string(z_ndcg));
    lo = 0.0;
    lo_ndcg = z_ndcg;
    lo_state = z_state;
  }
  while (used < max_trainings && lo > 0.0 && hi / lo > 1.3) {
    double mid = std::sqrt(lo * hi);
    auto [m_ndcg, m_state] = run(mid);
    if (pass(m_ndcg)) {
      lo = mid;
      lo_ndcg = m_ndcg;
      lo_state = m_state;
    } else {
      hi = mid;
    }
  }
  return {lo, lo_ndcg, lo_state, used};
}

}  // namespace perfrec
