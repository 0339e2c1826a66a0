#pragma once
#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "perfrec/tape.hpp"

namespace perfrec {

// Hard ranking: order[l] is the (0-based) index of the l-th ranked item,
// rank_of[j] is the 1-based rank of item j.
struct Ranking {
  std::vector<std::size_t> order;
  std::vector<std::size_t> rank_of;
};

// Descending by score; ties broken by ascending item index.
inline Ranking hard_rank(const std::vector<double>& scores) {
  if (scores.empty()) throw std::invalid_argument("hard_rank: empty scores");
  for (double s : scores)
    if (!std::isfinite(s)) throw std::invalid_argument("hard_rank: non-finite score");
  Ranking r;
  r.order.resize(scores.size());
  std::iota(r.order.begin(), r.order.end(), 0);
  std::stable_sort(r.order.begin(), r.order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  r.rank_of.resize(scores.size());
  for (std::size_t l = 0; l < r.order.size(); ++l) r.rank_of[r.order[l]] = l + 1;
  return r;
}

inline double dcg_at_k(const std::vector<double>& y, const Ranking& r, std::size_t k) {
  if (k < 1 || k > y.size())
    throw std::invalid_argument("dcg_at_k: k=" + std::to_string(k) + " out of range [1," +
                                std::to_string(y.size()) + "]");
  double s = 0;
  for (std::size_t l = 1; l <= k; ++l)
    s += (std::exp2(y[r.order[l - 1]]) - 1.0) / std::log2(1.0 + static_cast<double>(l));
  return s;
}

struct NdcgResult {
  double value = 1.0;
  bool ideal_zero = false;  // all gains zero; every ranking ties, value pinned to 1
};

inline NdcgResult ndcg_at_k(const std::vector<double>& y, const Ranking& r, std::size_t k) {
  double ideal = dcg_at_k(y, hard_rank(y), k);
  if (ideal <= 0.0) return {1.0, true};
  return {dcg_at_k(y, r, k) / ideal, false};
}

// Intra-list diversity of the top-k: mean over ordered pairs of (1 - cos)/2.
inline double div_at_k(const Matrix& X, const Ranking& r, std::size_t k) {
  if (k < 2 || k > X.rows)
    throw std::invalid_argument("div_at_k: k=" + std::to_string(k) + " out of range [2," +
                                std::to_string(X.rows) + "]");
  check_unit_rows(X);
  double s = 0;
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b) {
      if (a == b) continue;
      std::size_t ia = r.order[a], ib = r.order[b];
      double cs = 0;
      for (std::size_t j = 0; j < X.cols; ++j) cs += X.at(ia, j) * X.at(ib, j);
      cs = std::clamp(cs, -1.0, 1.0);  // unit rows can round to |cos| slightly > 1
      s += (1.0 - cs) / 2.0;
    }
  return s / (static_cast<double>(k) * static_cast<double>(k - 1));
}

struct Temperatures {
  double tau_ndcg = 0.1;
  double tau_perm = 1.0;
  double tau_topk = 5.0;
};

// NeuralSort-style relaxation: row i of P_hat is
// softmax(((K+1-2i)*s - A*1)/tau) with A_pq = |s_p - s_q|.
// scores must be a Kx1 node.
inline NodeId soft_permutation(Tape& t, NodeId scores, double tau_perm) {
  if (tau_perm <= 0) throw std::invalid_argument("soft_permutation: tau_perm must be > 0");
  const Matrix& s = t.value(scores);
  if (s.cols != 1)
    throw std::invalid_argument("soft_permutation: scores must be Kx1, got " + s.shape_str());
  std::size_t K = s.rows;
  NodeId ones = t.leaf(Matrix::ones(K, 1));
  NodeId sT = t.transpose(scores);
  NodeId S1 = t.matmul(scores, t.transpose(ones));  // S1_pq = s_p
  NodeId S2 = t.matmul(ones, sT);                   // S2_pq = s_q
  NodeId A = t.absolute_value(t.sub(S1, S2));
  NodeId a_row = t.row_sum(A);  // Kx1, (A*1)_q computed per row q
  std::vector<double> coef(K);
  for (std::size_t i = 0; i < K; ++i)
    coef[i] = static_cast<double>(K) + 1.0 - 2.0 * static_cast<double>(i + 1);
  NodeId c = t.leaf(Matrix::col_vec(coef));
  NodeId M = t.sub(t.matmul(c, sT), t.matmul(ones, t.transpose(a_row)));
  return t.row_softmax(t.scalar_mul(1.0 / tau_perm, M));
}

// r_hat = (P_hat (.) Q)^T 1 with Q_ij = i (1-based); returns Kx1.
inline NodeId soft_rank(Tape& t, NodeId perm_hat) {
  const Matrix& P = t.value(perm_hat);
  if (P.rows != P.cols)
    throw std::invalid_argument("soft_rank: P_hat must be square, got " + P.shape_str());
  std::size_t K = P.rows;
  Matrix Q(K, K);
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = 0; j < K; ++j) Q.at(i, j) = static_cast<double>(i + 1);
  NodeId q = t.leaf(std::move(Q));
  return t.row_sum(t.transpose(t.hadamard(perm_hat, q)));
}

// w_j = sigmoid((k - r_hat_j)/tau_topk), in (0,1)^K.
inline NodeId soft_topk(Tape& t, NodeId rank_hat, std::size_t k, double tau_topk) {
  const Matrix& r = t.value(rank_hat);
  NodeId kv = t.leaf(Matrix(r.rows, r.cols, static_cast<double>(k)));
  return t.sigmoid_temp(t.sub(kv, rank_hat), tau_topk);
}

namespace detail {
// Top-k membership with the threshold midway between ranks k and k+1, so the
// tau -> 0 limit assigns weight 1 to all of the top k (including rank k
// itself) and 0 below. Used inside soft_ndcg / soft_div, which must converge
// to their hard counterparts.
inline NodeId soft_topk_inclusive(Tape& t, NodeId rank_hat, std::size_t k,
                                  double tau_topk) {
  const Matrix& r = t.value(rank_hat);
  NodeId kv = t.leaf(Matrix(r.rows, r.cols, static_cast<double>(k) + 0.5));
  return t.sigmoid_temp(t.sub(kv, rank_hat), tau_topk);
}
}  // namespace detail

// Positional soft NDCG: the soft permutation mixes the gains into ranked
// positions, which are then discounted with the usual fixed positional
// weights 1/log2(1+l) for l <= k:
//   sum_{l<=k} (P_hat g)_l / log2(1+l), normalized by the hard ideal DCG
// (constant wrt parameters). P_hat uses tau_ndcg; as tau -> 0 this equals
// hard NDCG exactly for distinct scores.
inline NodeId soft_ndcg(Tape& t, const std::vector<double>& y, NodeId scores, std::size_t k,
                        const Temperatures& temps) {
  const Matrix& s = t.value(scores);
  if (s.cols != 1 || s.rows != y.size())
    throw std::invalid_argument("soft_ndcg: scores must be Kx1 matching y");
  double ideal = dcg_at_k(y, hard_rank(y), k);
  if (ideal <= 0.0) return t.leaf(Matrix(1, 1, {1.0}));  // all gains zero: pinned to 1
  NodeId perm = soft_permutation(t, scores, temps.tau_ndcg);
  std::vector<double> gains(y.size());
  for (std::size_t j = 0; j < y.size(); ++j) gains[j] = std::exp2(y[j]) - 1.0;
  NodeId pg = t.matmul(perm, t.leaf(Matrix::col_vec(gains)));  // gain at position l
  std::vector<double> disc(y.size(), 0.0);
  for (std::size_t l = 1; l <= k; ++l) disc[l - 1] = 1.0 / std::log2(1.0 + static_cast<double>(l));
  NodeId num = t.total_sum(t.hadamard(pg, t.leaf(Matrix::col_vec(disc))));
  return t.scalar_mul(1.0 / ideal, num);
}

// Soft diversity: (1/(k(k-1))) sum_{j,j'} w_j w_j' (1 - x_j.x_j')/2.
// The diagonal vanishes because rows are normalized in-tape (1 - x.x = 0).
inline NodeId soft_div(Tape& t, NodeId X, NodeId rank_hat, std::size_t k, double tau_topk) {
  const Matrix& xm = t.value(X);
  if (k < 2) throw std::invalid_argument("soft_div: k must be >= 2");
  NodeId Xn = t.row_l2_normalize(X);
  NodeId gram = t.matmul(Xn, t.transpose(Xn));
  NodeId ones = t.leaf(Matrix::ones(xm.rows, xm.rows));
  NodeId dis = t.scalar_mul(0.5, t.sub(ones, gram));
  NodeId w = detail::soft_topk_inclusive(t, rank_hat, k, tau_topk);
  NodeId W = t.matmul(w, t.transpose(w));
  NodeId total = t.total_sum(t.hadamard(W, dis));
  return t.scalar_mul(1.0 / (static_cast<double>(k) * static_cast<double>(k - 1)), total);
}

// Maximal marginal relevance: greedy pick maximizing
// theta*score_j - (1-theta)*max_{l in selected} cos(x_j, x_l).
// Remaining K-k items are appended in score order.
inline Ranking mmr_rerank(const std::vector<double>& scores, const Matrix& X, std::size_t k,
                          double theta) {
  std::size_t K = scores.size();
  if (k < 1 || k > K) throw std::invalid_argument("mmr_rerank: k out of range");
  Ranking by_score = hard_rank(scores);
  std::vector<bool> picked(K, false);
  std::vector<std::size_t> order;
  order.reserve(K);
  order.push_back(by_score.order[0]);  // first pick by pure score
  picked[by_score.order[0]] = true;
  auto cosine = [&](std::size_t a, std::size_t b) {
    double s = 0;
    for (std::size_t j = 0; j < X.cols; ++j) s += X.at(a, j) * X.at(b, j);
    return s;
  };
  while (order.size() < k) {
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_j = K;
    for (std::size_t j = 0; j < K; ++j) {
      if (picked[j]) continue;
      double max_sim = -std::numeric_limits<double>::infinity();
      for (std::size_t l : order) max_sim = std::max(max_sim, cosine(j, l));
      double val = theta * scores[j] - (1.0 - theta) * max_sim;
      if (val > best) {  // ties keep the lowest index (ascending scan)
        best = val;
        best_j = j;
      }
    }
    picked[best_j] = true;
    order.push_back(best_j);
  }
  for (std::size_t idx : by_score.order)
    if (!picked[idx]) order.push_back(idx);
  Ranking r;
  r.order = std::move(order);
  r.rank_of.resize(K);
  for (std::size_t l = 0; l < K; ++l) r.rank_of[r.order[l]] = l + 1;
  return r;
}

}  // namespace perfrec
