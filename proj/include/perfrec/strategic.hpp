#pragma once
#include <random>
#include <vector>

#include "perfrec/graph.hpp"
#include "perfrec/tape.hpp"

namespace perfrec {

// Per-item spherical averages of connected user embeddings. An item whose
// audience averages to (near) zero reveals no preference and is flagged
// degenerate; such items do not move.
struct CreatorTargets {
  Matrix v_tilde;                    // n x d, unit rows where not degenerate
  std::vector<bool> degenerate;      // per item
};

inline CreatorTargets creator_targets(const Matrix& U, const RecGraph& g) {
  check_unit_rows(U);
  CreatorTargets ct;
  ct.v_tilde = Matrix(g.n, U.cols);
  ct.degenerate.assign(g.n, false);
  for (std::size_t j = 0; j < g.n; ++j) {
    if (g.user_sets[j].empty())
      throw std::invalid_argument("creator_targets: item " + std::to_string(j) +
                                  " has empty user set");
    for (std::size_t i : g.user_sets[j])
      for (std::size_t c = 0; c < U.cols; ++c) ct.v_tilde.at(j, c) += U.at(i, c);
    double inv_m = 1.0 / static_cast<double>(g.user_sets[j].size());
    for (std::size_t c = 0; c < U.cols; ++c) ct.v_tilde.at(j, c) *= inv_m;
    double nrm = row_norm(ct.v_tilde, j);
    if (nrm < 1e-9) {
      ct.degenerate[j] = true;
      for (std::size_t c = 0; c < U.cols; ++c) ct.v_tilde.at(j, c) = 0.0;
    } else {
      for (std::size_t c = 0; c < U.cols; ++c) ct.v_tilde.at(j, c) /= nrm;
    }
  }
  return ct;
}

inline double item_score(const std::vector<double>& x, const std::vector<double>& v_tilde) {
  double s = 0;
  for (std::size_t c = 0; c < x.size(); ++c) s += x[c] * v_tilde[c];
  return s;
}

// Closed-form best response on the unit sphere: (v + 2*alpha*x) normalized.
// Exactly-opposed inputs (norm ~ 0) and degenerate v tie-break to staying put.
inline std::vector<double> best_response(const std::vector<double>& x,
                                         const std::vector<double>& v_tilde, double alpha,
                                         bool degenerate = false) {
  if (degenerate) return x;
  std::size_t d = x.size();
  std::vector<double> out(d);
  double nrm = 0;
  for (std::size_t c = 0; c < d; ++c) {
    out[c] = v_tilde[c] + 2.0 * alpha * x[c];
    nrm += out[c] * out[c];
  }
  nrm = std::sqrt(nrm);
  if (nrm < 1e-9) return x;  // all responses tie
  for (double& v : out) v /= nrm;
  return out;
}

// Applies creator_targets then best_response per item; non-differentiable
// path. An item with an empty audience is an error by default; with
// skip_uncovered it stays put instead (no users, no incentive; such items
// appear in no list, so they cannot affect any metric either).
inline Matrix best_response_all(const Matrix& X, const Matrix& U, const RecGraph& g,
                                double alpha, bool skip_uncovered = false) {
  check_unit_rows(X);
  check_unit_rows(U);
  if (!skip_uncovered) {
    for (std::size_t j = 0; j < g.n; ++j)
      if (g.user_sets[j].empty())
        throw std::invalid_argument("creator_targets: item " + std::to_string(j) +
                                    " has empty user set");
  }
  Matrix out = X;  // uncovered items keep their features
  for (std::size_t j = 0; j < X.rows; ++j) {
    if (g.user_sets[j].empty()) continue;
    std::vector<double> x(X.cols), v(X.cols, 0.0);
    for (std::size_t c = 0; c < X.cols; ++c) x[c] = X.at(j, c);
    for (std::size_t i : g.user_sets[j])
      for (std::size_t c = 0; c < X.cols; ++c) v[c] += U.at(i, c);
    double nrm = 0;
    for (double& c : v) {
      c /= static_cast<double>(g.user_sets[j].size());
      nrm += c * c;
    }
    nrm = std::sqrt(nrm);
    bool degenerate = nrm < 1e-9;
    if (!degenerate)
      for (double& c : v) c /= nrm;
    auto r = best_response(x, v, alpha, degenerate);
    for (std::size_t c = 0; c < X.cols; ++c) out.at(j, c) = r[c];
  }
  return out;
}

// Tape subgraph of the same mapping so gradients flow from downstream
// diversity terms through Delta into U. X enters as a constant leaf. With
// skip_uncovered, audience-less items enter the output as constant rows
// (they stay put, matching the matrix path).
inline NodeId best_response_all_node(Tape& t, const Matrix& X, NodeId U, const RecGraph& g,
                                     double alpha, bool skip_uncovered = false) {
  std::vector<std::size_t> covered;
  covered.reserve(g.n);
  for (std::size_t j = 0; j < g.n; ++j) {
    if (g.user_sets[j].empty()) {
      if (!skip_uncovered)
        throw std::invalid_argument("best_response_all_node: item " + std::to_string(j) +
                                    " has empty user set");
    } else {
      covered.push_back(j);
    }
  }
  auto response_of = [&](const std::vector<std::size_t>& items) {
    Matrix avg(items.size(), g.m);
    Matrix Xc(items.size(), X.cols);
    for (std::size_t r = 0; r < items.size(); ++r) {
      std::size_t j = items[r];
      double inv_m = 1.0 / static_cast<double>(g.user_sets[j].size());
      for (std::size_t i : g.user_sets[j]) avg.at(r, i) = inv_m;
      for (std::size_t c = 0; c < X.cols; ++c) Xc.at(r, c) = X.at(j, c);
    }
    NodeId v = t.row_l2_normalize(t.matmul(t.leaf(std::move(avg)), U));
    if (alpha == 0.0) return v;
    return t.row_l2_normalize(t.add(v, t.scalar_mul(2.0 * alpha, t.leaf(std::move(Xc)))));
  };
  if (covered.size() == g.n) return response_of(covered);

  // scatter covered responses into their rows; frozen rows are constants
  NodeId resp = response_of(covered);
  Matrix scatter(g.n, covered.size());
  Matrix frozen(g.n, X.cols);
  for (std::size_t r = 0; r < covered.size(); ++r) scatter.at(covered[r], r) = 1.0;
  for (std::size_t j = 0; j < g.n; ++j)
    if (g.user_sets[j].empty())
      for (std::size_t c = 0; c < X.cols; ++c) frozen.at(j, c) = X.at(j, c);
  return t.add(t.matmul(t.leaf(std::move(scatter)), resp), t.leaf(std::move(frozen)));
}

// Numeric argmax of v.x' - alpha*|x'-x|^2 over the unit sphere, independent
// of the closed form. d=2 uses an exhaustive angular grid; d>2 runs projected
// gradient ascent from 32 random starts.
inline std::vector<double> best_response_oracle(const std::vector<double>& x,
                                                const std::vector<double>& v_tilde,
                                                double alpha, std::size_t resolution,
                                                std::uint64_t seed = 12345) {
  std::size_t d = x.size();
  auto utility = [&](const std::vector<double>& xp) {
    double s = 0, c = 0;
    for (std::size_t i = 0; i < d; ++i) {
      s += v_tilde[i] * xp[i];
      double diff = xp[i] - x[i];
      c += diff * diff;
    }
    return s - alpha * c;
  };
  if (d == 2) {
    std::vector<double> best = x;
    double best_u = utility(x);
    const double two_pi = 2.0 * std::acos(-1.0);
    for (std::size_t i = 0; i < resolution; ++i) {
      double th = two_pi * static_cast<double>(i) / static_cast<double>(resolution);
      std::vector<double> cand = {std::cos(th), std::sin(th)};
      double u = utility(cand);
      if (u > best_u) {
        best_u = u;
        best = cand;
      }
    }
    return best;
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> best = x;
  double best_u = utility(x);
  for (int start = 0; start < 32; ++start) {
    std::vector<double> xp(d);
    double nrm = 0;
    for (std::size_t i = 0; i < d; ++i) {
      xp[i] = gauss(rng);
      nrm += xp[i] * xp[i];
    }
    nrm = std::sqrt(nrm);
    for (double& v : xp) v /= nrm;
    // the ascent step must shrink with the cost curvature (2*alpha) or the
    // iteration oscillates instead of converging
    double eta = 0.25 / (1.0 + 2.0 * alpha);
    for (int it = 0; it < 5000; ++it) {
      // gradient of the utility wrt x' is v + 2*alpha*(x - x'); on the
      // sphere only the tangential part matters; plain ascent + renormalize
      std::vector<double> g(d);
      for (std::size_t i = 0; i < d; ++i)
        g[i] = v_tilde[i] - 2.0 * alpha * (xp[i] - x[i]);
      double step_nrm = 0;
      for (std::size_t i = 0; i < d; ++i) {
        xp[i] += eta * g[i];
        step_nrm += xp[i] * xp[i];
      }
      step_nrm = std::sqrt(step_nrm);
      if (step_nrm < 1e-12) break;
      for (double& v : xp) v /= step_nrm;
    }
    double u = utility(xp);
    if (u > best_u) {
      best_u = u;
      best = xp;
    }
  }
  return best;
}

}  // namespace perfrec
