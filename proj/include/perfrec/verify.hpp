#pragma once
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "perfrec/csv.hpp"
#include "perfrec/dynamics.hpp"

namespace perfrec {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

// n unit vectors (first two coordinates) summing to the zero vector, built
// from a copies of the antipodal pair and b copies of the equilateral triple
// with n = 2a + 3b.
inline Matrix zero_sum_units(std::size_t n, std::size_t d) {
  if (n < 2 || d < 2) throw std::invalid_argument("zero_sum_units: need n >= 2, d >= 2");
  std::size_t b = (n % 2 == 0) ? 0 : 1;
  std::size_t a = (n - 3 * b) / 2;
  Matrix U(n, d);
  std::size_t r = 0;
  const double s3 = std::sqrt(3.0) / 2.0;
  for (std::size_t i = 0; i < a; ++i) {
    U.at(r, 0) = -1.0; ++r;
    U.at(r, 0) = 1.0; ++r;
  }
  for (std::size_t i = 0; i < b; ++i) {
    U.at(r, 0) = 0.5; U.at(r, 1) = s3; ++r;
    U.at(r, 0) = 0.5; U.at(r, 1) = -s3; ++r;
    U.at(r, 0) = -1.0; ++r;
  }
  return U;
}

namespace verifydetail {

inline double pair_div(const Matrix& X, std::size_t a, std::size_t b) {
  double cs = 0;
  for (std::size_t c = 0; c < X.cols; ++c) cs += X.at(a, c) * X.at(b, c);
  return (1.0 - cs) / 2.0;
}

// Shuffled even grid on [-1,1]: distinct scores with a uniform gap, safe for
// sharp-temperature soft-rank checks.
inline std::vector<double> separated_scores(std::size_t K, std::mt19937_64& rng) {
  std::vector<double> s(K);
  for (std::size_t i = 0; i < K; ++i)
    s[i] = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(K - 1);
  std::shuffle(s.begin(), s.end(), rng);
  return s;
}

}  // namespace verifydetail

// Full-overlap two-item graph, alpha=0: post-response diversity is exactly 0
// for any model (both items chase the same target).
inline CheckResult verify_collapse_exact(std::size_t trials = 100) {
  RecGraph g = gen_two_item(3, false);
  Matrix X(2, 3);
  X.at(0, 1) = 1.0;
  X.at(1, 1) = -1.0;
  double worst = 0;
  for (std::size_t s = 0; s < trials; ++s) {
    ModelState ms = init_model(3, 3, 1000 + s);
    Matrix Xf = best_response_all(X, ms.U, g, 0.0);
    worst = std::max(worst, verifydetail::pair_div(Xf, 0, 1));
  }
  return {"collapse-exact", worst <= 1e-9, "max div over " + std::to_string(trials) +
                                               " models = " + fmt_double(worst)};
}

// Repeated best responses to a fixed target drive pairwise diversity below
// 1e-3 by round 30 for each cost scale, monotonically.
inline CheckResult verify_collapse_dynamic() {
  bool ok = true;
  std::string detail;
  std::vector<double> v = {1.0, 0.0};
  for (double alpha : {0.5, 1.0, 2.0}) {
    std::vector<double> x1 = {0.0, 1.0}, x2 = {0.0, -1.0};
    double div = 1.0, prev = 1.0;
    bool monotone = true;
    for (int round = 1; round <= 30; ++round) {
      x1 = best_response(x1, v, alpha);
      x2 = best_response(x2, v, alpha);
      double cs = x1[0] * x2[0] + x1[1] * x2[1];
      div = (1.0 - cs) / 2.0;
      if (div > prev + 1e-12) monotone = false;
      prev = div;
    }
    if (!(monotone && div < 1e-3)) ok = false;
    detail += "alpha=" + fmt_double(alpha) + " div30=" + fmt_double(div) + " ";
  }
  return {"collapse-dynamic", ok, detail};
}

// Two items whose audiences differ in one user: the zero-sum construction
// plus an antipodal private pair yields diversity exactly 1.
inline CheckResult verify_max_div_construction(const std::vector<std::size_t>& shared_counts = {
                                                   2, 3, 4, 5, 7}) {
  bool ok = true;
  std::string detail;
  for (std::size_t c : shared_counts) {
    RecGraph g = gen_two_item(c, true);
    Matrix U(c + 2, 2);
    Matrix shared = zero_sum_units(c, 2);
    for (std::size_t i = 0; i < c; ++i)
      for (std::size_t col = 0; col < 2; ++col) U.at(i, col) = shared.at(i, col);
    U.at(c, 0) = 1.0;       // private user of item 0
    U.at(c + 1, 0) = -1.0;  // private user of item 1
    Matrix X(2, 2);
    X.at(0, 1) = 1.0;
    X.at(1, 1) = 1.0;
    Matrix Xf = best_response_all(X, U, g, 0.0);
    double div = verifydetail::pair_div(Xf, 0, 1);
    if (std::abs(div - 1.0) > 1e-9) ok = false;
    detail += "|shared|=" + std::to_string(c) + " div=" + fmt_double(div) + " ";
  }
  return {"max-div-construction", ok, detail};
}

// Ring of N two-item lists with interleaved user angles: measured average
// diversity after the response must reach (1-eps)(1-3/N).
inline CheckResult verify_ring_bound(std::size_t N, double eps) {
  const double pi = std::acos(-1.0);
  double delta = std::acos(1.0 - 2.0 * eps);
  RecGraph g = gen_ring(N);
  Matrix U(N, 2);
  for (std::size_t u = 0; u < N; ++u) {
    std::size_t i = u + 1;  // 1-based index of the construction
    double theta;
    if (i == N) theta = 1.5 * pi + delta;
    else if (i % 2 == 1) theta = 0.5 * pi - static_cast<double>(i) * delta;
    else theta = 1.5 * pi - static_cast<double>(i) * delta;
    U.at(u, 0) = std::cos(theta);
    U.at(u, 1) = std::sin(theta);
  }
  Matrix X(N, 2);
  for (std::size_t j = 0; j < N; ++j) X.at(j, 0) = 1.0;
  Matrix Xf = best_response_all(X, U, g, 0.0);
  double total = 0;
  for (std::size_t u = 0; u < N; ++u)
    total += verifydetail::pair_div(Xf, g.lists[u][0], g.lists[u][1]);
  double avg = total / static_cast<double>(N);
  double bound = (1.0 - eps) * (1.0 - 3.0 / static_cast<double>(N));
  return {"ring-bound N=" + std::to_string(N) + " eps=" + fmt_double(eps), avg >= bound,
          "avg=" + fmt_double(avg) + " bound=" + fmt_double(bound)};
}

// Closed-form best response against the independent numeric argmax.
inline CheckResult verify_oracle(bool full) {
  std::mt19937_64 rng(271828);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> ua(0.0, 4.0);
  auto unit = [&](std::size_t d) {
    std::vector<double> v(d);
    double nrm = 0;
    do {
      nrm = 0;
      for (double& x : v) {
        x = gauss(rng);
        nrm += x * x;
      }
    } while (nrm < 1e-12);
    nrm = std::sqrt(nrm);
    for (double& x : v) x /= nrm;
    return v;
  };
  auto utility = [](const std::vector<double>& xp, const std::vector<double>& x,
                    const std::vector<double>& v, double alpha) {
    double s = 0, c = 0;
    for (std::size_t i = 0; i < xp.size(); ++i) {
      s += v[i] * xp[i];
      double diff = xp[i] - x[i];
      c += diff * diff;
    }
    return s - alpha * c;
  };

  std::size_t draws2 = full ? 200 : 40;
  std::size_t res = full ? 2000000 : 200000;
  double worst2 = 0;
  for (std::size_t t = 0; t < draws2; ++t) {
    auto x = unit(2), v = unit(2);
    double alpha = ua(rng);
    auto cf = best_response(x, v, alpha);
    auto orc = best_response_oracle(x, v, alpha, res);
    worst2 = std::max(worst2, std::abs(utility(cf, x, v, alpha) - utility(orc, x, v, alpha)));
  }
  std::size_t draws5 = full ? 20 : 6;
  double worst5 = 0;
  for (std::size_t t = 0; t < draws5; ++t) {
    auto x = unit(5), v = unit(5);
    double alpha = ua(rng);
    auto cf = best_response(x, v, alpha);
    auto orc = best_response_oracle(x, v, alpha, 0, 99 + t);
    worst5 = std::max(worst5, std::abs(utility(cf, x, v, alpha) - utility(orc, x, v, alpha)));
  }
  bool ok = worst2 <= 1e-6 && worst5 <= 1e-5;
  return {"best-response-oracle", ok,
          "max gap d=2: " + fmt_double(worst2) + ", d=5: " + fmt_double(worst5)};
}

// Finite-difference validation of every tape op plus both full objectives.
inline CheckResult verify_gradients() {
  std::mt19937_64 rng(424242);
  auto rnd = [&](std::size_t r, std::size_t c) {
    std::uniform_real_distribution<double> u(-2, 2);
    Matrix m(r, c);
    for (double& v : m.data) {
      v = u(rng);
      if (std::abs(v) < 1e-3) v = 2e-3;  // stay off the abs kink
    }
    return m;
  };
  Matrix other = rnd(4, 3);
  using Builder = std::function<NodeId(Tape&, NodeId)>;
  std::vector<std::pair<const char*, Builder>> ops = {
      {"add", [&](Tape& t, NodeId x) { return t.total_sum(t.add(x, t.leaf(other))); }},
      {"sub", [&](Tape& t, NodeId x) { return t.total_sum(t.sub(t.leaf(other), x)); }},
      {"mul", [&](Tape& t, NodeId x) { return t.total_sum(t.elementwise_mul(x, t.leaf(other))); }},
      {"scalar", [](Tape& t, NodeId x) { return t.total_sum(t.scalar_mul(-1.7, x)); }},
      {"transpose", [&](Tape& t, NodeId x) {
         return t.total_sum(t.elementwise_mul(t.transpose(x), t.leaf(transpose(other))));
       }},
      {"matmul", [&](Tape& t, NodeId x) {
         return t.total_sum(t.elementwise_mul(t.matmul(x, t.transpose(x)),
                                              t.leaf(Matrix(4, 4, 0.3))));
       }},
      {"row_sum", [](Tape& t, NodeId x) {
         return t.total_sum(t.elementwise_mul(t.row_sum(x), t.leaf(Matrix(4, 1, 1.5))));
       }},
      {"sigmoid", [](Tape& t, NodeId x) { return t.total_sum(t.sigmoid_temp(x, 0.7)); }},
      {"softmax", [&](Tape& t, NodeId x) {
         return t.total_sum(t.elementwise_mul(t.row_softmax(x), t.leaf(other)));
       }},
      {"normalize", [&](Tape& t, NodeId x) {
         return t.total_sum(t.elementwise_mul(t.row_l2_normalize(x), t.leaf(other)));
       }},
      {"abs", [](Tape& t, NodeId x) { return t.total_sum(t.absolute_value(x)); }},
      {"exp2", [](Tape& t, NodeId x) { return t.total_sum(t.exp2(x)); }},
      {"log2_1p", [](Tape& t, NodeId x) {
         return t.total_sum(t.log2_of_1_plus(t.add(x, t.leaf(Matrix(4, 3, 2.5)))));
       }},
      {"broadcast", [&](Tape& t, NodeId x) {
         NodeId row = t.matmul(t.leaf(Matrix(1, 4, 0.25)), x);
         return t.total_sum(t.elementwise_mul(t.broadcast_row(row, 4), t.leaf(other)));
       }},
  };
  double worst = 0;
  std::string failed;
  for (auto& [name, builder] : ops)
    for (int rep = 0; rep < 20; ++rep) {
      auto r = grad_check(builder, rnd(4, 3), 1e-6, 1e-4);
      if (r.excluded_point) continue;
      worst = std::max(worst, r.max_rel_err);
      if (!r.pass) failed += std::string(name) + " ";
    }

  // both objectives on small instances
  World w = sample_world(4, 6, 3, 1.0, 0.1, 7);
  std::vector<std::vector<std::size_t>> lists(4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t t = 0; t < 3; ++t) lists[i].push_back((i * 3 + t) % 6);
  RecGraph g = finalize_from_lists(4, 6, std::move(lists));
  GraphView view = full_view(g, label_edges(w.X0, w, g));
  TrainConfig cfg;
  cfg.k = 2;
  cfg.lambda = 0.8;
  cfg.alpha = 0.6;
  for (ObjectiveKind kind : {ObjectiveKind::nonstrategic, ObjectiveKind::strategic}) {
    int checked = 0;
    for (std::uint64_t seed = 0; seed < 40 && checked < 20; ++seed) {
      ModelState ms = init_model(4, 3, 500 + seed);
      auto builder = [&](Tape& t, NodeId wn) {
        return build_objective(t, wn, w.X0, view, g, cfg, kind).objective;
      };
      auto r = grad_check(builder, ms.W, 1e-6, 1e-4);
      if (r.excluded_point) continue;
      worst = std::max(worst, r.max_rel_err);
      if (!r.pass)
        failed += (kind == ObjectiveKind::strategic ? "obj-strategic " : "obj-nonstrategic ");
      ++checked;
    }
    if (checked < 20) failed += "too-few-objective-instances ";
  }
  return {"gradient-suite", failed.empty(), failed.empty()
                                                ? "max rel err " + fmt_double(worst)
                                                : "failed: " + failed};
}

// Soft estimators converge to the hard metrics at sharp temperature.
inline CheckResult verify_tau_consistency(std::size_t instances = 50) {
  std::mt19937_64 rng(1618);
  std::uniform_real_distribution<double> uy(0.0, 3.0);
  const std::size_t K = 20, k = 5;
  double worst_ndcg = 0, worst_div = 0;
  for (std::size_t t = 0; t < instances; ++t) {
    auto scores = verifydetail::separated_scores(K, rng);
    std::vector<double> y(K);
    for (double& v : y) v = uy(rng);
    Matrix X(K, 3);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t i = 0; i < K; ++i) {
      double nrm = 0;
      for (std::size_t c = 0; c < 3; ++c) {
        X.at(i, c) = gauss(rng);
        nrm += X.at(i, c) * X.at(i, c);
      }
      nrm = std::sqrt(nrm);
      for (std::size_t c = 0; c < 3; ++c) X.at(i, c) /= nrm;
    }
    Ranking r = hard_rank(scores);
    double hard_n = ndcg_at_k(y, r, k).value;
    double hard_d = div_at_k(X, r, k);
    Tape tape;
    NodeId s = tape.leaf(Matrix::col_vec(scores));
    Temperatures sharp{0.01, 0.01, 0.01};
    double soft_n = tape.value(soft_ndcg(tape, y, s, k, sharp)).at(0, 0);
    NodeId rhat = soft_rank(tape, soft_permutation(tape, s, sharp.tau_perm));
    double soft_d = tape.value(soft_div(tape, tape.leaf(X), rhat, k, sharp.tau_topk)).at(0, 0);
    worst_ndcg = std::max(worst_ndcg, std::abs(soft_n - hard_n));
    worst_div = std::max(worst_div, std::abs(soft_d - hard_d));
  }
  bool ok = worst_ndcg <= 1e-3 && worst_div <= 1e-3;
  return {"tau-consistency", ok,
          "max |soft-hard| ndcg=" + fmt_double(worst_ndcg) + " div=" + fmt_double(worst_div)};
}

inline std::vector<CheckResult> run_verify(bool full) {
  std::vector<CheckResult> out;
  out.push_back(verify_gradients());
  out.push_back(verify_oracle(full));
  out.push_back(verify_collapse_exact());
  out.push_back(verify_collapse_dynamic());
  out.push_back(verify_max_div_construction());
  for (std::size_t N : {6, 12, 24})
    for (double eps : {0.05, 0.2}) out.push_back(verify_ring_bound(N, eps));
  out.push_back(verify_tau_consistency());
  return out;
}

}  // namespace perfrec
