#include <doctest.h>

#include <random>

#include "perfrec/ranking.hpp"

using namespace perfrec;

namespace {
// Distinct, well-separated scores: a random permutation of an even grid on
// [-1, 1]. Soft/hard comparisons at small tau need real gaps between scores.
std::vector<double> separated_scores(std::size_t K, std::mt19937_64& rng) {
  std::vector<double> s(K);
  for (std::size_t i = 0; i < K; ++i)
    s[i] = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(K - 1);
  std::shuffle(s.begin(), s.end(), rng);
  return s;
}
}  // namespace

TEST_CASE("hard_rank") {
  auto r = hard_rank({0.9, 0.1, 0.5});
  CHECK(r.order == std::vector<std::size_t>{0, 2, 1});
  CHECK(r.rank_of == std::vector<std::size_t>{1, 3, 2});

  auto tie = hard_rank({0.5, 0.5});
  CHECK(tie.order == std::vector<std::size_t>{0, 1});

  CHECK_THROWS_AS(hard_rank({}), std::invalid_argument);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> s(50);
  for (double& v : s) v = u(rng);
  auto big = hard_rank(s);
  std::vector<std::size_t> sorted = big.rank_of;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < 50; ++i) CHECK(sorted[i] == i + 1);
}

TEST_CASE("dcg and ndcg") {
  std::vector<double> y = {3, 2, 1};
  Ranking desc = hard_rank(y);
  CHECK(dcg_at_k(y, desc, 2) == doctest::Approx(7.0 + 3.0 / std::log2(3.0)));

  Ranking rev;
  rev.order = {2, 1, 0};
  rev.rank_of = {3, 2, 1};
  double ideal = 7.0 + 3.0 / std::log2(3.0);
  CHECK(ndcg_at_k(y, rev, 2).value ==
        doctest::Approx((1.0 + 3.0 / std::log2(3.0)) / ideal));
  CHECK(ndcg_at_k(y, rev, 2).value == doctest::Approx(0.3253).epsilon(1e-3));

  CHECK(ndcg_at_k(y, desc, 2).value == doctest::Approx(1.0));

  std::vector<double> zeros = {0, 0, 0};
  CHECK(dcg_at_k(zeros, rev, 3) == doctest::Approx(0.0));
  auto nz = ndcg_at_k(zeros, rev, 2);
  CHECK(nz.value == doctest::Approx(1.0));
  CHECK(nz.ideal_zero);

  std::vector<double> one = {1};
  CHECK(dcg_at_k(one, hard_rank(one), 1) == doctest::Approx(1.0));

  std::vector<double> constant = {2, 2, 2};
  CHECK(ndcg_at_k(constant, rev, 2).value == doctest::Approx(1.0));

  CHECK_THROWS_AS(dcg_at_k(y, desc, 4), std::invalid_argument);
}

TEST_CASE("div_at_k") {
  Ranking r;
  r.order = {0, 1};
  r.rank_of = {1, 2};
  Matrix same(2, 2, {1, 0, 1, 0});
  CHECK(div_at_k(same, r, 2) == doctest::Approx(0.0));
  Matrix anti(2, 2, {1, 0, -1, 0});
  CHECK(div_at_k(anti, r, 2) == doctest::Approx(1.0));
  Matrix ortho(2, 2, {1, 0, 0, 1});
  CHECK(div_at_k(ortho, r, 2) == doctest::Approx(0.5));

  Matrix nonunit(2, 2, {2, 0, 0, 1});
  CHECK_THROWS_AS(div_at_k(nonunit, r, 2), std::invalid_argument);

  SUBCASE("symmetric under permutation of the top-k set") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> g(0, 1);
    Matrix X(5, 3);
    for (double& v : X.data) v = g(rng);
    X = normalize_rows(X);
    Ranking a, b;
    a.order = {0, 1, 2, 3, 4};
    b.order = {2, 0, 1, 4, 3};  // same top-3 set, permuted
    CHECK(div_at_k(X, a, 3) == doctest::Approx(div_at_k(X, b, 3)));
  }
}

TEST_CASE("soft permutation") {
  std::mt19937_64 rng(21);
  SUBCASE("sharp limit matches hard permutation") {
    for (int rep = 0; rep < 20; ++rep) {
      auto s = separated_scores(8, rng);
      Tape t;
      NodeId perm = soft_permutation(t, t.leaf(Matrix::col_vec(s)), 0.001);
      Ranking hr = hard_rank(s);
      for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 8; ++j) {
          double expect = (hr.order[i] == j) ? 1.0 : 0.0;
          CHECK(t.value(perm).at(i, j) == doctest::Approx(expect).epsilon(1e-6));
        }
    }
  }
  SUBCASE("equal scores give uniform rows") {
    Tape t;
    NodeId perm = soft_permutation(t, t.leaf(Matrix::col_vec({0.3, 0.3, 0.3, 0.3})), 1.0);
    for (double v : t.value(perm).data) CHECK(v == doctest::Approx(0.25));
  }
  SUBCASE("rows sum to one") {
    for (int rep = 0; rep < 10; ++rep) {
      std::normal_distribution<double> g(0, 1);
      std::vector<double> s(6);
      for (double& v : s) v = g(rng);
      Tape t;
      NodeId perm = soft_permutation(t, t.leaf(Matrix::col_vec(s)), 0.37);
      const Matrix& P = t.value(perm);
      for (std::size_t i = 0; i < 6; ++i) {
        double sum = 0;
        for (std::size_t j = 0; j < 6; ++j) {
          sum += P.at(i, j);
          CHECK(P.at(i, j) >= 0.0);
          CHECK(P.at(i, j) <= 1.0);
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
      }
    }
  }
  SUBCASE("tau must be positive") {
    Tape t;
    NodeId s = t.leaf(Matrix::col_vec({1, 2}));
    CHECK_THROWS_AS(soft_permutation(t, s, 0.0), std::invalid_argument);
  }
}

TEST_CASE("soft rank") {
  SUBCASE("hard permutation input gives exact integer ranks") {
    Tape t;
    // permutation matrix sending scores (0.1, 0.9, 0.5) to sorted order
    Matrix P(3, 3, {0, 1, 0, 0, 0, 1, 1, 0, 0});
    NodeId rhat = soft_rank(t, t.leaf(P));
    CHECK(t.value(rhat).at(0, 0) == doctest::Approx(3));
    CHECK(t.value(rhat).at(1, 0) == doctest::Approx(1));
    CHECK(t.value(rhat).at(2, 0) == doctest::Approx(2));
  }
  SUBCASE("uniform P gives (K+1)/2 everywhere") {
    Tape t;
    NodeId rhat = soft_rank(t, t.leaf(Matrix(5, 5, 0.2)));
    for (std::size_t j = 0; j < 5; ++j)
      CHECK(t.value(rhat).at(j, 0) == doctest::Approx(3.0));
  }
  SUBCASE("sharp temperature approximates hard ranks") {
    std::mt19937_64 rng(33);
    for (int rep = 0; rep < 10; ++rep) {
      auto s = separated_scores(10, rng);
      Tape t;
      NodeId rhat = soft_rank(t, soft_permutation(t, t.leaf(Matrix::col_vec(s)), 0.01));
      Ranking hr = hard_rank(s);
      for (std::size_t j = 0; j < 10; ++j)
        CHECK(std::abs(t.value(rhat).at(j, 0) - static_cast<double>(hr.rank_of[j])) <=
              0.01);
    }
  }
}

TEST_CASE("soft topk") {
  Tape t;
  NodeId rhat = t.leaf(Matrix::col_vec({10.0, 1.0}));
  NodeId w = soft_topk(t, rhat, 10, 0.2);
  CHECK(t.value(w).at(0, 0) == doctest::Approx(0.5));
  CHECK(t.value(w).at(1, 0) == doctest::Approx(1.0).epsilon(1e-9));

  SUBCASE("tau to zero approaches the hard indicator") {
    Tape tt;
    NodeId r = tt.leaf(Matrix::col_vec({1.5, 2.5, 3.5, 4.5}));
    NodeId ww = soft_topk(tt, r, 3, 1e-4);
    CHECK(tt.value(ww).at(0, 0) == doctest::Approx(1.0));
    CHECK(tt.value(ww).at(1, 0) == doctest::Approx(1.0));
    CHECK(tt.value(ww).at(2, 0) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(tt.value(ww).at(3, 0) == doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("soft ndcg tracks hard ndcg at small temperature") {
  std::mt19937_64 rng(55);
  std::uniform_real_distribution<double> uy(0, 3);
  Temperatures sharp{0.01, 0.01, 0.01};
  double worst = 0;
  for (int rep = 0; rep < 50; ++rep) {
    std::size_t K = 20, k = 5;
    auto s = separated_scores(K, rng);
    std::vector<double> y(K);
    for (double& v : y) v = uy(rng);
    Tape t;
    NodeId node = soft_ndcg(t, y, t.leaf(Matrix::col_vec(s)), k, sharp);
    double hard = ndcg_at_k(y, hard_rank(s), k).value;
    worst = std::max(worst, std::abs(t.value(node).at(0, 0) - hard));
  }
  CHECK(worst <= 1e-3);

  SUBCASE("perfect model scores give ndcg near 1") {
    std::vector<double> y = {2.0, 1.4, 0.9, 0.3, -0.2, -0.8};
    Tape t;
    NodeId node = soft_ndcg(t, y, t.leaf(Matrix::col_vec(y)), 3, sharp);
    CHECK(t.value(node).at(0, 0) == doctest::Approx(1.0).epsilon(1e-3));
  }
  SUBCASE("constant relevance pins ndcg to ~1 for any scores") {
    std::vector<double> y = {1, 1, 1, 1};
    Tape t;
    NodeId node = soft_ndcg(t, y, t.leaf(Matrix::col_vec({0.4, -0.2, 0.9, 0.1})), 2, sharp);
    CHECK(t.value(node).at(0, 0) == doctest::Approx(1.0).epsilon(2e-3));
  }
}

TEST_CASE("tau-consistency is monotone over the sampled grid") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> uy(0, 3);
  std::vector<double> taus = {1.0, 0.1, 0.01, 0.001};
  for (int rep = 0; rep < 5; ++rep) {
    std::size_t K = 12, k = 4;
    auto s = separated_scores(K, rng);
    std::vector<double> y(K);
    for (double& v : y) v = uy(rng);
    double hard = ndcg_at_k(y, hard_rank(s), k).value;
    double prev_gap = std::numeric_limits<double>::infinity();
    for (double tau : taus) {
      Tape t;
      Temperatures temps{tau, tau, tau};
      NodeId node = soft_ndcg(t, y, t.leaf(Matrix::col_vec(s)), k, temps);
      double gap = std::abs(t.value(node).at(0, 0) - hard);
      CHECK(gap <= prev_gap + 1e-9);
      prev_gap = gap;
    }
    CHECK(prev_gap <= 1e-3);
  }
}

TEST_CASE("soft div") {
  Temperatures sharp{0.01, 0.01, 0.01};
  SUBCASE("identical items give zero") {
    Tape t;
    Matrix X(3, 2, {1, 0, 1, 0, 1, 0});
    NodeId rhat = soft_rank(t, soft_permutation(t, t.leaf(Matrix::col_vec({3, 2, 1})), 0.01));
    NodeId dv = soft_div(t, t.leaf(X), rhat, 2, 0.01);
    CHECK(t.value(dv).at(0, 0) == doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("sharp tau matches hard diversity") {
    std::mt19937_64 rng(91);
    std::normal_distribution<double> g(0, 1);
    for (int rep = 0; rep < 10; ++rep) {
      std::size_t K = 8, k = 3;
      Matrix X(K, 3);
      for (double& v : X.data) v = g(rng);
      X = normalize_rows(X);
      auto s = separated_scores(K, rng);
      Tape t;
      NodeId rhat =
          soft_rank(t, soft_permutation(t, t.leaf(Matrix::col_vec(s)), 1e-4));
      NodeId dv = soft_div(t, t.leaf(X), rhat, k, 1e-4);
      double hard = div_at_k(X, hard_rank(s), k);
      CHECK(t.value(dv).at(0, 0) == doctest::Approx(hard).epsilon(1e-3));
    }
  }
  SUBCASE("gradient wrt X matches finite differences") {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> g(0, 1);
    Matrix X(5, 3);
    for (double& v : X.data) v = g(rng);
    std::vector<double> s = separated_scores(5, rng);
    auto builder = [&](Tape& t, NodeId x) {
      NodeId rhat = soft_rank(t, soft_permutation(t, t.leaf(Matrix::col_vec(s)), 0.5));
      return soft_div(t, x, rhat, 3, 0.5);
    };
    auto rep = grad_check(builder, X, 1e-6, 1e-5);
    CHECK(rep.pass);
  }
}

TEST_CASE("mmr rerank") {
  SUBCASE("theta=1 equals hard_rank exactly") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<double> s(7);
      for (double& v : s) v = u(rng);
      Matrix X(7, 2);
      for (double& v : X.data) v = u(rng);
      X = normalize_rows(X);
      auto mr = mmr_rerank(s, X, 4, 1.0);
      auto hr = hard_rank(s);
      CHECK(mr.order == hr.order);
    }
  }
  SUBCASE("diversity-aware second pick") {
    std::vector<double> s = {1.0, 0.9, 0.2};
    Matrix X(3, 2, {1, 0, 0.995, 0.0999, 0, 1});
    auto r = mmr_rerank(s, X, 2, 0.5);
    CHECK(r.order[0] == 0);
    CHECK(r.order[1] == 2);
  }
  SUBCASE("identical items fall back to score order") {
    std::vector<double> s = {0.5, 0.8, 0.3};
    Matrix X(3, 2, {1, 0, 1, 0, 1, 0});
    auto r = mmr_rerank(s, X, 2, 0.5);
    CHECK(r.order[0] == 1);
    CHECK(r.order[1] == 0);
  }
}

TEST_CASE("ndcg stays within [0,1] on random inputs") {
  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> u(-2, 3);
  for (int rep = 0; rep < 200; ++rep) {
    std::size_t K = 2 + rep % 10;
    std::vector<double> y(K), s(K);
    for (double& v : y) v = std::max(0.0, u(rng));
    for (double& v : s) v = u(rng);
    auto val = ndcg_at_k(y, hard_rank(s), 1 + rep % K).value;
    CHECK(val >= 0.0);
    CHECK(val <= 1.0 + 1e-12);
  }
}
