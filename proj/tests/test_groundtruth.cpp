#include <doctest.h>

#include "perfrec/dynamics.hpp"
#include "perfrec/groundtruth.hpp"

using namespace perfrec;

TEST_CASE("sample_world") {
  SUBCASE("sigma=0 pins every row to the center direction") {
    World w = sample_world(3, 4, 5, 0.0, 0.0, 1);
    const double c = 1.0 / std::sqrt(2.0);
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(w.X0.at(j, 0) == doctest::Approx(c));
      CHECK(w.X0.at(j, 1) == doctest::Approx(c));
      for (std::size_t q = 2; q < 5; ++q) CHECK(w.X0.at(j, q) == doctest::Approx(0.0));
    }
  }
  SUBCASE("rows are unit-norm") {
    World w = sample_world(10, 20, 8, 1.0, 0.1, 42);
    CHECK_NOTHROW(check_unit_rows(w.X0));
    CHECK_NOTHROW(check_unit_rows(w.U_star));
  }
  SUBCASE("reproducible from seed") {
    World a = sample_world(5, 7, 3, 1.0, 0.1, 9);
    World b = sample_world(5, 7, 3, 1.0, 0.1, 9);
    CHECK(a.X0.data == b.X0.data);
    CHECK(a.U_star.data == b.U_star.data);
    World c = sample_world(5, 7, 3, 1.0, 0.1, 10);
    CHECK(a.X0.data != c.X0.data);
  }
  SUBCASE("small sigma_u_star keeps users concentrated") {
    World w = sample_world(50, 2, 4, 1.0, 0.1, 3);
    const double c = 1.0 / std::sqrt(2.0);
    for (std::size_t i = 0; i < 50; ++i) {
      double dp = c * w.U_star.at(i, 0) + c * w.U_star.at(i, 1);
      CHECK(dp > 0.8);  // within ~37 degrees of the center
    }
  }
  SUBCASE("d=1 rejected") {
    CHECK_THROWS_AS(sample_world(2, 2, 1, 1.0, 0.1, 0), std::invalid_argument);
  }
}

TEST_CASE("relevance") {
  std::vector<double> u = {0.6, 0.8};
  CHECK(relevance(u, u) == doctest::Approx(2.0));
  CHECK(relevance({0.8, -0.6}, u) == doctest::Approx(1.0));
  CHECK(relevance({-0.6, -0.8}, u) == doctest::Approx(0.5));
  // range check on random unit pairs
  std::mt19937_64 rng(8);
  std::normal_distribution<double> gauss(0, 1);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> a(3), b(3);
    double na = 0, nb = 0;
    for (int c = 0; c < 3; ++c) {
      a[c] = gauss(rng);
      b[c] = gauss(rng);
      na += a[c] * a[c];
      nb += b[c] * b[c];
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    for (int c = 0; c < 3; ++c) {
      a[c] /= na;
      b[c] /= nb;
    }
    double r = relevance(a, b);
    CHECK(r >= 0.5 - 1e-12);
    CHECK(r <= 2.0 + 1e-12);
  }
}

TEST_CASE("label_edges") {
  World w = sample_world(4, 6, 3, 1.0, 0.1, 5);
  RecGraph g = gen_uniform(4, 6, 4, 11);

  SUBCASE("one label per edge, matching the pointwise oracle") {
    EdgeLabels y = label_edges(w.X0, w, g);
    std::size_t edges = 0;
    for (std::size_t i = 0; i < g.m; ++i) {
      REQUIRE(y[i].size() == g.lists[i].size());
      edges += y[i].size();
      for (std::size_t p = 0; p < y[i].size(); ++p) {
        std::size_t j = g.lists[i][p];
        std::vector<double> x(3), us(3);
        for (std::size_t c = 0; c < 3; ++c) {
          x[c] = w.X0.at(j, c);
          us[c] = w.U_star.at(i, c);
        }
        CHECK(y[i][p] == doctest::Approx(relevance(x, us)));
        CHECK(y[i][p] >= 0.5);
        CHECK(y[i][p] <= 2.0);
      }
    }
    CHECK(edges == 16);
  }
  SUBCASE("items placed exactly at u_star earn label 2") {
    Matrix X(6, 3);
    for (std::size_t j = 0; j < 6; ++j)
      for (std::size_t c = 0; c < 3; ++c) X.at(j, c) = w.U_star.at(0, c);
    RecGraph g1 = finalize_from_lists(1, 6, {{0, 1, 2, 3, 4, 5}});
    World w1 = w;
    EdgeLabels y = label_edges(X, w1, g1);
    for (double v : y[0]) CHECK(v == doctest::Approx(2.0));
  }
  SUBCASE("labels track moved items, not the originals") {
    EdgeLabels before = label_edges(w.X0, w, g);
    Matrix moved = w.X0;
    for (std::size_t c = 0; c < 3; ++c) moved.at(g.lists[0][0], c) = w.U_star.at(0, c);
    EdgeLabels after = label_edges(moved, w, g);
    CHECK(after[0][0] == doctest::Approx(2.0));
    CHECK(after[0][0] != before[0][0]);
  }
}
