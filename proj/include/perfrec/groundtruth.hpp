#pragma once
#include <random>
#include <vector>

#include "perfrec/graph.hpp"
#include "perfrec/matrix.hpp"

namespace perfrec {

// Synthetic world: initial items and true user preferences, both sampled
// around the direction (1/sqrt(2), 1/sqrt(2), 0, ...) and row-normalized.
struct World {
  Matrix X0;      // n x d unit rows
  Matrix U_star;  // m x d unit rows
  double sigma_x = 1.0;
  double sigma_u_star = 0.1;
  std::uint64_t seed = 0;
};

namespace detail {
inline Matrix sample_unit_rows(std::size_t rows, std::size_t d, double sigma,
                               std::mt19937_64& rng) {
  const double c = 1.0 / std::sqrt(2.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix out(rows, d);
  for (std::size_t i = 0; i < rows; ++i) {
    double nrm = 0;
    do {
      out.at(i, 0) = c + sigma * gauss(rng);
      out.at(i, 1) = c + sigma * gauss(rng);
      for (std::size_t j = 2; j < d; ++j) out.at(i, j) = sigma * gauss(rng);
      nrm = row_norm(out, i);
    } while (nrm < 1e-12);  // resample a zero row (probability 0)
    for (std::size_t j = 0; j < d; ++j) out.at(i, j) /= nrm;
  }
  return out;
}
}  // namespace detail

inline World sample_world(std::size_t m, std::size_t n, std::size_t d, double sigma_x,
                          double sigma_u_star, std::uint64_t seed) {
  if (d < 2) throw std::invalid_argument("sample_world: d must be >= 2");
  World w;
  w.sigma_x = sigma_x;
  w.sigma_u_star = sigma_u_star;
  w.seed = seed;
  std::mt19937_64 rng(seed);
  w.X0 = detail::sample_unit_rows(n, d, sigma_x, rng);
  w.U_star = detail::sample_unit_rows(m, d, sigma_u_star, rng);
  return w;
}

// Counterfactual relevance oracle: f*(x; u*) = 2^(u*.x), in [0.5, 2].
inline double relevance(const std::vector<double>& x, const std::vector<double>& u_star) {
  double dp = 0;
  for (std::size_t i = 0; i < x.size(); ++i) dp += x[i] * u_star[i];
  return std::exp2(dp);
}

// labels[i][p] is the relevance of lists[i][p] for user i, recomputed from
// the current item features only (covariate-shift relabeling).
using EdgeLabels = std::vector<std::vector<double>>;

inline EdgeLabels label_edges(const Matrix& X, const World& world, const RecGraph& g) {
  EdgeLabels labels(g.m);
  for (std::size_t i = 0; i < g.m; ++i) {
    labels[i].resize(g.lists[i].size());
    for (std::size_t p = 0; p < g.lists[i].size(); ++p) {
      std::size_t j = g.lists[i][p];
      double dp = 0;
      for (std::size_t c = 0; c < X.cols; ++c) dp += X.at(j, c) * world.U_star.at(i, c);
      labels[i][p] = std::exp2(dp);
    }
  }
  return labels;
}

}  // namespace perfrec
