#pragma once
#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "perfrec/matrix.hpp"

namespace perfrec {

// Bipartite user-item candidacy graph. lists[i] is user i's ordered candidate
// list X_i; user_sets[j] is item j's audience U_j. The two views are kept
// mutually consistent.
struct RecGraph {
  std::size_t m = 0;  // users
  std::size_t n = 0;  // items
  std::vector<std::vector<std::size_t>> lists;
  std::vector<std::vector<std::size_t>> user_sets;
  std::size_t achieved_swaps = 0;  // filled by gen_block_shuffled

  std::size_t degree_of_item(std::size_t j) const { return user_sets[j].size(); }

  bool consistent() const {
    std::vector<std::vector<std::size_t>> rebuilt(n);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j : lists[i]) {
        if (j >= n) return false;
        rebuilt[j].push_back(i);
      }
    for (std::size_t j = 0; j < n; ++j) {
      auto a = rebuilt[j];
      auto b = user_sets[j];
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      if (a != b) return false;
    }
    for (const auto& l : lists)
      if (l.empty()) return false;
    return true;
  }
};

inline RecGraph finalize_from_lists(std::size_t m, std::size_t n,
                                    std::vector<std::vector<std::size_t>> lists) {
  RecGraph g;
  g.m = m;
  g.n = n;
  g.lists = std::move(lists);
  g.user_sets.assign(n, {});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j : g.lists[i]) g.user_sets[j].push_back(i);
  return g;
}

// Samples a uniform K-subset of [0,n) without replacement.
inline std::vector<std::size_t> sample_subset(std::size_t n, std::size_t K,
                                              std::mt19937_64& rng) {
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  for (std::size_t i = 0; i < K; ++i) {
    std::uniform_int_distribution<std::size_t> d(i, n - 1);
    std::swap(pool[i], pool[d(rng)]);
  }
  pool.resize(K);
  return pool;
}

// Block-partitioned graph followed by N degree-preserving double-edge swaps.
// At N=0 every user in a block holds the same random K-subset of the block's
// items (full overlap: U_j identical within each block), so items outside a
// block's shared subset start with an empty audience. Swaps that would create
// a duplicate edge are rejected; only accepted swaps count toward N, and
// generation gives up after 100*N attempts.
inline RecGraph gen_block_shuffled(std::size_t m, std::size_t n, std::size_t K,
                                   std::size_t blocks, std::size_t swaps,
                                   std::uint64_t seed) {
  if (blocks == 0 || m % blocks != 0 || n % blocks != 0)
    throw std::invalid_argument("gen_block_shuffled: blocks must divide m and n");
  if (K > n / blocks)
    throw std::invalid_argument("gen_block_shuffled: K exceeds items per block");
  std::mt19937_64 rng(seed);
  std::size_t users_per = m / blocks, items_per = n / blocks;
  std::vector<std::vector<std::size_t>> lists(m);
  for (std::size_t b = 0; b < blocks; ++b) {
    auto sub = sample_subset(items_per, K, rng);
    for (std::size_t& j : sub) j += b * items_per;
    for (std::size_t u = 0; u < users_per; ++u) lists[b * users_per + u] = sub;
  }
  std::vector<std::vector<char>> member(m, std::vector<char>(n, 0));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j : lists[i]) member[i][j] = 1;

  std::size_t accepted = 0, attempts = 0;
  std::uniform_int_distribution<std::size_t> du(0, m - 1);
  while (accepted < swaps && attempts < 100 * swaps) {
    ++attempts;
    std::size_t i = du(rng), ip = du(rng);
    if (i == ip) continue;
    std::uniform_int_distribution<std::size_t> dp(0, lists[i].size() - 1);
    std::uniform_int_distribution<std::size_t> dq(0, lists[ip].size() - 1);
    std::size_t pi = dp(rng), qi = dq(rng);
    std::size_t j = lists[i][pi], jp = lists[ip][qi];
    if (j == jp || member[ip][j] || member[i][jp]) continue;
    lists[i][pi] = jp;
    lists[ip][qi] = j;
    member[i][j] = 0;
    member[i][jp] = 1;
    member[ip][jp] = 0;
    member[ip][j] = 1;
    ++accepted;
  }
  RecGraph g = finalize_from_lists(m, n, std::move(lists));
  g.achieved_swaps = accepted;
  return g;
}

// Every X_i is a uniform K-subset of all items.
inline RecGraph gen_uniform(std::size_t m, std::size_t n, std::size_t K,
                            std::uint64_t seed) {
  if (K > n) throw std::invalid_argument("gen_uniform: K > n");
  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::size_t>> lists(m);
  for (std::size_t i = 0; i < m; ++i) lists[i] = sample_subset(n, K, rng);
  return finalize_from_lists(m, n, std::move(lists));
}

// Ring of N users and N items; X_i = {i, i+1 mod N}, every item degree 2.
inline RecGraph gen_ring(std::size_t N) {
  if (N < 3) throw std::invalid_argument("gen_ring: N must be >= 3");
  std::vector<std::vector<std::size_t>> lists(N);
  for (std::size_t i = 0; i < N; ++i) lists[i] = {i, (i + 1) % N};
  return finalize_from_lists(N, N, std::move(lists));
}

// Two items. distinct=false: U_1 = U_2 = all users (full overlap).
// distinct=true: U_1 = shared + {a}, U_2 = shared + {b} with fresh users a, b.
inline RecGraph gen_two_item(std::size_t shared_users, bool distinct) {
  if (distinct && shared_users < 2)
    throw std::invalid_argument("gen_two_item: need shared_users >= 2 when distinct");
  if (!distinct && shared_users < 1)
    throw std::invalid_argument("gen_two_item: need at least one user");
  std::size_t m = distinct ? shared_users + 2 : shared_users;
  std::vector<std::vector<std::size_t>> lists(m);
  for (std::size_t i = 0; i < shared_users; ++i) lists[i] = {0, 1};
  if (distinct) {
    lists[shared_users] = {0};
    lists[shared_users + 1] = {1};
  }
  return finalize_from_lists(m, 2, std::move(lists));
}

struct DatasetTable {
  Matrix features;  // n x d
  std::vector<std::string> feature_names;
  std::vector<std::pair<std::size_t, std::size_t>> interactions;  // (user, item)
};

// Greedy list construction: repeatedly assign the item with the most
// remaining eligible users to all their lists until every list is full.
inline RecGraph build_lists_greedy(const DatasetTable& table, std::size_t min_reviews,
                                   std::size_t list_size) {
  if (table.interactions.empty())
    throw std::invalid_argument("build_lists_greedy: no interaction records");
  std::size_t max_user = 0, max_item = 0;
  for (auto [u, r] : table.interactions) {
    max_user = std::max(max_user, u);
    max_item = std::max(max_item, r);
  }
  std::size_t all_users = max_user + 1, n_items = std::max(max_item + 1, table.features.rows);

  std::vector<std::size_t> review_count(all_users, 0);
  for (auto [u, r] : table.interactions) ++review_count[u];
  std::vector<std::size_t> active;  // kept ids of users with enough reviews
  std::vector<std::size_t> local_id(all_users, SIZE_MAX);
  for (std::size_t u = 0; u < all_users; ++u)
    if (review_count[u] >= min_reviews) {
      local_id[u] = active.size();
      active.push_back(u);
    }
  if (active.empty())
    throw std::invalid_argument("build_lists_greedy: no user has >= " +
                                std::to_string(min_reviews) + " interactions");
  std::size_t m = active.size();

  std::vector<std::vector<std::size_t>> item_users(n_items);  // local user ids
  for (auto [u, r] : table.interactions)
    if (local_id[u] != SIZE_MAX) item_users[r].push_back(local_id[u]);
  for (auto& v : item_users) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }

  std::vector<std::vector<std::size_t>> lists(m);
  std::vector<bool> user_open(m, true), item_available(n_items, true);
  std::size_t open_count = m;
  while (open_count > 0) {
    std::size_t best_item = n_items, best_cnt = 0;
    for (std::size_t r = 0; r < n_items; ++r) {
      if (!item_available[r]) continue;
      std::size_t cnt = 0;
      for (std::size_t lu : item_users[r])
        if (user_open[lu]) ++cnt;
      if (cnt > best_cnt) {
        best_cnt = cnt;
        best_item = r;
      }
    }
    if (best_item == n_items) {
      std::string who;
      for (std::size_t lu = 0; lu < m; ++lu)
        if (user_open[lu]) who += (who.empty() ? "" : ",") + std::to_string(active[lu]);
      throw std::runtime_error(
          "build_lists_greedy: insufficient interactions to fill lists for users " + who);
    }
    item_available[best_item] = false;
    for (std::size_t lu : item_users[best_item]) {
      if (!user_open[lu]) continue;
      lists[lu].push_back(best_item);
      if (lists[lu].size() == list_size) {
        user_open[lu] = false;
        --open_count;
      }
    }
  }
  return finalize_from_lists(m, n_items, std::move(lists));
}

namespace detail {
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}
}  // namespace detail

// Comma-delimited item-feature file: header row of feature names, one item
// per line, numeric cells.
inline DatasetTable ingest_items(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("ingest_items: cannot open " + path);
  DatasetTable table;
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("ingest_items: missing header in " + path);
  table.feature_names = detail::split_csv_line(line);
  std::size_t d = table.feature_names.size();
  // a purely numeric first line means the header is missing
  {
    bool all_numeric = !table.feature_names.empty();
    for (const auto& name : table.feature_names) {
      char* end = nullptr;
      std::strtod(name.c_str(), &end);
      if (end == name.c_str() || *end != '\0') all_numeric = false;
    }
    if (all_numeric) throw std::runtime_error("ingest_items: missing header row in " + path);
  }
  std::vector<double> rows;
  std::size_t n = 0, line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != d)
      throw std::runtime_error("ingest_items: line " + std::to_string(line_no) + " has " +
                               std::to_string(cells.size()) + " cells, expected " +
                               std::to_string(d));
    for (const auto& c : cells) {
      char* end = nullptr;
      double v = std::strtod(c.c_str(), &end);
      if (end == c.c_str() || *end != '\0' || !std::isfinite(v))
        throw std::runtime_error("ingest_items: non-numeric cell '" + c + "' at line " +
                                 std::to_string(line_no));
      rows.push_back(v);
    }
    ++n;
  }
  table.features = Matrix(n, d, std::move(rows));
  return table;
}

// Two-column interaction file: user_id,item_id with a header row.
inline void ingest_interactions(const std::string& path, DatasetTable& table) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("ingest_interactions: cannot open " + path);
  std::string line;
  std::size_t line_no = 0;
  std::getline(in, line);  // header
  ++line_no;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != 2)
      throw std::runtime_error("ingest_interactions: line " + std::to_string(line_no) +
                               " needs exactly user_id,item_id");
    table.interactions.emplace_back(std::stoul(cells[0]), std::stoul(cells[1]));
  }
}

}  // namespace perfrec
