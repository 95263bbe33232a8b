#include <random>
#include <vector>

#include "doctest.h"
#include "memforge/knapsack.hpp"

using namespace memforge;

namespace {

// Oracle: enumerate all 2^n subsets and keep the best feasible value.
u64 best_subset_value(const std::vector<KnapsackItem>& items, u64 budget) {
  size_t n = items.size();
  u64 best = 0;
  for (u64 mask = 0; mask < (u64(1) << n); ++mask) {
    u64 w = 0, v = 0;
    for (size_t i = 0; i < n; ++i) {
      if (mask & (u64(1) << i)) {
        w += items[i].weight;
        v += items[i].value;
      }
    }
    if (w <= budget && v > best) best = v;
  }
  return best;
}

void check_solution_shape(const std::vector<KnapsackItem>& items, u64 budget,
                          const KnapsackSolution& s) {
  REQUIRE(s.take.size() == items.size());
  u64 w = 0, v = 0;
  for (size_t i = 0; i < items.size(); ++i) {
    if (s.take[i]) {
      w += items[i].weight;
      v += items[i].value;
    }
  }
  CHECK(w == s.weight);
  CHECK(v == s.value);
  CHECK(w <= budget);
}

}  // namespace

TEST_CASE("dp solver is optimal on random instances") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    size_t n = 1 + rng() % 10;
    std::vector<KnapsackItem> items;
    for (size_t i = 0; i < n; ++i) {
      items.push_back({std::string(1, char('a' + i)), 1 + rng() % 40, rng() % 100});
    }
    u64 budget = rng() % 120;
    KnapsackSolution s = knapsack_dp(items, budget);
    check_solution_shape(items, budget, s);
    CHECK(s.exact);
    CHECK(s.value == best_subset_value(items, budget));
  }
}

TEST_CASE("dp solver: placement sizing example") {
  // Three arrays weighted at their one-port bank area, budget 49152 units.
  // {a, c} wins over {a, b}, which lands exactly on the budget but scores less.
  std::vector<KnapsackItem> items = {
      {"a", 16384, 1500}, {"b", 32768, 1400}, {"c", 8192, 1500}};
  CHECK(best_subset_value(items, 49152) == 3000);
  KnapsackSolution s = solve_knapsack(items, 49152);
  CHECK(s.exact);
  CHECK(s.value == 3000);
  CHECK(s.weight == 24576);
  CHECK(s.take == std::vector<char>{1, 0, 1});
}

TEST_CASE("dp solver: edge cases") {
  KnapsackSolution empty = knapsack_dp({}, 100);
  CHECK(empty.value == 0);
  CHECK(empty.take.empty());

  std::vector<KnapsackItem> items = {{"a", 10, 5}, {"b", 10, 5}};
  KnapsackSolution none = knapsack_dp(items, 9);
  CHECK(none.value == 0);
  CHECK(none.take == std::vector<char>{0, 0});

  KnapsackSolution zero = knapsack_dp({{"a", 0, 7}}, 0);
  CHECK(zero.value == 7);  // weightless items always fit
}

TEST_CASE("greedy orders by density, then value, then name") {
  std::vector<KnapsackItem> items = {
      {"b", 10, 50},   // density 5
      {"a", 10, 50},   // density 5 - same value, earlier name wins the slot
      {"c", 4, 28},    // density 7, picked first
      {"d", 20, 60}};  // density 3
  KnapsackSolution s = knapsack_greedy(items, 24);
  check_solution_shape(items, 24, s);
  CHECK_FALSE(s.exact);
  // c (4) then a (10) then b (10) fills 24 exactly; d never fits.
  CHECK(s.take == std::vector<char>{1, 1, 1, 0});
  CHECK(s.value == 128);

  KnapsackSolution tight = knapsack_greedy(items, 15);
  // c then a; b no longer fits, d no longer fits.
  CHECK(tight.take == std::vector<char>{0, 1, 1, 0});
}

TEST_CASE("greedy density comparison does not overflow") {
  // Cross-multiplied densities near 2^64 would overflow a naive u64 product.
  std::vector<KnapsackItem> items = {
      {"a", u64(1) << 40, u64(1) << 62},
      {"b", 1, 3}};
  KnapsackSolution s = knapsack_greedy(items, (u64(1) << 40) + 1);
  check_solution_shape(items, (u64(1) << 40) + 1, s);
  CHECK(s.take == std::vector<char>{1, 1});
}

TEST_CASE("dispatch: dp under the limit, greedy above it") {
  std::vector<KnapsackItem> small = {{"a", 100, 1}, {"b", 200, 2}};
  CHECK(solve_knapsack(small, 250).exact);

  std::vector<KnapsackItem> big = {
      {"a", kKnapsackDpLimit, 1}, {"b", 1, 2}};
  KnapsackSolution s = solve_knapsack(big, 10);
  CHECK_FALSE(s.exact);
  CHECK(s.take == std::vector<char>{0, 1});

  // Exactly at the limit still runs the DP.
  std::vector<KnapsackItem> edge = {{"a", kKnapsackDpLimit - 1, 1}, {"b", 1, 2}};
  CHECK(solve_knapsack(edge, 10).exact);
}

TEST_CASE("greedy solutions are maximal") {
  // Every skipped item must be too heavy for the leftover budget: the scan
  // only ever grows the committed weight, so anything that fits at the end
  // also fit when its turn came.
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    size_t n = 1 + rng() % 8;
    std::vector<KnapsackItem> items;
    for (size_t i = 0; i < n; ++i)
      items.push_back({std::string(1, char('a' + i)), 1 + rng() % 30, 1 + rng() % 90});
    u64 budget = 30 + rng() % 90;
    KnapsackSolution s = knapsack_greedy(items, budget);
    check_solution_shape(items, budget, s);
    CHECK_FALSE(s.exact);
    for (size_t i = 0; i < items.size(); ++i)
      if (!s.take[i]) CHECK(items[i].weight > budget - s.weight);
  }
}
