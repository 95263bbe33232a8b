#pragma once

#include <string>
#include <vector>

#include "memforge/util.hpp"

namespace memforge {

struct KnapsackItem {
  std::string name;
  u64 weight = 0;
  u64 value = 0;
};

struct KnapsackSolution {
  std::vector<char> take;  // parallel to items
  u64 value = 0;
  u64 weight = 0;
  bool exact = false;  // true when the DP ran
};

// Above this total weight the exact DP gives way to the density greedy.
inline constexpr u64 kKnapsackDpLimit = 1'000'000;

KnapsackSolution knapsack_dp(const std::vector<KnapsackItem>& items, u64 budget);
KnapsackSolution knapsack_greedy(const std::vector<KnapsackItem>& items, u64 budget);
KnapsackSolution solve_knapsack(const std::vector<KnapsackItem>& items, u64 budget);

}  // namespace memforge
