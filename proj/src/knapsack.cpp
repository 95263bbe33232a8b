#include "memforge/knapsack.hpp"

#include <algorithm>
#include <numeric>

namespace memforge {

KnapsackSolution knapsack_dp(const std::vector<KnapsackItem>& items, u64 budget) {
  KnapsackSolution sol;
  sol.exact = true;
  sol.take.assign(items.size(), 0);

  u64 total_w = 0;
  for (const auto& it : items) total_w = sat_add(total_w, it.weight);
  u64 cap = std::min(budget, total_w);

  std::vector<u64> best(cap + 1, 0);
  // took[i][w]: processing item i improved the optimum at capacity w.
  std::vector<std::vector<char>> took(items.size(), std::vector<char>(cap + 1, 0));
  for (size_t i = 0; i < items.size(); ++i) {
    u64 wi = items[i].weight, vi = items[i].value;
    if (wi > cap) continue;
    for (u64 w = cap; ; --w) {
      if (w >= wi && best[w - wi] + vi > best[w]) {
        best[w] = best[w - wi] + vi;
        took[i][w] = 1;
      }
      if (w == 0) break;
    }
  }

  u64 w = cap;
  for (size_t i = items.size(); i-- > 0;) {
    if (took[i][w]) {
      sol.take[i] = 1;
      sol.value += items[i].value;
      sol.weight += items[i].weight;
      w -= items[i].weight;
    }
  }
  return sol;
}

KnapsackSolution knapsack_greedy(const std::vector<KnapsackItem>& items, u64 budget) {
  KnapsackSolution sol;
  sol.exact = false;
  sol.take.assign(items.size(), 0);

  std::vector<size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    const auto& ia = items[a];
    const auto& ib = items[b];
    // Density compare without division: va/wa > vb/wb  <=>  va*wb > vb*wa.
    // Zero-weight items sort first (infinite density).
    unsigned __int128 lhs = static_cast<unsigned __int128>(ia.value) * ib.weight;
    unsigned __int128 rhs = static_cast<unsigned __int128>(ib.value) * ia.weight;
    if (lhs != rhs) return lhs > rhs;
    if (ia.value != ib.value) return ia.value > ib.value;
    return ia.name < ib.name;
  });

  u64 remaining = budget;
  for (size_t idx : order) {
    if (items[idx].weight <= remaining) {
      sol.take[idx] = 1;
      sol.value += items[idx].value;
      sol.weight += items[idx].weight;
      remaining -= items[idx].weight;
    }
  }
  return sol;
}

KnapsackSolution solve_knapsack(const std::vector<KnapsackItem>& items, u64 budget) {
  u64 total_w = 0;
  for (const auto& it : items) total_w = sat_add(total_w, it.weight);
  if (total_w <= kKnapsackDpLimit) return knapsack_dp(items, budget);
  return knapsack_greedy(items, budget);
}

}  // namespace memforge
