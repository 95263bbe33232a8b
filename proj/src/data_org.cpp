#include "memforge/data_org.hpp"

#include <algorithm>

#include "memforge/knapsack.hpp"

namespace memforge {

using nlohmann::json;

const char* to_string(Placement p) {
  switch (p) {
    case Placement::OnChipPlm: return "plm";
    case Placement::OnChipCache: return "cache";
    case Placement::OffChip: return "offchip";
  }
  return "?";
}

bool plm_eligible(const ArrayDecl& a, const BankPrimitive& b) {
  return static_cast<u64>(a.element_bits) <= b.word_bits;
}

u64 plm_weight(const ArrayDecl& a, const BankPrimitive& b) {
  return plm_words(a.elements()) * b.word_bits;
}

u64 channel_penalty(const Channel& c, u64 bytes) {
  return c.latency + ceil_div(bytes, c.bytes_per_cycle);
}

int pick_channel(const PlatformSpec& p, u64 bytes) {
  int best = -1;
  u64 best_pen = 0;
  for (const auto& c : p.channels) {  // sorted by id: ties keep the lower id
    u64 pen = channel_penalty(c, bytes);
    if (best < 0 || pen < best_pen) {
      best = c.id;
      best_pen = pen;
    }
  }
  return best;
}

json PlacementPlan::to_json() const {
  json arr = json::object();
  for (const auto& [name, e] : arrays) {
    arr[name] = {{"benefit", e.benefit},
                 {"channel", e.channel},
                 {"dyn_accesses", e.dyn_accesses},
                 {"footprint_bytes", e.footprint_bytes},
                 {"placement", to_string(e.where)},
                 {"weight", e.weight}};
  }
  return json{{"arrays", std::move(arr)},
              {"cache_used", cache_used},
              {"plm_area", plm_area},
              {"solver", exact ? "dp" : "greedy"}};
}

PlacementPlan plan_placement(const Kernel& k, const ClassMap& classes,
                             const PlatformSpec& p, u64 cap,
                             const std::set<std::string>& deny_plm) {
  PlacementPlan plan;

  std::map<std::string, u64> dyn;
  walk_instances(k, cap, [&](const InstanceInfo&, const std::vector<InstanceAccess>& as) {
    for (const auto& ia : as)
      dyn[k.arrays[ia.array].name] += (ia.kind == AccessKind::Accum) ? 2 : 1;
  });

  const bool onchip = p.on_chip_only();
  for (const auto& a : k.arrays) {
    PlacementEntry e;
    e.footprint_bytes = a.footprint_bytes();
    e.dyn_accesses = dyn.count(a.name) ? dyn[a.name] : 0;
    e.weight = plm_eligible(a, p.bank) ? plm_weight(a, p.bank) : 0;
    if (!onchip) {
      e.channel = pick_channel(p, e.footprint_bytes);
      e.benefit =
          e.dyn_accesses * channel_penalty(*p.channel_by_id(e.channel), e.footprint_bytes);
    } else {
      e.benefit = 1;  // no off-chip fallback exists: placement is forced
    }
    plan.arrays[a.name] = e;
  }

  if (onchip) {
    // Everything must fit in the PLM: there is nowhere else to spill.
    u64 total = 0;
    for (const auto& a : k.arrays) {
      auto& e = plan.arrays[a.name];
      if (classes.at(a.name).kind == AccessClassKind::Irregular)
        throw Error("array '" + a.name +
                    "' has irregular accesses but the platform has no channels or cache");
      if (!plm_eligible(a, p.bank))
        throw Error("array '" + a.name + "' has elements wider than a PLM word (" +
                    std::to_string(a.element_bits) + "b > " +
                    std::to_string(p.bank.word_bits) + "b) and cannot be placed");
      e.where = Placement::OnChipPlm;
      total += e.weight;
    }
    if (total > p.budget)
      throw Error("on-chip-only platform budget " + std::to_string(p.budget) +
                  " cannot hold all arrays (need " + std::to_string(total) + ")");
    plan.plm_area = total;
    return plan;
  }

  // Irregular arrays head for the cache when one exists and fits.
  bool cache_wanted = false;
  for (const auto& a : k.arrays) {
    if (classes.at(a.name).kind != AccessClassKind::Irregular) continue;
    if (p.cache.present() && a.footprint_bytes() <= p.cache.capacity_bytes &&
        cache_area(p.cache) <= p.budget)
      cache_wanted = true;
  }
  u64 knap_budget = p.budget - (cache_wanted ? cache_area(p.cache) : 0);

  // Regular and locality arrays compete for the PLM budget.
  std::vector<KnapsackItem> items;
  for (const auto& a : k.arrays) {
    if (classes.at(a.name).kind == AccessClassKind::Irregular) continue;
    if (!plm_eligible(a, p.bank) || deny_plm.count(a.name)) continue;
    const auto& e = plan.arrays[a.name];
    items.push_back({a.name, e.weight, e.benefit});
  }
  std::sort(items.begin(), items.end(),
            [](const KnapsackItem& x, const KnapsackItem& y) { return x.name < y.name; });
  KnapsackSolution sol = solve_knapsack(items, knap_budget);
  plan.exact = sol.exact;

  std::set<std::string> winners;
  for (size_t i = 0; i < items.size(); ++i)
    if (sol.take[i]) winners.insert(items[i].name);
  plan.plm_area = sol.weight;

  auto commit_cache = [&](u64 footprint) -> bool {
    if (!p.cache.present() || footprint > p.cache.capacity_bytes) return false;
    if (plan.cache_used) return true;
    if (plan.plm_area + cache_area(p.cache) > p.budget) return false;
    plan.cache_used = true;
    return true;
  };

  for (const auto& a : k.arrays) {
    auto& e = plan.arrays[a.name];
    AccessClassKind kind = classes.at(a.name).kind;
    if (kind == AccessClassKind::Irregular) {
      e.where = (cache_wanted && commit_cache(e.footprint_bytes)) ? Placement::OnChipCache
                                                                  : Placement::OffChip;
    } else if (winners.count(a.name)) {
      e.where = Placement::OnChipPlm;
      e.channel = -1;
    } else if (kind == AccessClassKind::Locality && commit_cache(e.footprint_bytes)) {
      e.where = Placement::OnChipCache;
    } else {
      e.where = Placement::OffChip;
    }
  }
  return plan;
}

}  // namespace memforge
