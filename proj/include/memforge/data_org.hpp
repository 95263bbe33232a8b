#pragma once

#include <map>
#include <set>
#include <string>

#include "json.hpp"
#include "memforge/analysis.hpp"
#include "memforge/platform.hpp"

namespace memforge {

enum class Placement { OnChipPlm, OnChipCache, OffChip };
const char* to_string(Placement p);

struct PlacementEntry {
  Placement where = Placement::OffChip;
  int channel = -1;         // off-chip backing channel (also backs the cache)
  u64 benefit = 0;          // dynamic accesses x per-access channel penalty
  u64 footprint_bytes = 0;
  u64 weight = 0;           // single-port PLM area (0 when PLM-ineligible)
  u64 dyn_accesses = 0;
};

struct PlacementPlan {
  std::map<std::string, PlacementEntry> arrays;
  bool exact = true;        // knapsack solved by DP (vs density greedy)
  bool cache_used = false;
  u64 plm_area = 0;         // committed single-port PLM area of the winners
  nlohmann::json to_json() const;
};

// PLM-eligible arrays occupy next_pow2(elements) words of the platform word
// size, one element per word; elements wider than a word cannot use the PLM.
bool plm_eligible(const ArrayDecl& a, const BankPrimitive& b);
u64 plm_weight(const ArrayDecl& a, const BankPrimitive& b);

// Cheapest channel for moving `bytes` once: latency + ceil(bytes/bw);
// ties go to the lower channel id.  -1 when the platform has no channels.
int pick_channel(const PlatformSpec& p, u64 bytes);
u64 channel_penalty(const Channel& c, u64 bytes);

/// Phase 1.  deny_plm lists arrays evicted by the feasibility repair loop;
/// they compete as if they had lost the knapsack.
PlacementPlan plan_placement(const Kernel& k, const ClassMap& classes,
                             const PlatformSpec& p, u64 cap,
                             const std::set<std::string>& deny_plm = {});

}  // namespace memforge
