#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "memforge/analysis.hpp"
#include "memforge/data_org.hpp"
#include "memforge/platform.hpp"

namespace memforge {

// Storage permutation: new_dims[i] = old_dims[perm[i]], likewise for indices.
struct LayoutTransform {
  std::vector<int> perm;

  bool is_identity() const;
  nlohmann::json to_json() const;
};

struct LayoutPlan {
  std::map<std::string, LayoutTransform> arrays;
  nlohmann::json to_json() const;
};

/// Picks the permutation that moves the dimension indexed by the innermost
/// loop to the last (fastest-varying) storage position, by majority over the
/// array's accesses; ties keep the current order.  If the declaration already
/// carries a layout note the recorded transform is returned unchanged.
LayoutTransform select_layout(const Kernel& k, const std::string& array);

/// Rewrites dims and all index expressions in place and records the note.
void apply_layout(Kernel& k, const std::string& array, const std::vector<int>& perm);

/// Phase 2a over all non-irregular arrays; rewrites the kernel in place.
LayoutPlan plan_layout(Kernel& k, const ClassMap& classes);

struct TilingEntry {
  std::vector<i64> tile;   // per-dimension tile extents (powers of two)
  i64 depth = 1;           // 2 = double-buffered (read-only arrays)
  u64 tile_bytes = 0;
  int level = 0;           // index of the governing loop within `path`
  std::vector<std::string> path;  // loop vars from the nest root, outer first
  bool adopted = false;    // reconstructed from an existing transfer statement
  nlohmann::json to_json() const;
};

struct TilingPlan {
  std::map<std::string, TilingEntry> arrays;
  nlohmann::json to_json() const;
};

/// Phase 2b: regular off-chip arrays get on-chip tile buffers sized to an
/// equal share of the remaining area budget.  Arrays spanning several
/// top-level nests, or whose nests never confine an iteration to one tile,
/// stay untiled (they fall back to element-wise streaming).
TilingPlan select_tiling(const Kernel& k, const ClassMap& classes,
                         const PlacementPlan& placement, const PlatformSpec& p,
                         u64 slack, u64 cap);

}  // namespace memforge
