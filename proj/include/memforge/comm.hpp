#pragma once

#include <map>
#include <string>

#include "json.hpp"
#include "memforge/data_org.hpp"
#include "memforge/layout.hpp"
#include "memforge/platform.hpp"

namespace memforge {

/// Cycles for one DMA transfer of `bytes` over `c`, split into bursts of at
/// most dma.max_burst_bytes; each burst pays setup + latency + bandwidth.
u64 transfer_cycles(u64 bytes, const Channel& c, const DmaParams& dma);
u64 transfer_bursts(u64 bytes, const DmaParams& dma);

enum class TransferMode { DoubleBuffer, Blocking };
enum class Overlap { Full, Partial, None };
const char* to_string(TransferMode m);
const char* to_string(Overlap h);

struct PrefetchEntry {
  TransferMode mode = TransferMode::Blocking;
  Overlap overlap = Overlap::None;
  int channel = -1;
  u64 tile_bytes = 0;
  u64 transfer = 0;          // cycles per tile fetch
  u64 bursts = 0;
  u64 compute_per_tile = 0;  // statement instances between tile switches
  nlohmann::json to_json() const;
};

struct PrefetchPlan {
  std::map<std::string, PrefetchEntry> arrays;
  nlohmann::json to_json() const;
};

/// Phase 3: decides, per tiled array, whether fetches run ahead of compute
/// (depth-2 buffers) or stall it, and records the expected overlap quality.
PrefetchPlan plan_prefetch(const Kernel& k, const TilingPlan& tiling,
                           const PlacementPlan& placement, const PlatformSpec& p);

}  // namespace memforge
