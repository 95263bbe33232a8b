#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "memforge/comm.hpp"
#include "memforge/data_org.hpp"
#include "memforge/partition.hpp"

namespace memforge {

inline constexpr const char* kToolVersion = "memforge 0.1.0";

struct Component {
  std::string id;
  std::string kind;  // plm | cache | dma | prefetcher | channel_controller | lis_channel
  nlohmann::json params;
};

struct Binding {
  std::string component;
  int group = -1;  // sharing group id for shared PLM storage
};

struct MemoryArchitecture {
  std::vector<Component> components;  // sorted by id
  std::map<std::string, Binding> bindings;
  std::vector<std::pair<std::string, std::string>> connections;  // sorted, deduped
  u64 area = 0;
  std::string kernel_hash;
  std::string platform_hash;

  const Component* find(const std::string& id) const;
  nlohmann::json to_json() const;
  std::string dump() const;  // canonical 2-space-indented text with trailing newline
};

struct ArchParseResult {
  std::optional<MemoryArchitecture> arch;
  Diagnostics diags;
  bool ok() const { return arch.has_value(); }
};
ArchParseResult parse_architecture(std::string_view json_text);

MemoryArchitecture build_architecture(const Kernel& k, const PlatformSpec& p,
                                      const PlacementPlan& placement,
                                      const TilingPlan& tiling,
                                      const PrefetchPlan& prefetch,
                                      const BankingPlan& banking,
                                      const SharingPlan& sharing);

/// Drops the prefetcher when nothing double-buffers, drops the DMA engine and
/// channel controller when no off-chip bindings remain, and marks a
/// single-channel controller as simplified.  Idempotent; never adds anything.
void simplify_architecture(MemoryArchitecture& a, const PlatformSpec& p);

/// Reference architecture for speedup comparisons: every array element-wise
/// streamed from its channel, or single PLM groups when the platform has no
/// channels at all.
MemoryArchitecture build_baseline(const Kernel& k, const PlatformSpec& p);

}  // namespace memforge
