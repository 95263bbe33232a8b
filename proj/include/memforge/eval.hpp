#pragma once

#include <iosfwd>
#include <map>
#include <string>

#include "json.hpp"
#include "memforge/arch.hpp"

namespace memforge {

struct ArrayCounters {
  u64 accesses = 0;       // dynamic reads+writes (accumulate counts both)
  u64 conflicts = 0;      // excess same-cycle addresses per bank
  u64 misses = 0;         // cache line fills
  u64 stall_cycles = 0;   // stalls attributed to this array's storage
};

struct EvalReport {
  u64 total_cycles = 0;
  u64 compute_cycles = 0;       // one per dynamic statement instance
  u64 transfer_stall = 0;       // waiting on tile fetches / writebacks
  u64 bank_conflict_stall = 0;
  u64 cache_miss_stall = 0;
  u64 lis_stall = 0;            // element-wise channel round trips
  u64 offchip_bytes = 0;
  std::map<std::string, ArrayCounters> arrays;

  u64 stall_cycles() const {
    return transfer_stall + bank_conflict_stall + cache_miss_stall + lis_stall;
  }
  nlohmann::json to_json() const;
};

/// Set-associative LRU cache, physically indexed by (array, line).
class CacheModel {
 public:
  explicit CacheModel(const CachePrimitive& c);
  bool access(int array, u64 line);  // true = hit; updates recency / fills

 private:
  u64 sets_;
  u64 assoc_;
  std::vector<std::vector<std::pair<int, u64>>> lru_;  // per set, MRU first
};

/// Cycle-approximate replay of the kernel against an architecture: one cycle
/// per statement instance plus serialized stalls from each storage component
/// touched.  Optional CSV stream receives one row per stalled instance.
EvalReport simulate(const Kernel& k, const MemoryArchitecture& arch,
                    const PlatformSpec& p, u64 cap = kDefaultIterationCap,
                    std::ostream* csv = nullptr);

}  // namespace memforge
