#pragma once

#include <functional>
#include <map>

#include "memforge/ir.hpp"

namespace memforge {

inline constexpr u64 kDefaultIterationCap = u64(1) << 20;

enum class AccessClassKind { Regular, Locality, Irregular };
const char* to_string(AccessClassKind k);

struct AccessClass {
  AccessClassKind kind = AccessClassKind::Regular;
  i64 required_parallel = 1;  // same-cycle accesses after unrolling
  bool reuse = false;         // constant-offset overlap within one statement
};

using ClassMap = std::map<std::string, AccessClass>;

ClassMap classify_accesses(const Kernel& k);

/// Total dynamic statement instances (an unrolled group is one instance).
/// Saturates instead of overflowing.
u64 dynamic_instance_count(const Kernel& k);

/// Same, restricted to one loop nest.
u64 dynamic_instance_count(const Kernel& k, const LoopNest& nest);

struct InstanceAccess {
  int array;        // index into Kernel::arrays
  int stmt_access;  // static Access ordinal within the statement
  AccessKind kind;
  bool opaque;
  u64 flat;  // row-major element index (deterministic synthetic when opaque)
};

struct InstanceInfo {
  u64 index;
  int stmt_id;
  /// Active loop chain, outermost first: (var, value) with the value taken at
  /// the start of the unroll group (copies within the group share it).
  const std::vector<std::pair<std::string, i64>>* loops = nullptr;
};

using InstanceFn =
    std::function<void(const InstanceInfo&, const std::vector<InstanceAccess>&)>;
using TransferFn = std::function<void(const TransferStmt&)>;

/// Enumerates dynamic statement instances in program order; each instance
/// carries every unrolled copy of its statement (they share a cycle).
/// Throws Error if the instance count exceeds cap.
void walk_instances(const Kernel& k, u64 cap, const InstanceFn& on_instance,
                    const TransferFn& on_transfer = {});

/// Max distinct same-cycle addresses of `array`; errors on irregular arrays.
i64 required_ports(const Kernel& k, const std::string& array,
                   u64 cap = kDefaultIterationCap);

struct TraceEntry {
  u64 instance;  // global dynamic statement instance index
  u64 address;   // flat element index
  AccessKind kind;  // Read or Write (accum expands to both)
};

/// One entry per dynamic access of `array`, program order; errors on opaque
/// accesses or when the iteration space exceeds cap.
std::vector<TraceEntry> generate_trace(const Kernel& k, const std::string& array,
                                       u64 cap = kDefaultIterationCap);

/// Distinct flat addresses of one array, grouped per dynamic instance that
/// touches it. Shared by the port analysis and the banking verifier.
struct ArrayInstanceGroups {
  std::vector<std::vector<u64>> groups;  // sorted, deduped per instance
  i64 max_distinct = 0;
};
ArrayInstanceGroups collect_instance_groups(const Kernel& k,
                                            const std::string& array, u64 cap);

/// Dynamic write-write check between distinct static accesses (unroll copies
/// of one access are exempt: they are a single accumulation chain).
void validate_dynamic(const Kernel& k, u64 cap);

}  // namespace memforge
