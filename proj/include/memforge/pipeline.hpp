#pragma once

#include <optional>
#include <string>
#include <vector>

#include "memforge/emit.hpp"
#include "memforge/eval.hpp"

namespace memforge {

struct PipelineOptions {
  u64 cap = kDefaultIterationCap;
  std::optional<double> alpha;  // overrides the platform bank alpha
  bool enable_data_org = true;  // off: nothing competes for the PLM
  bool enable_layout = true;    // off: no permutations and no tiling
  bool enable_comm = true;      // off: every transfer blocks (no prefetcher)
  bool enable_partition = true; // off: capacity-minimum banks, one port, no sharing
  bool run_emit = true;         // produce lowered text + input hashes
  bool run_simulate = true;     // fill baseline/specialized reports
};

struct PipelineResult {
  Kernel lowered;          // rewritten kernel (tile loops, transfers, annotations)
  PlatformSpec platform;   // after the alpha override
  ClassMap classes;
  PlacementPlan placement;
  LayoutPlan layout;
  TilingPlan tiling;
  PrefetchPlan prefetch;
  BankingPlan banking;
  std::map<std::string, Lifetime> lifetimes;
  SharingPlan sharing;
  MemoryArchitecture architecture;
  std::string lowered_text;
  EvalReport baseline, specialized;
  std::vector<std::string> warnings;
  std::vector<std::string> evicted;  // feasibility-repair evictions, in order
  bool simulated = false;

  nlohmann::json plans_json() const;
  nlohmann::json report_json() const;
  std::string report_text() const;
};

/// Runs all phases with feasibility repair: if the assembled architecture
/// overflows the budget, the lowest-benefit PLM array is evicted and phases
/// 2-4 rerun.  Throws Error when no feasible architecture exists.
PipelineResult run_pipeline(const Kernel& input, const PlatformSpec& platform,
                            const PipelineOptions& opt = {});

}  // namespace memforge
