#include "memforge/comm.hpp"

#include <algorithm>

namespace memforge {

using nlohmann::json;

const char* to_string(TransferMode m) {
  return m == TransferMode::DoubleBuffer ? "double_buffer" : "blocking";
}

const char* to_string(Overlap h) {
  switch (h) {
    case Overlap::Full: return "full";
    case Overlap::Partial: return "partial";
    case Overlap::None: return "none";
  }
  return "?";
}

u64 transfer_bursts(u64 bytes, const DmaParams& dma) {
  return ceil_div(bytes, dma.max_burst_bytes);
}

u64 transfer_cycles(u64 bytes, const Channel& c, const DmaParams& dma) {
  u64 total = 0;
  while (bytes > 0) {
    u64 burst = std::min(bytes, dma.max_burst_bytes);
    total += dma.setup_cycles + c.latency + ceil_div(burst, c.bytes_per_cycle);
    bytes -= burst;
  }
  return total;
}

json PrefetchEntry::to_json() const {
  return json{{"bursts", bursts},
              {"channel", channel},
              {"compute_per_tile", compute_per_tile},
              {"mode", to_string(mode)},
              {"overlap", to_string(overlap)},
              {"tile_bytes", tile_bytes},
              {"transfer", transfer}};
}

json PrefetchPlan::to_json() const {
  json o = json::object();
  for (const auto& [name, e] : arrays) o[name] = e.to_json();
  return o;
}

PrefetchPlan plan_prefetch(const Kernel& k, const TilingPlan& tiling,
                           const PlacementPlan& placement, const PlatformSpec& p) {
  PrefetchPlan plan;
  for (const auto& [name, te] : tiling.arrays) {
    const ArrayDecl* a = k.find_array(name);
    PrefetchEntry e;
    e.tile_bytes = te.tile_bytes;
    e.channel = placement.arrays.at(name).channel;
    const Channel* ch = p.channel_by_id(e.channel);
    if (!ch) throw Error("tiled array '" + name + "' has no backing channel");
    e.transfer = transfer_cycles(te.tile_bytes, *ch, p.dma);
    e.bursts = transfer_bursts(te.tile_bytes, p.dma);
    e.mode = te.depth == 2 ? TransferMode::DoubleBuffer : TransferMode::Blocking;

    u64 tiles = 1;
    for (size_t d = 0; d < a->dims.size(); ++d)
      tiles *= u64(a->dims[d]) / u64(te.tile[d]);
    const LoopNest* nest = nullptr;
    for (const auto& L : k.loops)
      if (!te.path.empty() && L.var == te.path[0]) nest = &L;
    u64 nest_instances = nest ? dynamic_instance_count(k, *nest) : 0;
    e.compute_per_tile = tiles > 0 ? nest_instances / tiles : 0;

    if (e.mode == TransferMode::DoubleBuffer)
      e.overlap = e.transfer <= e.compute_per_tile ? Overlap::Full : Overlap::Partial;
    else
      e.overlap = Overlap::None;
    plan.arrays[name] = e;
  }
  return plan;
}

}  // namespace memforge
