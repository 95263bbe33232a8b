#include "memforge/eval.hpp"

#include <algorithm>
#include <ostream>

namespace memforge {

using nlohmann::json;

json EvalReport::to_json() const {
  json arr = json::object();
  for (const auto& [name, c] : arrays)
    arr[name] = {{"accesses", c.accesses},
                 {"conflicts", c.conflicts},
                 {"misses", c.misses},
                 {"stall_cycles", c.stall_cycles}};
  return json{{"arrays", std::move(arr)},
              {"bank_conflict_stall", bank_conflict_stall},
              {"cache_miss_stall", cache_miss_stall},
              {"compute_cycles", compute_cycles},
              {"lis_stall", lis_stall},
              {"offchip_bytes", offchip_bytes},
              {"stall_cycles", stall_cycles()},
              {"total_cycles", total_cycles},
              {"transfer_stall", transfer_stall}};
}

CacheModel::CacheModel(const CachePrimitive& c)
    : sets_(c.sets() == 0 ? 1 : c.sets()), assoc_(c.assoc), lru_(sets_) {}

bool CacheModel::access(int array, u64 line) {
  auto& set = lru_[line % sets_];
  for (size_t i = 0; i < set.size(); ++i) {
    if (set[i] == std::make_pair(array, line)) {
      set.erase(set.begin() + long(i));
      set.insert(set.begin(), {array, line});
      return true;
    }
  }
  set.insert(set.begin(), {array, line});
  if (set.size() > assoc_) set.pop_back();
  return false;
}

namespace {

enum class StoreKind { Group, Buffer, Cache, Lis };

struct Store {
  StoreKind kind = StoreKind::Group;
  std::string component;
  // bank shape (group and buffer)
  i64 banks = 1, ports = 1;
  bool cyclic = true;
  u64 wpb = 1;
  // buffer
  std::vector<i64> tile;
  u64 tile_bytes = 0;
  bool double_buffer = false;
  bool fetch = false, writeback = false;
  u64 tr = 0;  // cycles per tile transfer
  std::vector<std::pair<u64, u64>> runs;  // (first instance, tile id)
  size_t run_pos = 0;                     // next run to activate
  bool active = false;                    // a tile is resident
  u64 ready_at = 0;                       // double buffer: fetch completion
  // cache
  u64 line_bytes = 64, miss_stall = 0, hit_extra = 0;
  // lis
  u64 access_stall = 0, elem_bytes = 0;
};

u64 tile_local(u64 flat, const std::vector<i64>& dims, const std::vector<i64>& tile) {
  u64 lf = 0;
  std::vector<u64> idx(dims.size());
  for (size_t d = dims.size(); d-- > 0;) {
    idx[d] = flat % u64(dims[d]);
    flat /= u64(dims[d]);
  }
  for (size_t d = 0; d < dims.size(); ++d) lf = lf * u64(tile[d]) + idx[d] % u64(tile[d]);
  return lf;
}

u64 tile_of(u64 flat, const std::vector<i64>& dims, const std::vector<i64>& tile) {
  u64 id = 0;
  std::vector<u64> idx(dims.size());
  for (size_t d = dims.size(); d-- > 0;) {
    idx[d] = flat % u64(dims[d]);
    flat /= u64(dims[d]);
  }
  for (size_t d = 0; d < dims.size(); ++d)
    id = id * (u64(dims[d]) / u64(tile[d])) + idx[d] / u64(tile[d]);
  return id;
}

u64 conflict_excess(std::vector<u64>& addrs, i64 banks, i64 ports, bool cyclic, u64 wpb) {
  std::sort(addrs.begin(), addrs.end());
  addrs.erase(std::unique(addrs.begin(), addrs.end()), addrs.end());
  std::vector<i64> count(size_t(banks), 0);
  for (u64 a : addrs) {
    u64 b = cyclic ? a % u64(banks) : std::min(a / wpb, u64(banks) - 1);
    ++count[size_t(b)];
  }
  u64 excess = 0;
  for (i64 c : count)
    if (c > ports) excess += u64(c - ports);
  return excess;
}

}  // namespace

EvalReport simulate(const Kernel& k, const MemoryArchitecture& arch,
                    const PlatformSpec& p, u64 cap, std::ostream* csv) {
  EvalReport rep;
  const Channel* cache_channel = nullptr;

  std::vector<Store> stores(k.arrays.size());
  for (size_t i = 0; i < k.arrays.size(); ++i) {
    const ArrayDecl& arr = k.arrays[i];
    auto bit = arch.bindings.find(arr.name);
    if (bit == arch.bindings.end())
      throw Error("architecture binds no storage for array '" + arr.name + "'");
    const Component* c = arch.find(bit->second.component);
    if (!c) throw Error("binding of '" + arr.name + "' references missing component");
    Store& s = stores[i];
    s.component = c->id;
    if (c->kind == "plm" && c->params.contains("arrays")) {
      s.kind = StoreKind::Group;
      s.banks = c->params.at("banks").get<i64>();
      s.ports = c->params.at("ports").get<i64>();
      s.cyclic = c->params.at("scheme") == "cyclic";
      s.wpb = c->params.at("words_per_bank").get<u64>();
    } else if (c->kind == "plm") {
      s.kind = StoreKind::Buffer;
      s.banks = c->params.at("banks").get<i64>();
      s.ports = c->params.at("ports").get<i64>();
      s.cyclic = c->params.at("scheme") == "cyclic";
      s.wpb = c->params.at("words_per_bank").get<u64>();
      s.tile = c->params.at("tile").get<std::vector<i64>>();
      s.double_buffer = c->params.at("mode") == "double_buffer" &&
                        c->params.at("depth").get<i64>() == 2;
      s.fetch = c->params.at("fetch").get<bool>();
      s.writeback = c->params.at("writeback").get<bool>();
      u64 elems = 1;
      for (i64 t : s.tile) elems *= u64(t);
      s.tile_bytes = elems * arr.element_bytes();
      const Channel* ch = p.channel_by_id(c->params.at("channel").get<int>());
      if (!ch) throw Error("buffer for '" + arr.name + "' uses an unknown channel");
      s.tr = transfer_cycles(s.tile_bytes, *ch, p.dma);
    } else if (c->kind == "cache") {
      s.kind = StoreKind::Cache;
      s.line_bytes = c->params.at("line_bytes").get<u64>();
      const Channel* ch = p.channel_by_id(c->params.at("channel").get<int>());
      if (!ch) throw Error("cache uses an unknown channel");
      cache_channel = ch;
      s.miss_stall = transfer_cycles(s.line_bytes, *ch, p.dma);
      s.hit_extra = c->params.at("hit_latency").get<u64>() - 1;
      s.elem_bytes = arr.element_bytes();
    } else if (c->kind == "lis_channel") {
      s.kind = StoreKind::Lis;
      const Channel* ch = p.channel_by_id(c->params.at("channel").get<int>());
      if (!ch) throw Error("lis channel for '" + arr.name + "' uses an unknown channel");
      s.elem_bytes = arr.element_bytes();
      s.access_stall = ch->latency + ceil_div(s.elem_bytes, ch->bytes_per_cycle);
    } else {
      throw Error("array '" + arr.name + "' is bound to non-storage component '" + c->id +
                  "'");
    }
  }
  (void)cache_channel;

  // Pre-pass: tile activation order per buffer (each run is one DMA fetch).
  bool any_buffer = false;
  for (const Store& s : stores) any_buffer |= (s.kind == StoreKind::Buffer);
  if (any_buffer) {
    walk_instances(k, cap, [&](const InstanceInfo& info, const std::vector<InstanceAccess>& as) {
      for (const InstanceAccess& ia : as) {
        Store& s = stores[size_t(ia.array)];
        if (s.kind != StoreKind::Buffer) continue;
        u64 tid = tile_of(ia.flat, k.arrays[size_t(ia.array)].dims, s.tile);
        if (s.runs.empty() || s.runs.back().second != tid) s.runs.push_back({info.index, tid});
      }
    });
    for (Store& s : stores)
      if (s.kind == StoreKind::Buffer && s.double_buffer && s.fetch && !s.runs.empty())
        s.ready_at = s.tr;  // first fetch is launched at cycle 0
  }

  CacheModel cache(p.cache);
  if (csv) (*csv) << "instance,stmt,start_cycle,transfer,conflict,cache,lis\n";

  u64 now = 0;
  std::vector<std::vector<u64>> pending(k.arrays.size());  // addresses this instance
  std::vector<int> touched;

  walk_instances(k, cap, [&](const InstanceInfo& info, const std::vector<InstanceAccess>& as) {
    u64 st_transfer = 0, st_conflict = 0, st_cache = 0, st_lis = 0;
    touched.clear();

    for (const InstanceAccess& ia : as) {
      Store& s = stores[size_t(ia.array)];
      ArrayCounters& ac = rep.arrays[k.arrays[size_t(ia.array)].name];
      u64 n_ops = ia.kind == AccessKind::Accum ? 2 : 1;
      ac.accesses += n_ops;
      switch (s.kind) {
        case StoreKind::Group:
          if (pending[size_t(ia.array)].empty()) touched.push_back(ia.array);
          pending[size_t(ia.array)].push_back(ia.flat);
          break;
        case StoreKind::Buffer:
          if (pending[size_t(ia.array)].empty()) touched.push_back(ia.array);
          pending[size_t(ia.array)].push_back(
              tile_local(ia.flat, k.arrays[size_t(ia.array)].dims, s.tile));
          break;
        case StoreKind::Cache: {
          u64 line = ia.flat * s.elem_bytes / s.line_bytes;
          for (u64 op = 0; op < n_ops; ++op) {
            if (cache.access(ia.array, line)) {
              st_cache += s.hit_extra;
              ac.stall_cycles += s.hit_extra;
            } else {
              st_cache += s.miss_stall;
              ac.misses += 1;
              ac.stall_cycles += s.miss_stall;
              rep.offchip_bytes += s.line_bytes;
            }
          }
          break;
        }
        case StoreKind::Lis:
          st_lis += n_ops * s.access_stall;
          ac.stall_cycles += n_ops * s.access_stall;
          rep.offchip_bytes += n_ops * s.elem_bytes;
          break;
      }
    }

    // Tile switches fire before the bank-conflict accounting: the instance
    // that first touches a tile waits for (or triggers) its transfer.
    std::sort(touched.begin(), touched.end());
    for (int ai : touched) {
      Store& s = stores[size_t(ai)];
      if (s.kind != StoreKind::Buffer) continue;
      ArrayCounters& ac = rep.arrays[k.arrays[size_t(ai)].name];
      while (s.run_pos < s.runs.size() && s.runs[s.run_pos].first == info.index) {
        u64 t = now + st_transfer + st_conflict + st_cache + st_lis;
        if (s.active && s.writeback) {
          st_transfer += s.tr;
          ac.stall_cycles += s.tr;
          rep.offchip_bytes += s.tile_bytes;
          t += s.tr;
        }
        if (s.fetch) {
          if (s.double_buffer) {
            u64 wait = s.ready_at > t ? s.ready_at - t : 0;
            st_transfer += wait;
            ac.stall_cycles += wait;
            s.ready_at = t + wait + s.tr;  // prefetcher moves on to the next tile
          } else {
            st_transfer += s.tr;
            ac.stall_cycles += s.tr;
          }
          rep.offchip_bytes += s.tile_bytes;
        }
        s.active = true;
        ++s.run_pos;
      }
    }

    for (int ai : touched) {
      Store& s = stores[size_t(ai)];
      std::vector<u64>& addrs = pending[size_t(ai)];
      u64 excess = conflict_excess(addrs, s.banks, s.ports, s.cyclic, s.wpb);
      if (excess > 0) {
        st_conflict += excess;
        ArrayCounters& ac = rep.arrays[k.arrays[size_t(ai)].name];
        ac.conflicts += excess;
        ac.stall_cycles += excess;
      }
      addrs.clear();
    }

    if (csv && (st_transfer | st_conflict | st_cache | st_lis))
      (*csv) << info.index << ',' << info.stmt_id << ',' << now << ',' << st_transfer << ','
             << st_conflict << ',' << st_cache << ',' << st_lis << '\n';

    rep.transfer_stall += st_transfer;
    rep.bank_conflict_stall += st_conflict;
    rep.cache_miss_stall += st_cache;
    rep.lis_stall += st_lis;
    rep.compute_cycles += 1;
    now += 1 + st_transfer + st_conflict + st_cache + st_lis;
  });

  // Drain dirty tiles after the last instance.
  for (size_t i = 0; i < stores.size(); ++i) {
    Store& s = stores[i];
    if (s.kind == StoreKind::Buffer && s.writeback && s.active) {
      rep.transfer_stall += s.tr;
      rep.arrays[k.arrays[i].name].stall_cycles += s.tr;
      rep.offchip_bytes += s.tile_bytes;
      now += s.tr;
    }
  }

  // Ensure every kernel array appears in the report.
  for (const auto& arr : k.arrays) rep.arrays[arr.name];

  rep.total_cycles = now;
  return rep;
}

}  // namespace memforge
