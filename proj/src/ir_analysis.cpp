#include <algorithm>
#include <cstring>

#include "memforge/analysis.hpp"

namespace memforge {
namespace {

u64 count_loop(const Kernel& k, const LoopNest& L) {
  u64 per_iter = 0;
  for (const auto& item : L.body) {
    if (item.kind == LoopNest::ItemKind::Stmt)
      per_iter = sat_add(per_iter, 1);
    else if (item.kind == LoopNest::ItemKind::Loop)
      per_iter = sat_add(per_iter, count_loop(k, L.children[item.index]));
  }
  u64 blocks = u64(L.trip() / L.unroll);
  return sat_mul(blocks, per_iter);
}

u64 opaque_address(u64 instance, int ordinal, u64 elements) {
  char buf[12];
  std::memcpy(buf, &instance, 8);
  std::memcpy(buf + 8, &ordinal, 4);
  return fnv1a64(std::string_view(buf, sizeof buf)) % elements;
}

struct LoopCtx {
  const LoopNest* loop;
  i64 value_base = 0;  // lower + step * block_index * unroll
};

struct Walker {
  const Kernel& k;
  const InstanceFn& on_instance;
  const TransferFn& on_transfer;
  std::vector<LoopCtx> stack;
  std::vector<i64> offsets;
  std::vector<InstanceAccess> scratch;
  std::vector<std::pair<std::string, i64>> loop_values;
  u64 counter = 0;

  Walker(const Kernel& kk, const InstanceFn& fi, const TransferFn& ft)
      : k(kk), on_instance(fi), on_transfer(ft) {}

  void run() {
    for (const auto& L : k.loops) exec(L);
  }

  void exec(const LoopNest& L) {
    const i64 blocks = L.unroll > 0 ? L.trip() / L.unroll : 0;
    stack.push_back({&L, 0});
    for (i64 b = 0; b < blocks; ++b) {
      stack.back().value_base = L.lower + L.step * (b * L.unroll);
      for (const auto& item : L.body) {
        switch (item.kind) {
          case LoopNest::ItemKind::Loop:
            exec(L.children[item.index]);
            break;
          case LoopNest::ItemKind::Stmt:
            emit(item.index);
            break;
          case LoopNest::ItemKind::Transfer:
            if (on_transfer) on_transfer(k.transfers[item.index]);
            break;
        }
      }
    }
    stack.pop_back();
  }

  i64 var_value(const std::string& var) const {
    for (int d = int(stack.size()) - 1; d >= 0; --d) {
      const LoopCtx& c = stack[d];
      if (c.loop->var == var)
        return c.value_base + c.loop->step * offsets[size_t(d)];
    }
    throw Error("unbound induction variable '" + var + "'");
  }

  void eval_copy(int stmt_id) {
    const Statement& st = k.statements[stmt_id];
    for (int ai = 0; ai < int(st.accesses.size()); ++ai) {
      const Access& a = st.accesses[ai];
      int arr_idx = k.array_index(a.array);
      const ArrayDecl& arr = k.arrays[arr_idx];
      bool opq = false;
      u64 flat = 0;
      for (size_t d = 0; d < a.indices.size(); ++d) {
        const IndexExpr& ix = a.indices[d];
        if (ix.is_opaque()) {
          opq = true;
          break;
        }
        i64 v = ix.affine.constant;
        for (const auto& [var, c] : ix.affine.coeffs) v += c * var_value(var);
        if (v < 0 || v >= arr.dims[d])
          throw Error("index of '" + a.array + "' out of bounds at runtime");
        flat = flat * u64(arr.dims[d]) + u64(v);
      }
      if (opq) flat = opaque_address(counter, ai, arr.elements());
      scratch.push_back({arr_idx, ai, a.kind, opq, flat});
    }
  }

  void emit(int stmt_id) {
    scratch.clear();
    const size_t depth = stack.size();
    offsets.assign(depth, 0);
    while (true) {
      eval_copy(stmt_id);
      int d = int(depth) - 1;
      for (; d >= 0; --d) {
        if (++offsets[size_t(d)] < stack[size_t(d)].loop->unroll) break;
        offsets[size_t(d)] = 0;
      }
      if (d < 0) break;
    }
    loop_values.clear();
    for (const LoopCtx& c : stack) loop_values.emplace_back(c.loop->var, c.value_base);
    on_instance(InstanceInfo{counter, stmt_id, &loop_values}, scratch);
    ++counter;
  }
};

struct StaticCtx {
  i64 unroll_product = 1;
};

void static_walk(const Kernel& k, const LoopNest& L, i64 uprod,
                 const std::function<void(int, i64)>& on_stmt) {
  uprod *= L.unroll;
  for (const auto& item : L.body) {
    if (item.kind == LoopNest::ItemKind::Loop)
      static_walk(k, L.children[item.index], uprod, on_stmt);
    else if (item.kind == LoopNest::ItemKind::Stmt)
      on_stmt(item.index, uprod);
  }
}

}  // namespace

u64 dynamic_instance_count(const Kernel& k) {
  u64 total = 0;
  for (const auto& L : k.loops) total = sat_add(total, count_loop(k, L));
  return total;
}

u64 dynamic_instance_count(const Kernel& k, const LoopNest& nest) {
  return count_loop(k, nest);
}

void walk_instances(const Kernel& k, u64 cap, const InstanceFn& on_instance,
                    const TransferFn& on_transfer) {
  u64 n = dynamic_instance_count(k);
  if (n > cap)
    throw Error("iteration space has " + std::to_string(n) +
                " statement instances, cap is " + std::to_string(cap));
  Walker w(k, on_instance, on_transfer);
  w.run();
}

ClassMap classify_accesses(const Kernel& k) {
  ClassMap out;
  for (const auto& a : k.arrays) out[a.name] = AccessClass{};

  std::map<std::string, bool> any_opaque;
  // reuse + parallel demand come from the statement structure alone
  for (const auto& st : k.statements) {
    for (const auto& a : st.accesses)
      if (!a.is_affine()) any_opaque[a.array] = true;
    for (size_t i = 0; i < st.accesses.size(); ++i) {
      const Access& a = st.accesses[i];
      if (!a.is_affine()) continue;
      for (size_t j = i + 1; j < st.accesses.size(); ++j) {
        const Access& b = st.accesses[j];
        if (b.array != a.array || !b.is_affine()) continue;
        bool same_shape = a.indices.size() == b.indices.size();
        bool same_coeffs = same_shape, differs = false;
        for (size_t d = 0; same_coeffs && d < a.indices.size(); ++d) {
          same_coeffs = a.indices[d].affine.same_coeffs(b.indices[d].affine);
          if (a.indices[d].affine.constant != b.indices[d].affine.constant)
            differs = true;
        }
        if (same_coeffs && differs) out[a.array].reuse = true;
      }
    }
  }

  std::map<std::string, i64> parallel;
  auto on_stmt = [&](int stmt_id, i64 uprod) {
    std::map<std::string, i64> per;
    for (const auto& a : k.statements[stmt_id].accesses) per[a.array]++;
    for (const auto& [name, cnt] : per)
      parallel[name] = std::max(parallel[name], cnt * uprod);
  };
  for (const auto& L : k.loops) static_walk(k, L, 1, on_stmt);

  for (const auto& arr : k.arrays) {
    AccessClass& c = out[arr.name];
    c.required_parallel = std::max<i64>(parallel[arr.name], 1);
    if (arr.irregular || any_opaque.count(arr.name))
      c.kind = AccessClassKind::Irregular;
    else if (arr.locality)
      c.kind = AccessClassKind::Locality;
    else
      c.kind = AccessClassKind::Regular;
  }
  return out;
}

ArrayInstanceGroups collect_instance_groups(const Kernel& k,
                                            const std::string& array, u64 cap) {
  int idx = k.array_index(array);
  if (idx < 0) throw Error("unknown array '" + array + "'");
  ArrayInstanceGroups out;
  std::vector<u64> addrs;
  walk_instances(k, cap, [&](const InstanceInfo&, const std::vector<InstanceAccess>& acc) {
    addrs.clear();
    for (const auto& e : acc) {
      if (e.array != idx) continue;
      if (e.opaque) throw Error("array '" + array + "' has opaque accesses");
      addrs.push_back(e.flat);
    }
    if (addrs.empty()) return;
    std::sort(addrs.begin(), addrs.end());
    addrs.erase(std::unique(addrs.begin(), addrs.end()), addrs.end());
    out.max_distinct = std::max<i64>(out.max_distinct, i64(addrs.size()));
    out.groups.push_back(addrs);
  });
  return out;
}

i64 required_ports(const Kernel& k, const std::string& array, u64 cap) {
  const ArrayDecl* arr = k.find_array(array);
  if (!arr) throw Error("unknown array '" + array + "'");
  if (arr->irregular)
    throw Error("required_ports is undefined for irregular array '" + array + "'");
  auto groups = collect_instance_groups(k, array, cap);  // throws on opaque
  return std::max<i64>(groups.max_distinct, 1);
}

std::vector<TraceEntry> generate_trace(const Kernel& k, const std::string& array,
                                       u64 cap) {
  int idx = k.array_index(array);
  if (idx < 0) throw Error("unknown array '" + array + "'");
  std::vector<TraceEntry> out;
  walk_instances(k, cap, [&](const InstanceInfo& info,
                             const std::vector<InstanceAccess>& acc) {
    for (const auto& e : acc) {
      if (e.array != idx) continue;
      if (e.opaque)
        throw Error("cannot trace array '" + array + "': opaque access");
      if (e.kind == AccessKind::Accum) {
        out.push_back({info.index, e.flat, AccessKind::Read});
        out.push_back({info.index, e.flat, AccessKind::Write});
      } else {
        out.push_back({info.index, e.flat, e.kind});
      }
    }
  });
  return out;
}

void validate_dynamic(const Kernel& k, u64 cap) {
  struct WriteRec {
    int array;
    u64 flat;
    int ordinal;
  };
  std::vector<WriteRec> writes;
  walk_instances(k, cap, [&](const InstanceInfo&,
                             const std::vector<InstanceAccess>& acc) {
    writes.clear();
    for (const auto& e : acc) {
      if (e.kind == AccessKind::Read || e.opaque) continue;
      for (const auto& w : writes) {
        if (w.array == e.array && w.flat == e.flat && w.ordinal != e.stmt_access)
          throw Error("array '" + k.arrays[size_t(e.array)].name +
                      "' written twice at one address in a single instance");
      }
      writes.push_back({e.array, e.flat, e.stmt_access});
    }
  });
}

}  // namespace memforge
