#include "memforge/layout.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

namespace memforge {

using nlohmann::json;

bool LayoutTransform::is_identity() const {
  for (size_t i = 0; i < perm.size(); ++i)
    if (perm[i] != static_cast<int>(i)) return false;
  return true;
}

json LayoutTransform::to_json() const { return json{{"perm", perm}}; }

json LayoutPlan::to_json() const {
  json o = json::object();
  for (const auto& [name, t] : arrays) o[name] = t.to_json();
  return o;
}

json TilingEntry::to_json() const {
  // `path`/`adopted` are working state, not part of the plan contract.
  return json{{"depth", depth}, {"level", level}, {"tile", tile}, {"tile_bytes", tile_bytes}};
}

json TilingPlan::to_json() const {
  json o = json::object();
  for (const auto& [name, t] : arrays) o[name] = t.to_json();
  return o;
}

namespace {

std::vector<int> identity_perm(size_t n) {
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  return p;
}

// Statement visitor carrying the static chain of enclosing loop vars.
void visit_stmts(const Kernel& k, const LoopNest& L, std::vector<std::string>& vars,
                 const std::function<void(const Statement&, const std::vector<std::string>&)>& fn) {
  vars.push_back(L.var);
  for (const auto& item : L.body) {
    if (item.kind == LoopNest::ItemKind::Loop)
      visit_stmts(k, L.children[item.index], vars, fn);
    else if (item.kind == LoopNest::ItemKind::Stmt)
      fn(k.statements[item.index], vars);
  }
  vars.pop_back();
}

void visit_all_stmts(const Kernel& k,
                     const std::function<void(const Statement&, const std::vector<std::string>&)>& fn) {
  std::vector<std::string> vars;
  for (const auto& L : k.loops) visit_stmts(k, L, vars, fn);
}

}  // namespace

LayoutTransform select_layout(const Kernel& k, const std::string& array) {
  const ArrayDecl* a = k.find_array(array);
  if (!a) throw Error("select_layout: unknown array '" + array + "'");
  const int n = static_cast<int>(a->dims.size());
  LayoutTransform t;
  t.perm = identity_perm(size_t(n));
  if (a->applied_layout) {
    t.perm = *a->applied_layout;
    return t;
  }
  if (n < 2) return t;

  std::vector<u64> votes(size_t(n), 0);
  visit_all_stmts(k, [&](const Statement& st, const std::vector<std::string>& vars) {
    for (const Access& acc : st.accesses) {
      if (acc.array != array || !acc.is_affine()) continue;
      // The innermost loop var used by this access decides which dimension
      // should be fastest-varying in storage.
      int deepest = -1;
      std::string dvar;
      for (const IndexExpr& ix : acc.indices)
        for (const auto& [var, c] : ix.affine.coeffs) {
          (void)c;
          auto it = std::find(vars.rbegin(), vars.rend(), var);
          if (it == vars.rend()) continue;
          int pos = int(vars.rend() - it) - 1;
          if (pos > deepest) {
            deepest = pos;
            dvar = var;
          }
        }
      if (deepest < 0) continue;
      int hit = -1;
      bool unique = true;
      for (int d = 0; d < n; ++d)
        if (acc.indices[size_t(d)].affine.coeffs.count(dvar)) {
          if (hit >= 0) unique = false;
          hit = d;
        }
      if (hit >= 0 && unique) ++votes[size_t(hit)];
    }
  });

  u64 best = *std::max_element(votes.begin(), votes.end());
  if (best == 0 || votes[size_t(n - 1)] == best) return t;  // ties keep the order
  int winner = 0;
  for (int d = 0; d < n; ++d)
    if (votes[size_t(d)] == best) {
      winner = d;
      break;
    }
  t.perm.clear();
  for (int d = 0; d < n; ++d)
    if (d != winner) t.perm.push_back(d);
  t.perm.push_back(winner);
  return t;
}

void apply_layout(Kernel& k, const std::string& array, const std::vector<int>& perm) {
  ArrayDecl* a = k.find_array(array);
  if (!a) throw Error("apply_layout: unknown array '" + array + "'");
  if (a->applied_layout) {
    if (*a->applied_layout != perm)
      throw Error("apply_layout: '" + array + "' already carries a different layout");
    return;
  }
  if (perm.size() != a->dims.size())
    throw Error("apply_layout: permutation rank mismatch for '" + array + "'");

  auto permute_i64 = [&](const std::vector<i64>& v) {
    std::vector<i64> out(v.size());
    for (size_t i = 0; i < perm.size(); ++i) out[i] = v[size_t(perm[i])];
    return out;
  };
  a->dims = permute_i64(a->dims);
  for (Statement& st : k.statements)
    for (Access& acc : st.accesses) {
      if (acc.array != array) continue;
      std::vector<IndexExpr> out(acc.indices.size());
      for (size_t i = 0; i < perm.size(); ++i) out[i] = acc.indices[size_t(perm[i])];
      acc.indices = std::move(out);
    }
  for (TransferStmt& tr : k.transfers)
    if (tr.array == array) tr.tile = permute_i64(tr.tile);
  a->applied_layout = perm;
}

LayoutPlan plan_layout(Kernel& k, const ClassMap& classes) {
  LayoutPlan plan;
  for (const auto& a : k.arrays) {
    LayoutTransform t;
    if (classes.at(a.name).kind == AccessClassKind::Irregular) {
      t.perm = identity_perm(a.dims.size());
    } else {
      t = select_layout(k, a.name);
      if (!k.find_array(a.name)->applied_layout && !t.is_identity())
        apply_layout(k, a.name, t.perm);
    }
    plan.arrays[a.name] = std::move(t);
  }
  return plan;
}

namespace {

// Chain of loops (by var) from a nest root down to each statement touching
// the array, reduced to the longest common prefix.
struct CommonPath {
  std::vector<std::string> vars;
  bool found = false;       // at least one statement touches the array
  bool single_nest = true;  // all touches share one top-level nest
};

CommonPath common_path(const Kernel& k, const std::string& array) {
  CommonPath cp;
  visit_all_stmts(k, [&](const Statement& st, const std::vector<std::string>& vars) {
    bool touches = false;
    for (const Access& a : st.accesses) touches |= (a.array == array);
    if (!touches) return;
    if (!cp.found) {
      cp.vars = vars;
      cp.found = true;
      return;
    }
    if (vars.empty() || cp.vars.empty() || vars[0] != cp.vars[0]) {
      cp.single_nest = false;
      cp.vars.clear();
      return;
    }
    size_t n = 0;
    while (n < vars.size() && n < cp.vars.size() && vars[n] == cp.vars[n]) ++n;
    cp.vars.resize(n);
  });
  return cp;
}

u64 tile_id_of(u64 flat, const std::vector<i64>& dims, const std::vector<i64>& tile) {
  std::vector<u64> idx(dims.size());
  for (size_t d = dims.size(); d-- > 0;) {
    idx[d] = flat % u64(dims[d]);
    flat /= u64(dims[d]);
  }
  u64 id = 0;
  for (size_t d = 0; d < dims.size(); ++d)
    id = id * (u64(dims[d]) / u64(tile[d])) + idx[d] / u64(tile[d]);
  return id;
}

// Smallest prefix length of the common path whose loop iterations each stay
// inside a single tile, or -1 when none does.  Relies on the walk visiting
// equal prefixes consecutively (loops iterate lexicographically).
int governing_level(const Kernel& k, const ArrayDecl& arr, int arr_idx,
                    const std::vector<std::string>& path, const std::vector<i64>& tile,
                    u64 cap) {
  const size_t L = path.size();
  if (L == 0) return -1;
  struct LevelState {
    std::vector<i64> key;
    u64 tile_id = 0;
    bool open = false;
    bool feasible = true;
  };
  std::vector<LevelState> lv(L);
  walk_instances(k, cap, [&](const InstanceInfo& info, const std::vector<InstanceAccess>& as) {
    std::vector<i64> prefix;
    for (const InstanceAccess& ia : as) {
      if (ia.array != arr_idx) continue;
      if (prefix.empty()) {
        if (info.loops->size() < L) return;  // touch outside the path: cannot happen
        for (size_t i = 0; i < L; ++i) prefix.push_back((*info.loops)[i].second);
      }
      u64 tid = tile_id_of(ia.flat, arr.dims, tile);
      for (size_t lvl = 0; lvl < L; ++lvl) {
        LevelState& s = lv[lvl];
        if (!s.feasible) continue;
        std::vector<i64> key(prefix.begin(), prefix.begin() + lvl + 1);
        if (!s.open || key != s.key) {
          s.key = std::move(key);
          s.tile_id = tid;
          s.open = true;
        } else if (s.tile_id != tid) {
          s.feasible = false;
        }
      }
    }
  });
  for (size_t lvl = 0; lvl < L; ++lvl)
    if (lv[lvl].feasible) return int(lvl);
  return -1;
}

}  // namespace

TilingPlan select_tiling(const Kernel& k, const ClassMap& classes,
                         const PlacementPlan& placement, const PlatformSpec& p,
                         u64 slack, u64 cap) {
  TilingPlan plan;

  std::vector<const ArrayDecl*> cands;
  for (const auto& a : k.arrays) {
    const auto& e = placement.arrays.at(a.name);
    if (e.where != Placement::OffChip) continue;
    if (classes.at(a.name).kind != AccessClassKind::Regular) continue;
    if (!plm_eligible(a, p.bank)) continue;  // the buffer itself is PLM
    cands.push_back(&a);
  }
  if (cands.empty()) return plan;
  std::sort(cands.begin(), cands.end(),
            [](const ArrayDecl* x, const ArrayDecl* y) { return x->name < y->name; });
  const u64 share = slack / cands.size();

  for (const ArrayDecl* ap : cands) {
    const ArrayDecl& a = *ap;
    CommonPath cp = common_path(k, a.name);
    if (!cp.found || !cp.single_nest || cp.vars.empty()) continue;

    TilingEntry e;
    bool written = false;
    for (const Statement& st : k.statements)
      for (const Access& acc : st.accesses)
        if (acc.array == a.name && acc.writes()) written = true;
    e.depth = written ? 1 : 2;

    if (k.has_transfer_for(a.name)) {
      // Lowered input: adopt the recorded tiling instead of re-deriving it.
      for (const TransferStmt& tr : k.transfers)
        if (tr.array == a.name) {
          e.tile = tr.tile;
          break;
        }
      e.adopted = true;
      // The loop whose body holds the transfer is the governing loop.
      std::vector<std::string> chain;
      std::function<bool(const LoopNest&)> locate = [&](const LoopNest& L) {
        chain.push_back(L.var);
        for (const auto& item : L.body) {
          if (item.kind == LoopNest::ItemKind::Transfer &&
              k.transfers[item.index].array == a.name)
            return true;
          if (item.kind == LoopNest::ItemKind::Loop && locate(L.children[item.index]))
            return true;
        }
        chain.pop_back();
        return false;
      };
      bool located = false;
      for (const auto& L : k.loops)
        if (locate(L)) {
          located = true;
          break;
        }
      if (!located) throw Error("transfer for '" + a.name + "' is not inside a loop");
      e.path = chain;
      e.level = int(chain.size()) - 1;
    } else {
      // Largest power-of-two tile in each dimension, shrunk round-robin
      // (outer dimensions first) until depth x words x word_bits fits the
      // equal slack share.
      std::vector<i64> t(a.dims.size());
      for (size_t d = 0; d < a.dims.size(); ++d) t[d] = a.dims[d] & -a.dims[d];
      auto cost = [&](const std::vector<i64>& tt) {
        u64 words = 1;
        for (i64 x : tt) words *= u64(x);
        return u64(e.depth) * words * p.bank.word_bits;
      };
      bool fits = cost(t) <= share;
      while (!fits) {
        bool shrunk = false;
        for (size_t d = 0; d < t.size() && !fits; ++d) {
          if (t[d] > 1) {
            t[d] /= 2;
            shrunk = true;
            fits = cost(t) <= share;
          }
        }
        if (!shrunk) break;
      }
      if (!fits) continue;  // no affordable tile: stream element-wise instead

      int lvl = governing_level(k, a, k.array_index(a.name), cp.vars, t, cap);
      if (lvl < 0) continue;
      e.tile = std::move(t);
      e.path = cp.vars;
      e.level = lvl;
    }

    u64 elems = 1;
    for (i64 x : e.tile) elems *= u64(x);
    e.tile_bytes = elems * a.element_bytes();
    plan.arrays[a.name] = std::move(e);
  }
  return plan;
}

}  // namespace memforge
