#include "memforge/partition.hpp"

#include <algorithm>
#include <functional>

namespace memforge {

using nlohmann::json;

const char* to_string(BankScheme s) {
  return s == BankScheme::Cyclic ? "cyclic" : "block";
}

json BankingChoice::to_json() const {
  return json{{"banks", banks},         {"cost", cost},
              {"ports", ports},         {"scheme", to_string(scheme)},
              {"verified", verified},   {"words_per_bank", words_per_bank}};
}

json BankingPlan::to_json() const {
  json arr = json::object(), buf = json::object();
  for (const auto& [n, c] : arrays) arr[n] = c.to_json();
  for (const auto& [n, c] : buffers) buf[n] = c.to_json();
  return json{{"arrays", std::move(arr)}, {"buffers", std::move(buf)}};
}

json SharingPlan::to_json() const {
  json gs = json::array();
  for (const auto& g : groups)
    gs.push_back(json{{"banks", g.banks},
                      {"id", g.id},
                      {"members", g.members},
                      {"ports", g.ports},
                      {"scheme", to_string(g.scheme)},
                      {"words_per_bank", g.words_per_bank}});
  return gs;
}

int SharingPlan::group_of(const std::string& array) const {
  for (const auto& g : groups)
    for (const auto& m : g.members)
      if (m == array) return g.id;
  return -1;
}

BankingProblem banking_problem_for_array(const Kernel& k, const std::string& array,
                                         u64 cap) {
  const ArrayDecl* a = k.find_array(array);
  if (!a) throw Error("banking: unknown array '" + array + "'");
  BankingProblem prob;
  ArrayInstanceGroups g = collect_instance_groups(k, array, cap);
  prob.groups = std::move(g.groups);
  prob.words = next_pow2(a->elements());
  prob.required = std::max<i64>(g.max_distinct, 1);
  return prob;
}

BankingProblem banking_problem_for_tile(const Kernel& k, const std::string& array,
                                        const std::vector<i64>& tile, u64 cap) {
  const ArrayDecl* a = k.find_array(array);
  if (!a) throw Error("banking: unknown array '" + array + "'");
  const std::vector<i64>& dims = a->dims;
  ArrayInstanceGroups g = collect_instance_groups(k, array, cap);

  u64 tile_elems = 1;
  for (i64 t : tile) tile_elems *= u64(t);
  BankingProblem prob;
  prob.words = next_pow2(tile_elems);
  for (auto& grp : g.groups) {
    std::vector<u64> local;
    for (u64 flat : grp) {
      std::vector<u64> idx(dims.size());
      u64 f = flat;
      for (size_t d = dims.size(); d-- > 0;) {
        idx[d] = f % u64(dims[d]);
        f /= u64(dims[d]);
      }
      u64 lf = 0;
      for (size_t d = 0; d < dims.size(); ++d)
        lf = lf * u64(tile[d]) + idx[d] % u64(tile[d]);
      local.push_back(lf);
    }
    std::sort(local.begin(), local.end());
    local.erase(std::unique(local.begin(), local.end()), local.end());
    prob.required = std::max<i64>(prob.required, i64(local.size()));
    prob.groups.push_back(std::move(local));
  }
  return prob;
}

bool verify_conflict_free(const std::vector<std::vector<u64>>& groups, i64 banks,
                          i64 ports, BankScheme scheme, u64 words_per_bank) {
  std::vector<i64> count(size_t(banks), 0);
  for (const auto& g : groups) {
    for (i64& c : count) c = 0;
    for (u64 addr : g) {
      u64 b = scheme == BankScheme::Cyclic ? addr % u64(banks) : addr / words_per_bank;
      if (b >= u64(banks)) return false;  // address beyond the declared word space
      if (++count[size_t(b)] > ports) return false;
    }
  }
  return true;
}

BankingChoice plan_banking(const BankingProblem& prob, const PlatformSpec& p,
                           const std::string& what) {
  const u64 W = std::max<u64>(prob.words, 1);
  const u64 n_lo = W > p.bank.max_words ? W / p.bank.max_words : 1;
  u64 bound = sat_mul(2 * u64(prob.required), std::max<u64>(1, W / p.bank.max_words));
  bound = std::min(next_pow2(bound) == bound ? bound : next_pow2(bound) / 2, W);
  // `bound` is the largest pow2 <= the search bound; never below n_lo.
  bound = std::max(bound, n_lo);

  bool have = false;
  BankingChoice best;
  for (u64 N = n_lo; N <= bound; N *= 2) {
    u64 wpb = W / N;
    for (BankScheme scheme : {BankScheme::Cyclic, BankScheme::Block}) {
      for (i64 ports = 1; ports <= i64(p.bank.max_ports); ++ports) {
        if (!verify_conflict_free(prob.groups, i64(N), ports, scheme, wpb)) continue;
        BankingChoice c;
        c.banks = i64(N);
        c.ports = ports;
        c.scheme = scheme;
        c.words_per_bank = wpb;
        c.cost = bank_cost(W, u64(ports), p.bank);
        c.verified = true;
        auto key = [](const BankingChoice& x) {
          return std::tuple(x.cost, x.banks, x.scheme == BankScheme::Block, x.ports);
        };
        if (!have || key(c) < key(best)) {
          best = c;
          have = true;
        }
        break;  // more ports at the same (N, scheme) only cost more
      }
    }
  }
  if (!have)
    throw Error("no conflict-free banking for " + what +
                " within the platform port/bank limits; reduce unrolling or widen the "
                "bank primitive");
  return best;
}

namespace {

// Flattened affine form of a whole access: sum of per-dimension expressions
// scaled by row-major strides.
AffineExpr flatten_affine(const Access& a, const std::vector<i64>& dims) {
  AffineExpr flat;
  i64 stride = 1;
  for (size_t d = dims.size(); d-- > 0;) {
    const AffineExpr& e = a.indices[d].affine;
    flat.constant += e.constant * stride;
    for (const auto& [var, c] : e.coeffs) flat.add_term(var, c * stride);
    stride *= dims[d];
  }
  return flat;
}

void visit_stmts_with_loops(const Kernel& k, const LoopNest& L,
                            std::vector<const LoopNest*>& chain,
                            const std::function<void(const Statement&,
                                                     const std::vector<const LoopNest*>&)>& fn) {
  chain.push_back(&L);
  for (const auto& item : L.body) {
    if (item.kind == LoopNest::ItemKind::Loop)
      visit_stmts_with_loops(k, L.children[item.index], chain, fn);
    else if (item.kind == LoopNest::ItemKind::Stmt)
      fn(k.statements[item.index], chain);
  }
  chain.pop_back();
}

}  // namespace

ModularProblem modular_problem_for_array(const Kernel& k, const std::string& array) {
  const ArrayDecl* arr = k.find_array(array);
  if (!arr) throw Error("banking: unknown array '" + array + "'");
  ModularProblem prob;
  prob.words = next_pow2(arr->elements());
  bool ok = true, any = false;

  std::vector<const LoopNest*> chain;
  auto on_stmt = [&](const Statement& st, const std::vector<const LoopNest*>& loops) {
    std::vector<AffineExpr> flats;
    for (const Access& a : st.accesses) {
      if (a.array != array) continue;
      if (!a.is_affine()) {
        ok = false;
        return;
      }
      flats.push_back(flatten_affine(a, arr->dims));
    }
    if (flats.empty()) return;
    any = true;
    for (size_t i = 1; i < flats.size(); ++i)
      if (!flats[i].same_coeffs(flats[0])) {
        ok = false;
        return;
      }
    // Unroll copies shift every term whose variable belongs to an unrolled
    // enclosing loop; expand those shifts into explicit offsets.
    std::vector<i64> offsets;
    for (const AffineExpr& f : flats) offsets.push_back(f.constant);
    for (const LoopNest* L : loops) {
      if (L->unroll <= 1) continue;
      auto it = flats[0].coeffs.find(L->var);
      if (it == flats[0].coeffs.end()) continue;
      std::vector<i64> widened;
      for (i64 base : offsets)
        for (i64 o = 0; o < L->unroll; ++o) widened.push_back(base + it->second * L->step * o);
      offsets = std::move(widened);
    }
    std::sort(offsets.begin(), offsets.end());
    offsets.erase(std::unique(offsets.begin(), offsets.end()), offsets.end());
    prob.required = std::max<i64>(prob.required, i64(offsets.size()));
    prob.offset_sets.push_back(std::move(offsets));
  };
  for (const auto& L : k.loops) visit_stmts_with_loops(k, L, chain, on_stmt);

  prob.eligible = ok && any;
  return prob;
}

bool modular_conflict_free(const std::vector<std::vector<i64>>& offset_sets, i64 banks,
                           i64 ports) {
  std::vector<i64> count(size_t(banks), 0);
  for (const auto& offs : offset_sets) {
    for (i64& c : count) c = 0;
    for (i64 o : offs) {
      i64 r = ((o % banks) + banks) % banks;
      if (++count[size_t(r)] > ports) return false;
    }
  }
  return true;
}

BankingChoice plan_banking_modular(const ModularProblem& prob, const PlatformSpec& p,
                                   const std::string& what) {
  const u64 W = std::max<u64>(prob.words, 1);
  const u64 n_lo = W > p.bank.max_words ? W / p.bank.max_words : 1;
  u64 bound = sat_mul(2 * u64(prob.required), std::max<u64>(1, W / p.bank.max_words));
  bound = std::min(next_pow2(bound) == bound ? bound : next_pow2(bound) / 2, W);
  bound = std::max(bound, n_lo);

  bool have = false;
  BankingChoice best;
  for (u64 N = n_lo; N <= bound; N *= 2) {
    for (i64 ports = 1; ports <= i64(p.bank.max_ports); ++ports) {
      if (!modular_conflict_free(prob.offset_sets, i64(N), ports)) continue;
      BankingChoice c;
      c.banks = i64(N);
      c.ports = ports;
      c.scheme = BankScheme::Cyclic;
      c.words_per_bank = W / N;
      c.cost = bank_cost(W, u64(ports), p.bank);
      c.verified = false;  // proven by the modular argument, not the oracle walk
      auto key = [](const BankingChoice& x) { return std::tuple(x.cost, x.banks, x.ports); };
      if (!have || key(c) < key(best)) {
        best = c;
        have = true;
      }
      break;
    }
  }
  if (!have)
    throw Error("no conflict-free cyclic banking for " + what +
                " within the platform port/bank limits");
  return best;
}

BankingChoice plan_banking_for_array(const Kernel& k, const std::string& array,
                                     const PlatformSpec& p, u64 cap) {
  if (dynamic_instance_count(k) <= cap)
    return plan_banking(banking_problem_for_array(k, array, cap), p,
                        "array '" + array + "'");
  ModularProblem mp = modular_problem_for_array(k, array);
  if (!mp.eligible)
    throw Error("array '" + array +
                "' exceeds the iteration cap and is not eligible for the closed-form "
                "conflict check");
  return plan_banking_modular(mp, p, "array '" + array + "'");
}

std::map<std::string, Lifetime> compute_lifetimes(const Kernel& k, u64 cap,
                                                  std::vector<std::string>* unused) {
  std::map<int, Lifetime> seen;
  u64 total = 0;
  walk_instances(k, cap, [&](const InstanceInfo& info, const std::vector<InstanceAccess>& as) {
    total = info.index + 1;
    for (const auto& ia : as) {
      auto it = seen.find(ia.array);
      if (it == seen.end())
        seen[ia.array] = Lifetime{info.index, info.index};
      else
        it->second.last = info.index;
    }
  });

  std::map<std::string, Lifetime> out;
  for (int i = 0; i < int(k.arrays.size()); ++i) {
    const ArrayDecl& a = k.arrays[size_t(i)];
    auto it = seen.find(i);
    if (it == seen.end()) {
      if (unused) unused->push_back(a.name);
      continue;
    }
    Lifetime lt = it->second;
    if (a.direction == Direction::Input || a.direction == Direction::Inout) lt.first = 0;
    if (a.direction == Direction::Output || a.direction == Direction::Inout)
      lt.last = total - 1;
    out[a.name] = lt;
  }
  return out;
}

SharingPlan plan_sharing(const std::map<std::string, Lifetime>& lifetimes,
                         const std::map<std::string, BankingChoice>& banking) {
  struct Item {
    const std::string* name;
    const BankingChoice* bc;
    Lifetime lt;
  };
  std::vector<Item> items;
  std::vector<const std::string*> untouched;
  for (const auto& [name, bc] : banking) {
    auto it = lifetimes.find(name);
    if (it == lifetimes.end())
      untouched.push_back(&name);
    else
      items.push_back({&name, &bc, it->second});
  }
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
    if (a.lt.first != b.lt.first) return a.lt.first < b.lt.first;
    return *a.name < *b.name;
  });

  SharingPlan plan;
  std::vector<std::vector<Lifetime>> member_lts;  // parallel to plan.groups
  for (const Item& it : items) {
    int placed = -1;
    for (size_t g = 0; g < plan.groups.size(); ++g) {
      SharingGroup& grp = plan.groups[g];
      if (grp.banks != it.bc->banks || grp.ports != it.bc->ports ||
          grp.scheme != it.bc->scheme)
        continue;
      bool clash = false;
      for (const Lifetime& m : member_lts[g]) clash |= m.overlaps(it.lt);
      if (clash) continue;
      grp.members.push_back(*it.name);
      grp.words_per_bank = std::max(grp.words_per_bank, it.bc->words_per_bank);
      member_lts[g].push_back(it.lt);
      placed = int(g);
      break;
    }
    if (placed < 0) {
      SharingGroup grp;
      grp.id = int(plan.groups.size());
      grp.members = {*it.name};
      grp.banks = it.bc->banks;
      grp.ports = it.bc->ports;
      grp.scheme = it.bc->scheme;
      grp.words_per_bank = it.bc->words_per_bank;
      plan.groups.push_back(std::move(grp));
      member_lts.push_back({it.lt});
    }
  }
  // Declared-but-never-touched arrays keep private storage.
  std::sort(untouched.begin(), untouched.end(),
            [](const std::string* a, const std::string* b) { return *a < *b; });
  for (const std::string* name : untouched) {
    const BankingChoice& bc = banking.at(*name);
    SharingGroup grp;
    grp.id = int(plan.groups.size());
    grp.members = {*name};
    grp.banks = bc.banks;
    grp.ports = bc.ports;
    grp.scheme = bc.scheme;
    grp.words_per_bank = bc.words_per_bank;
    plan.groups.push_back(std::move(grp));
  }
  return plan;
}

}  // namespace memforge
