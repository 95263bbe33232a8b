#include "memforge/emit.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>

namespace memforge {

namespace {

void collect_names(const LoopNest& L, std::set<std::string>& out) {
  out.insert(L.var);
  for (const auto& c : L.children) collect_names(c, out);
}

std::set<std::string> used_names(const Kernel& k) {
  std::set<std::string> out;
  for (const auto& a : k.arrays) out.insert(a.name);
  for (const auto& [n, v] : k.constants) {
    (void)v;
    out.insert(n);
  }
  for (const auto& L : k.loops) collect_names(L, out);
  return out;
}

std::string fresh_name(std::string base, const std::set<std::string>& taken) {
  while (taken.count(base)) base += "_";
  return base;
}

LoopNest* find_loop(std::vector<LoopNest>& loops, const std::string& var) {
  for (auto& L : loops) {
    if (L.var == var) return &L;
    if (LoopNest* r = find_loop(L.children, var)) return r;
  }
  return nullptr;
}

void stmts_under(const LoopNest& L, std::vector<int>& out) {
  for (const auto& item : L.body) {
    if (item.kind == LoopNest::ItemKind::Stmt)
      out.push_back(item.index);
    else if (item.kind == LoopNest::ItemKind::Loop)
      stmts_under(L.children[size_t(item.index)], out);
  }
}

AffineExpr flat_affine(const std::vector<IndexExpr>& idx, const std::vector<i64>& dims) {
  AffineExpr flat;
  i64 stride = 1;
  for (size_t d = dims.size(); d-- > 0;) {
    const AffineExpr& e = idx[d].affine;
    flat.constant += e.constant * stride;
    for (const auto& [var, c] : e.coeffs) flat.add_term(var, c * stride);
    stride *= dims[d];
  }
  return flat;
}

// Bare when a single coefficient-1 variable; otherwise parenthesized.
std::string guard(const AffineExpr& e) {
  std::string s = print_affine(e);
  if (e.constant == 0 && e.coeffs.size() == 1 && e.coeffs.begin()->second == 1) return s;
  return "(" + s + ")";
}

std::string bank_expr_group(const AffineExpr& flat, i64 banks, bool cyclic, u64 wpb) {
  if (banks == 1) return "0";
  if (flat.is_constant()) {
    i64 v = cyclic ? ((flat.constant % banks) + banks) % banks
                   : flat.constant / i64(wpb);
    return std::to_string(v);
  }
  return guard(flat) + (cyclic ? "%" : "/") +
         std::to_string(cyclic ? banks : i64(wpb));
}

std::string bank_expr_tile(const std::vector<IndexExpr>& idx, const std::vector<i64>& dims,
                           const std::vector<i64>& tile, i64 banks, bool cyclic, u64 wpb) {
  if (banks == 1) return "0";
  // Tile-local flat address as text: ((i_d % t_d) * stride_d + ...).
  bool all_const = true;
  for (const auto& ix : idx) all_const &= ix.affine.is_constant();
  if (all_const) {
    u64 lf = 0;
    for (size_t d = 0; d < dims.size(); ++d)
      lf = lf * u64(tile[d]) + u64(idx[d].affine.constant) % u64(tile[d]);
    u64 b = cyclic ? lf % u64(banks) : lf / wpb;
    return std::to_string(b);
  }
  std::vector<std::string> parts;
  i64 stride = 1;
  std::vector<std::string> scaled(dims.size());
  for (size_t d = dims.size(); d-- > 0;) {
    if (tile[d] > 1) {
      std::string term = tile[d] == dims[d]
                             ? guard(idx[d].affine)
                             : guard(idx[d].affine) + "%" + std::to_string(tile[d]);
      if (stride > 1) term = "(" + term + ")*" + std::to_string(stride);
      scaled[d] = term;
    }
    stride *= tile[d];
  }
  for (size_t d = 0; d < dims.size(); ++d)
    if (!scaled[d].empty()) parts.push_back(scaled[d]);
  if (parts.empty()) return "0";
  std::string whole = parts[0];
  for (size_t i = 1; i < parts.size(); ++i) whole += "+" + parts[i];
  if (parts.size() > 1 || whole.find('%') != std::string::npos ||
      whole.find('*') != std::string::npos)
    whole = "(" + whole + ")";
  return whole + (cyclic ? "%" : "/") + std::to_string(cyclic ? banks : i64(wpb));
}

}  // namespace

std::string emit_lowered_ir(Kernel& k, const MemoryArchitecture& arch,
                            const TilingPlan& tiling) {
  // 1. Materialize transfers for tiled arrays that are not yet lowered.
  // Strip-mining renames the loop it splits; later arrays tiled on the same
  // loop still carry the original name in their path, so remember the rename.
  std::map<std::string, std::pair<std::string, std::string>> splits;  // var -> {outer, inner}
  for (const auto& [name, te] : tiling.arrays) {
    if (k.has_transfer_for(name)) continue;
    const ArrayDecl* arr = k.find_array(name);
    const std::vector<i64>& dims = arr->dims;

    int split_dim = -1;
    bool one_dim = true;
    for (size_t d = 0; d < dims.size(); ++d) {
      if (te.tile[d] == dims[d]) continue;
      if (split_dim >= 0) one_dim = false;
      split_dim = int(d);
    }

    std::string split_var;
    bool clean = one_dim && split_dim >= 0;
    if (clean) {
      for (const Statement& st : k.statements)
        for (const Access& acc : st.accesses) {
          if (acc.array != name) continue;
          const AffineExpr& e = acc.indices[size_t(split_dim)].affine;
          if (acc.indices[size_t(split_dim)].is_opaque() || e.constant != 0 ||
              e.coeffs.size() != 1 || e.coeffs.begin()->second != 1) {
            clean = false;
            break;
          }
          const std::string& v = e.coeffs.begin()->first;
          if (split_var.empty())
            split_var = v;
          else if (split_var != v)
            clean = false;
        }
      if (split_var.empty()) clean = false;
      if (clean && split_var != te.path[size_t(te.level)]) clean = false;
    }

    LoopNest* L = clean ? find_loop(k.loops, split_var) : nullptr;
    if (L) {
      const i64 td = te.tile[size_t(split_dim)];
      clean = L->lower == 0 && L->step == 1 && L->trip() == dims[size_t(split_dim)] &&
              td % L->unroll == 0 && td < dims[size_t(split_dim)];
    }

    if (clean && L) {
      const i64 td = te.tile[size_t(split_dim)];
      std::set<std::string> taken = used_names(k);
      std::string tvar = fresh_name(split_var + "_t", taken);
      taken.insert(tvar);
      std::string ivar = fresh_name(split_var + "_i", taken);

      std::vector<int> inner_stmts;
      stmts_under(*L, inner_stmts);
      for (int si : inner_stmts)
        for (Access& acc : k.statements[size_t(si)].accesses)
          for (IndexExpr& ix : acc.indices) {
            if (ix.is_opaque()) continue;
            auto it = ix.affine.coeffs.find(split_var);
            if (it == ix.affine.coeffs.end()) continue;
            i64 c = it->second;
            ix.affine.coeffs.erase(it);
            ix.affine.add_term(tvar, c * td);
            ix.affine.add_term(ivar, c);
          }

      LoopNest inner = std::move(*L);
      inner.var = ivar;
      inner.lower = 0;
      inner.upper = td;

      LoopNest outer;
      outer.var = tvar;
      outer.lower = 0;
      outer.upper = dims[size_t(split_dim)] / td;
      int tr = int(k.transfers.size());
      k.transfers.push_back({name, te.tile, "dma0"});
      outer.children.push_back(std::move(inner));
      outer.body = {{LoopNest::ItemKind::Transfer, tr}, {LoopNest::ItemKind::Loop, 0}};
      *L = std::move(outer);
      splits.emplace(split_var, std::make_pair(tvar, ivar));
    } else {
      // In-place lowering: the governing loop re-requests the array's tile
      // each iteration (a resident tile makes that a no-op).
      LoopNest* g = nullptr;
      std::vector<LoopNest>* scope = &k.loops;
      for (int lvl = 0; lvl <= te.level; ++lvl) {
        const std::string& want = te.path[size_t(lvl)];
        auto ren = splits.find(want);
        g = nullptr;
        for (auto& cand : *scope)
          if (cand.var == want ||
              (ren != splits.end() && cand.var == ren->second.first))
            g = &cand;
        if (!g) throw Error("governing loop for '" + name + "' disappeared");
        scope = &g->children;
        if (lvl < te.level && ren != splits.end() && g->var == ren->second.first) {
          // Descending through a strip-mined level: the original children
          // moved into the inner loop.
          for (auto& cand : *scope)
            if (cand.var == ren->second.second) scope = &cand.children;
        }
      }
      int tr = int(k.transfers.size());
      k.transfers.push_back({name, te.tile, "dma0"});
      auto pos = g->body.begin();
      while (pos != g->body.end() && pos->kind == LoopNest::ItemKind::Transfer) ++pos;
      g->body.insert(pos, {LoopNest::ItemKind::Transfer, tr});
    }
  }

  // 2. Regenerate every storage annotation from the architecture.
  for (Statement& st : k.statements)
    for (Access& acc : st.accesses) {
      acc.mem.reset();
      auto bit = arch.bindings.find(acc.array);
      if (bit == arch.bindings.end()) continue;
      const Component* c = arch.find(bit->second.component);
      if (!c) continue;
      MemAnnotation m;
      m.component = c->id;
      if (c->kind == "plm" && c->params.contains("arrays")) {
        bool opaque = false;
        for (const auto& ix : acc.indices) opaque |= ix.is_opaque();
        if (opaque) {
          m.unbounded = true;
        } else {
          const ArrayDecl* arr = k.find_array(acc.array);
          m.bank = bank_expr_group(flat_affine(acc.indices, arr->dims),
                                   c->params.at("banks").get<i64>(),
                                   c->params.at("scheme") == "cyclic",
                                   c->params.at("words_per_bank").get<u64>());
          m.fixed_latency = 1;
        }
      } else if (c->kind == "plm") {
        const ArrayDecl* arr = k.find_array(acc.array);
        bool opaque = false;
        for (const auto& ix : acc.indices) opaque |= ix.is_opaque();
        if (opaque) {
          m.unbounded = true;
        } else {
          m.bank = bank_expr_tile(acc.indices, arr->dims,
                                  c->params.at("tile").get<std::vector<i64>>(),
                                  c->params.at("banks").get<i64>(),
                                  c->params.at("scheme") == "cyclic",
                                  c->params.at("words_per_bank").get<u64>());
          m.fixed_latency = 1;
        }
      } else {
        m.unbounded = true;  // cache or element-wise stream: variable latency
      }
      acc.mem = std::move(m);
    }

  return print_kernel(k);
}

}  // namespace memforge
