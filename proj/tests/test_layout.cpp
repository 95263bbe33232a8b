#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "memforge/layout.hpp"

using namespace memforge;
using memforge::test::parse_kernel_ok;
using memforge::test::parse_platform_ok;

namespace {

// Independent residency oracle: enumerate every dynamic access of `array`
// with its loop-prefix values by direct tree interpretation, then check for
// each prefix length whether all accesses sharing a prefix value land in a
// single tile.  Mirrors nothing from the implementation but the definitions.
struct Touch {
  std::vector<i64> prefix;
  u64 tile_id;
};

u64 oracle_tile_id(u64 flat, const std::vector<i64>& dims, const std::vector<i64>& tile) {
  std::vector<u64> coord(dims.size());
  for (size_t d = dims.size(); d-- > 0;) {
    coord[d] = flat % u64(dims[d]);
    flat /= u64(dims[d]);
  }
  u64 id = 0;
  for (size_t d = 0; d < dims.size(); ++d)
    id = id * ceil_div(u64(dims[d]), u64(tile[d])) + coord[d] / u64(tile[d]);
  return id;
}

void collect_touches(const Kernel& k, const LoopNest& L, const std::string& array,
                     const std::vector<i64>& tile, std::map<std::string, i64>& env,
                     std::vector<std::string>& chain, std::vector<Touch>& out) {
  chain.push_back(L.var);
  for (i64 v = L.lower; v < L.upper; v += L.step) {
    env[L.var] = v;
    for (const auto& item : L.body) {
      if (item.kind == LoopNest::ItemKind::Loop) {
        collect_touches(k, L.children[item.index], array, tile, env, chain, out);
      } else if (item.kind == LoopNest::ItemKind::Stmt) {
        for (const Access& a : k.statements[item.index].accesses) {
          if (a.array != array) continue;
          const ArrayDecl* arr = k.find_array(array);
          u64 flat = 0;
          for (size_t d = 0; d < a.indices.size(); ++d) {
            i64 x = a.indices[d].affine.constant;
            for (auto& [var, c] : a.indices[d].affine.coeffs) x += c * env.at(var);
            flat = flat * u64(arr->dims[d]) + u64(x);
          }
          Touch t;
          for (const std::string& var : chain) t.prefix.push_back(env.at(var));
          t.tile_id = oracle_tile_id(flat, arr->dims, tile);
          out.push_back(t);
        }
      }
    }
  }
  env.erase(L.var);
  chain.pop_back();
}

int oracle_governing_level(const Kernel& k, const std::string& array,
                           const std::vector<i64>& tile) {
  std::vector<Touch> touches;
  std::map<std::string, i64> env;
  std::vector<std::string> chain;
  for (const auto& L : k.loops) collect_touches(k, L, array, tile, env, chain, touches);
  if (touches.empty()) return -1;
  size_t depth = touches[0].prefix.size();
  for (const Touch& t : touches) depth = std::min(depth, t.prefix.size());
  for (size_t lvl = 0; lvl < depth; ++lvl) {
    std::map<std::vector<i64>, u64> seen;
    bool ok = true;
    for (const Touch& t : touches) {
      std::vector<i64> key(t.prefix.begin(), t.prefix.begin() + lvl + 1);
      auto [it, fresh] = seen.emplace(key, t.tile_id);
      if (!fresh && it->second != t.tile_id) ok = false;
    }
    if (ok) return int(lvl);
  }
  return -1;
}

PlacementPlan offchip_plan(const Kernel& k) {
  PlacementPlan pp;
  for (const auto& a : k.arrays) {
    PlacementEntry e;
    e.where = Placement::OffChip;
    e.channel = 0;
    pp.arrays[a.name] = e;
  }
  return pp;
}

}  // namespace

TEST_CASE("layout vote: column traversal transposes storage") {
  Kernel k = parse_kernel_ok(R"(kernel colsum {
  array M: 32b[8],[16] input;
  array S: 32b[16] inout;
  loop j in 0..16 {
    loop i in 0..8 { read M[i][j], accum S[j]; }
  }
})");
  LayoutTransform t = select_layout(k, "M");
  CHECK(t.perm == std::vector<int>{1, 0});
  CHECK_FALSE(t.is_identity());
  CHECK(select_layout(k, "S").is_identity());  // rank 1

  apply_layout(k, "M", t.perm);
  const ArrayDecl* m = k.find_array("M");
  CHECK(m->dims == std::vector<i64>{16, 8});
  REQUIRE(m->applied_layout.has_value());
  std::string text = print_kernel(k);
  CHECK(text.find("read M[j][i]") != std::string::npos);
  CHECK(text.find("@layout(1,0)") != std::string::npos);

  // Re-parsing the rewritten kernel and re-selecting returns the note as-is.
  Kernel k2 = parse_kernel_ok(text);
  CHECK(select_layout(k2, "M").perm == std::vector<int>{1, 0});
}

TEST_CASE("layout vote: row traversal and ties keep the order") {
  Kernel row = parse_kernel_ok(R"(kernel rows {
  array M: 32b[8],[16] input;
  loop i in 0..8 {
    loop j in 0..16 { read M[i][j]; }
  }
})");
  CHECK(select_layout(row, "M").is_identity());

  // M[i][j] votes dim 1, M[j][i] votes dim 0: tied, keep declaration order.
  Kernel tie = parse_kernel_ok(R"(kernel sym {
  array X: 32b[8],[8] input;
  loop i in 0..8 {
    loop j in 0..8 { read X[i][j], read X[j][i]; }
  }
})");
  CHECK(select_layout(tie, "X").is_identity());

  // A variable hitting two dimensions of one access casts no vote.
  Kernel diag = parse_kernel_ok(R"(kernel diag {
  array D: 32b[8],[8] input;
  loop i in 0..8 { read D[i][i]; }
})");
  CHECK(select_layout(diag, "D").is_identity());
}

TEST_CASE("layout vote: majority across accesses") {
  // Two accesses walk M by columns, one by rows: columns win 2-1.
  Kernel k = parse_kernel_ok(R"(kernel maj {
  array M: 32b[4],[4] input;
  loop j in 0..4 {
    loop i in 0..4 { read M[i][j]; }
  }
  loop p in 0..4 {
    loop q in 0..4 { read M[q][p], read M[p][q]; }
  }
})");
  // Votes: dim0 gets M[i][j] (i inner) and M[q][p] (q inner); dim1 gets
  // M[p][q] (q inner).
  CHECK(select_layout(k, "M").perm == std::vector<int>{1, 0});
}

TEST_CASE("apply_layout guards") {
  Kernel k = parse_kernel_ok(R"(kernel g {
  array M: 32b[4],[8] input;
  loop i in 0..4 { read M[i][0]; }
})");
  CHECK_THROWS_AS(apply_layout(k, "M", {0}), Error);       // rank mismatch
  CHECK_THROWS_AS(apply_layout(k, "Zz", {0, 1}), Error);   // unknown array
  apply_layout(k, "M", {1, 0});
  CHECK_NOTHROW(apply_layout(k, "M", {1, 0}));             // same note: no-op
  CHECK(k.find_array("M")->dims == std::vector<i64>{8, 4});
  CHECK_THROWS_AS(apply_layout(k, "M", {0, 1}), Error);    // conflicting note
}

TEST_CASE("plan_layout rewrites in place, leaves irregular arrays alone") {
  Kernel k = parse_kernel_ok(R"(kernel pl {
  array M: 32b[8],[16] input;
  array Idx: 32b[8] input;
  array T: 32b[16],[16] input;
  loop j in 0..16 {
    loop i in 0..8 { read M[i][j], read Idx[i], read T[opaque(Idx)][j]; }
  }
})");
  ClassMap classes = classify_accesses(k);
  REQUIRE(classes.at("T").kind == AccessClassKind::Irregular);
  LayoutPlan plan = plan_layout(k, classes);
  CHECK(plan.arrays.at("M").perm == std::vector<int>{1, 0});
  CHECK(plan.arrays.at("T").is_identity());
  CHECK(k.find_array("M")->applied_layout.has_value());
  CHECK_FALSE(k.find_array("T")->applied_layout.has_value());

  // Planning the rewritten kernel again changes nothing (fixed point).
  std::string text = print_kernel(k);
  Kernel k2 = parse_kernel_ok(text);
  LayoutPlan plan2 = plan_layout(k2, classify_accesses(k2));
  CHECK(plan2.arrays.at("M").perm == std::vector<int>{1, 0});
  CHECK(print_kernel(k2) == text);
}

TEST_CASE("tile shrink: matrix halves round-robin to the budget share") {
  Kernel k = parse_kernel_ok(R"(kernel mt {
  array M: 32b[64],[64] input;
  array S: 32b[64] inout;
  loop i in 0..64 {
    loop j in 0..64 { read M[i][j], accum S[i]; }
  }
})");
  PlatformSpec p = parse_platform_ok(memforge::test::kDefaultPlatform);
  PlacementPlan pp = offchip_plan(k);
  pp.arrays.at("S").where = Placement::OnChipPlm;  // only M is a candidate

  TilingPlan tp = select_tiling(k, classify_accesses(k), pp, p, 16384, kDefaultIterationCap);
  REQUIRE(tp.arrays.count("M"));
  const TilingEntry& e = tp.arrays.at("M");
  // Read-only: double-buffered. [64,64] -> [32,64] -> [32,32] -> [16,32]
  // -> [16,16]: 2 x 256 words x 32 bits = 16384.
  CHECK(e.depth == 2);
  CHECK(e.tile == std::vector<i64>{16, 16});
  CHECK(e.tile_bytes == 1024);
  CHECK_FALSE(e.adopted);
  CHECK(e.path == std::vector<std::string>{"i", "j"});
  CHECK(e.level == oracle_governing_level(k, "M", e.tile));
  CHECK(e.level == 1);  // a row of tiles changes under i alone

  // A row-confined walk is governed by the outer loop.
  Kernel k2 = parse_kernel_ok(R"(kernel rows {
  array R: 32b[64],[16] input;
  loop i in 0..64 {
    loop j in 0..16 { read R[i][j]; }
  }
})");
  TilingPlan tp2 = select_tiling(k2, classify_accesses(k2), offchip_plan(k2), p,
                                 16384, kDefaultIterationCap);
  REQUIRE(tp2.arrays.count("R"));
  const TilingEntry& e2 = tp2.arrays.at("R");
  CHECK(e2.tile == std::vector<i64>{32, 8});  // [64,16]->[32,16]->[32,8]
  CHECK(e2.level == oracle_governing_level(k2, "R", e2.tile));
  CHECK(e2.level == 1);  // rows cross the 8-wide column tiles

  // Full-width tiles keep whole iterations of the outer loop resident.
  TilingPlan tp3 = select_tiling(k2, classify_accesses(k2), offchip_plan(k2), p,
                                 65536, kDefaultIterationCap);
  const TilingEntry& e3 = tp3.arrays.at("R");
  CHECK(e3.tile == std::vector<i64>{64, 16});  // 2 x 1024 x 32 fits outright
  CHECK(e3.level == oracle_governing_level(k2, "R", e3.tile));
  CHECK(e3.level == 0);
}

TEST_CASE("tile shrink: vector stream and written arrays") {
  Kernel k = parse_kernel_ok(R"(kernel vs {
  array A: 32b[1024] input;
  array B: 32b[1024] output;
  loop i in 0..1024 { read A[i], write B[i]; }
})");
  PlatformSpec p = parse_platform_ok(memforge::test::kDefaultPlatform);
  // Two candidates split the slack evenly: 32768 / 2 = 16384 each.
  TilingPlan tp = select_tiling(k, classify_accesses(k), offchip_plan(k), p,
                                32768, kDefaultIterationCap);
  REQUIRE(tp.arrays.count("A"));
  REQUIRE(tp.arrays.count("B"));
  // A double-buffers: 2 x 256 x 32 = 16384.  B is written: single buffer,
  // 1 x 512 x 32 = 16384.
  CHECK(tp.arrays.at("A").depth == 2);
  CHECK(tp.arrays.at("A").tile == std::vector<i64>{256});
  CHECK(tp.arrays.at("B").depth == 1);
  CHECK(tp.arrays.at("B").tile == std::vector<i64>{512});
  CHECK(tp.arrays.at("A").level == 0);
  CHECK(tp.arrays.at("A").level == oracle_governing_level(k, "A", {256}));
}

TEST_CASE("tiling skips non-candidates") {
  Kernel k = parse_kernel_ok(R"(kernel skip {
  array P: 32b[64] input;
  array H: 32b[64] input @locality;
  array W: 64b[64] input;
  array M: 32b[64] input;
  loop i in 0..64 { read P[i], read H[i], read W[i], read M[i]; }
  loop j in 0..64 { read M[j]; }
})");
  PlatformSpec p = parse_platform_ok(memforge::test::kDefaultPlatform);
  PlacementPlan pp = offchip_plan(k);
  pp.arrays.at("P").where = Placement::OnChipPlm;

  TilingPlan tp = select_tiling(k, classify_accesses(k), pp, p, 65536, kDefaultIterationCap);
  CHECK_FALSE(tp.arrays.count("P"));  // on chip already
  CHECK_FALSE(tp.arrays.count("H"));  // locality class streams via cache path
  CHECK_FALSE(tp.arrays.count("W"));  // elements wider than a PLM word
  CHECK_FALSE(tp.arrays.count("M"));  // touched by two top-level nests

  // No affordable tile: slack too small for even a one-element buffer.
  Kernel k2 = parse_kernel_ok(R"(kernel tiny {
  array A: 32b[64] input;
  loop i in 0..64 { read A[i]; }
})");
  TilingPlan tp2 = select_tiling(k2, classify_accesses(k2), offchip_plan(k2), p,
                                 32, kDefaultIterationCap);
  CHECK_FALSE(tp2.arrays.count("A"));
}

TEST_CASE("tiling adopts recorded transfers") {
  Kernel k = parse_kernel_ok(R"(kernel low {
  array A: 32b[1024] input;
  loop t in 0..4 {
    transfer A tile 256 via dma0;
    loop i in 0..256 { read A[256*t+i]; }
  }
})");
  PlatformSpec p = parse_platform_ok(memforge::test::kDefaultPlatform);
  TilingPlan tp = select_tiling(k, classify_accesses(k), offchip_plan(k), p,
                                16384, kDefaultIterationCap);
  REQUIRE(tp.arrays.count("A"));
  const TilingEntry& e = tp.arrays.at("A");
  CHECK(e.adopted);
  CHECK(e.tile == std::vector<i64>{256});
  CHECK(e.path == std::vector<std::string>{"t"});
  CHECK(e.level == 0);
  CHECK(e.depth == 2);
  CHECK(e.tile_bytes == 1024);
}
