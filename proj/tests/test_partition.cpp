#include <algorithm>
#include <map>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "memforge/partition.hpp"

using namespace memforge;
using memforge::test::parse_kernel_ok;
using memforge::test::parse_platform_ok;

namespace {

// Independent conflict check: assign banks by definition and count.
bool oracle_conflict_free(const std::vector<std::vector<u64>>& groups, i64 banks,
                          i64 ports, BankScheme scheme, u64 wpb) {
  for (const auto& g : groups) {
    std::map<u64, i64> hits;
    for (u64 addr : g) {
      u64 b = scheme == BankScheme::Cyclic ? addr % u64(banks) : addr / wpb;
      if (b >= u64(banks)) return false;
      if (++hits[b] > ports) return false;
    }
  }
  return true;
}

// Independent optimality oracle: enumerate the documented candidate space
// (pow2 bank counts from the capacity floor up to 2 x required x that floor,
// clamped to the word count; both schemes; every port count) and pick the
// minimum under the documented tie order.
struct OracleChoice {
  u64 cost;
  i64 banks;
  int block;
  i64 ports;
  bool found = false;
};

OracleChoice oracle_best(const BankingProblem& prob, const PlatformSpec& p) {
  const u64 W = std::max<u64>(prob.words, 1);
  const u64 n_lo = W > p.bank.max_words ? W / p.bank.max_words : 1;
  u64 raw = 2 * u64(prob.required) * std::max<u64>(1, W / p.bank.max_words);
  u64 hi = 1;
  while (hi * 2 <= raw) hi *= 2;
  hi = std::min(hi, W);
  hi = std::max(hi, n_lo);

  OracleChoice best;
  for (u64 N = n_lo; N <= hi; N *= 2) {
    for (int blk = 0; blk <= 1; ++blk) {
      for (i64 ports = 1; ports <= i64(p.bank.max_ports); ++ports) {
        BankScheme s = blk ? BankScheme::Block : BankScheme::Cyclic;
        if (!oracle_conflict_free(prob.groups, i64(N), ports, s, W / N)) continue;
        OracleChoice c{bank_cost(W, u64(ports), p.bank), i64(N), blk, ports, true};
        auto key = [](const OracleChoice& x) {
          return std::tuple(x.cost, x.banks, x.block, x.ports);
        };
        if (!best.found || key(c) < key(best)) best = c;
      }
    }
  }
  return best;
}

void check_choice_optimal(const Kernel& k, const std::string& array,
                          const PlatformSpec& p) {
  BankingProblem prob = banking_problem_for_array(k, array, kDefaultIterationCap);
  BankingChoice got = plan_banking(prob, p, array);
  OracleChoice want = oracle_best(prob, p);
  REQUIRE(want.found);
  CHECK(got.cost == want.cost);
  CHECK(got.banks == want.banks);
  CHECK((got.scheme == BankScheme::Block) == (want.block == 1));
  CHECK(got.ports == want.ports);
  CHECK(got.verified);
  CHECK(oracle_conflict_free(prob.groups, got.banks, got.ports, got.scheme,
                             got.words_per_bank));
}

PlatformSpec default_platform() {
  return parse_platform_ok(memforge::test::kDefaultPlatform);
}

const char* kMatmul = R"(kernel matmul {
  const N = 16;
  array A: 32b[16],[16] input;
  array B: 32b[16],[16] input;
  array C: 32b[16],[16] output;
  loop i in 0..N {
    loop j in 0..N {
      loop k in 0..N unroll 2 {
        read A[i][k], read B[k][j], write C[i][j];
      }
    }
  }
})";

}  // namespace

TEST_CASE("verify_conflict_free counts per-bank hits") {
  CHECK(verify_conflict_free({{0, 1}}, 2, 1, BankScheme::Cyclic, 1));
  CHECK_FALSE(verify_conflict_free({{0, 2}}, 2, 1, BankScheme::Cyclic, 1));
  CHECK(verify_conflict_free({{0, 2}}, 2, 2, BankScheme::Cyclic, 1));
  CHECK(verify_conflict_free({{0, 1}}, 2, 1, BankScheme::Block, 1));
  CHECK_FALSE(verify_conflict_free({{0, 1}}, 2, 1, BankScheme::Block, 2));
  // Addresses beyond the declared word space are a hard failure.
  CHECK_FALSE(verify_conflict_free({{5}}, 2, 2, BankScheme::Block, 2));
  // Independent groups are checked in isolation.
  CHECK(verify_conflict_free({{0}, {0}, {0}}, 1, 1, BankScheme::Cyclic, 4));
}

TEST_CASE("banking: stride-2 pair picks four cyclic banks over two ports") {
  Kernel k = parse_kernel_ok(R"(kernel st {
  array A: 32b[1024] input;
  loop i in 0..1022 { read A[i], read A[i+2]; }
})");
  PlatformSpec p = default_platform();
  BankingProblem prob = banking_problem_for_array(k, "A", kDefaultIterationCap);
  CHECK(prob.words == 1024);
  CHECK(prob.required == 2);
  BankingChoice c = plan_banking(prob, p, "A");
  // One two-ported bank costs 49152; four single-ported banks cost 32768.
  CHECK(c.banks == 4);
  CHECK(c.ports == 1);
  CHECK(c.scheme == BankScheme::Cyclic);
  CHECK(c.words_per_bank == 256);
  CHECK(c.cost == 32768);
  check_choice_optimal(k, "A", p);
}

TEST_CASE("banking: matmul operand shapes") {
  Kernel k = parse_kernel_ok(kMatmul);
  PlatformSpec p = default_platform();

  // A[i][k], A[i][k+1]: offsets 1 apart, two cyclic banks suffice.
  BankingChoice a = plan_banking(banking_problem_for_array(k, "A", kDefaultIterationCap), p, "A");
  CHECK(a.banks == 2);
  CHECK(a.ports == 1);
  CHECK(a.scheme == BankScheme::Cyclic);
  CHECK(a.cost == 8192);

  // B[k][j], B[k+1][j]: offsets 16 apart, congruent mod every candidate bank
  // count; a second port is the only way out.
  BankingChoice b = plan_banking(banking_problem_for_array(k, "B", kDefaultIterationCap), p, "B");
  CHECK(b.banks == 1);
  CHECK(b.ports == 2);
  CHECK(b.cost == 12288);

  // C[i][j] is one address per cycle.
  BankingChoice c = plan_banking(banking_problem_for_array(k, "C", kDefaultIterationCap), p, "C");
  CHECK(c.banks == 1);
  CHECK(c.ports == 1);
  CHECK(c.cost == 8192);

  for (const char* arr : {"A", "B", "C"}) check_choice_optimal(k, arr, p);
}

TEST_CASE("banking matches the oracle across varied access patterns") {
  PlatformSpec p = default_platform();
  const char* kernels[] = {
      // Dense unrolled stream.
      R"(kernel a { array A: 32b[256] input;
        loop i in 0..256 unroll 4 { read A[i]; } })",
      // Strided unroll: offsets {0,2,4,6}.
      R"(kernel b { array A: 32b[512] input;
        loop i in 0..256 unroll 4 { read A[2*i]; } })",
      // Stencil triple.
      R"(kernel c { array A: 32b[130] input;
        loop i in 0..128 { read A[i], read A[i+1], read A[i+2]; } })",
      // Mixed row/column touches of one matrix.
      R"(kernel d { array M: 32b[16],[16] input;
        loop i in 0..16 { loop j in 0..16 { read M[i][j], read M[j][i]; } } })",
      // Two statements with different shapes.
      R"(kernel e { array A: 32b[64] input;
        loop i in 0..32 { read A[i], read A[i+32]; }
        loop j in 0..16 unroll 2 { read A[4*j]; } })",
  };
  for (const char* text : kernels) {
    Kernel k = parse_kernel_ok(text);
    check_choice_optimal(k, k.arrays[0].name, p);
  }
}

TEST_CASE("banking throws when no configuration is conflict-free") {
  // Triple {0,4,8} defeats everything reachable with max_ports 2: the bank
  // bound is 2x3 -> 4, all three addresses agree mod 2 and mod 4 (cyclic),
  // and all three sit inside the first quarter of the 64-word space (block).
  Kernel k = parse_kernel_ok(R"(kernel hot {
  array A: 32b[64] input;
  loop i in 0..8 { read A[4*i], read A[4*i+4], read A[4*i+8]; }
})");
  PlatformSpec p = default_platform();  // max_ports 2
  BankingProblem prob = banking_problem_for_array(k, "A", kDefaultIterationCap);
  CHECK(prob.required == 3);
  CHECK_THROWS_WITH_AS(plan_banking(prob, p, "array 'A'"),
                       doctest::Contains("reduce unrolling"), Error);
}

TEST_CASE("tile-local banking rebases addresses into the buffer") {
  Kernel k = parse_kernel_ok(R"(kernel t {
  array M: 32b[8],[8] input;
  loop i in 0..8 {
    loop j in 0..8 unroll 2 { read M[i][j]; }
  }
})");
  BankingProblem prob = banking_problem_for_tile(k, "M", {4, 4}, kDefaultIterationCap);
  // Tile-local space: 16 words; each instance reads two adjacent words.
  CHECK(prob.words == 16);
  CHECK(prob.required == 2);
  for (const auto& g : prob.groups)
    for (u64 addr : g) CHECK(addr < 16);
  PlatformSpec p = default_platform();
  BankingChoice c = plan_banking(prob, p, "M tile");
  CHECK(c.banks == 2);
  CHECK(c.ports == 1);
  CHECK(c.scheme == BankScheme::Cyclic);
}

TEST_CASE("modular eligibility mirrors the affine structure") {
  Kernel same = parse_kernel_ok(R"(kernel s {
  array A: 32b[64] input;
  loop i in 0..62 { read A[i], read A[i+2]; }
})");
  ModularProblem mp = modular_problem_for_array(same, "A");
  CHECK(mp.eligible);
  REQUIRE(mp.offset_sets.size() == 1);
  CHECK(mp.offset_sets[0] == std::vector<i64>{0, 2});

  Kernel diff = parse_kernel_ok(R"(kernel d {
  array A: 32b[64] input;
  loop i in 0..32 { read A[i], read A[2*i]; }
})");
  CHECK_FALSE(modular_problem_for_array(diff, "A").eligible);

  Kernel opq = parse_kernel_ok(R"(kernel o {
  array Idx: 32b[8] input;
  array A: 32b[64] input;
  loop i in 0..8 { read Idx[i], read A[opaque(Idx)]; }
})");
  CHECK_FALSE(modular_problem_for_array(opq, "A").eligible);

  // Unroll widening expands offsets by coeff x step per copy.
  Kernel ur = parse_kernel_ok(R"(kernel u {
  array A: 32b[512] input;
  loop i in 0..256 unroll 2 { read A[2*i], read A[2*i+1]; }
})");
  ModularProblem mu = modular_problem_for_array(ur, "A");
  CHECK(mu.eligible);
  REQUIRE(mu.offset_sets.size() == 1);
  CHECK(mu.offset_sets[0] == std::vector<i64>{0, 1, 2, 3});
  CHECK(mu.required == 4);
}

TEST_CASE("modular feasibility agrees with the exhaustive verifier") {
  const char* kernels[] = {
      R"(kernel a { array A: 32b[64] input;
        loop i in 0..62 { read A[i], read A[i+1], read A[i+2]; } })",
      R"(kernel b { array A: 32b[256] input;
        loop i in 0..64 unroll 4 { read A[i]; } })",
      R"(kernel c { array A: 32b[512] input;
        loop i in 0..128 unroll 2 { read A[2*i], read A[2*i+1]; } })",
      R"(kernel d { array M: 32b[16],[16] input;
        loop i in 0..16 { loop k in 0..16 unroll 2 { read M[k][i]; } } })",
  };
  for (const char* text : kernels) {
    Kernel k = parse_kernel_ok(text);
    const std::string name = k.arrays[0].name;
    ModularProblem mp = modular_problem_for_array(k, name);
    REQUIRE(mp.eligible);
    BankingProblem bp = banking_problem_for_array(k, name, kDefaultIterationCap);
    const u64 W = std::max<u64>(bp.words, 1);
    for (i64 N = 1; N <= 32; N *= 2) {
      for (i64 ports = 1; ports <= 2; ++ports) {
        CHECK(modular_conflict_free(mp.offset_sets, N, ports) ==
              verify_conflict_free(bp.groups, N, ports, BankScheme::Cyclic, W / u64(N)));
      }
    }
  }
}

TEST_CASE("banking dispatch: exhaustive under the cap, modular above it") {
  PlatformSpec p = default_platform();
  Kernel small = parse_kernel_ok(R"(kernel s {
  array A: 32b[64] input;
  loop i in 0..64 unroll 2 { read A[i]; }
})");
  BankingChoice cs = plan_banking_for_array(small, "A", p, kDefaultIterationCap);
  CHECK(cs.verified);

  // 2^21 instances: the walk is skipped, the closed form answers.
  Kernel big = parse_kernel_ok(R"(kernel g {
  array A: 32b[2048] input;
  loop r in 0..2048 {
    loop i in 0..2048 unroll 2 { read A[i]; }
  }
})");
  REQUIRE(dynamic_instance_count(big) == u64(2048) * 1024);
  BankingChoice cb = plan_banking_for_array(big, "A", p, kDefaultIterationCap);
  CHECK_FALSE(cb.verified);
  CHECK(cb.scheme == BankScheme::Cyclic);
  CHECK(cb.banks == 2);
  CHECK(cb.ports == 1);

  // Irregular big kernels have no closed form: hard error.
  Kernel bad = parse_kernel_ok(R"(kernel x {
  array Idx: 32b[2048] input;
  array A: 32b[2048] input;
  loop r in 0..2048 {
    loop i in 0..2048 { read Idx[i], read A[opaque(Idx)]; }
  }
})");
  CHECK_THROWS_AS(plan_banking_for_array(bad, "A", p, kDefaultIterationCap), Error);
}

TEST_CASE("lifetimes: directions pin the endpoints") {
  Kernel k = parse_kernel_ok(R"(kernel phases {
  array I: 32b[4] input;
  array T1: 32b[4] temp;
  array T2: 32b[4] temp;
  array O: 32b[4] output;
  loop i in 0..4 { read I[i], write T1[i]; }
  loop j in 0..4 { read T1[j], write T2[j]; }
  loop m in 0..4 { read T2[m], write O[m]; }
})");
  std::map<std::string, Lifetime> lt = compute_lifetimes(k, kDefaultIterationCap);
  CHECK(lt.at("I").first == 0);
  CHECK(lt.at("I").last == 3);
  CHECK(lt.at("T1").first == 0);
  CHECK(lt.at("T1").last == 7);
  CHECK(lt.at("T2").first == 4);
  CHECK(lt.at("T2").last == 11);
  CHECK(lt.at("O").first == 8);
  CHECK(lt.at("O").last == 11);  // output pinned to the end (already there)
  CHECK(lt.at("T1").overlaps(lt.at("T2")));
  CHECK_FALSE(lt.at("I").overlaps(lt.at("T2")));

  // Inout arrays span the whole run; unused arrays are reported.
  Kernel k2 = parse_kernel_ok(R"(kernel io {
  array S: 32b[4] inout;
  array U: 32b[4] input;
  loop i in 0..4 { accum S[0]; }
  loop j in 0..2 { read S[j]; }
})");
  std::vector<std::string> unused;
  std::map<std::string, Lifetime> lt2 = compute_lifetimes(k2, kDefaultIterationCap, &unused);
  CHECK(lt2.at("S").first == 0);
  CHECK(lt2.at("S").last == 5);
  CHECK_FALSE(lt2.count("U"));
  CHECK(unused == std::vector<std::string>{"U"});
}

TEST_CASE("sharing: disjoint same-shape arrays fold into one group") {
  Kernel k = parse_kernel_ok(R"(kernel phases {
  array I: 32b[4] input;
  array T1: 32b[4] temp;
  array T2: 32b[4] temp;
  array O: 32b[4] output;
  loop i in 0..4 { read I[i], write T1[i]; }
  loop j in 0..4 { read T1[j], write T2[j]; }
  loop m in 0..4 { read T2[m], write O[m]; }
})");
  std::map<std::string, Lifetime> lt = compute_lifetimes(k, kDefaultIterationCap);
  std::map<std::string, BankingChoice> banking;
  for (const char* n : {"I", "T1", "T2", "O"}) {
    BankingChoice c;
    c.banks = 1;
    c.ports = 1;
    c.scheme = BankScheme::Cyclic;
    c.words_per_bank = 4;
    banking[n] = c;
  }
  SharingPlan sp = plan_sharing(lt, banking);
  REQUIRE(sp.groups.size() == 2);
  CHECK(sp.groups[0].members == std::vector<std::string>{"I", "T2"});
  CHECK(sp.groups[1].members == std::vector<std::string>{"T1", "O"});
  CHECK(sp.group_of("T2") == 0);
  CHECK(sp.group_of("O") == 1);
  CHECK(sp.group_of("nope") == -1);

  // Different bank shapes never share.
  banking["T2"].banks = 2;
  banking["T2"].words_per_bank = 2;
  SharingPlan sp2 = plan_sharing(lt, banking);
  CHECK(sp2.groups.size() == 3);
}

TEST_CASE("sharing group count equals the interval chromatic number") {
  // Interval graphs are perfect: the chromatic number equals the largest
  // number of intervals covering one point.  Left-edge allocation is known
  // to reach it; verify on random instances.
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    size_t n = 1 + rng() % 10;
    std::map<std::string, Lifetime> lt;
    std::map<std::string, BankingChoice> banking;
    for (size_t i = 0; i < n; ++i) {
      u64 a = rng() % 40;
      u64 b = rng() % 40;
      Lifetime l{std::min(a, b), std::max(a, b)};
      std::string name(1, char('a' + i));
      lt[name] = l;
      BankingChoice c;
      c.banks = 2;
      c.ports = 1;
      c.scheme = BankScheme::Block;
      c.words_per_bank = 8 + (rng() % 3) * 8;  // sizes differ, shapes match
      banking[name] = c;
    }
    u64 clique = 0;
    for (const auto& [name, l] : lt) {
      u64 at = 0;  // intervals covering l.first
      for (const auto& [o, m] : lt)
        if (m.first <= l.first && l.first <= m.last) ++at;
      clique = std::max(clique, at);
    }
    SharingPlan sp = plan_sharing(lt, banking);
    CHECK(sp.groups.size() == clique);

    // Physical words never exceed the unshared total; group size is the max.
    u64 before = 0, after = 0;
    for (const auto& [name, c] : banking) before += u64(c.banks) * c.words_per_bank;
    for (const auto& g : sp.groups) {
      after += u64(g.banks) * g.words_per_bank;
      u64 mx = 0;
      for (const auto& m : g.members) mx = std::max(mx, banking.at(m).words_per_bank);
      CHECK(g.words_per_bank == mx);
    }
    CHECK(after <= before);

    // Members within a group never overlap in time.
    for (const auto& g : sp.groups)
      for (size_t x = 0; x < g.members.size(); ++x)
        for (size_t y = x + 1; y < g.members.size(); ++y)
          CHECK_FALSE(lt.at(g.members[x]).overlaps(lt.at(g.members[y])));
  }
}

TEST_CASE("sharing: untouched arrays keep private storage") {
  std::map<std::string, Lifetime> lt;  // nothing ever touched
  std::map<std::string, BankingChoice> banking;
  BankingChoice c;
  c.banks = 1;
  c.ports = 1;
  c.scheme = BankScheme::Cyclic;
  c.words_per_bank = 16;
  banking["zz"] = c;
  banking["aa"] = c;
  SharingPlan sp = plan_sharing(lt, banking);
  REQUIRE(sp.groups.size() == 2);
  CHECK(sp.groups[0].members == std::vector<std::string>{"aa"});
  CHECK(sp.groups[1].members == std::vector<std::string>{"zz"});
}
