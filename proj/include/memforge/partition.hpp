#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "memforge/analysis.hpp"
#include "memforge/layout.hpp"
#include "memforge/platform.hpp"

namespace memforge {

enum class BankScheme { Cyclic, Block };
const char* to_string(BankScheme s);

struct BankingChoice {
  i64 banks = 1;
  i64 ports = 1;
  BankScheme scheme = BankScheme::Cyclic;
  u64 words_per_bank = 0;
  u64 cost = 0;       // total area of the bank group
  bool verified = false;  // conflict-freedom proven against the access groups
  nlohmann::json to_json() const;
};

struct BankingPlan {
  std::map<std::string, BankingChoice> arrays;   // whole-array PLM storage
  std::map<std::string, BankingChoice> buffers;  // tile buffers (tile-local addressing)
  nlohmann::json to_json() const;
};

/// Distinct addresses grouped per dynamic instance, over a pow2 word space.
struct BankingProblem {
  std::vector<std::vector<u64>> groups;
  u64 words = 0;          // next_pow2 of the addressed element count
  i64 required = 1;       // max group size (same-cycle distinct addresses)
};

BankingProblem banking_problem_for_array(const Kernel& k, const std::string& array, u64 cap);
BankingProblem banking_problem_for_tile(const Kernel& k, const std::string& array,
                                        const std::vector<i64>& tile, u64 cap);

bool verify_conflict_free(const std::vector<std::vector<u64>>& groups, i64 banks,
                          i64 ports, BankScheme scheme, u64 words_per_bank);

/// Cheapest (banks, ports, scheme) with no same-cycle bank conflict anywhere
/// in the access groups.  Ties: fewer banks, cyclic before block, fewer ports.
/// Throws when even the widest configuration conflicts.
BankingChoice plan_banking(const BankingProblem& prob, const PlatformSpec& p,
                           const std::string& what);

/// Narrow closed-form alternative to the exhaustive verifier: eligible when
/// every statement's accesses to the array share one affine form up to the
/// constant term.  Same-cycle addresses then differ by fixed offsets and a
/// cyclic split into N banks conflicts iff some residue class mod N holds
/// more than `ports` offsets: exactly, for every base address.
struct ModularProblem {
  bool eligible = false;
  std::vector<std::vector<i64>> offset_sets;  // per statement, deduped
  u64 words = 0;
  i64 required = 1;
};

ModularProblem modular_problem_for_array(const Kernel& k, const std::string& array);
bool modular_conflict_free(const std::vector<std::vector<i64>>& offset_sets, i64 banks,
                           i64 ports);
BankingChoice plan_banking_modular(const ModularProblem& prob, const PlatformSpec& p,
                                   const std::string& what);

/// Exhaustive path when the instance walk fits the cap, modular otherwise.
BankingChoice plan_banking_for_array(const Kernel& k, const std::string& array,
                                     const PlatformSpec& p, u64 cap);

struct Lifetime {
  u64 first = 0;
  u64 last = 0;
  bool overlaps(const Lifetime& o) const { return !(last < o.first || o.last < first); }
};

/// First/last dynamic instance touching each array; inputs start at 0 and
/// outputs extend to the final instance.  Arrays never touched are reported
/// in `unused` and get no lifetime.
std::map<std::string, Lifetime> compute_lifetimes(const Kernel& k, u64 cap,
                                                  std::vector<std::string>* unused = nullptr);

struct SharingGroup {
  int id = 0;
  std::vector<std::string> members;  // in assignment order
  i64 banks = 1;
  i64 ports = 1;
  BankScheme scheme = BankScheme::Cyclic;
  u64 words_per_bank = 0;  // max over members
};

struct SharingPlan {
  std::vector<SharingGroup> groups;
  nlohmann::json to_json() const;
  int group_of(const std::string& array) const;
};

/// Left-edge allocation: arrays with identical bank shape share one physical
/// group when their lifetimes are disjoint.
SharingPlan plan_sharing(const std::map<std::string, Lifetime>& lifetimes,
                         const std::map<std::string, BankingChoice>& banking);

}  // namespace memforge
