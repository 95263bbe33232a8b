#include "memforge/pipeline.hpp"

#include <algorithm>
#include <sstream>

namespace memforge {

using nlohmann::json;

json PipelineResult::plans_json() const {
  json cls = json::object();
  for (const auto& [name, c] : classes)
    cls[name] = {{"kind", to_string(c.kind)},
                 {"required_parallel", c.required_parallel},
                 {"reuse", c.reuse}};
  json lts = json::object();
  for (const auto& [name, lt] : lifetimes) lts[name] = {{"first", lt.first}, {"last", lt.last}};
  return json{{"banking", banking.to_json()},
              {"classes", std::move(cls)},
              {"evicted", evicted},
              {"layout", layout.to_json()},
              {"lifetimes", std::move(lts)},
              {"placement", placement.to_json()},
              {"prefetch", prefetch.to_json()},
              {"sharing", sharing.to_json()},
              {"tiling", tiling.to_json()},
              {"warnings", warnings}};
}

json PipelineResult::report_json() const {
  json j{{"area", architecture.area},
         {"budget", platform.budget},
         {"kernel", lowered.name},
         {"plans", plans_json()}};
  if (simulated) {
    j["baseline"] = baseline.to_json();
    j["specialized"] = specialized.to_json();
    // Integer-scaled ratio keeps the report byte-deterministic.
    u64 denom = specialized.total_cycles ? specialized.total_cycles : 1;
    j["speedup_milli"] = baseline.total_cycles * 1000 / denom;
  }
  return j;
}

std::string PipelineResult::report_text() const {
  std::ostringstream os;
  os << "kernel " << lowered.name << ": area " << architecture.area << " / budget "
     << platform.budget << "\n";
  for (const auto& [name, e] : placement.arrays) {
    os << "  " << name << ": " << to_string(e.where);
    if (tiling.arrays.count(name)) {
      const auto& te = tiling.arrays.at(name);
      os << " tile";
      for (size_t d = 0; d < te.tile.size(); ++d) os << (d ? "x" : " ") << te.tile[d];
      os << " depth " << te.depth;
    }
    if (banking.arrays.count(name)) {
      const auto& bc = banking.arrays.at(name);
      os << " [" << bc.banks << " bank" << (bc.banks == 1 ? "" : "s") << ", " << bc.ports
         << " port" << (bc.ports == 1 ? "" : "s") << ", " << to_string(bc.scheme) << "]";
    }
    os << "\n";
  }
  for (const auto& g : sharing.groups)
    if (g.members.size() > 1) {
      os << "  shared plm" << g.id << ":";
      for (const auto& m : g.members) os << " " << m;
      os << "\n";
    }
  if (simulated) {
    os << "  baseline " << baseline.total_cycles << " cycles, specialized "
       << specialized.total_cycles << " cycles";
    u64 denom = specialized.total_cycles ? specialized.total_cycles : 1;
    u64 milli = baseline.total_cycles * 1000 / denom;
    os << " (speedup " << milli / 1000 << "." << (milli % 1000) / 100 << "x)\n";
    os << "  stalls: transfer " << specialized.transfer_stall << ", conflict "
       << specialized.bank_conflict_stall << ", cache " << specialized.cache_miss_stall
       << ", stream " << specialized.lis_stall << "\n";
    os << "  off-chip bytes: " << specialized.offchip_bytes << " (baseline "
       << baseline.offchip_bytes << ")\n";
  }
  for (const auto& w : warnings) os << "  warning: " << w << "\n";
  return os.str();
}

PipelineResult run_pipeline(const Kernel& input, const PlatformSpec& platform,
                            const PipelineOptions& opt) {
  PipelineResult r;
  r.platform = platform;
  if (opt.alpha) r.platform.bank.alpha = *opt.alpha;
  const PlatformSpec& p = r.platform;

  validate_dynamic(input, opt.cap);
  r.classes = classify_accesses(input);

  std::set<std::string> deny;
  while (true) {
    Kernel k = input;
    r.warnings.clear();

    if (opt.enable_data_org || p.on_chip_only()) {
      r.placement = plan_placement(k, r.classes, p, opt.cap, deny);
    } else {
      PlatformSpec p0 = p;
      p0.budget = 0;  // nothing wins the knapsack; everything streams
      r.placement = plan_placement(k, r.classes, p0, opt.cap, deny);
    }

    if (opt.enable_layout) {
      r.layout = plan_layout(k, r.classes);
      u64 committed = r.placement.plm_area +
                      (r.placement.cache_used ? cache_area(p.cache) : 0);
      u64 slack = p.budget > committed ? p.budget - committed : 0;
      r.tiling = select_tiling(k, r.classes, r.placement, p, slack, opt.cap);
    } else {
      r.layout = LayoutPlan{};
      for (const auto& a : k.arrays) {
        LayoutTransform t;
        for (size_t d = 0; d < a.dims.size(); ++d) t.perm.push_back(int(d));
        r.layout.arrays[a.name] = std::move(t);
      }
      r.tiling = TilingPlan{};
    }
    if (!opt.enable_comm)
      for (auto& [name, te] : r.tiling.arrays) {
        (void)name;
        te.depth = 1;
      }

    r.banking = BankingPlan{};
    std::string unbankable;
    for (const auto& [name, e] : r.placement.arrays) {
      if (e.where != Placement::OnChipPlm) continue;
      if (opt.enable_partition) {
        try {
          r.banking.arrays[name] = plan_banking_for_array(k, name, p, opt.cap);
        } catch (const Error&) {
          // The port limits cannot serve this array on chip at any price;
          // treat it like an overflow and send it off chip.
          if (p.on_chip_only()) throw;
          unbankable = name;
          break;
        }
      } else {
        const ArrayDecl* arr = k.find_array(name);
        u64 w = next_pow2(arr->elements());
        BankingChoice bc;
        bc.banks = i64(w > p.bank.max_words ? w / p.bank.max_words : 1);
        bc.ports = 1;
        bc.scheme = BankScheme::Cyclic;
        bc.words_per_bank = w / u64(bc.banks);
        bc.cost = bank_cost(w, 1, p.bank);
        r.banking.arrays[name] = bc;
      }
    }
    if (!unbankable.empty()) {
      deny.insert(unbankable);
      r.evicted.push_back(unbankable);
      continue;
    }
    for (auto it = r.tiling.arrays.begin(); it != r.tiling.arrays.end();) {
      const auto& [name, te] = *it;
      if (opt.enable_partition) {
        try {
          BankingProblem prob = banking_problem_for_tile(k, name, te.tile, opt.cap);
          r.banking.buffers[name] = plan_banking(prob, p, "tile buffer of '" + name + "'");
        } catch (const Error&) {
          // An unbankable tile falls back to element-wise streaming.
          r.warnings.push_back("tile buffer of '" + name +
                               "' needs more ports than the platform offers; streaming");
          it = r.tiling.arrays.erase(it);
          continue;
        }
      } else {
        u64 w = 1;
        for (i64 t : te.tile) w *= u64(t);
        w = next_pow2(w);
        BankingChoice bc;
        bc.banks = i64(w > p.bank.max_words ? w / p.bank.max_words : 1);
        bc.ports = 1;
        bc.scheme = BankScheme::Cyclic;
        bc.words_per_bank = w / u64(bc.banks);
        bc.cost = bank_cost(w, 1, p.bank);
        r.banking.buffers[name] = bc;
      }
      ++it;
    }

    r.prefetch = plan_prefetch(k, r.tiling, r.placement, p);

    std::vector<std::string> unused;
    r.lifetimes = compute_lifetimes(k, opt.cap, &unused);
    for (const auto& name : unused)
      r.warnings.push_back("array '" + name + "' is declared but never accessed");

    if (opt.enable_partition) {
      r.sharing = plan_sharing(r.lifetimes, r.banking.arrays);
    } else {
      r.sharing = SharingPlan{};
      int gid = 0;
      for (const auto& [name, bc] : r.banking.arrays) {
        SharingGroup g;
        g.id = gid++;
        g.members = {name};
        g.banks = bc.banks;
        g.ports = bc.ports;
        g.scheme = bc.scheme;
        g.words_per_bank = bc.words_per_bank;
        r.sharing.groups.push_back(std::move(g));
      }
    }

    r.architecture = build_architecture(k, p, r.placement, r.tiling, r.prefetch,
                                        r.banking, r.sharing);
    simplify_architecture(r.architecture, p);

    if (r.architecture.area > p.budget) {
      // Feasibility repair: drop the least valuable resident array and retry.
      std::string victim;
      u64 victim_benefit = 0;
      for (const auto& [name, e] : r.placement.arrays) {
        if (e.where != Placement::OnChipPlm) continue;
        if (victim.empty() || e.benefit < victim_benefit ||
            (e.benefit == victim_benefit && name < victim)) {
          victim = name;
          victim_benefit = e.benefit;
        }
      }
      if (victim.empty())
        throw Error("architecture area " + std::to_string(r.architecture.area) +
                    " exceeds budget " + std::to_string(p.budget) +
                    " with nothing left to evict");
      deny.insert(victim);
      r.evicted.push_back(victim);
      continue;
    }

    r.lowered = std::move(k);
    break;
  }

  if (opt.run_emit) {
    r.lowered_text = emit_lowered_ir(r.lowered, r.architecture, r.tiling);
  } else {
    r.lowered_text = print_kernel(r.lowered);
  }
  r.architecture.kernel_hash = fnv1a64_hex(r.lowered_text);
  r.architecture.platform_hash = fnv1a64_hex(canonical_platform_json(p));

  if (opt.run_simulate) {
    r.specialized = simulate(r.lowered, r.architecture, p, opt.cap);
    MemoryArchitecture base = build_baseline(r.lowered, p);
    base.kernel_hash = r.architecture.kernel_hash;
    base.platform_hash = r.architecture.platform_hash;
    r.baseline = simulate(r.lowered, base, p, opt.cap);
    r.simulated = true;
  }
  return r;
}

}  // namespace memforge
