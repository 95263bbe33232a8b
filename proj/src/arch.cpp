#include "memforge/arch.hpp"

#include <algorithm>
#include <set>

namespace memforge {

using nlohmann::json;

const Component* MemoryArchitecture::find(const std::string& id) const {
  for (const auto& c : components)
    if (c.id == id) return &c;
  return nullptr;
}

json MemoryArchitecture::to_json() const {
  json comps = json::array();
  for (const auto& c : components)
    comps.push_back(json{{"id", c.id}, {"kind", c.kind}, {"params", c.params}});
  json binds = json::object();
  for (const auto& [name, b] : bindings) {
    json e = {{"component", b.component}};
    if (b.group >= 0) e["group"] = b.group;
    binds[name] = std::move(e);
  }
  json conns = json::array();
  for (const auto& [from, to] : connections) conns.push_back(json::array({from, to}));
  return json{{"area", area},
              {"bindings", std::move(binds)},
              {"components", std::move(comps)},
              {"connections", std::move(conns)},
              {"meta",
               {{"input_hashes", {{"kernel", kernel_hash}, {"platform", platform_hash}}},
                {"tool_version", kToolVersion}}}};
}

std::string MemoryArchitecture::dump() const { return to_json().dump(2) + "\n"; }

namespace {

bool is_buffer(const Component& c) {
  return c.kind == "plm" && c.params.contains("array");
}
bool is_group(const Component& c) {
  return c.kind == "plm" && c.params.contains("arrays");
}

u64 component_area(const Component& c, const PlatformSpec& p) {
  if (c.kind == "plm") {
    u64 words = c.params.at("banks").get<u64>() * c.params.at("words_per_bank").get<u64>();
    u64 cost = bank_cost(words, c.params.at("word_bits").get<u64>(),
                         c.params.at("ports").get<u64>(), p.bank.alpha);
    return is_buffer(c) ? c.params.at("depth").get<u64>() * cost : cost;
  }
  if (c.kind == "cache") return c.params.at("capacity_bytes").get<u64>() * 8;
  return 0;
}

std::string chan_node(int id) { return "chan" + std::to_string(id); }

void rebuild_connections(MemoryArchitecture& a, const PlatformSpec& p) {
  (void)p;
  std::set<std::pair<std::string, std::string>> edges;
  const bool has_ctrl = a.find("ctrl0") != nullptr;
  const bool has_dma = a.find("dma0") != nullptr;
  const bool has_pf = a.find("pf0") != nullptr;
  auto trunk = [&](int channel) { return has_ctrl ? "ctrl0" : chan_node(channel); };

  std::set<int> dma_channels;
  for (const auto& c : a.components) {
    if (is_group(c)) {
      edges.insert({"accel", c.id});
      edges.insert({c.id, "accel"});
    } else if (is_buffer(c)) {
      int ch = c.params.at("channel").get<int>();
      dma_channels.insert(ch);
      std::string feeder = has_dma ? "dma0" : trunk(ch);
      if (c.params.at("fetch").get<bool>()) {
        edges.insert({feeder, c.id});
        edges.insert({c.id, "accel"});
      }
      if (c.params.at("writeback").get<bool>()) {
        edges.insert({"accel", c.id});
        edges.insert({c.id, feeder});
      }
    } else if (c.kind == "cache") {
      int ch = c.params.at("channel").get<int>();
      edges.insert({"accel", c.id});
      edges.insert({c.id, "accel"});
      edges.insert({c.id, trunk(ch)});
      edges.insert({trunk(ch), c.id});
    } else if (c.kind == "lis_channel") {
      int ch = c.params.at("channel").get<int>();
      if (c.params.at("reads").get<bool>()) {
        edges.insert({trunk(ch), c.id});
        edges.insert({c.id, "accel"});
      }
      if (c.params.at("writes").get<bool>()) {
        edges.insert({"accel", c.id});
        edges.insert({c.id, trunk(ch)});
      }
    } else if (c.kind == "channel_controller") {
      for (int ch : c.params.at("channels").get<std::vector<int>>()) {
        edges.insert({c.id, chan_node(ch)});
        edges.insert({chan_node(ch), c.id});
      }
    }
  }
  if (has_dma) {
    if (has_ctrl) {
      edges.insert({"dma0", "ctrl0"});
      edges.insert({"ctrl0", "dma0"});
    } else {
      for (int ch : dma_channels) {
        edges.insert({"dma0", chan_node(ch)});
        edges.insert({chan_node(ch), "dma0"});
      }
    }
    if (has_pf) edges.insert({"pf0", "dma0"});
  }
  a.connections.assign(edges.begin(), edges.end());
}

void recompute_area(MemoryArchitecture& a, const PlatformSpec& p) {
  a.area = 0;
  for (const auto& c : a.components) a.area += component_area(c, p);
}

}  // namespace

MemoryArchitecture build_architecture(const Kernel& k, const PlatformSpec& p,
                                      const PlacementPlan& placement,
                                      const TilingPlan& tiling,
                                      const PrefetchPlan& prefetch,
                                      const BankingPlan& banking,
                                      const SharingPlan& sharing) {
  MemoryArchitecture a;

  std::map<std::string, bool> reads, writes;
  for (const auto& arr : k.arrays) reads[arr.name] = writes[arr.name] = false;
  for (const auto& st : k.statements)
    for (const auto& acc : st.accesses) {
      reads[acc.array] = reads[acc.array] || acc.reads();
      writes[acc.array] = writes[acc.array] || acc.writes();
    }

  for (const auto& g : sharing.groups) {
    Component c;
    c.id = "plm" + std::to_string(g.id);
    c.kind = "plm";
    c.params = json{{"arrays", g.members},
                    {"banks", g.banks},
                    {"ports", g.ports},
                    {"scheme", to_string(g.scheme)},
                    {"word_bits", p.bank.word_bits},
                    {"words_per_bank", g.words_per_bank}};
    a.components.push_back(std::move(c));
  }

  std::map<std::string, std::string> buf_of, lis_of;
  int buf_n = 0;
  for (const auto& [name, te] : tiling.arrays) {  // map order = name order
    const auto& bc = banking.buffers.at(name);
    const auto& pf = prefetch.arrays.count(name) ? prefetch.arrays.at(name) : PrefetchEntry{};
    Component c;
    c.id = "buf" + std::to_string(buf_n++);
    c.kind = "plm";
    c.params = json{{"array", name},
                    {"banks", bc.banks},
                    {"channel", placement.arrays.at(name).channel},
                    {"depth", te.depth},
                    {"fetch", reads.at(name)},
                    {"mode", to_string(pf.mode)},
                    {"ports", bc.ports},
                    {"scheme", to_string(bc.scheme)},
                    {"tile", te.tile},
                    {"word_bits", p.bank.word_bits},
                    {"words_per_bank", bc.words_per_bank},
                    {"writeback", writes.at(name)}};
    buf_of[name] = c.id;
    a.components.push_back(std::move(c));
  }

  bool any_cache = false, any_offchip_untiled = false;
  std::set<int> used_channels;
  for (const auto& [name, e] : placement.arrays) {
    if (e.where == Placement::OnChipCache) any_cache = true;
    if (e.where == Placement::OffChip && !tiling.arrays.count(name))
      any_offchip_untiled = true;
    if (e.where != Placement::OnChipPlm && e.channel >= 0) used_channels.insert(e.channel);
  }

  if (any_cache) {
    int ch = pick_channel(p, p.cache.line_bytes);
    used_channels.insert(ch);
    Component c;
    c.id = "cache0";
    c.kind = "cache";
    c.params = json{{"assoc", p.cache.assoc},
                    {"capacity_bytes", p.cache.capacity_bytes},
                    {"channel", ch},
                    {"hit_latency", p.cache.hit_latency},
                    {"line_bytes", p.cache.line_bytes}};
    a.components.push_back(std::move(c));
  }

  int lis_n = 0;
  for (const auto& [name, e] : placement.arrays) {  // map order = name order
    if (e.where != Placement::OffChip || tiling.arrays.count(name)) continue;
    const ArrayDecl* arr = k.find_array(name);
    Component c;
    c.id = "lis" + std::to_string(lis_n++);
    c.kind = "lis_channel";
    c.params = json{{"array", name},
                    {"channel", e.channel},
                    {"element_bytes", arr->element_bytes()},
                    {"reads", reads.at(name)},
                    {"writes", writes.at(name)}};
    lis_of[name] = c.id;
    a.components.push_back(std::move(c));
  }

  const bool any_offchip = !buf_of.empty() || any_offchip_untiled;
  if (any_offchip) {
    a.components.push_back(
        {"dma0", "dma",
         json{{"max_burst_bytes", p.dma.max_burst_bytes}, {"setup_cycles", p.dma.setup_cycles}}});
    std::vector<int> chans(used_channels.begin(), used_channels.end());
    a.components.push_back(
        {"ctrl0", "channel_controller",
         json{{"channels", chans}, {"simplified", false}}});
  }
  bool any_db = false;
  for (const auto& [name, pe] : prefetch.arrays)
    if (pe.mode == TransferMode::DoubleBuffer) any_db = true;
  if (any_db) a.components.push_back({"pf0", "prefetcher", json{{"lookahead", 1}}});

  std::sort(a.components.begin(), a.components.end(),
            [](const Component& x, const Component& y) { return x.id < y.id; });

  for (const auto& [name, e] : placement.arrays) {
    Binding b;
    switch (e.where) {
      case Placement::OnChipPlm:
        b.group = sharing.group_of(name);
        b.component = "plm" + std::to_string(b.group);
        break;
      case Placement::OnChipCache:
        b.component = "cache0";
        break;
      case Placement::OffChip:
        b.component = buf_of.count(name) ? buf_of.at(name) : lis_of.at(name);
        break;
    }
    a.bindings[name] = std::move(b);
  }

  rebuild_connections(a, p);
  recompute_area(a, p);
  return a;
}

void simplify_architecture(MemoryArchitecture& a, const PlatformSpec& p) {
  bool any_db = false, any_offchip = false;
  for (const auto& c : a.components) {
    if (is_buffer(c)) {
      any_offchip = true;
      if (c.params.at("mode") == "double_buffer") any_db = true;
    }
    if (c.kind == "lis_channel") any_offchip = true;
  }
  auto drop = [&](const std::string& id) {
    a.components.erase(std::remove_if(a.components.begin(), a.components.end(),
                                      [&](const Component& c) { return c.id == id; }),
                       a.components.end());
  };
  if (!any_db) drop("pf0");
  if (!any_offchip) {
    drop("dma0");
    drop("ctrl0");
  }
  for (auto& c : a.components)
    if (c.kind == "channel_controller")
      c.params["simplified"] = c.params.at("channels").size() == 1;
  rebuild_connections(a, p);
  recompute_area(a, p);
}

MemoryArchitecture build_baseline(const Kernel& k, const PlatformSpec& p) {
  PlacementPlan placement;
  BankingPlan banking;
  SharingPlan sharing;
  if (p.on_chip_only()) {
    int gid = 0;
    for (const auto& arr : k.arrays) {
      PlacementEntry e;
      e.where = Placement::OnChipPlm;
      e.footprint_bytes = arr.footprint_bytes();
      placement.arrays[arr.name] = e;
    }
    for (const auto& [name, e] : placement.arrays) {  // name order, as plan_sharing sorts
      const ArrayDecl* arr = k.find_array(name);
      u64 w = next_pow2(arr->elements());
      BankingChoice bc;
      bc.banks = i64(w > p.bank.max_words ? w / p.bank.max_words : 1);
      bc.ports = 1;
      bc.scheme = BankScheme::Cyclic;
      bc.words_per_bank = w / u64(bc.banks);
      bc.cost = bank_cost(w, 1, p.bank);
      banking.arrays[name] = bc;
      SharingGroup g;
      g.id = gid++;
      g.members = {name};
      g.banks = bc.banks;
      g.ports = 1;
      g.scheme = BankScheme::Cyclic;
      g.words_per_bank = bc.words_per_bank;
      sharing.groups.push_back(std::move(g));
    }
  } else {
    for (const auto& arr : k.arrays) {
      PlacementEntry e;
      e.where = Placement::OffChip;
      e.footprint_bytes = arr.footprint_bytes();
      e.channel = pick_channel(p, e.footprint_bytes);
      placement.arrays[arr.name] = e;
    }
  }
  MemoryArchitecture a =
      build_architecture(k, p, placement, TilingPlan{}, PrefetchPlan{}, banking, sharing);
  simplify_architecture(a, p);
  return a;
}

ArchParseResult parse_architecture(std::string_view text) {
  ArchParseResult res;
  Diagnostics& diags = res.diags;
  auto err = [&](const std::string& m) { diags.push_back({0, 0, m}); };

  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    err("architecture: not a JSON object");
    return res;
  }
  MemoryArchitecture a;
  static const std::set<std::string> kKinds = {"plm",        "cache",
                                               "dma",        "prefetcher",
                                               "channel_controller", "lis_channel"};
  if (!j.contains("components") || !j.at("components").is_array()) {
    err("architecture: missing 'components' array");
    return res;
  }
  for (const json& cj : j.at("components")) {
    Component c;
    if (!cj.is_object() || !cj.contains("id") || !cj.contains("kind") ||
        !cj.contains("params")) {
      err("architecture: component entries need id/kind/params");
      continue;
    }
    c.id = cj.at("id").get<std::string>();
    c.kind = cj.at("kind").get<std::string>();
    c.params = cj.at("params");
    if (!kKinds.count(c.kind)) err("architecture: unknown component kind '" + c.kind + "'");
    a.components.push_back(std::move(c));
  }
  if (j.contains("bindings") && j.at("bindings").is_object()) {
    for (auto it = j.at("bindings").begin(); it != j.at("bindings").end(); ++it) {
      Binding b;
      if (!it.value().is_object() || !it.value().contains("component")) {
        err("architecture: binding for '" + it.key() + "' needs a component");
        continue;
      }
      b.component = it.value().at("component").get<std::string>();
      if (it.value().contains("group")) b.group = it.value().at("group").get<int>();
      if (!a.find(b.component))
        err("architecture: binding for '" + it.key() + "' references unknown component '" +
            b.component + "'");
      a.bindings[it.key()] = std::move(b);
    }
  }
  if (j.contains("connections") && j.at("connections").is_array()) {
    for (const json& e : j.at("connections")) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string()) {
        err("architecture: connections must be [from, to] string pairs");
        continue;
      }
      std::string from = e[0].get<std::string>(), to = e[1].get<std::string>();
      for (const std::string& node : {from, to}) {
        if (node == "accel" || a.find(node)) continue;
        if (node.rfind("chan", 0) == 0 &&
            node.find_first_not_of("0123456789", 4) == std::string::npos &&
            node.size() > 4)
          continue;
        err("architecture: connection endpoint '" + node + "' is not a component");
      }
      a.connections.emplace_back(std::move(from), std::move(to));
    }
  }
  if (j.contains("area") && j.at("area").is_number_integer())
    a.area = j.at("area").get<u64>();
  if (j.contains("meta") && j.at("meta").is_object()) {
    const json& m = j.at("meta");
    if (m.contains("input_hashes") && m.at("input_hashes").is_object()) {
      const json& h = m.at("input_hashes");
      if (h.contains("kernel")) a.kernel_hash = h.at("kernel").get<std::string>();
      if (h.contains("platform")) a.platform_hash = h.at("platform").get<std::string>();
    }
  }
  if (diags.empty()) res.arch = std::move(a);
  return res;
}

}  // namespace memforge
