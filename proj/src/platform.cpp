#include "memforge/platform.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "json.hpp"

namespace memforge {

using nlohmann::json;

const char* to_string(ChannelKind k) {
  return k == ChannelKind::Dram ? "dram" : "nvm";
}

const Channel* PlatformSpec::channel_by_id(int id) const {
  for (const auto& c : channels)
    if (c.id == id) return &c;
  return nullptr;
}

u64 bank_cost(u64 words, u64 word_bits, u64 ports, double alpha) {
  u64 base = words * word_bits;
  if (ports <= 1) return base;
  long double extra = static_cast<long double>(base) * alpha * (ports - 1);
  return base + static_cast<u64>(std::ceil(extra));
}

u64 cache_area(const CachePrimitive& c) { return c.capacity_bytes * 8; }

u64 plm_words(u64 elements) { return next_pow2(elements); }

namespace {

struct Ctx {
  Diagnostics diags;
  void err(const std::string& m) { diags.push_back({0, 0, m}); }

  bool want_u64(const json& j, const char* key, u64& out, u64 min_val = 0) {
    if (!j.contains(key)) {
      err(std::string("platform: missing field '") + key + "'");
      return false;
    }
    const json& v = j.at(key);
    if (!v.is_number_integer() || v.get<i64>() < 0) {
      err(std::string("platform: '") + key + "' must be a non-negative integer");
      return false;
    }
    out = v.get<u64>();
    if (out < min_val) {
      err(std::string("platform: '") + key + "' must be >= " + std::to_string(min_val));
      return false;
    }
    return true;
  }

  void check_keys(const json& j, std::set<std::string> allowed, const char* where) {
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!allowed.count(it.key()))
        err(std::string("platform: unknown field '") + it.key() + "' in " + where);
  }
};

}  // namespace

PlatformParseResult parse_platform(std::string_view text) {
  PlatformParseResult res;
  Ctx c;
  json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) {
    c.err("platform: not a JSON object");
    res.diags = std::move(c.diags);
    return res;
  }

  PlatformSpec p;
  c.check_keys(j, {"budget", "bank", "cache", "channels", "dma"}, "platform");
  c.want_u64(j, "budget", p.budget);

  if (j.contains("bank") && j.at("bank").is_object()) {
    const json& b = j.at("bank");
    c.check_keys(b, {"max_words", "word_bits", "max_ports", "alpha"}, "bank");
    c.want_u64(b, "max_words", p.bank.max_words, 1);
    c.want_u64(b, "word_bits", p.bank.word_bits, 1);
    c.want_u64(b, "max_ports", p.bank.max_ports, 1);
    if (b.contains("alpha")) {
      if (!b.at("alpha").is_number() || b.at("alpha").get<double>() < 0.0)
        c.err("platform: 'alpha' must be a non-negative number");
      else
        p.bank.alpha = b.at("alpha").get<double>();
    }
    if (!is_pow2(p.bank.max_words)) c.err("platform: 'max_words' must be a power of two");
  } else {
    c.err("platform: missing object 'bank'");
  }

  if (j.contains("cache")) {
    if (!j.at("cache").is_object()) {
      c.err("platform: 'cache' must be an object");
    } else {
      const json& k = j.at("cache");
      c.check_keys(k, {"line_bytes", "capacity_bytes", "assoc", "hit_latency"}, "cache");
      c.want_u64(k, "line_bytes", p.cache.line_bytes, 1);
      c.want_u64(k, "capacity_bytes", p.cache.capacity_bytes);
      c.want_u64(k, "assoc", p.cache.assoc, 1);
      c.want_u64(k, "hit_latency", p.cache.hit_latency, 1);
      if (!is_pow2(p.cache.line_bytes)) c.err("platform: 'line_bytes' must be a power of two");
      if (p.cache.capacity_bytes > 0) {
        u64 set_bytes = p.cache.line_bytes * p.cache.assoc;
        if (set_bytes == 0 || p.cache.capacity_bytes % set_bytes != 0)
          c.err("platform: cache capacity must be a multiple of line_bytes*assoc");
        else if (!is_pow2(p.cache.sets()))
          c.err("platform: cache set count must be a power of two");
      }
    }
  } else {
    p.cache.capacity_bytes = 0;  // no cache primitive on this platform
  }

  if (j.contains("channels")) {
    if (!j.at("channels").is_array()) {
      c.err("platform: 'channels' must be an array");
    } else {
      for (const json& e : j.at("channels")) {
        if (!e.is_object()) {
          c.err("platform: channel entries must be objects");
          continue;
        }
        c.check_keys(e, {"id", "kind", "latency", "bytes_per_cycle"}, "channel");
        Channel ch;
        u64 id = 0;
        c.want_u64(e, "id", id);
        ch.id = static_cast<int>(id);
        if (e.contains("kind") && e.at("kind").is_string()) {
          std::string s = e.at("kind").get<std::string>();
          if (s == "dram")
            ch.kind = ChannelKind::Dram;
          else if (s == "nvm")
            ch.kind = ChannelKind::Nvm;
          else
            c.err("platform: channel kind must be 'dram' or 'nvm'");
        } else {
          c.err("platform: channel missing string 'kind'");
        }
        c.want_u64(e, "latency", ch.latency);
        c.want_u64(e, "bytes_per_cycle", ch.bytes_per_cycle, 1);
        p.channels.push_back(ch);
      }
      std::sort(p.channels.begin(), p.channels.end(),
                [](const Channel& a, const Channel& b) { return a.id < b.id; });
      for (size_t i = 1; i < p.channels.size(); ++i)
        if (p.channels[i].id == p.channels[i - 1].id)
          c.err("platform: duplicate channel id " + std::to_string(p.channels[i].id));
    }
  }

  if (j.contains("dma")) {
    if (!j.at("dma").is_object()) {
      c.err("platform: 'dma' must be an object");
    } else {
      const json& d = j.at("dma");
      c.check_keys(d, {"setup_cycles", "max_burst_bytes"}, "dma");
      c.want_u64(d, "setup_cycles", p.dma.setup_cycles);
      c.want_u64(d, "max_burst_bytes", p.dma.max_burst_bytes, 1);
    }
  } else if (!p.channels.empty()) {
    c.err("platform: 'dma' is required when channels are present");
  }

  res.diags = std::move(c.diags);
  if (res.diags.empty()) res.platform = std::move(p);
  return res;
}

std::string canonical_platform_json(const PlatformSpec& p) {
  json j;
  j["budget"] = p.budget;
  j["bank"] = {{"alpha", p.bank.alpha},
               {"max_ports", p.bank.max_ports},
               {"max_words", p.bank.max_words},
               {"word_bits", p.bank.word_bits}};
  if (p.cache.present())
    j["cache"] = {{"assoc", p.cache.assoc},
                  {"capacity_bytes", p.cache.capacity_bytes},
                  {"hit_latency", p.cache.hit_latency},
                  {"line_bytes", p.cache.line_bytes}};
  json chans = json::array();
  for (const auto& ch : p.channels)
    chans.push_back({{"bytes_per_cycle", ch.bytes_per_cycle},
                     {"id", ch.id},
                     {"kind", to_string(ch.kind)},
                     {"latency", ch.latency}});
  j["channels"] = std::move(chans);
  if (!p.channels.empty())
    j["dma"] = {{"max_burst_bytes", p.dma.max_burst_bytes},
                {"setup_cycles", p.dma.setup_cycles}};
  return j.dump(2);
}

}  // namespace memforge
