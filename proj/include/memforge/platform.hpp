#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "memforge/diagnostics.hpp"
#include "memforge/util.hpp"

namespace memforge {

// One physical SRAM macro shape.  All PLM banks instantiated by the tool use
// this primitive; capacity beyond max_words means more banks, not a bigger one.
struct BankPrimitive {
  u64 max_words = 4096;
  u64 word_bits = 32;
  u64 max_ports = 2;
  double alpha = 0.5;  // area multiplier per port beyond the first
};

// Optional set-associative cache primitive.  capacity_bytes == 0 means the
// platform ships no cache and irregular arrays must stay off-chip.
struct CachePrimitive {
  u64 line_bytes = 64;
  u64 capacity_bytes = 0;
  u64 assoc = 1;
  u64 hit_latency = 1;

  bool present() const { return capacity_bytes > 0; }
  u64 sets() const { return capacity_bytes / (line_bytes * assoc); }
};

enum class ChannelKind { Dram, Nvm };
const char* to_string(ChannelKind k);

struct Channel {
  int id = 0;
  ChannelKind kind = ChannelKind::Dram;
  u64 latency = 100;          // cycles from request to first beat
  u64 bytes_per_cycle = 8;    // sustained bandwidth once streaming
};

struct DmaParams {
  u64 setup_cycles = 0;
  u64 max_burst_bytes = 4096;
};

struct PlatformSpec {
  u64 budget = 0;  // on-chip area units (bit-equivalents)
  BankPrimitive bank;
  CachePrimitive cache;
  std::vector<Channel> channels;  // sorted by id after parse
  DmaParams dma;

  bool on_chip_only() const { return channels.empty(); }
  const Channel* channel_by_id(int id) const;
};

struct PlatformParseResult {
  std::optional<PlatformSpec> platform;
  Diagnostics diags;
  bool ok() const { return platform.has_value() && diags.empty(); }
};

PlatformParseResult parse_platform(std::string_view json_text);

// Stable re-serialization used for hashing and for echoing the platform in
// reports.  Field order is fixed; parsing its own output is lossless.
std::string canonical_platform_json(const PlatformSpec& p);

// Area of a bank group of `words` total words split across ports.  The base
// term words*word_bits is exact; the port surcharge is rounded up once.
u64 bank_cost(u64 words, u64 word_bits, u64 ports, double alpha);
inline u64 bank_cost(u64 words, u64 ports, const BankPrimitive& b) {
  return bank_cost(words, b.word_bits, ports, b.alpha);
}

u64 cache_area(const CachePrimitive& c);

// PLM capacity is allocated in power-of-two words of the platform word size.
u64 plm_words(u64 elements);

}  // namespace memforge
