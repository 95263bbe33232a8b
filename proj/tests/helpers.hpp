#pragma once

#include <string>

#include "doctest.h"
#include "memforge/ir.hpp"
#include "memforge/platform.hpp"

namespace memforge::test {

inline Kernel parse_kernel_ok(const std::string& text) {
  ParseResult pr = parse_kernel(text);
  if (!pr.ok()) FAIL(format_diagnostics(pr.diags));
  return std::move(*pr.kernel);
}

inline PlatformSpec parse_platform_ok(const std::string& text) {
  PlatformParseResult pr = parse_platform(text);
  if (!pr.ok()) FAIL(format_diagnostics(pr.diags));
  return std::move(*pr.platform);
}

// One DRAM channel (latency 100, 8 B/cycle), a small 2-way cache, zero-setup
// DMA with bursts large enough that kilobyte tiles move in one burst.
inline const char* kDefaultPlatform = R"({
  "budget": 262144,
  "bank": {"max_words": 4096, "word_bits": 32, "max_ports": 2, "alpha": 0.5},
  "cache": {"line_bytes": 64, "capacity_bytes": 4096, "assoc": 2, "hit_latency": 2},
  "channels": [{"id": 0, "kind": "dram", "latency": 100, "bytes_per_cycle": 8}],
  "dma": {"setup_cycles": 0, "max_burst_bytes": 4096}
})";

}  // namespace memforge::test
