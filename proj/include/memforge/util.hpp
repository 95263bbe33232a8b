#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace memforge {

using u64 = std::uint64_t;
using i64 = std::int64_t;

constexpr u64 ceil_div(u64 a, u64 b) { return b == 0 ? 0 : (a + b - 1) / b; }

constexpr bool is_pow2(u64 v) { return v != 0 && (v & (v - 1)) == 0; }

constexpr u64 next_pow2(u64 v) {
  u64 p = 1;
  while (p < v) p <<= 1;
  return p;
}

constexpr u64 kU64Max = ~static_cast<u64>(0);

constexpr u64 sat_add(u64 a, u64 b) { return a > kU64Max - b ? kU64Max : a + b; }

constexpr u64 sat_mul(u64 a, u64 b) {
  return (a != 0 && b > kU64Max / a) ? kU64Max : a * b;
}

u64 fnv1a64(std::string_view data);
/// 16 hex digits, lower case.
std::string fnv1a64_hex(std::string_view data);

}  // namespace memforge
