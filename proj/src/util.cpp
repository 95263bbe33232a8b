#include "memforge/util.hpp"

#include <cstdio>

namespace memforge {

u64 fnv1a64(std::string_view data) {
  u64 h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string fnv1a64_hex(std::string_view data) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(data)));
  return std::string(buf);
}

}  // namespace memforge
