#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace memforge {

struct Diagnostic {
  int line = 0;
  int col = 0;
  std::string message;
};

using Diagnostics = std::vector<Diagnostic>;

std::string format_diagnostics(const Diagnostics& diags);

/// Failure raised by analyses and pipeline phases (distinct from parse
/// diagnostics, which are collected and reported in bulk).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace memforge
