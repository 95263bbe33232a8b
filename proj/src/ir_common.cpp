#include <sstream>

#include "memforge/analysis.hpp"
#include "memforge/ir.hpp"

namespace memforge {

const char* to_string(Direction d) {
  switch (d) {
    case Direction::Input: return "input";
    case Direction::Output: return "output";
    case Direction::Inout: return "inout";
    case Direction::Temp: return "temp";
  }
  return "?";
}

const char* to_string(AccessKind k) {
  switch (k) {
    case AccessKind::Read: return "read";
    case AccessKind::Write: return "write";
    case AccessKind::Accum: return "accum";
  }
  return "?";
}

const char* to_string(AccessClassKind k) {
  switch (k) {
    case AccessClassKind::Regular: return "regular";
    case AccessClassKind::Locality: return "locality";
    case AccessClassKind::Irregular: return "irregular";
  }
  return "?";
}

void AffineExpr::add_term(const std::string& var, i64 coeff) {
  if (coeff == 0) return;
  auto it = coeffs.find(var);
  if (it == coeffs.end()) {
    coeffs.emplace(var, coeff);
    return;
  }
  it->second += coeff;
  if (it->second == 0) coeffs.erase(it);
}

bool Access::is_affine() const {
  for (const auto& ix : indices)
    if (ix.is_opaque()) return false;
  return true;
}

int Kernel::array_index(std::string_view name) const {
  for (size_t i = 0; i < arrays.size(); ++i)
    if (arrays[i].name == name) return int(i);
  return -1;
}

const ArrayDecl* Kernel::find_array(std::string_view name) const {
  int i = array_index(name);
  return i < 0 ? nullptr : &arrays[i];
}

ArrayDecl* Kernel::find_array(std::string_view name) {
  int i = array_index(name);
  return i < 0 ? nullptr : &arrays[i];
}

bool Kernel::has_transfer_for(std::string_view array) const {
  for (const auto& t : transfers)
    if (t.array == array) return true;
  return false;
}

std::string format_diagnostics(const Diagnostics& diags) {
  std::ostringstream os;
  for (const auto& d : diags) {
    os << d.line << ":" << d.col << ": " << d.message << "\n";
  }
  return os.str();
}

}  // namespace memforge
