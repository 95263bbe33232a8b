#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "memforge/diagnostics.hpp"
#include "memforge/util.hpp"

namespace memforge {

enum class Direction { Input, Output, Inout, Temp };
enum class AccessKind { Read, Write, Accum };

const char* to_string(Direction d);
const char* to_string(AccessKind k);

/// Integer-affine combination of induction variables plus a constant.
/// Zero coefficients are never stored, so map equality is structural equality.
struct AffineExpr {
  i64 constant = 0;
  std::map<std::string, i64> coeffs;

  bool is_constant() const { return coeffs.empty(); }
  bool same_coeffs(const AffineExpr& o) const { return coeffs == o.coeffs; }
  void add_term(const std::string& var, i64 coeff);
  bool operator==(const AffineExpr&) const = default;
};

struct IndexExpr {
  std::optional<std::string> opaque_source;  // set for opaque(<array>)
  AffineExpr affine;                         // valid when not opaque

  bool is_opaque() const { return opaque_source.has_value(); }
  bool operator==(const IndexExpr&) const = default;
};

/// `@mem(component, bank=<expr>, fixed(n)|unbounded)` suffix in lowered IR.
struct MemAnnotation {
  std::string component;
  std::optional<std::string> bank;  // canonical expression text
  bool unbounded = false;
  i64 fixed_latency = 1;

  bool operator==(const MemAnnotation&) const = default;
};

struct Access {
  std::string array;
  AccessKind kind = AccessKind::Read;
  std::vector<IndexExpr> indices;
  std::optional<MemAnnotation> mem;

  bool reads() const { return kind != AccessKind::Write; }
  bool writes() const { return kind != AccessKind::Read; }
  bool is_affine() const;
};

/// A set of accesses issued together in one cycle (before unrolling).
struct Statement {
  std::vector<Access> accesses;
};

/// `transfer <array> tile <dims> via <component>;` pseudo-statement.
struct TransferStmt {
  std::string array;
  std::vector<i64> tile;
  std::string component;
};

struct LoopNest {
  std::string var;
  i64 lower = 0;
  i64 upper = 0;  // half-open
  i64 step = 1;   // the textual grammar always produces 1
  i64 unroll = 1;

  enum class ItemKind { Loop, Stmt, Transfer };
  struct Item {
    ItemKind kind;
    int index;  // children / Kernel::statements / Kernel::transfers
  };

  std::vector<LoopNest> children;
  std::vector<Item> body;  // program order, statements and loops interleaved

  i64 trip() const {
    i64 span = upper - lower;
    return span <= 0 ? 0 : (span + step - 1) / step;
  }
};

struct ArrayDecl {
  std::string name;
  i64 element_bits = 32;
  std::vector<i64> dims;
  Direction direction = Direction::Temp;
  bool locality = false;
  bool irregular = false;
  bool readonly = false;
  /// Lowered-IR note: storage permutation already applied to dims/indices.
  std::optional<std::vector<int>> applied_layout;

  u64 elements() const {
    u64 n = 1;
    for (i64 d : dims) n *= u64(d);
    return n;
  }
  u64 element_bytes() const { return u64((element_bits + 7) / 8); }
  u64 footprint_bytes() const { return element_bytes() * elements(); }
};

struct Kernel {
  std::string name;
  std::vector<std::pair<std::string, i64>> constants;
  std::vector<ArrayDecl> arrays;
  std::vector<LoopNest> loops;        // top-level nests in program order
  std::vector<Statement> statements;  // global program order
  std::vector<TransferStmt> transfers;

  int array_index(std::string_view name) const;
  const ArrayDecl* find_array(std::string_view name) const;
  ArrayDecl* find_array(std::string_view name);
  bool has_transfer_for(std::string_view array) const;
};

struct ParseResult {
  std::optional<Kernel> kernel;
  Diagnostics diags;
  bool ok() const { return kernel.has_value(); }
};

/// Parses and validates kernel text. On any diagnostic the kernel is absent.
ParseResult parse_kernel(std::string_view text);

/// Canonical text form; print(parse(print(k))) == print(k).
std::string print_kernel(const Kernel& k);

/// Canonical affine rendering used by the printer and by bank expressions:
/// variable terms sorted by name, coefficient 1 elided, constant last.
std::string print_affine(const AffineExpr& e);

}  // namespace memforge
