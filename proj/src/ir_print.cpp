#include <cassert>
#include <sstream>

#include "memforge/ir.hpp"

namespace memforge {
namespace {

void print_term(std::ostream& os, bool first, i64 coeff, const std::string& var) {
  i64 mag = coeff < 0 ? -coeff : coeff;
  if (first) {
    if (coeff < 0) os << "-";
  } else {
    os << (coeff < 0 ? "-" : "+");
  }
  if (mag != 1) os << mag << "*";
  os << var;
}

void print_index(std::ostream& os, const IndexExpr& ix) {
  if (ix.is_opaque()) {
    os << "opaque(" << *ix.opaque_source << ")";
    return;
  }
  os << print_affine(ix.affine);
}

void print_mem(std::ostream& os, const MemAnnotation& m) {
  os << " @mem(" << m.component;
  if (m.bank) os << ", bank=" << *m.bank;
  if (m.unbounded)
    os << ", unbounded";
  else
    os << ", fixed(" << m.fixed_latency << ")";
  os << ")";
}

struct Printer {
  const Kernel& k;
  std::ostringstream os;

  explicit Printer(const Kernel& kk) : k(kk) {}

  void indent(int depth) {
    for (int i = 0; i < depth; ++i) os << "  ";
  }

  void statement(const Statement& st, int depth) {
    indent(depth);
    for (size_t i = 0; i < st.accesses.size(); ++i) {
      const Access& a = st.accesses[i];
      if (i > 0) os << ", ";
      if (i == 0 || st.accesses[i - 1].kind != a.kind)
        os << to_string(a.kind) << " ";
      os << a.array;
      for (const auto& ix : a.indices) {
        os << "[";
        print_index(os, ix);
        os << "]";
      }
      if (a.mem) print_mem(os, *a.mem);
    }
    os << ";\n";
  }

  void transfer(const TransferStmt& t, int depth) {
    indent(depth);
    os << "transfer " << t.array << " tile ";
    for (size_t i = 0; i < t.tile.size(); ++i) {
      if (i > 0) os << ",";
      os << t.tile[i];
    }
    os << " via " << t.component << ";\n";
  }

  void loop(const LoopNest& L, int depth) {
    assert(L.step == 1 && "textual IR has no step syntax");
    indent(depth);
    os << "loop " << L.var << " in " << L.lower << ".." << L.upper;
    if (L.unroll != 1) os << " unroll " << L.unroll;
    os << " {\n";
    for (const auto& item : L.body) {
      switch (item.kind) {
        case LoopNest::ItemKind::Loop: loop(L.children[item.index], depth + 1); break;
        case LoopNest::ItemKind::Stmt: statement(k.statements[item.index], depth + 1); break;
        case LoopNest::ItemKind::Transfer: transfer(k.transfers[item.index], depth + 1); break;
      }
    }
    indent(depth);
    os << "}\n";
  }

  std::string run() {
    os << "kernel " << k.name << " {\n";
    for (const auto& [n, v] : k.constants) {
      indent(1);
      os << "const " << n << " = " << v << ";\n";
    }
    for (const auto& a : k.arrays) {
      indent(1);
      os << "array " << a.name << ": " << a.element_bits << "b";
      for (size_t d = 0; d < a.dims.size(); ++d) {
        if (d > 0) os << ",";
        os << "[" << a.dims[d] << "]";
      }
      os << " " << to_string(a.direction);
      if (a.locality) os << " @locality";
      if (a.irregular) os << " @irregular";
      if (a.readonly) os << " @readonly";
      if (a.applied_layout) {
        os << " @layout(";
        for (size_t i = 0; i < a.applied_layout->size(); ++i) {
          if (i > 0) os << ",";
          os << (*a.applied_layout)[i];
        }
        os << ")";
      }
      os << ";\n";
    }
    for (const auto& L : k.loops) loop(L, 1);
    os << "}\n";
    return os.str();
  }
};

}  // namespace

std::string print_affine(const AffineExpr& e) {
  std::ostringstream os;
  bool first = true;
  for (const auto& [var, c] : e.coeffs) {  // map order: sorted by name
    print_term(os, first, c, var);
    first = false;
  }
  if (first) {
    os << e.constant;
  } else if (e.constant != 0) {
    os << (e.constant < 0 ? "-" : "+")
       << (e.constant < 0 ? -e.constant : e.constant);
  }
  return os.str();
}

std::string print_kernel(const Kernel& k) { return Printer(k).run(); }

}  // namespace memforge
