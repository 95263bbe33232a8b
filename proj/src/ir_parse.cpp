#include <algorithm>
#include <cctype>
#include <set>
#include <unordered_map>

#include "memforge/ir.hpp"

namespace memforge {
namespace {

enum class Tok { Ident, Int, Sym, DotDot, End };

struct Token {
  Tok kind;
  std::string text;
  i64 value = 0;
  int line = 1;
  int col = 1;
};

const std::set<std::string> kReserved = {
    "kernel", "const",    "array", "loop",  "in",    "unroll",
    "read",   "write",    "accum", "opaque", "transfer", "tile",
    "via",    "input",    "output", "inout", "temp"};

struct Lexer {
  std::string_view src;
  size_t pos = 0;
  int line = 1, col = 1;
  Diagnostics& diags;

  explicit Lexer(std::string_view s, Diagnostics& d) : src(s), diags(d) {}

  void advance(size_t n) {
    for (size_t i = 0; i < n && pos < src.size(); ++i, ++pos) {
      if (src[pos] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  }

  std::vector<Token> run() {
    std::vector<Token> out;
    while (pos < src.size()) {
      char c = src[pos];
      if (c == '#') {
        while (pos < src.size() && src[pos] != '\n') advance(1);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        advance(1);
        continue;
      }
      Token t;
      t.line = line;
      t.col = col;
      if (std::isdigit(static_cast<unsigned char>(c))) {
        size_t end = pos;
        while (end < src.size() &&
               std::isdigit(static_cast<unsigned char>(src[end])))
          ++end;
        t.kind = Tok::Int;
        t.text = std::string(src.substr(pos, end - pos));
        t.value = 0;
        for (char d : t.text) {
          t.value = t.value * 10 + (d - '0');
          if (t.value < 0) break;  // overflow clamp; validated later
        }
        advance(end - pos);
      } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        size_t end = pos;
        while (end < src.size() &&
               (std::isalnum(static_cast<unsigned char>(src[end])) ||
                src[end] == '_'))
          ++end;
        t.kind = Tok::Ident;
        t.text = std::string(src.substr(pos, end - pos));
        advance(end - pos);
      } else if (c == '.' && pos + 1 < src.size() && src[pos + 1] == '.') {
        t.kind = Tok::DotDot;
        t.text = "..";
        advance(2);
      } else if (std::string_view("{}[](),;:@=+-*/%").find(c) !=
                 std::string_view::npos) {
        t.kind = Tok::Sym;
        t.text = std::string(1, c);
        advance(1);
      } else {
        diags.push_back({line, col, std::string("unexpected character '") + c + "'"});
        advance(1);
        continue;
      }
      out.push_back(std::move(t));
    }
    out.push_back({Tok::End, "", 0, line, col});
    return out;
  }
};

struct VarRange {
  std::string name;
  i64 min_value;
  i64 max_value;
};

struct Parser {
  std::vector<Token> toks;
  size_t pos = 0;
  Diagnostics& diags;
  Kernel k;
  bool fatal = false;

  std::unordered_map<std::string, i64> consts;
  std::vector<VarRange> loop_vars;

  Parser(std::vector<Token> t, Diagnostics& d) : toks(std::move(t)), diags(d) {}

  const Token& cur() const { return toks[pos]; }
  const Token& peek(size_t n = 1) const {
    return toks[std::min(pos + n, toks.size() - 1)];
  }

  void error(const Token& t, const std::string& msg) {
    diags.push_back({t.line, t.col, msg});
  }

  void fail(const std::string& msg) {
    if (!fatal) error(cur(), msg);
    fatal = true;
  }

  bool accept_sym(const char* s) {
    if (cur().kind == Tok::Sym && cur().text == s) {
      ++pos;
      return true;
    }
    return false;
  }

  bool accept_ident(const char* s) {
    if (cur().kind == Tok::Ident && cur().text == s) {
      ++pos;
      return true;
    }
    return false;
  }

  void expect_sym(const char* s) {
    if (!accept_sym(s) && !fatal) fail(std::string("expected '") + s + "'");
  }

  void expect_ident(const char* s) {
    if (!accept_ident(s) && !fatal)
      fail(std::string("expected '") + s + "'");
  }

  std::string expect_name(const char* what) {
    if (cur().kind != Tok::Ident) {
      fail(std::string("expected ") + what);
      return "";
    }
    std::string n = cur().text;
    ++pos;
    if (kReserved.count(n)) {
      error(toks[pos - 1], "'" + n + "' is reserved");
    }
    return n;
  }

  i64 expect_int(const char* what) {
    if (cur().kind == Tok::Int) {
      i64 v = cur().value;
      ++pos;
      return v;
    }
    // allow a declared constant wherever a literal integer is expected
    if (cur().kind == Tok::Ident) {
      auto it = consts.find(cur().text);
      if (it != consts.end()) {
        ++pos;
        return it->second;
      }
    }
    fail(std::string("expected ") + what);
    return 0;
  }

  const VarRange* find_var(const std::string& name) const {
    for (auto it = loop_vars.rbegin(); it != loop_vars.rend(); ++it)
      if (it->name == name) return &*it;
    return nullptr;
  }

  // expr := ['-'] term (('+'|'-') term)*
  // term := INT ['*'? IDENT] | IDENT ['*' INT]
  AffineExpr parse_affine(bool allow_vars) {
    AffineExpr e;
    i64 sign = 1;
    if (accept_sym("-")) sign = -1;
    parse_term(e, sign, allow_vars);
    while (!fatal) {
      if (accept_sym("+")) {
        parse_term(e, 1, allow_vars);
      } else if (accept_sym("-")) {
        parse_term(e, -1, allow_vars);
      } else {
        break;
      }
    }
    return e;
  }

  void parse_term(AffineExpr& e, i64 sign, bool allow_vars) {
    if (cur().kind == Tok::Int) {
      i64 c = cur().value;
      ++pos;
      bool star = accept_sym("*");
      if (cur().kind == Tok::Ident && (star || !kReserved.count(cur().text))) {
        resolve_term(e, cur(), sign * c, allow_vars);
        ++pos;
      } else if (star) {
        fail("expected identifier after '*'");
      } else {
        e.constant += sign * c;
      }
      return;
    }
    if (cur().kind == Tok::Ident) {
      Token id = cur();
      ++pos;
      i64 c = 1;
      if (accept_sym("*")) {
        if (cur().kind != Tok::Int) {
          fail("expected integer after '*'");
          return;
        }
        c = cur().value;
        ++pos;
      }
      resolve_term(e, id, sign * c, allow_vars);
      return;
    }
    fail("expected affine term");
  }

  void resolve_term(AffineExpr& e, const Token& id, i64 coeff, bool allow_vars) {
    if (allow_vars && find_var(id.text)) {
      e.add_term(id.text, coeff);
      return;
    }
    auto it = consts.find(id.text);
    if (it != consts.end()) {
      e.constant += coeff * it->second;
      return;
    }
    error(id, allow_vars
                  ? "unknown identifier '" + id.text + "' (not a loop variable or const)"
                  : "unknown constant '" + id.text + "'");
  }

  i64 const_expr(const char* what) {
    AffineExpr e = parse_affine(/*allow_vars=*/false);
    if (!e.is_constant()) fail(std::string(what) + " must be constant");
    return e.constant;
  }

  void parse() {
    expect_ident("kernel");
    if (cur().kind != Tok::Ident) {
      fail("expected kernel name");
      return;
    }
    k.name = cur().text;
    ++pos;
    expect_sym("{");
    // declarations first, then one or more loops
    while (!fatal) {
      if (accept_ident("const")) {
        parse_const();
      } else if (accept_ident("array")) {
        parse_array();
      } else {
        break;
      }
    }
    int nloops = 0;
    while (!fatal && accept_ident("loop")) {
      k.loops.push_back(parse_loop());
      ++nloops;
    }
    if (!fatal && nloops == 0) fail("kernel requires at least one loop");
    expect_sym("}");
    if (!fatal && cur().kind != Tok::End) fail("trailing input after kernel");
  }

  void parse_const() {
    Token at = cur();
    std::string name = expect_name("const name");
    expect_sym("=");
    i64 v = const_expr("const value");
    expect_sym(";");
    if (fatal) return;
    if (consts.count(name)) error(at, "duplicate const '" + name + "'");
    consts[name] = v;
    k.constants.emplace_back(name, v);
  }

  void parse_array() {
    Token at = cur();
    ArrayDecl a;
    a.name = expect_name("array name");
    expect_sym(":");
    a.element_bits = expect_int("element width");
    expect_ident("b");
    // dims: any of [4],[4]  [4][4]  [4,4]
    while (!fatal && accept_sym("[")) {
      a.dims.push_back(expect_int("dimension"));
      while (accept_sym(",")) a.dims.push_back(expect_int("dimension"));
      expect_sym("]");
      if (cur().kind == Tok::Sym && cur().text == "," &&
          peek().kind == Tok::Sym && peek().text == "[") {
        ++pos;  // dim separator
      }
    }
    if (accept_ident("input")) a.direction = Direction::Input;
    else if (accept_ident("output")) a.direction = Direction::Output;
    else if (accept_ident("inout")) a.direction = Direction::Inout;
    else if (accept_ident("temp")) a.direction = Direction::Temp;
    else fail("expected array direction");
    while (!fatal && accept_sym("@")) {
      if (accept_ident("locality")) a.locality = true;
      else if (accept_ident("irregular")) a.irregular = true;
      else if (accept_ident("readonly")) a.readonly = true;
      else if (accept_ident("layout")) {
        expect_sym("(");
        std::vector<int> perm;
        perm.push_back(int(expect_int("layout index")));
        while (accept_sym(",")) perm.push_back(int(expect_int("layout index")));
        expect_sym(")");
        a.applied_layout = perm;
      } else {
        fail("unknown array annotation");
      }
    }
    expect_sym(";");
    if (fatal) return;

    if (k.find_array(a.name) || consts.count(a.name))
      error(at, "duplicate name '" + a.name + "'");
    if (a.element_bits < 1 || a.element_bits > 4096)
      error(at, "element width out of range for '" + a.name + "'");
    if (a.dims.empty()) error(at, "array '" + a.name + "' has no dimensions");
    u64 elems = 1;
    for (i64 d : a.dims) {
      if (d < 1) error(at, "non-positive dimension in '" + a.name + "'");
      elems *= u64(std::max<i64>(d, 1));
      if (elems > (u64(1) << 40)) {
        error(at, "array '" + a.name + "' footprint too large");
        break;
      }
    }
    if (a.locality && a.irregular)
      error(at, "'" + a.name + "': @locality and @irregular are exclusive");
    if (a.applied_layout) {
      std::vector<int> p = *a.applied_layout;
      std::sort(p.begin(), p.end());
      bool ok = p.size() == a.dims.size();
      for (size_t i = 0; ok && i < p.size(); ++i) ok = (p[i] == int(i));
      if (!ok) error(at, "'" + a.name + "': invalid @layout permutation");
    }
    k.arrays.push_back(std::move(a));
  }

  LoopNest parse_loop() {
    Token at = cur();
    LoopNest L;
    L.var = expect_name("loop variable");
    expect_ident("in");
    L.lower = const_expr("loop bound");
    if (cur().kind != Tok::DotDot) {
      fail("expected '..'");
      return L;
    }
    ++pos;
    L.upper = const_expr("loop bound");
    if (accept_ident("unroll")) L.unroll = expect_int("unroll factor");
    expect_sym("{");
    if (fatal) return L;

    if (L.lower < 0 || L.upper <= L.lower)
      error(at, "loop '" + L.var + "' bounds must satisfy 0 <= lower < upper");
    i64 trip = L.trip();
    if (L.unroll < 1 || (trip > 0 && trip % L.unroll != 0))
      error(at, "unroll factor of '" + L.var + "' must divide trip count " +
                    std::to_string(trip));
    if (find_var(L.var)) error(at, "loop variable '" + L.var + "' shadows an outer loop");
    if (consts.count(L.var) || k.find_array(L.var))
      error(at, "loop variable '" + L.var + "' collides with a declaration");

    i64 last = trip > 0 ? L.lower + L.step * (trip - 1) : L.lower;
    loop_vars.push_back({L.var, L.lower, last});
    while (!fatal) {
      if (accept_sym("}")) break;
      if (accept_ident("loop")) {
        LoopNest child = parse_loop();
        L.children.push_back(std::move(child));
        L.body.push_back({LoopNest::ItemKind::Loop, int(L.children.size()) - 1});
      } else if (cur().kind == Tok::Ident &&
                 (cur().text == "read" || cur().text == "write" ||
                  cur().text == "accum")) {
        int id = parse_statement();
        L.body.push_back({LoopNest::ItemKind::Stmt, id});
      } else if (accept_ident("transfer")) {
        int id = parse_transfer();
        L.body.push_back({LoopNest::ItemKind::Transfer, id});
      } else {
        fail("expected statement, loop, transfer or '}'");
        break;
      }
    }
    loop_vars.pop_back();
    return L;
  }

  AccessKind kind_from(const std::string& s) {
    if (s == "read") return AccessKind::Read;
    if (s == "write") return AccessKind::Write;
    return AccessKind::Accum;
  }

  int parse_statement() {
    Statement st;
    AccessKind kind = kind_from(cur().text);
    ++pos;
    while (!fatal) {
      st.accesses.push_back(parse_access(kind));
      if (accept_sym(",")) {
        if (cur().kind == Tok::Ident &&
            (cur().text == "read" || cur().text == "write" ||
             cur().text == "accum")) {
          kind = kind_from(cur().text);
          ++pos;
        }
        continue;
      }
      expect_sym(";");
      break;
    }
    if (!fatal) validate_statement(st);
    k.statements.push_back(std::move(st));
    return int(k.statements.size()) - 1;
  }

  Access parse_access(AccessKind kind) {
    Access a;
    a.kind = kind;
    Token at = cur();
    if (cur().kind != Tok::Ident) {
      fail("expected array name");
      return a;
    }
    a.array = cur().text;
    ++pos;
    while (!fatal && accept_sym("[")) {
      IndexExpr ix;
      if (accept_ident("opaque")) {
        expect_sym("(");
        if (cur().kind != Tok::Ident) {
          fail("expected array name in opaque()");
        } else {
          ix.opaque_source = cur().text;
          ++pos;
        }
        expect_sym(")");
      } else {
        ix.affine = parse_affine(/*allow_vars=*/true);
      }
      expect_sym("]");
      a.indices.push_back(std::move(ix));
    }
    if (accept_sym("@")) {
      expect_ident("mem");
      a.mem = parse_mem_annotation();
    }
    if (fatal) return a;
    validate_access(at, a);
    return a;
  }

  MemAnnotation parse_mem_annotation() {
    MemAnnotation m;
    expect_sym("(");
    if (cur().kind != Tok::Ident) {
      fail("expected component id in @mem");
      return m;
    }
    m.component = cur().text;
    ++pos;
    expect_sym(",");
    if (accept_ident("bank")) {
      expect_sym("=");
      m.bank = raw_until_comma();
      expect_sym(",");
    }
    if (accept_ident("fixed")) {
      expect_sym("(");
      m.fixed_latency = expect_int("latency");
      expect_sym(")");
    } else if (accept_ident("unbounded")) {
      m.unbounded = true;
    } else {
      fail("expected fixed(..) or unbounded in @mem");
    }
    expect_sym(")");
    return m;
  }

  // Bank expressions are carried as canonical text, not interpreted.
  std::string raw_until_comma() {
    std::string out;
    int depth = 0;
    while (!fatal && cur().kind != Tok::End) {
      if (cur().kind == Tok::Sym) {
        if (cur().text == "(") ++depth;
        if (cur().text == ")") {
          if (depth == 0) break;
          --depth;
        }
        if (cur().text == "," && depth == 0) break;
      }
      out += cur().text;
      ++pos;
    }
    return out;
  }

  int parse_transfer() {
    Token at = cur();
    TransferStmt t;
    if (cur().kind != Tok::Ident) {
      fail("expected array name after transfer");
      return 0;
    }
    t.array = cur().text;
    ++pos;
    expect_ident("tile");
    t.tile.push_back(expect_int("tile dimension"));
    while (accept_sym(",")) t.tile.push_back(expect_int("tile dimension"));
    expect_ident("via");
    if (cur().kind != Tok::Ident) {
      fail("expected component id after via");
    } else {
      t.component = cur().text;
      ++pos;
    }
    expect_sym(";");
    if (fatal) return 0;

    const ArrayDecl* arr = k.find_array(t.array);
    if (!arr) {
      error(at, "transfer of undeclared array '" + t.array + "'");
    } else {
      if (t.tile.size() != arr->dims.size()) {
        error(at, "transfer tile rank mismatch for '" + t.array + "'");
      } else {
        for (size_t d = 0; d < t.tile.size(); ++d)
          if (t.tile[d] < 1 || arr->dims[d] % t.tile[d] != 0)
            error(at, "transfer tile of '" + t.array + "' must divide its dims");
      }
    }
    k.transfers.push_back(std::move(t));
    return int(k.transfers.size()) - 1;
  }

  void validate_access(const Token& at, const Access& a) {
    const ArrayDecl* arr = k.find_array(a.array);
    if (!arr) {
      error(at, "access to undeclared array '" + a.array + "'");
      return;
    }
    if (a.indices.size() != arr->dims.size()) {
      error(at, "access to '" + a.array + "' has " +
                    std::to_string(a.indices.size()) + " indices, expected " +
                    std::to_string(arr->dims.size()));
      return;
    }
    for (size_t d = 0; d < a.indices.size(); ++d) {
      const IndexExpr& ix = a.indices[d];
      if (ix.is_opaque()) {
        if (!k.find_array(*ix.opaque_source))
          error(at, "opaque index source '" + *ix.opaque_source +
                        "' is not a declared array");
        if (arr->locality)
          error(at, "'" + a.array + "' is @locality but has an opaque access");
        continue;
      }
      // static range of the affine index over the enclosing iteration box
      i64 lo = ix.affine.constant, hi = ix.affine.constant;
      for (const auto& [var, c] : ix.affine.coeffs) {
        const VarRange* r = find_var(var);
        if (!r) continue;  // reported by resolve_term already
        lo += c > 0 ? c * r->min_value : c * r->max_value;
        hi += c > 0 ? c * r->max_value : c * r->min_value;
      }
      if (lo < 0 || hi >= arr->dims[d])
        error(at, "index " + std::to_string(d) + " of '" + a.array +
                      "' ranges [" + std::to_string(lo) + "," +
                      std::to_string(hi) + "] outside [0," +
                      std::to_string(arr->dims[d]) + ")");
    }
  }

  void validate_statement(const Statement& st) {
    if (st.accesses.empty()) return;
    for (size_t i = 0; i < st.accesses.size(); ++i) {
      const Access& a = st.accesses[i];
      if (!a.writes()) continue;
      for (size_t j = i + 1; j < st.accesses.size(); ++j) {
        const Access& b = st.accesses[j];
        if (!b.writes() || b.array != a.array) continue;
        if (a.indices == b.indices) {
          diags.push_back({0, 0,
                           "statement writes '" + a.array +
                               "' twice at the same address in one instance"});
          return;
        }
      }
    }
  }
};

}  // namespace

ParseResult parse_kernel(std::string_view text) {
  ParseResult r;
  Lexer lex(text, r.diags);
  Parser p(lex.run(), r.diags);
  p.parse();
  if (r.diags.empty()) r.kernel = std::move(p.k);
  return r;
}

}  // namespace memforge
