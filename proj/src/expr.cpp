#include "exitlab/expr.hpp"

#include <cctype>
#include <cstdlib>
#include <memory>
#include <sstream>

namespace exitlab::expr {
namespace {

struct Node;
using NodePtr = std::unique_ptr<Node>;

enum class Kind { kConst, kVar, kBinary, kNeg, kCall };

struct Node {
  Kind kind;
  double value = 0.0;    // kConst
  char binop = 0;        // kBinary: + - * / ^
  std::string func;      // kCall
  NodePtr lhs, rhs;      // kBinary: both; kNeg/kCall: lhs only
};

// Grammar:
//   expr    := term (('+'|'-') term)*
//   term    := unary (('*'|'/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?          (right associative)
//   primary := number | 'x' | ident '(' expr ')' | '(' expr ')'
class Parser {
 public:
  explicit Parser(const std::string& text) : text_(text) {}

  NodePtr run() {
    skip_ws();
    if (pos_ >= text_.size()) throw ParseError("empty expression", 0);
    NodePtr root = expr();
    skip_ws();
    if (pos_ < text_.size())
      throw ParseError("unexpected trailing input", pos_);
    return root;
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  NodePtr expr() {
    NodePtr lhs = term();
    for (;;) {
      const char c = peek();
      if (c != '+' && c != '-') return lhs;
      ++pos_;
      NodePtr rhs = term();
      lhs = binary(c, std::move(lhs), std::move(rhs));
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    for (;;) {
      const char c = peek();
      if (c != '*' && c != '/') return lhs;
      ++pos_;
      NodePtr rhs = unary();
      lhs = binary(c, std::move(lhs), std::move(rhs));
    }
  }

  NodePtr unary() {
    if (peek() == '-') {
      ++pos_;
      auto n = std::make_unique<Node>();
      n->kind = Kind::kNeg;
      n->lhs = unary();
      return n;
    }
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    if (peek() == '^') {
      ++pos_;
      NodePtr exponent = unary();
      return binary('^', std::move(base), std::move(exponent));
    }
    return base;
  }

  NodePtr primary() {
    skip_ws();
    if (pos_ >= text_.size()) throw ParseError("unexpected end of input", pos_);
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr inner = expr();
      if (peek() != ')') throw ParseError("expected ')'", pos_);
      ++pos_;
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
    throw ParseError(std::string("unexpected character '") + c + "'", pos_);
  }

  NodePtr number() {
    const char* begin = text_.c_str() + pos_;
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) throw ParseError("malformed number", pos_);
    pos_ += static_cast<std::size_t>(end - begin);
    auto n = std::make_unique<Node>();
    n->kind = Kind::kConst;
    n->value = v;
    return n;
  }

  NodePtr identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           std::isalpha(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
    const std::string name = text_.substr(start, pos_ - start);
    if (name == "x") {
      auto n = std::make_unique<Node>();
      n->kind = Kind::kVar;
      return n;
    }
    if (name != "sin" && name != "cos" && name != "exp" && name != "tanh" &&
        name != "abs")
      throw ParseError("unknown identifier '" + name + "'", start);
    if (peek() != '(')
      throw ParseError("function '" + name + "' expects one argument", pos_);
    ++pos_;
    NodePtr arg = expr();
    if (peek() == ',')
      throw ParseError("function '" + name + "' takes exactly one argument", pos_);
    if (peek() != ')') throw ParseError("expected ')'", pos_);
    ++pos_;
    auto n = std::make_unique<Node>();
    n->kind = Kind::kCall;
    n->func = name;
    n->lhs = std::move(arg);
    return n;
  }

  NodePtr binary(char op, NodePtr lhs, NodePtr rhs) {
    auto n = std::make_unique<Node>();
    n->kind = Kind::kBinary;
    n->binop = op;
    n->lhs = std::move(lhs);
    n->rhs = std::move(rhs);
    return n;
  }

  const std::string& text_;
  std::size_t pos_ = 0;
};

int precedence(char op) {
  switch (op) {
    case '+':
    case '-':
      return 1;
    case '*':
    case '/':
      return 2;
    case '^':
      return 4;
  }
  return 0;
}

std::string format_const(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// parent_prec: minimal precedence at which this subtree needs parentheses.
void unparse(const Node& n, int parent_prec, std::string& out) {
  switch (n.kind) {
    case Kind::kConst:
      if (n.value < 0) {
        out += '(';
        out += format_const(n.value);
        out += ')';
      } else {
        out += format_const(n.value);
      }
      break;
    case Kind::kVar:
      out += 'x';
      break;
    case Kind::kNeg: {
      const bool parens = parent_prec > 3;
      if (parens) out += '(';
      out += '-';
      unparse(*n.lhs, 4, out);
      if (parens) out += ')';
      break;
    }
    case Kind::kCall:
      out += n.func;
      out += '(';
      unparse(*n.lhs, 0, out);
      out += ')';
      break;
    case Kind::kBinary: {
      const int prec = precedence(n.binop);
      const bool parens = prec < parent_prec;
      if (parens) out += '(';
      // Left operand needs parens at equal precedence only for '^'
      // (right associative); right operand at equal precedence for the
      // non-associative '-' and '/'.
      unparse(*n.lhs, n.binop == '^' ? prec + 1 : prec, out);
      out += n.binop;
      unparse(*n.rhs,
              (n.binop == '-' || n.binop == '/' || n.binop == '^') ? prec
                                                                   : prec + 1,
              out);
      if (parens) out += ')';
      break;
    }
  }
}

void compile(const Node& n, std::vector<Instr>& prog) {
  switch (n.kind) {
    case Kind::kConst:
      prog.push_back({Op::kPushConst, n.value});
      break;
    case Kind::kVar:
      prog.push_back({Op::kPushX});
      break;
    case Kind::kNeg:
      compile(*n.lhs, prog);
      prog.push_back({Op::kNeg});
      break;
    case Kind::kCall: {
      compile(*n.lhs, prog);
      Op op = Op::kSin;
      if (n.func == "cos")
        op = Op::kCos;
      else if (n.func == "exp")
        op = Op::kExp;
      else if (n.func == "tanh")
        op = Op::kTanh;
      else if (n.func == "abs")
        op = Op::kAbs;
      prog.push_back({op});
      break;
    }
    case Kind::kBinary: {
      compile(*n.lhs, prog);
      if (n.binop == '^' && n.rhs->kind == Kind::kConst) {
        const double e = n.rhs->value;
        if (e == static_cast<int>(e) && e >= 0 && e <= 16) {
          prog.push_back({Op::kPowInt, e});
          return;
        }
      }
      compile(*n.rhs, prog);
      Op op = Op::kAdd;
      switch (n.binop) {
        case '-':
          op = Op::kSub;
          break;
        case '*':
          op = Op::kMul;
          break;
        case '/':
          op = Op::kDiv;
          break;
        case '^':
          op = Op::kPow;
          break;
      }
      prog.push_back({op});
      break;
    }
  }
}

}  // namespace

ScalarFunction ScalarFunction::parse(const std::string& text) {
  if (text.empty()) throw ParseError("empty expression", 0);
  Parser parser(text);
  NodePtr root = parser.run();
  ScalarFunction fn;
  compile(*root, fn.prog_);
  unparse(*root, 0, fn.text_);
  return fn;
}

}  // namespace exitlab::expr
