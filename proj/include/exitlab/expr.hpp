#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace exitlab::expr {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

enum class Op : std::uint8_t {
  kPushConst,
  kPushX,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kPow,
  kPowInt,  // small non-negative integer exponent, unrolled multiplications
  kNeg,
  kSin,
  kCos,
  kExp,
  kTanh,
  kAbs,
};

struct Instr {
  Op op;
  double value = 0.0;  // constant for kPushConst, exponent for kPowInt
};

// A parsed arithmetic expression in the single variable x. The expression is
// compiled to a postfix program so evaluation in simulation hot loops is a
// tight switch over a small stack.
class ScalarFunction {
 public:
  ScalarFunction() = default;

  static ScalarFunction parse(const std::string& text);

  double operator()(double x) const {
    double stack[kMaxStack];
    int top = -1;
    for (const Instr& in : prog_) {
      switch (in.op) {
        case Op::kPushConst:
          stack[++top] = in.value;
          break;
        case Op::kPushX:
          stack[++top] = x;
          break;
        case Op::kAdd:
          --top;
          stack[top] += stack[top + 1];
          break;
        case Op::kSub:
          --top;
          stack[top] -= stack[top + 1];
          break;
        case Op::kMul:
          --top;
          stack[top] *= stack[top + 1];
          break;
        case Op::kDiv:
          --top;
          stack[top] /= stack[top + 1];
          break;
        case Op::kPow:
          --top;
          stack[top] = std::pow(stack[top], stack[top + 1]);
          break;
        case Op::kPowInt: {
          double base = stack[top];
          double acc = 1.0;
          for (int k = static_cast<int>(in.value); k > 0; --k) acc *= base;
          stack[top] = acc;
          break;
        }
        case Op::kNeg:
          stack[top] = -stack[top];
          break;
        case Op::kSin:
          stack[top] = std::sin(stack[top]);
          break;
        case Op::kCos:
          stack[top] = std::cos(stack[top]);
          break;
        case Op::kExp:
          stack[top] = std::exp(stack[top]);
          break;
        case Op::kTanh:
          stack[top] = std::tanh(stack[top]);
          break;
        case Op::kAbs:
          stack[top] = std::fabs(stack[top]);
          break;
      }
    }
    return stack[0];
  }

  // Canonical textual form; parse(unparse(e)) reproduces the same tree.
  const std::string& text() const { return text_; }

  // Central difference with the given step.
  double derivative(double x, double step) const {
    return ((*this)(x + step) - (*this)(x - step)) / (2.0 * step);
  }

  bool empty() const { return prog_.empty(); }

 private:
  static constexpr int kMaxStack = 64;
  std::vector<Instr> prog_;
  std::string text_;
};

}  // namespace exitlab::expr
