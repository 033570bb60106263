#pragma once

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace lorentz::expr {

// Names visible to an expression: variables t, x1..xn and named constants.
struct SymbolTable {
  int spatial_dim = 3;
  std::map<std::string, double> constants;  // user parameters; pi and e are always defined
};

struct Node;

// A compiled arithmetic expression over (t, x1, ..., xn).
// Grammar: + - * / ^ (right-associative), unary minus, parentheses, decimal numbers,
// functions exp log sin cos sinh cosh sqrt, named constants, variables t and x1..xn.
class Expression {
 public:
  Expression();
  // line/column locate the first character of `text` inside its enclosing document.
  static Expression parse(std::string_view text, const SymbolTable& symbols, int line = 1,
                          int column = 1);

  // vars[0] = t, vars[i] = x_i.
  double eval(const double* vars) const;
  // Canonical text with minimal parentheses; parse(to_string()) rebuilds the same tree.
  std::string to_string() const;
  bool depends_on(int var) const;
  bool is_constant() const;

 private:
  struct Op {
    int code;
    double value;
  };
  std::shared_ptr<const Node> root_;
  std::vector<Op> program_;
  int max_stack_ = 0;
  void compile();
};

std::string format_number(double v);

}  // namespace lorentz::expr
