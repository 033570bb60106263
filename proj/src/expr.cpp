#include "lorentz/expr.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <functional>

#include "lorentz/core.hpp"

namespace lorentz::expr {

namespace {

enum class Kind { Number, Constant, Variable, Neg, Add, Sub, Mul, Div, Pow, Call };
enum class Func { Exp, Log, Sin, Cos, Sinh, Cosh, Sqrt };

struct FuncInfo {
  const char* name;
  Func f;
};
constexpr FuncInfo kFunctions[] = {{"exp", Func::Exp},   {"log", Func::Log},   {"sin", Func::Sin},
                                   {"cos", Func::Cos},   {"sinh", Func::Sinh}, {"cosh", Func::Cosh},
                                   {"sqrt", Func::Sqrt}};

constexpr int kMaxDepth = 200;

}  // namespace

struct Node {
  Kind kind;
  double value = 0.0;  // Number, Constant
  int var = 0;         // Variable
  Func func = Func::Exp;
  std::string name;  // Constant
  std::shared_ptr<const Node> a, b;
};

namespace {

using NodePtr = std::shared_ptr<const Node>;

NodePtr make(Kind k, NodePtr a = nullptr, NodePtr b = nullptr) {
  auto n = std::make_shared<Node>();
  n->kind = k;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

struct Token {
  enum Type { Num, Ident, Op, End } type;
  std::string text;
  double number = 0.0;
  int line = 1;
  int column = 1;
};

class Lexer {
 public:
  Lexer(std::string_view s, int line, int column) : s_(s), line_(line), col_(column) {}

  Token next() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) advance();
    Token t;
    t.line = line_;
    t.column = col_;
    if (pos_ >= s_.size()) {
      t.type = Token::End;
      return t;
    }
    char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      size_t start = pos_;
      while (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.'))
        advance();
      if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
        size_t save = pos_;
        int save_col = col_;
        advance();
        if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) advance();
        if (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
          while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) advance();
        } else {
          pos_ = save;
          col_ = save_col;
        }
      }
      t.type = Token::Num;
      t.text = std::string(s_.substr(start, pos_ - start));
      double v = 0.0;
      auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
      if (res.ec != std::errc() || res.ptr != t.text.data() + t.text.size())
        throw ParseError(t.line, t.column, t.text, "malformed number");
      if (!std::isfinite(v)) throw ParseError(t.line, t.column, t.text, "number out of range");
      t.number = v;
      return t;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = pos_;
      while (pos_ < s_.size() &&
             (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
        advance();
      t.type = Token::Ident;
      t.text = std::string(s_.substr(start, pos_ - start));
      return t;
    }
    if (std::string_view("+-*/^(),").find(c) != std::string_view::npos) {
      advance();
      t.type = Token::Op;
      t.text = std::string(1, c);
      return t;
    }
    std::string bad(1, c);
    if (static_cast<unsigned char>(c) >= 0x80) bad = "non-ASCII byte";
    throw ParseError(t.line, t.column, bad, "unexpected character");
  }

 private:
  void advance() {
    if (s_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }
  std::string_view s_;
  size_t pos_ = 0;
  int line_;
  int col_;
};

class Parser {
 public:
  Parser(std::string_view text, const SymbolTable& symbols, int line, int column)
      : lex_(text, line, column), symbols_(symbols) {
    cur_ = lex_.next();
  }

  NodePtr parse() {
    if (cur_.type == Token::End) throw ParseError(cur_.line, cur_.column, "", "empty expression");
    NodePtr n = expr(0);
    if (cur_.type != Token::End) throw ParseError(cur_.line, cur_.column, cur_.text, "unexpected token");
    return n;
  }

 private:
  void eat() { cur_ = lex_.next(); }
  bool is_op(char c) const { return cur_.type == Token::Op && cur_.text[0] == c; }

  void enter(int depth) {
    if (depth > kMaxDepth) throw ParseError(cur_.line, cur_.column, cur_.text, "expression nested too deeply");
  }

  NodePtr expr(int depth) {
    enter(depth);
    NodePtr lhs = term(depth + 1);
    while (is_op('+') || is_op('-')) {
      Kind k = is_op('+') ? Kind::Add : Kind::Sub;
      eat();
      lhs = make(k, lhs, term(depth + 1));
    }
    return lhs;
  }

  NodePtr term(int depth) {
    enter(depth);
    NodePtr lhs = unary(depth + 1);
    while (is_op('*') || is_op('/')) {
      Kind k = is_op('*') ? Kind::Mul : Kind::Div;
      eat();
      lhs = make(k, lhs, unary(depth + 1));
    }
    return lhs;
  }

  NodePtr unary(int depth) {
    enter(depth);
    if (is_op('-')) {
      eat();
      return make(Kind::Neg, unary(depth + 1));
    }
    if (is_op('+')) {
      eat();
      return unary(depth + 1);
    }
    return power(depth + 1);
  }

  NodePtr power(int depth) {
    enter(depth);
    NodePtr base = primary(depth + 1);
    if (is_op('^')) {
      eat();
      return make(Kind::Pow, base, unary(depth + 1));
    }
    return base;
  }

  NodePtr primary(int depth) {
    enter(depth);
    Token t = cur_;
    if (t.type == Token::Num) {
      eat();
      auto n = std::make_shared<Node>();
      n->kind = Kind::Number;
      n->value = t.number;
      return n;
    }
    if (t.type == Token::Ident) {
      eat();
      for (const auto& f : kFunctions) {
        if (t.text == f.name) {
          if (!is_op('('))
            throw ParseError(cur_.line, cur_.column, cur_.text, "expected '(' after function " + t.text);
          eat();
          NodePtr arg = expr(depth + 1);
          if (!is_op(')')) throw ParseError(cur_.line, cur_.column, cur_.text, "expected ')'");
          eat();
          auto n = std::make_shared<Node>();
          n->kind = Kind::Call;
          n->func = f.f;
          n->a = arg;
          return n;
        }
      }
      if (is_op('(')) throw ParseError(t.line, t.column, t.text, "unknown function");
      if (t.text == "t") {
        auto n = std::make_shared<Node>();
        n->kind = Kind::Variable;
        n->var = 0;
        return n;
      }
      if (t.text.size() >= 2 && t.text[0] == 'x') {
        bool digits = t.text[1] != '0';
        for (size_t i = 1; i < t.text.size(); ++i)
          digits = digits && std::isdigit(static_cast<unsigned char>(t.text[i]));
        if (digits && t.text.size() <= 3) {
          int idx = std::stoi(t.text.substr(1));
          if (idx < 1 || idx > symbols_.spatial_dim)
            throw ParseError(t.line, t.column, t.text, "variable index exceeds spatial dimension");
          auto n = std::make_shared<Node>();
          n->kind = Kind::Variable;
          n->var = idx;
          return n;
        }
      }
      double value = 0.0;
      bool found = false;
      if (auto it = symbols_.constants.find(t.text); it != symbols_.constants.end()) {
        value = it->second;
        found = true;
      } else if (t.text == "pi") {
        value = kPi;
        found = true;
      } else if (t.text == "e") {
        value = std::exp(1.0);
        found = true;
      }
      if (!found) throw ParseError(t.line, t.column, t.text, "unknown variable");
      auto n = std::make_shared<Node>();
      n->kind = Kind::Constant;
      n->name = t.text;
      n->value = value;
      return n;
    }
    if (is_op('(')) {
      eat();
      NodePtr inner = expr(depth + 1);
      if (!is_op(')')) throw ParseError(cur_.line, cur_.column, cur_.text, "expected ')'");
      eat();
      return inner;
    }
    if (t.type == Token::End) throw ParseError(t.line, t.column, "", "unexpected end of expression");
    throw ParseError(t.line, t.column, t.text, "unexpected token");
  }

  Lexer lex_;
  const SymbolTable& symbols_;
  Token cur_;
};

int precedence(const Node& n) {
  switch (n.kind) {
    case Kind::Add:
    case Kind::Sub:
      return 1;
    case Kind::Mul:
    case Kind::Div:
      return 2;
    case Kind::Neg:
      return 3;
    case Kind::Pow:
      return 4;
    default:
      return 5;
  }
}

const char* func_name(Func f) {
  for (const auto& info : kFunctions)
    if (info.f == f) return info.name;
  return "?";
}

void print(const Node& n, std::string& out);

void print_child(const Node& child, int min_prec, std::string& out) {
  if (precedence(child) < min_prec) {
    out += '(';
    print(child, out);
    out += ')';
  } else {
    print(child, out);
  }
}

void print(const Node& n, std::string& out) {
  switch (n.kind) {
    case Kind::Number:
      out += format_number(n.value);
      return;
    case Kind::Constant:
      out += n.name;
      return;
    case Kind::Variable:
      out += n.var == 0 ? std::string("t") : "x" + std::to_string(n.var);
      return;
    case Kind::Neg:
      out += '-';
      print_child(*n.a, 3, out);
      return;
    case Kind::Add:
    case Kind::Sub:
      print_child(*n.a, 1, out);
      out += n.kind == Kind::Add ? " + " : " - ";
      print_child(*n.b, 2, out);
      return;
    case Kind::Mul:
    case Kind::Div:
      print_child(*n.a, 2, out);
      out += n.kind == Kind::Mul ? "*" : "/";
      print_child(*n.b, 3, out);
      return;
    case Kind::Pow:
      print_child(*n.a, 5, out);
      out += '^';
      print_child(*n.b, 3, out);
      return;
    case Kind::Call:
      out += func_name(n.func);
      out += '(';
      print(*n.a, out);
      out += ')';
      return;
  }
}

enum OpCode { kPushConst, kPushVar, kNeg, kAdd, kSub, kMul, kDiv, kPow, kFuncBase };

bool depends(const Node& n, int var) {
  if (n.kind == Kind::Variable) return n.var == var;
  return (n.a && depends(*n.a, var)) || (n.b && depends(*n.b, var));
}

bool has_variable(const Node& n) {
  if (n.kind == Kind::Variable) return true;
  return (n.a && has_variable(*n.a)) || (n.b && has_variable(*n.b));
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

Expression::Expression() {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Number;
  root_ = n;
  compile();
}

Expression Expression::parse(std::string_view text, const SymbolTable& symbols, int line, int column) {
  Parser p(text, symbols, line, column);
  Expression e;
  e.root_ = p.parse();
  e.compile();
  return e;
}

void Expression::compile() {
  program_.clear();
  int depth = 0;
  max_stack_ = 0;
  std::function<void(const Node&)> emit = [&](const Node& n) {
    switch (n.kind) {
      case Kind::Number:
      case Kind::Constant:
        program_.push_back({kPushConst, n.value});
        max_stack_ = std::max(max_stack_, ++depth);
        return;
      case Kind::Variable:
        program_.push_back({kPushVar, static_cast<double>(n.var)});
        max_stack_ = std::max(max_stack_, ++depth);
        return;
      case Kind::Neg:
        emit(*n.a);
        program_.push_back({kNeg, 0.0});
        return;
      case Kind::Call:
        emit(*n.a);
        program_.push_back({kFuncBase + static_cast<int>(n.func), 0.0});
        return;
      default:
        emit(*n.a);
        emit(*n.b);
        int code = n.kind == Kind::Add   ? kAdd
                   : n.kind == Kind::Sub ? kSub
                   : n.kind == Kind::Mul ? kMul
                   : n.kind == Kind::Div ? kDiv
                                         : kPow;
        program_.push_back({code, 0.0});
        --depth;
        return;
    }
  };
  emit(*root_);
}

double Expression::eval(const double* vars) const {
  constexpr int kInline = 64;
  double inline_stack[kInline];
  std::vector<double> heap;
  double* st = inline_stack;
  if (max_stack_ > kInline) {
    heap.resize(static_cast<size_t>(max_stack_));
    st = heap.data();
  }
  int sp = 0;
  for (const Op& op : program_) {
    switch (op.code) {
      case kPushConst:
        st[sp++] = op.value;
        break;
      case kPushVar:
        st[sp++] = vars[static_cast<int>(op.value)];
        break;
      case kNeg:
        st[sp - 1] = -st[sp - 1];
        break;
      case kAdd:
        st[sp - 2] += st[sp - 1];
        --sp;
        break;
      case kSub:
        st[sp - 2] -= st[sp - 1];
        --sp;
        break;
      case kMul:
        st[sp - 2] *= st[sp - 1];
        --sp;
        break;
      case kDiv:
        st[sp - 2] /= st[sp - 1];
        --sp;
        break;
      case kPow: {
        double b = st[sp - 1];
        double a = st[sp - 2];
        // Small integer exponents are common (x1^2); keep them exact and sign-safe.
        if (b == 2.0)
          st[sp - 2] = a * a;
        else if (b == 3.0)
          st[sp - 2] = a * a * a;
        else
          st[sp - 2] = std::pow(a, b);
        --sp;
        break;
      }
      default: {
        double& x = st[sp - 1];
        switch (static_cast<Func>(op.code - kFuncBase)) {
          case Func::Exp:
            x = std::exp(x);
            break;
          case Func::Log:
            x = std::log(x);
            break;
          case Func::Sin:
            x = std::sin(x);
            break;
          case Func::Cos:
            x = std::cos(x);
            break;
          case Func::Sinh:
            x = std::sinh(x);
            break;
          case Func::Cosh:
            x = std::cosh(x);
            break;
          case Func::Sqrt:
            x = std::sqrt(x);
            break;
        }
      }
    }
  }
  return st[0];
}

std::string Expression::to_string() const {
  std::string out;
  print(*root_, out);
  return out;
}

bool Expression::depends_on(int var) const { return depends(*root_, var); }

bool Expression::is_constant() const { return !has_variable(*root_); }

}  // namespace lorentz::expr
