#include "lorentz/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <set>

#include "lorentz/core.hpp"

namespace lorentz {

namespace {

class LineScanner {
 public:
  LineScanner(std::string_view line, int line_no) : s_(line), line_(line_no) {}

  int column() const { return static_cast<int>(pos_) + 1; }
  bool done() const { return pos_ >= s_.size(); }
  char peek() const { return done() ? '\0' : s_[pos_]; }
  void skip_space() {
    while (!done() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\r')) ++pos_;
  }
  void advance() { ++pos_; }
  std::string_view rest() const { return s_.substr(pos_); }
  [[noreturn]] void fail(const std::string& what) const {
    std::string tok;
    if (!done()) {
      unsigned char c = static_cast<unsigned char>(s_[pos_]);
      tok = c >= 0x80 ? std::string("non-ASCII byte") : std::string(1, s_[pos_]);
    }
    throw ParseError(line_, column(), tok, what);
  }

  std::string identifier() {
    size_t start = pos_;
    while (!done() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
    return std::string(s_.substr(start, pos_ - start));
  }

  double number() {
    size_t start = pos_;
    if (peek() == '-' || peek() == '+') ++pos_;
    while (!done() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.' ||
                       s_[pos_] == 'e' || s_[pos_] == 'E' ||
                       ((s_[pos_] == '-' || s_[pos_] == '+') && pos_ > start &&
                        (s_[pos_ - 1] == 'e' || s_[pos_ - 1] == 'E'))))
      ++pos_;
    std::string_view tok = s_.substr(start, pos_ - start);
    std::string owned(tok[0] == '+' ? tok.substr(1) : tok);
    double v = 0.0;
    auto res = std::from_chars(owned.data(), owned.data() + owned.size(), v);
    if (owned.empty() || res.ec != std::errc() || res.ptr != owned.data() + owned.size()) {
      pos_ = start;
      fail("malformed number");
    }
    if (!std::isfinite(v)) {
      pos_ = start;
      fail("number out of range");
    }
    return v;
  }

 private:
  std::string_view s_;
  size_t pos_ = 0;
  int line_;
};

}  // namespace

std::vector<ConfigEntry> parse_config(std::string_view text) {
  std::vector<ConfigEntry> out;
  std::set<std::string> seen;
  std::string section;
  int line_no = 0;
  size_t start = 0;
  while (start <= text.size()) {
    size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    ++line_no;
    LineScanner sc(line, line_no);
    while (true) {
      sc.skip_space();
      if (sc.done() || sc.peek() == '#') break;
      if (sc.peek() == ';') {
        sc.advance();
        continue;
      }
      if (sc.peek() == '[') {
        sc.advance();
        sc.skip_space();
        std::string name = sc.identifier();
        if (name.empty()) sc.fail("expected section name");
        sc.skip_space();
        if (sc.peek() != ']') sc.fail("expected ']'");
        sc.advance();
        section = name;
        continue;
      }
      ConfigEntry e;
      e.section = section;
      e.line = line_no;
      e.key_column = sc.column();
      if (!(std::isalpha(static_cast<unsigned char>(sc.peek())) || sc.peek() == '_'))
        sc.fail("expected key");
      e.key = sc.identifier();
      sc.skip_space();
      if (sc.peek() != '=') sc.fail("expected '=' after key '" + e.key + "'");
      sc.advance();
      sc.skip_space();
      if (sc.done() || sc.peek() == ';' || sc.peek() == '#') sc.fail("missing value for key '" + e.key + "'");
      if (sc.peek() == '"') {
        sc.advance();
        e.value_column = sc.column();
        std::string value;
        bool closed = false;
        while (!sc.done()) {
          char c = sc.peek();
          if (c == '"') {
            sc.advance();
            closed = true;
            break;
          }
          if (c == '\\') {
            sc.advance();
            if (sc.done()) break;
            c = sc.peek();
            if (c != '"' && c != '\\') sc.fail("unsupported escape sequence");
          }
          value += c;
          sc.advance();
        }
        if (!closed) throw ParseError(line_no, e.value_column - 1, "\"", "unterminated string");
        e.type = ConfigEntry::Type::String;
        e.text = value;
      } else if (std::isalpha(static_cast<unsigned char>(sc.peek())) || sc.peek() == '_') {
        e.value_column = sc.column();
        e.type = ConfigEntry::Type::String;
        e.text = sc.identifier();
      } else {
        e.value_column = sc.column();
        auto rest_before = sc.rest();
        e.numbers.push_back(sc.number());
        sc.skip_space();
        while (sc.peek() == ',') {
          sc.advance();
          sc.skip_space();
          e.numbers.push_back(sc.number());
          sc.skip_space();
        }
        e.type = e.numbers.size() == 1 ? ConfigEntry::Type::Number : ConfigEntry::Type::List;
        e.text = std::string(rest_before.substr(0, rest_before.size() - sc.rest().size()));
      }
      sc.skip_space();
      if (!sc.done() && sc.peek() != ';' && sc.peek() != '#') sc.fail("unexpected text after value");
      if (!seen.insert(e.key).second)
        throw ParseError(line_no, e.key_column, e.key, "duplicate key");
      out.push_back(std::move(e));
    }
    if (end == text.size()) break;
    start = end + 1;
  }
  return out;
}

}  // namespace lorentz
