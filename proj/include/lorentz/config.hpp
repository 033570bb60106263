#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace lorentz {

// One `key = value` statement of a spec document.
struct ConfigEntry {
  enum class Type { String, Number, List };
  std::string section;  // "" for statements before the first [section]
  std::string key;
  Type type = Type::String;
  std::string text;            // String: contents without quotes; also raw text for the others
  std::vector<double> numbers;  // Number: one value; List: all values
  int line = 0;
  int key_column = 0;
  int value_column = 0;  // column of the first character inside the quotes for strings
};

// Parses UTF-8 text of the form
//   # comment
//   [section]
//   key = "string" ; key2 = 1.5 ; key3 = -1, 1
// Statements are separated by newlines or ';'. Bare words are accepted as strings.
// Throws ParseError with line/column on malformed input or duplicate keys.
std::vector<ConfigEntry> parse_config(std::string_view text);

}  // namespace lorentz
