#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dslkit {

// Thrown by readSexpr and by consumers that walk a form against an expected
// shape.  Line/column are 1-based; 0 means "unknown".
class ParseError : public std::runtime_error {
public:
  ParseError(std::string msg, int line, int col)
      : std::runtime_error(formatMsg(msg, line, col)), line(line), col(col) {}
  int line = 0;
  int col = 0;

private:
  static std::string formatMsg(const std::string &msg, int line, int col);
};

// One s-expression node: a list or an atom.  Numeric atoms keep their lexeme
// so a consumer that knows the expected type (f32 vs f64 vs int) can parse it
// without double rounding.
struct Sexpr {
  enum class Kind { List, Symbol, Int, Float, String, Bool };

  Kind kind = Kind::List;
  std::vector<Sexpr> items; // List
  std::string text;         // Symbol: name, Int/Float: lexeme, String: content
  bool boolean = false;     // Bool
  int line = 0;
  int col = 0;

  bool isList() const { return kind == Kind::List; }
  bool isSymbol() const { return kind == Kind::Symbol; }
  bool isSymbol(std::string_view s) const {
    return kind == Kind::Symbol && text == s;
  }
  bool isNumber() const { return kind == Kind::Int || kind == Kind::Float; }

  // Head symbol of a non-empty list, or "" otherwise.
  std::string_view head() const;
  size_t size() const { return items.size(); }
  const Sexpr &at(size_t i) const;

  int64_t asInt() const;
  double asDouble() const;
  float asFloat() const;
  const std::string &asSymbol() const;

  static Sexpr list(std::vector<Sexpr> items);
  static Sexpr symbol(std::string name);
  static Sexpr integer(int64_t v);
  static Sexpr floating(double v); // shortest round-trip lexeme, keeps a '.'
  static Sexpr floatingF32(float v);
  static Sexpr str(std::string s);
  static Sexpr boolean_(bool b);

  bool operator==(const Sexpr &other) const;
};

// Reads a single s-expression; trailing whitespace/comments allowed.
Sexpr readSexpr(std::string_view src);

// Reads all top-level forms.
std::vector<Sexpr> readSexprs(std::string_view src);

// Canonical single-line form: "(a b (c d))".
std::string writeSexpr(const Sexpr &e);
void writeSexpr(const Sexpr &e, std::string &out);

// Lexeme helpers shared with the IR printers.
std::string formatDouble(double v);
std::string formatFloat(float v);

} // namespace dslkit
