#include "dslkit/sexpr.hpp"

#include <charconv>
#include <cstdio>

namespace dslkit {

std::string ParseError::formatMsg(const std::string &msg, int line, int col) {
  if (line <= 0)
    return msg;
  return msg + " at " + std::to_string(line) + ":" + std::to_string(col);
}

std::string_view Sexpr::head() const {
  if (kind != Kind::List || items.empty() || !items[0].isSymbol())
    return {};
  return items[0].text;
}

const Sexpr &Sexpr::at(size_t i) const {
  if (kind != Kind::List || i >= items.size())
    throw ParseError("form too short", line, col);
  return items[i];
}

int64_t Sexpr::asInt() const {
  if (kind != Kind::Int)
    throw ParseError("expected integer, got '" + writeSexpr(*this) + "'", line, col);
  int64_t v = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size())
    throw ParseError("bad integer lexeme '" + text + "'", line, col);
  return v;
}

double Sexpr::asDouble() const {
  if (!isNumber())
    throw ParseError("expected number, got '" + writeSexpr(*this) + "'", line, col);
  double v = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size())
    throw ParseError("bad number lexeme '" + text + "'", line, col);
  return v;
}

float Sexpr::asFloat() const {
  if (!isNumber())
    throw ParseError("expected number, got '" + writeSexpr(*this) + "'", line, col);
  float v = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size())
    throw ParseError("bad number lexeme '" + text + "'", line, col);
  return v;
}

const std::string &Sexpr::asSymbol() const {
  if (kind != Kind::Symbol)
    throw ParseError("expected symbol, got '" + writeSexpr(*this) + "'", line, col);
  return text;
}

Sexpr Sexpr::list(std::vector<Sexpr> items) {
  Sexpr e;
  e.kind = Kind::List;
  e.items = std::move(items);
  return e;
}

Sexpr Sexpr::symbol(std::string name) {
  Sexpr e;
  e.kind = Kind::Symbol;
  e.text = std::move(name);
  return e;
}

Sexpr Sexpr::integer(int64_t v) {
  Sexpr e;
  e.kind = Kind::Int;
  e.text = std::to_string(v);
  return e;
}

std::string formatDouble(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, p);
  if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
      s.find("inf") == std::string::npos && s.find("nan") == std::string::npos)
    s += ".0";
  return s;
}

std::string formatFloat(float v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, p);
  if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
      s.find("inf") == std::string::npos && s.find("nan") == std::string::npos)
    s += ".0";
  return s;
}

Sexpr Sexpr::floating(double v) {
  Sexpr e;
  e.kind = Kind::Float;
  e.text = formatDouble(v);
  return e;
}

Sexpr Sexpr::floatingF32(float v) {
  Sexpr e;
  e.kind = Kind::Float;
  e.text = formatFloat(v);
  return e;
}

Sexpr Sexpr::str(std::string s) {
  Sexpr e;
  e.kind = Kind::String;
  e.text = std::move(s);
  return e;
}

Sexpr Sexpr::boolean_(bool b) {
  Sexpr e;
  e.kind = Kind::Bool;
  e.boolean = b;
  return e;
}

bool Sexpr::operator==(const Sexpr &o) const {
  if (kind != o.kind)
    return false;
  switch (kind) {
  case Kind::List:
    return items == o.items;
  case Kind::Bool:
    return boolean == o.boolean;
  default:
    return text == o.text;
  }
}

namespace {

struct Reader {
  std::string_view src;
  size_t pos = 0;
  int line = 1;
  int col = 1;

  [[noreturn]] void fail(const std::string &msg) const {
    throw ParseError(msg, line, col);
  }

  bool eof() const { return pos >= src.size(); }
  char peek() const { return src[pos]; }

  char next() {
    char c = src[pos++];
    if (c == '\n') {
      line++;
      col = 1;
    } else {
      col++;
    }
    return c;
  }

  void skipSpace() {
    while (!eof()) {
      char c = peek();
      if (c == ';') {
        while (!eof() && peek() != '\n')
          next();
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        next();
      } else {
        break;
      }
    }
  }

  static bool delimiter(char c) {
    return c == '(' || c == ')' || c == '[' || c == ']' || c == '"' ||
           c == ';' || c == ' ' || c == '\t' || c == '\r' || c == '\n';
  }

  Sexpr readForm() {
    skipSpace();
    if (eof())
      fail("unexpected end of input");
    int startLine = line, startCol = col;
    char c = peek();
    if (c == '(' || c == '[') {
      char close = (c == '(') ? ')' : ']';
      next();
      Sexpr e = Sexpr::list({});
      e.line = startLine;
      e.col = startCol;
      for (;;) {
        skipSpace();
        if (eof())
          fail("unclosed list opened at " + std::to_string(startLine) + ":" +
               std::to_string(startCol));
        if (peek() == close) {
          next();
          return e;
        }
        if (peek() == ')' || peek() == ']')
          fail("mismatched bracket");
        e.items.push_back(readForm());
      }
    }
    if (c == ')' || c == ']')
      fail("unexpected close bracket");
    if (c == '"')
      return readString(startLine, startCol);
    return readAtom(startLine, startCol);
  }

  Sexpr readString(int startLine, int startCol) {
    next(); // opening quote
    std::string out;
    for (;;) {
      if (eof())
        fail("unterminated string");
      char c = next();
      if (c == '"')
        break;
      if (c == '\\') {
        if (eof())
          fail("unterminated escape");
        char e = next();
        switch (e) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case '\\': out += '\\'; break;
        case '"': out += '"'; break;
        default: fail(std::string("unknown escape '\\") + e + "'");
        }
      } else {
        out += c;
      }
    }
    Sexpr e = Sexpr::str(std::move(out));
    e.line = startLine;
    e.col = startCol;
    return e;
  }

  Sexpr readAtom(int startLine, int startCol) {
    std::string tok;
    while (!eof() && !delimiter(peek()))
      tok += next();
    if (tok.empty())
      fail("empty token");
    Sexpr e;
    if (tok == "#t" || tok == "#true") {
      e = Sexpr::boolean_(true);
    } else if (tok == "#f" || tok == "#false") {
      e = Sexpr::boolean_(false);
    } else if (classifyNumber(tok, e)) {
      // classified in place
    } else {
      e = Sexpr::symbol(tok);
    }
    e.line = startLine;
    e.col = startCol;
    return e;
  }

  // A token is a number only if the whole lexeme parses as one.
  static bool classifyNumber(const std::string &tok, Sexpr &out) {
    char first = tok[0];
    if (!(first == '-' || first == '+' || (first >= '0' && first <= '9')))
      return false;
    if (tok.size() == 1 && (first == '-' || first == '+'))
      return false;
    int64_t iv = 0;
    auto [ip, iec] = std::from_chars(tok.data(), tok.data() + tok.size(), iv);
    if (iec == std::errc() && ip == tok.data() + tok.size()) {
      out.kind = Sexpr::Kind::Int;
      out.text = tok;
      return true;
    }
    // Beyond int64 range but still a plain digit run: a u64 lexeme.
    if (iec == std::errc::result_out_of_range &&
        tok.find_first_not_of("0123456789", (first == '-' || first == '+') ? 1 : 0)
            == std::string::npos) {
      uint64_t uv = 0;
      auto [up, uec] = std::from_chars(tok.data() + (first == '+' ? 1 : 0),
                                       tok.data() + tok.size(), uv);
      if (uec == std::errc() && up == tok.data() + tok.size()) {
        out.kind = Sexpr::Kind::Int;
        out.text = tok;
        return true;
      }
    }
    double dv = 0;
    auto [dp, dec] = std::from_chars(tok.data(), tok.data() + tok.size(), dv);
    if (dec == std::errc() && dp == tok.data() + tok.size()) {
      out.kind = Sexpr::Kind::Float;
      out.text = tok;
      return true;
    }
    return false;
  }
};

} // namespace

Sexpr readSexpr(std::string_view src) {
  Reader r{src};
  Sexpr e = r.readForm();
  r.skipSpace();
  if (!r.eof())
    throw ParseError("trailing content after form", r.line, r.col);
  return e;
}

std::vector<Sexpr> readSexprs(std::string_view src) {
  Reader r{src};
  std::vector<Sexpr> out;
  for (;;) {
    r.skipSpace();
    if (r.eof())
      return out;
    out.push_back(r.readForm());
  }
}

void writeSexpr(const Sexpr &e, std::string &out) {
  switch (e.kind) {
  case Sexpr::Kind::List: {
    out += '(';
    for (size_t i = 0; i < e.items.size(); i++) {
      if (i)
        out += ' ';
      writeSexpr(e.items[i], out);
    }
    out += ')';
    break;
  }
  case Sexpr::Kind::Symbol:
  case Sexpr::Kind::Int:
  case Sexpr::Kind::Float:
    out += e.text;
    break;
  case Sexpr::Kind::String: {
    out += '"';
    for (char c : e.text) {
      switch (c) {
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\\': out += "\\\\"; break;
      case '"': out += "\\\""; break;
      default: out += c;
      }
    }
    out += '"';
    break;
  }
  case Sexpr::Kind::Bool:
    out += e.boolean ? "#t" : "#f";
    break;
  }
}

std::string writeSexpr(const Sexpr &e) {
  std::string out;
  writeSexpr(e, out);
  return out;
}

} // namespace dslkit
