#include "dslkit/sexpr.hpp"

#include <doctest.h>

using namespace dslkit;

TEST_CASE("reader handles atoms, lists and comments") {
  Sexpr e = readSexpr("(foo 42 -3 2.5 \"hi\\n\" #t [bar] %0) ; trailing");
  REQUIRE(e.isList());
  REQUIRE(e.size() == 8);
  CHECK(e.at(0).asSymbol() == "foo");
  CHECK(e.at(1).asInt() == 42);
  CHECK(e.at(2).asInt() == -3);
  CHECK(e.at(3).asDouble() == 2.5);
  CHECK(e.at(4).text == "hi\n");
  CHECK(e.at(5).boolean);
  CHECK(e.at(6).isList());
  CHECK(e.at(7).asSymbol() == "%0");
}

TEST_CASE("numeric classification requires the whole token") {
  CHECK(readSexpr("-").isSymbol());
  CHECK(readSexpr("+").isSymbol());
  CHECK(readSexpr("-5").kind == Sexpr::Kind::Int);
  CHECK(readSexpr("1e-3").kind == Sexpr::Kind::Float);
  CHECK(readSexpr("1x").isSymbol());
}

TEST_CASE("parse errors carry locations") {
  CHECK_THROWS_AS(readSexpr("(fn"), ParseError);
  CHECK_THROWS_AS(readSexpr(")"), ParseError);
  CHECK_THROWS_AS(readSexpr("(a) b"), ParseError);
  try {
    readSexpr("(a\n  (b");
  } catch (const ParseError &e) {
    CHECK(e.line == 2);
  }
}

TEST_CASE("writer round-trips structure") {
  const char *src = "(a (b 1 2) \"s\" #f 1.5)";
  Sexpr e = readSexpr(src);
  CHECK(writeSexpr(e) == src);
  CHECK(readSexpr(writeSexpr(e)) == e);
}

TEST_CASE("float lexemes keep a decimal marker and round-trip") {
  CHECK(formatDouble(1.0) == "1.0");
  CHECK(formatDouble(0.1) == "0.1");
  double v = 0.30000000000000004;
  Sexpr f = Sexpr::floating(v);
  CHECK(f.asDouble() == v);
  float g = 0.1f;
  Sexpr ff = Sexpr::floatingF32(g);
  CHECK(ff.asFloat() == g);
}
