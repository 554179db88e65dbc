#include "dslkit/dsl/mhk.hpp"

#include "dslkit/programs.hpp"
#include "generators.hpp"
#include "oracle_mhk.hpp"

#include <doctest.h>

#include <cstring>

using namespace dslkit;
using ast::Child;
using ast::Leaf;
using ast::NodePtr;

namespace {

bool bitEq(double a, double b) {
  uint64_t ua, ub;
  std::memcpy(&ua, &a, 8);
  std::memcpy(&ub, &b, 8);
  return ua == ub;
}

// Runs a closed-over-"a" expression through both the toolkit and the oracle;
// true when they agree bit for bit (or both fault).
bool agreesWithOracle(const NodePtr &expr, const std::vector<double> &a,
                      const opt::PassConfig &cfg, bool fuse = true) {
  mhk::Program prog;
  prog.arrays = {{"a", true, "n"}};
  prog.expr = expr;
  mhk::Arrays arrays;
  arrays.real["a"] = a;

  oracle::MhkEnv env;
  oracle::MhkValue arr;
  arr.kind = oracle::MhkValue::Kind::Array;
  for (double v : a)
    arr.elems.push_back(oracle::MhkValue::realV(v));
  env["a"] = arr;
  env["n"] = oracle::MhkValue::natV(int64_t(a.size()));

  bool oracleFault = false;
  oracle::MhkValue expected;
  try {
    expected = oracle::evalMhk(expr, env);
  } catch (const std::exception &) {
    oracleFault = true;
  }
  bool toolkitFault = false;
  mhk::RunResult got;
  try {
    got = mhk::run(prog, arrays, cfg, {fuse});
  } catch (const Trap &) {
    toolkitFault = true;
  }
  if (oracleFault || toolkitFault)
    return oracleFault == toolkitFault;

  if (got.isArray) {
    if (expected.kind != oracle::MhkValue::Kind::Array)
      return false;
    const auto &xs = got.realValued ? got.realArray : std::vector<double>{};
    if (got.realValued) {
      if (xs.size() != expected.elems.size())
        return false;
      for (size_t i = 0; i < xs.size(); i++)
        if (!bitEq(xs[i], expected.elems[i].asReal()))
          return false;
      return true;
    }
    if (got.natArray.size() != expected.elems.size())
      return false;
    for (size_t i = 0; i < got.natArray.size(); i++)
      if (got.natArray[i] != expected.elems[i].nat)
        return false;
    return true;
  }
  if (got.realValued)
    return expected.kind == oracle::MhkValue::Kind::Real &&
           bitEq(got.real, expected.real);
  return expected.kind == oracle::MhkValue::Kind::Nat && got.nat == expected.nat;
}

} // namespace

TEST_CASE("grammar defines the expected productions") {
  ast::GrammarPtr g = mhk::grammar();
  for (const char *p : {"val", "if", "app", "match", "branch", "intrf", "var",
                        "for", "summate", "bucket", "pair", "pvar", "nat",
                        "real", "arr", "constant", "index", "nop"})
    CHECK(g->findProduction(p) != nullptr);
}

TEST_CASE("nodes parse from text") {
  NodePtr n = mhk::parseExpr("(summate (real) j (val (nat) 0) (var (nat) n 0) "
                             "(app (real) (intrf index) (var (arr (real)) a 0) "
                             "(var (nat) j 0)))");
  CHECK(n->production() == "summate");
  CHECK(ast::prettyPrint(n).find("(intrf index)") != std::string::npos);
}

TEST_CASE("summate over a small array") {
  using namespace mhk;
  Program p;
  p.arrays = {{"b", false, "m"}};
  p.expr = summateNode(tyNat(), "i", valNat(0), varRef(tyNat(), "m"),
                       apply(tyNat(), "index",
                             {varRef(tyArr(tyNat()), "b"), varRef(tyNat(), "i")}));
  Arrays arrays;
  arrays.nat["b"] = {1, 2, 3, 4};
  RunResult r = run(p, arrays, opt::PassConfig{3}, {});
  CHECK(r.nat == 10);
}

TEST_CASE("normalize on [2 2 4]") {
  mhk::Arrays arrays;
  arrays.real["a"] = {2, 2, 4};
  mhk::RunResult r = mhk::run(programs::normalizeProgram(), arrays,
                              opt::PassConfig{3}, {});
  REQUIRE(r.realArray.size() == 3);
  CHECK(r.realArray[0] == 0.25);
  CHECK(r.realArray[1] == 0.25);
  CHECK(r.realArray[2] == 0.5);
}

TEST_CASE("anf leaves atoms alone and binds compound arguments") {
  using namespace mhk;
  NodePtr x = varRef(tyNat(), "x");
  CHECK(ast::nodeEquals(anf(x), x));

  // app(f-ish, app(g-ish, x)) gains a let for the inner application.
  NodePtr inner = apply(tyNat(), "+", {x, valNat(1)});
  NodePtr outer = apply(tyNat(), "*", {inner, valNat(2)});
  NodePtr normd = anf(outer);
  CHECK(normd->production() == "match");
  const NodePtr &body =
      normd->field("branches").list[0].node->field("body").node;
  CHECK(body->production() == "app");
  for (const Child &c : body->field("rands").list)
    CHECK((c.node->production() == "var" || c.node->production() == "val"));
}

TEST_CASE("anf preserves meaning on 300 random expressions") {
  gen::Rng rng(gen::baseSeed() ^ 0xA4F);
  std::vector<double> a{1.5, -2.0, 3.25, 0.5, 4.0, -1.25, 2.0, 8.0};
  int count = 0;
  for (int i = 0; i < 300; i++) {
    NodePtr e = gen::randomMhkExpr(rng);
    NodePtr normd = mhk::anf(e);
    // The oracle sees the transformed tree; the toolkit lowers it anyway.
    mhk::Program p1, p2;
    p1.arrays = p2.arrays = {{"a", true, "n"}};
    p1.expr = e;
    p2.expr = normd;
    oracle::MhkEnv env;
    oracle::MhkValue arr;
    arr.kind = oracle::MhkValue::Kind::Array;
    for (double v : a)
      arr.elems.push_back(oracle::MhkValue::realV(v));
    env["a"] = arr;
    env["n"] = oracle::MhkValue::natV(int64_t(a.size()));
    oracle::MhkValue before, after;
    try {
      before = oracle::evalMhk(e, env);
      after = oracle::evalMhk(normd, env);
    } catch (const std::exception &) {
      continue;
    }
    count++;
    CHECK(before.bitEquals(after));
  }
  CHECK(count > 200);
}

TEST_CASE("index rewriting rules") {
  using namespace mhk;
  NodePtr ty = tyReal();
  auto lit3 = [&] {
    return apply(tyArr(tyReal()), "array-literal",
                 {valReal(10), valReal(20), valReal(30)});
  };
  SUBCASE("two-way constant index into a short literal becomes an if") {
    NodePtr chk = apply(tyNat(), "<", {varRef(tyNat(), "k"), valNat(2)});
    NodePtr sel = ifNode(tyNat(), chk, valNat(0), valNat(2));
    NodePtr e = apply(ty, "index", {lit3(), sel});
    NodePtr out = indexRewrite(e);
    REQUIRE(out->production() == "if");
    CHECK(out->field("thn").node->production() == "val");
    CHECK(out->field("thn").node->field("v").leaf.f == 10);
    CHECK(out->field("els").node->field("v").leaf.f == 30);
  }
  SUBCASE("guard: literals of five or more elements stay put") {
    NodePtr wide = apply(tyArr(tyReal()), "array-literal",
                         {valReal(1), valReal(2), valReal(3), valReal(4),
                          valReal(5)});
    NodePtr chk = apply(tyNat(), "<", {varRef(tyNat(), "k"), valNat(2)});
    NodePtr sel = ifNode(tyNat(), chk, valNat(0), valNat(2));
    NodePtr e = apply(ty, "index", {wide, sel});
    CHECK(ast::nodeEquals(indexRewrite(e), e));
  }
  SUBCASE("variable of constant element type yields the constant") {
    NodePtr cv = varRef(tyArr(tyConstant(7, tyReal())), "c");
    NodePtr e = apply(ty, "index", {cv, varRef(tyNat(), "i")});
    NodePtr out = indexRewrite(e);
    REQUIRE(out->production() == "val");
    CHECK(out->field("v").leaf.f == 7);
  }
  SUBCASE("constant-value-array index yields its content") {
    NodePtr cva = apply(tyArr(tyReal()), "constant-value-array",
                        {valNat(9), valReal(0.5)});
    NodePtr e = apply(ty, "index", {cva, varRef(tyNat(), "i")});
    NodePtr out = indexRewrite(e);
    REQUIRE(out->production() == "val");
    CHECK(out->field("v").leaf.f == 0.5);
  }
}

TEST_CASE("rewrite rules preserve semantics on randomized instances") {
  gen::Rng rng(gen::baseSeed() ^ 0x1937);
  std::vector<double> a{2, 4, 6, 8, 10, 12, 14, 16};
  using namespace mhk;
  int perRule = 100;
  for (int rule = 0; rule < 3; rule++) {
    for (int i = 0; i < perRule; i++) {
      NodePtr e;
      if (rule == 0) {
        size_t len = 2 + rng() % 3;
        std::vector<NodePtr> elems;
        for (size_t k = 0; k < len; k++)
          elems.push_back(valReal(double(int64_t(rng() % 21)) - 10));
        int64_t i0 = int64_t(rng() % len), i1 = int64_t(rng() % len);
        NodePtr chk = apply(tyNat(), "<",
                            {apply(tyReal(), "index",
                                   {varRef(tyArr(tyReal()), "a"),
                                    valNat(int64_t(rng() % 4))}),
                             valReal(double(int64_t(rng() % 9)) - 4)});
        NodePtr sel = ifNode(tyNat(), chk, valNat(i0), valNat(i1));
        e = apply(tyReal(), "index",
                  {apply(tyArr(tyReal()), "array-literal", std::move(elems)), sel});
      } else if (rule == 1) {
        // Constant-typed arrays arrive as literals via constant-value-array
        // wrapped in a let so a var carries the type.
        double cval = double(int64_t(rng() % 13)) - 6;
        NodePtr cva = apply(tyArr(tyConstant(cval, tyReal())),
                            "constant-value-array", {valNat(6), valReal(cval)});
        e = letNode(tyReal(), "cv", cva,
                    apply(tyReal(), "index",
                          {varRef(tyArr(tyConstant(cval, tyReal())), "cv"),
                           valNat(int64_t(rng() % 6))}));
      } else {
        double cval = double(int64_t(rng() % 13)) - 6;
        NodePtr cva = apply(tyArr(tyReal()), "constant-value-array",
                            {valNat(int64_t(1 + rng() % 6)), valReal(cval)});
        e = apply(tyReal(), "index", {cva, valNat(0)});
      }
      NodePtr rewritten = indexRewrite(e);
      // Oracle equivalence of original and rewritten.
      oracle::MhkEnv env;
      oracle::MhkValue arr;
      arr.kind = oracle::MhkValue::Kind::Array;
      for (double v : a)
        arr.elems.push_back(oracle::MhkValue::realV(v));
      env["a"] = arr;
      env["n"] = oracle::MhkValue::natV(int64_t(a.size()));
      oracle::MhkValue before = oracle::evalMhk(e, env);
      oracle::MhkValue after = oracle::evalMhk(rewritten, env);
      CHECK(before.bitEquals(after));
    }
  }
}

TEST_CASE("bucket nodes are rejected by lowering") {
  ast::GrammarPtr g = mhk::grammar();
  NodePtr nop = ast::makeNode(g, "nop", {});
  NodePtr bucket = ast::makeNode(
      g, "bucket",
      {Child(mhk::tyReal()), Child(mhk::valNat(0)), Child(mhk::valNat(3)),
       Child(nop)});
  mhk::Program p;
  p.expr = bucket;
  try {
    mhk::lower(p, {});
    FAIL("expected UnsupportedConstruct");
  } catch (const Error &e) {
    CHECK(e.code == Err::UnsupportedConstruct);
  }
}

TEST_CASE("fusion merges sibling reductions and halves back-edges") {
  mhk::Arrays arrays;
  std::vector<double> a(100);
  for (int i = 0; i < 100; i++)
    a[i] = 0.25 * i;
  arrays.real["a"] = a;
  mhk::Program prog = programs::fusionPairProgram();
  opt::PassConfig cfg;
  cfg.optLevel = 3;
  mhk::RunResult fused = mhk::run(prog, arrays, cfg, {true});
  mhk::RunResult plain = mhk::run(prog, arrays, cfg, {false});
  CHECK(bitEq(fused.real, plain.real));
  CHECK(fused.stats.backEdges == 100);
  CHECK(plain.stats.backEdges == 200);
}

TEST_CASE("300 random programs agree with the oracle at every opt level") {
  gen::Rng rng(gen::baseSeed() ^ 0x300);
  std::vector<double> a{1.0, -0.5, 2.25, 4.0, 0.125, -3.5, 7.0, 0.75};
  int checked = 0;
  for (int i = 0; i < 300; i++) {
    NodePtr e = gen::randomMhkExpr(rng);
    for (int lvl : {0, 1, 2, 3}) {
      opt::PassConfig cfg;
      cfg.optLevel = lvl;
      if (!agreesWithOracle(e, a, cfg)) {
        CAPTURE(lvl);
        CAPTURE(ast::prettyPrint(e));
        FAIL("oracle disagreement");
      }
    }
    checked++;
  }
  CHECK(checked == 300);
}
