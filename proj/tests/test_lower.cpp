#include "dslkit/lower.hpp"

#include "dslkit/exec.hpp"
#include "dslkit/programs.hpp"
#include "dslkit/typecheck.hpp"
#include "generators.hpp"
#include "oracle_hir.hpp"

#include <doctest.h>

using namespace dslkit;
using namespace dslkit::hir;

TEST_CASE("layout-of scalar, struct and array rules") {
  CHECK(lower::layoutOf(i64()).size == 8);
  CHECK(lower::layoutOf(i64()).align == 8);
  CHECK(lower::layoutOf(i1()).size == 1);
  CHECK(lower::layoutOf(i16()).size == 2);
  CHECK(lower::layoutOf(f32()).size == 4);
  CHECK(lower::layoutOf(ptr(f64())).size == 8);
  CHECK(lower::layoutOf(symType()).size == 8);

  lower::Layout s = lower::layoutOf(structType({{"a", i32()}, {"b", i64()}}));
  CHECK(s.size == 16);
  CHECK(s.align == 8);
  REQUIRE(s.fieldOffsets.size() == 2);
  CHECK(s.fieldOffsets[0] == 0);
  CHECK(s.fieldOffsets[1] == 8);

  lower::Layout a = lower::layoutOf(array(f32(), 10));
  CHECK(a.size == 40);
  CHECK(a.align == 4);
  CHECK(a.stride == 4);

  CHECK_THROWS_AS(lower::layoutOf(voidType()), Error);
  CHECK_THROWS_AS(lower::layoutOf(array(f32(), std::nullopt)), Error);
  try {
    lower::layoutOf(voidType());
  } catch (const Error &e) {
    CHECK(e.code == Err::UnsizedType);
  }
}

TEST_CASE("pow lowers to entry/then/else and verifies") {
  lir::Module lm = lower::lowerModule(typecheckOrThrow(programs::powModule()));
  CHECK(lir::verify(lm).empty());
  const lir::Function *pow = lm.findFunction("pow");
  REQUIRE(pow);
  REQUIRE(pow->blocks.size() == 3);
  CHECK(pow->blocks[0].label == "entry");
  CHECK(pow->blocks[1].label == "pow.then.1");
  CHECK(pow->blocks[2].label == "pow.else.1");
  // Recursion stays a call.
  lir::InstrCount c = lir::staticInstrCount(*pow);
  CHECK(c.of("call") == 1);
  // Entry holds one alloca per parameter followed by their stores.
  CHECK(pow->blocks[0].instrs[0].code == lir::ICode::Alloca);
  CHECK(pow->blocks[0].instrs[1].code == lir::ICode::Alloca);
  CHECK(pow->blocks[0].instrs[2].code == lir::ICode::Store);
  CHECK(pow->blocks[0].instrs[3].code == lir::ICode::Store);
}

TEST_CASE("while lowers to head/body/exit with one back-edge branch") {
  Module m;
  StmtRef loop = whileLoop(icmpUlt(var("i"), var("n")),
                           set("i", add1(var("i"))));
  moduleAdd(m, function("count", {{"n", i64()}}, i64(),
                        exprStmt(let({{"i", ui64(0), i64()}}, loop, ui64(0)))));
  // add a return after the let
  m.functions[0].body =
      block({m.functions[0].body, ret(ui64(0))});
  lir::Module lm = lower::lowerModule(typecheckOrThrow(m));
  CHECK(lir::verify(lm).empty());
  const lir::Function *f = lm.findFunction("count");
  REQUIRE(f);
  // Exactly three new blocks beyond entry: head, body, exit.
  REQUIRE(f->blocks.size() == 4);
  CHECK(f->blocks[1].label == "count.head.1");
  CHECK(f->blocks[2].label == "count.body.1");
  CHECK(f->blocks[3].label == "count.exit.1");
  // The body ends with a branch back to the head.
  const lir::Instr &term = f->blocks[2].instrs.back();
  CHECK(term.code == lir::ICode::Br);
  CHECK(term.targets[0] == 1);
}

TEST_CASE("labels become verbatim blocks and jumps become branches") {
  Module m;
  StmtRef body = block({label("north", ifStmt(icmpUlt(var("x"), ui64(10)),
                                              block({set("x", add1(var("x"))),
                                                     jump("north")}),
                                              jump("south"))),
                        label("south", ret(var("x")))});
  moduleAdd(m, function("walk", {{"x", i64()}}, i64(), body));
  lir::Module lm = lower::lowerModule(typecheckOrThrow(m));
  CHECK(lir::verify(lm).empty());
  const lir::Function *f = lm.findFunction("walk");
  bool north = false, south = false;
  for (const lir::Block &b : f->blocks) {
    north = north || b.label == "north";
    south = south || b.label == "south";
  }
  CHECK(north);
  CHECK(south);
  // No calls anywhere: inter-state transfer is a branch.
  CHECK(lir::staticInstrCount(*f).of("call") == 0);
}

TEST_CASE("lowering is deterministic byte for byte") {
  Module typed = typecheckOrThrow(programs::powModule());
  std::string a = lir::dumpText(lower::lowerModule(typed));
  std::string b = lir::dumpText(lower::lowerModule(typed));
  CHECK(a == b);
}

TEST_CASE("gep lowering folds constant offsets and scales dynamic indexes") {
  Module m;
  // s: ptr to struct {a: i32, b: i64}; load field b.
  TypeRef st = structType({{"a", i32()}, {"b", i64()}});
  moduleAdd(m, function("fieldb", {{"s", ptr(st)}}, i64(),
                        ret(load(gep(var("s"), {ui64(0), ui64(1)})))));
  // arr: ptr to f64, dynamic index.
  moduleAdd(m, function("elem", {{"p", ptr(f64())}, {"i", i64()}}, f64(),
                        ret(load(gep(var("p"), {var("i")})))));
  lir::Module lm = lower::lowerModule(typecheckOrThrow(m));
  CHECK(lir::verify(lm).empty());
  // Constant path: a const 8 feeding the gep, no multiply.
  lir::InstrCount cb = lir::staticInstrCount(*lm.findFunction("fieldb"));
  CHECK(cb.of("mul") == 0);
  CHECK(cb.of("gep") == 1);
  // Dynamic path: one multiply by the stride.
  lir::InstrCount ce = lir::staticInstrCount(*lm.findFunction("elem"));
  CHECK(ce.of("mul") == 1);
  CHECK(ce.of("gep") == 1);
}

TEST_CASE("semantics preservation: 500 random functions against the oracle") {
  gen::Rng rng(gen::baseSeed() ^ 0x10e);
  int trapsSeen = 0;
  for (int i = 0; i < 500; i++) {
    Function f = gen::randomHirFunction(rng);
    Module m;
    moduleAdd(m, f);
    Module typed = typecheckOrThrow(m);

    exec::Engine engine;
    opt::PassConfig cfg;
    cfg.optLevel = 0;
    exec::CompiledModule cm = engine.compile(typed, cfg);

    gen::Rng argRng(gen::baseSeed() + uint64_t(i));
    for (int j = 0; j < 4; j++) {
      std::vector<uint64_t> args{argRng(), argRng() % 1000, argRng() % 7};
      oracle::HirResult expected =
          oracle::evalFunction(typed.functions[0], args);
      bool trapped = false;
      int64_t got = 0;
      try {
        auto [result, stats] =
            cm.apply("f", {int64_t(args[0]), int64_t(args[1]), int64_t(args[2])});
        got = std::get<int64_t>(result);
      } catch (const Trap &t) {
        trapped = true;
      }
      CHECK(trapped == expected.trapped);
      if (!trapped && !expected.trapped)
        CHECK(uint64_t(got) == expected.value);
      trapsSeen += trapped;
    }
  }
  // Division is in the generator, so some runs must have trapped.
  CHECK(trapsSeen > 0);
}
