#include "dslkit/opt.hpp"

#include "dslkit/dsl/fsa.hpp"
#include "dslkit/exec.hpp"
#include "dslkit/lower.hpp"
#include "dslkit/programs.hpp"
#include "dslkit/typecheck.hpp"
#include "generators.hpp"

#include <doctest.h>

using namespace dslkit;
using namespace dslkit::hir;

namespace {

Function fnOf(ExprRef body, TypeRef ret = i64()) {
  return function("f", {{"x", i64()}, {"p", ptr(i64())}}, ret,
                  hir::ret(std::move(body)));
}

} // namespace

TEST_CASE("const-fold evaluates literal arithmetics with wrap semantics") {
  // 2 * (2 * (2 * 1)) -> 8
  ExprRef e = mul(ui64(2), mul(ui64(2), mul(ui64(2), ui64(1))));
  Function folded = opt::constFold(fnOf(e));
  auto *r = folded.body->as<ReturnS>();
  auto *lit = (*r->value)->as<IntLitE>();
  REQUIRE(lit);
  CHECK(lit->bits == 8);
}

TEST_CASE("const-fold collapses literal branches") {
  // If(3 < 5, ret 1, ret 2) -> ret 1
  Function f = function("f", {}, i64(),
                        ifStmt(icmpUlt(ui64(3), ui64(5)), ret(ui64(1)),
                               ret(ui64(2))));
  Function folded = opt::constFold(f);
  auto *r = folded.body->as<ReturnS>();
  REQUIRE(r);
  CHECK((*r->value)->as<IntLitE>()->bits == 1);
}

TEST_CASE("const-fold leaves division by literal zero in place") {
  ExprRef e = primOp(Op::SDiv, {ui64(1), ui64(0)});
  Function folded = opt::constFold(fnOf(e));
  auto *r = folded.body->as<ReturnS>();
  CHECK((*r->value)->is<PrimOpE>());
}

TEST_CASE("const-fold applies x*1, x+0 and pure x*0") {
  Function f1 = opt::constFold(fnOf(mul(var("x"), ui64(1))));
  CHECK((*f1.body->as<ReturnS>()->value)->is<VarE>());
  Function f2 = opt::constFold(fnOf(add(var("x"), ui64(0))));
  CHECK((*f2.body->as<ReturnS>()->value)->is<VarE>());
  Function f3 = opt::constFold(fnOf(mul(var("x"), ui64(0))));
  CHECK((*f3.body->as<ReturnS>()->value)->as<IntLitE>()->bits == 0);
  // A trapping subexpression blocks the x*0 shortcut.
  ExprRef trapping = primOp(Op::SDiv, {var("x"), ui64(0)});
  Function f4 = opt::constFold(fnOf(mul(trapping, ui64(0))));
  CHECK((*f4.body->as<ReturnS>()->value)->is<PrimOpE>());
  // A load is also preserved.
  Function f5 = opt::constFold(fnOf(mul(load(var("p")), ui64(0))));
  CHECK((*f5.body->as<ReturnS>()->value)->is<PrimOpE>());
}

TEST_CASE("const-fold is idempotent") {
  gen::Rng rng(gen::baseSeed() ^ 0x77);
  for (int i = 0; i < 100; i++) {
    Function f = gen::randomHirFunction(rng);
    Function once = opt::constFold(f);
    Function twice = opt::constFold(once);
    CHECK(stmtEquals(once.body, twice.body));
  }
}

TEST_CASE("inline-always") {
  SUBCASE("chain collapse and callee retention") {
    Module m = fsa::moreChainModule(4);
    Module typed = typecheckOrThrow(m);
    Module inlined = opt::inlineAlways(typed);
    // Callees retained until dce.
    CHECK(inlined.functions.size() == 5);
    Module cleaned = opt::dceModule(inlined);
    CHECK(cleaned.functions.size() == 1);
    CHECK(cleaned.functions[0].name == "main");
  }
  SUBCASE("recursive always-inline is a cycle") {
    Module m;
    moduleAdd(m, function("loop", {{"x", i64()}}, i64(),
                          ret(app(defined("loop"), {var("x")})),
                          {kAttrAlwaysInline}));
    CHECK_THROWS_AS(opt::inlineAlways(typecheckOrThrow(m)), Error);
    try {
      opt::inlineAlways(typecheckOrThrow(m));
    } catch (const Error &e) {
      CHECK(e.code == Err::InlineCycle);
    }
  }
  SUBCASE("calls to non-annotated functions stay") {
    Module m = programs::powModule();
    Module inlined = opt::inlineAlways(typecheckOrThrow(m));
    lir::InstrCount c = lir::staticInstrCount(
        *lower::lowerModule(inlined).findFunction("pow"));
    CHECK(c.of("call") == 1);
  }
}

TEST_CASE("licm hoists invariant pure work out of loops") {
  // while (i < n) { acc += sum(p, n); i++ }  with sum pure
  Module m;
  moduleAdd(m, function("sum", {{"p", ptr(i64())}, {"n", i64()}}, i64(),
                        ret(load(gep(var("p"), {ui64(0)}))), {kAttrPure}));
  StmtRef body = block({set("acc", add(var("acc"),
                                       app(defined("sum"),
                                           {var("p"), var("n")}))),
                        set("i", add1(var("i")))});
  ExprRef driver = let({{"i", ui64(0), i64()}, {"acc", ui64(0), i64()}},
                       whileLoop(icmpUlt(var("i"), var("n")), body), var("acc"));
  moduleAdd(m, function("run", {{"p", ptr(i64())}, {"n", i64()}}, i64(),
                        ret(driver)));
  Module typed = typecheckOrThrow(m);
  Module hoisted = opt::licmModule(typed);

  // The hoisted call executes once per entry, not once per iteration.
  exec::Engine e0, e1;
  opt::PassConfig none;
  none.optLevel = 0;
  exec::CompiledModule cm0 = e0.compile(typed, none);
  exec::CompiledModule cm1 = e1.compile(hoisted, none);
  std::vector<int64_t> arr{5, 6, 7, 8};
  auto [r0, s0] = cm0.apply("run", {arr});
  auto [r1, s1] = cm1.apply("run", {arr});
  CHECK(std::get<int64_t>(r0) == std::get<int64_t>(r1));
  CHECK(s0.calls == 4);
  CHECK(s1.calls == 1);
}

TEST_CASE("licm keeps mutation and memory reads inside the loop") {
  // a set of a free variable blocks hoisting of expressions over it
  Module m;
  StmtRef body = block({set("k", add(var("k"), var("x"))),
                        set("i", add1(var("i")))});
  ExprRef driver = let({{"i", ui64(0), i64()}, {"k", ui64(0), i64()}},
                       whileLoop(icmpUlt(var("i"), ui64(3)), body), var("k"));
  moduleAdd(m, function("run", {{"x", i64()}, {"p", ptr(i64())}}, i64(),
                        ret(driver)));
  Module hoisted = opt::licmModule(typecheckOrThrow(m));
  // add(k, x) depends on k which is set in the loop: body unchanged.
  CHECK(stmtEquals(hoisted.functions[0].body,
                   typecheckOrThrow(m).functions[0].body));

  // loads never hoist
  Module m2;
  StmtRef body2 = block({set("acc", add(var("acc"), load(var("p")))),
                         set("i", add1(var("i")))});
  ExprRef driver2 = let({{"i", ui64(0), i64()}, {"acc", ui64(0), i64()}},
                        whileLoop(icmpUlt(var("i"), ui64(3)), body2), var("acc"));
  moduleAdd(m2, function("run", {{"p", ptr(i64())}}, i64(), ret(driver2)));
  Module hoisted2 = opt::licmModule(typecheckOrThrow(m2));
  CHECK(stmtEquals(hoisted2.functions[0].body,
                   typecheckOrThrow(m2).functions[0].body));
}

TEST_CASE("load/store elimination") {
  auto lowerPow = [] {
    return lower::lowerModule(typecheckOrThrow(programs::powModule()));
  };
  SUBCASE("store-to-load forwarding within a block") {
    lir::Module lm = lowerPow();
    lir::InstrCount before = lir::staticInstrCount(lm);
    lir::Module after = opt::loadStoreElimLir(lm);
    CHECK(lir::verify(after).empty());
    lir::InstrCount afterC = lir::staticInstrCount(after);
    CHECK(afterC.of("load") < before.of("load"));
  }
  SUBCASE("calls clobber pointer knowledge") {
    // store x p; call f(); load p  — the load survives.
    Module m;
    moduleAdd(m, function("touch", {}, i64(), ret(ui64(1))));
    moduleAdd(m, function("f", {{"x", i64()}, {"p", ptr(i64())}}, i64(),
                          block({store(var("x"), var("p")),
                                 exprStmt(app(defined("touch"), {})),
                                 ret(load(var("p")))})));
    exec::Engine e;
    opt::PassConfig cfg;
    cfg.optLevel = 2;
    exec::CompiledModule cm = e.compile(m, cfg);
    std::vector<int64_t> buf{0};
    // Passing the view keeps the pointer argument explicit.
    exec::Value pv = exec::toNative(*e.session(), buf, ptr(i64()));
    exec::BufferView view{pv.buf, 0, i64(), 1};
    auto [r, s] = cm.apply("f", {int64_t(42), view});
    CHECK(std::get<int64_t>(r) == 42);
    // The load through the parameter pointer is still executed.
    CHECK(s.loads >= 1);
  }
  SUBCASE("let temporaries in straight-line code disappear entirely") {
    Module m;
    ExprRef body = let({{"t", add(var("x"), ui64(1)), i64()}}, svoid(),
                       mul(var("t"), var("t")));
    moduleAdd(m, function("f", {{"x", i64()}}, i64(), ret(body)));
    opt::PassConfig cfg;
    cfg.optLevel = 3; // dce runs after load/store elimination here
    opt::PipelineResult pr = opt::runPipeline(m, cfg);
    lir::InstrCount c = lir::staticInstrCount(*pr.lmod.findFunction("f"));
    // All slot traffic from lowering is gone.
    CHECK(c.of("alloca") == 0);
    CHECK(c.of("load") == 0);
    CHECK(c.of("store") == 0);
    CHECK(c.of("add") == 1);
    CHECK(c.of("mul") == 1);
  }
}

TEST_CASE("lir dce drops unreachable blocks and dead pure work") {
  Module m;
  moduleAdd(m, function("f", {{"x", i64()}}, i64(),
                        ifStmt(icmpUlt(ui64(1), ui64(2)), ret(var("x")),
                               ret(ui64(0)))));
  opt::PassConfig cfg;
  cfg.optLevel = 1; // fold + dce
  opt::PipelineResult pr = opt::runPipeline(m, cfg);
  const lir::Function *f = pr.lmod.findFunction("f");
  REQUIRE(f);
  // The else block is gone.
  CHECK(f->blocks.size() <= 2);
  for (const lir::Block &b : f->blocks)
    CHECK(b.label != "f.else.1");
}

TEST_CASE("dce keeps impure calls and drops pure unused results") {
  Module m;
  moduleAdd(m, function("f", {{"x", i64()}}, i64(),
                        block({exprStmt(add(var("x"), ui64(1))), // dead pure
                               exprStmt(app(host("ping", fnType({}, i64())), {})),
                               ret(var("x"))})));
  Module typed = typecheckOrThrow(m);
  Module cleaned = opt::dceModule(typed);
  // The pure add vanished, the host call stayed.
  bool sawHost = false;
  size_t stmts = 0;
  if (auto *b = cleaned.functions[0].body->as<BlockS>()) {
    stmts = b->stmts.size();
    for (auto &s : b->stmts)
      if (auto *e = s->as<ExprStmtS>())
        if (auto *a = e->expr->as<AppE>())
          sawHost = a->rator.kind == Rator::Kind::Host;
  }
  CHECK(stmts == 2);
  CHECK(sawHost);
}

TEST_CASE("specialize") {
  Module typed = typecheckOrThrow(programs::powModule());
  SUBCASE("pow with a static exponent folds to a straight line") {
    opt::Bindings b;
    b["n"] = opt::staticValue(ui64(10));
    Module sm = opt::specialize(typed, "pow", b);
    const Function *spec = sm.findFunction("pow@spec0");
    REQUIRE(spec);
    CHECK(spec->params.size() == 1);
    CHECK(spec->params[0].name == "x");

    opt::PassConfig cfg;
    cfg.optLevel = 3;
    opt::PipelineResult pr = opt::runPipeline(sm, cfg);
    lir::InstrCount c = lir::staticInstrCount(*pr.lmod.findFunction("pow@spec0"));
    // Straight line: the ninth multiply folded away with mul(x, 1).
    CHECK(c.of("mul") == 9);
    CHECK(c.of("condbr") == 0);
    CHECK(c.of("switch") == 0);
    CHECK(c.of("call") == 0);

    // Exact agreement with the original on matching inputs.
    exec::Engine e;
    exec::CompiledModule cm = e.compile(sm, cfg);
    for (int64_t x : {0, 1, 2, 3, -5, 7}) {
      auto [a, s1] = cm.apply("pow", {x, int64_t(10)});
      auto [b2, s2] = cm.apply("pow@spec0", {x});
      CHECK(std::get<int64_t>(a) == std::get<int64_t>(b2));
    }
  }
  SUBCASE("binding type mismatch") {
    opt::Bindings b;
    b["n"] = opt::staticValue(f64Lit(3.0));
    CHECK_THROWS_AS(opt::specialize(typed, "pow", b), Error);
    try {
      opt::specialize(typed, "pow", b);
    } catch (const Error &e) {
      CHECK(e.code == Err::BindingTypeMismatch);
    }
  }
  SUBCASE("unknown parameter") {
    opt::Bindings b;
    b["zz"] = opt::staticValue(ui64(1));
    try {
      opt::specialize(typed, "pow", b);
      FAIL("expected UnknownParam");
    } catch (const Error &e) {
      CHECK(e.code == Err::UnknownParam);
    }
  }
  SUBCASE("static address becomes a pointer literal, not a parameter") {
    Module m;
    moduleAdd(m, function("fill1", {{"out", ptr(f64())}}, voidType(),
                          store(f64Lit(1.5), gep(var("out"), {ui64(0)}))));
    opt::Bindings b;
    b["out"] = opt::staticAddress("fill1.buf", f64(), 4);
    Module sm = opt::specialize(typecheckOrThrow(m), "fill1", b);
    const Function *spec = sm.findFunction("fill1@spec0");
    REQUIRE(spec);
    CHECK(spec->params.empty());
    REQUIRE(sm.findGlobal("fill1.buf"));
    lir::Module lm = lower::lowerModule(sm);
    bool sawAddr = false;
    for (const lir::Block &blk : lm.findFunction("fill1@spec0")->blocks)
      for (const lir::Instr &in : blk.instrs)
        if (in.code == lir::ICode::Const &&
            in.cval.kind == lir::ConstVal::Kind::GlobalAddr)
          sawAddr = true;
    CHECK(sawAddr);

    // End to end: compile against a preallocated buffer and observe it.
    exec::Engine e;
    e.preallocateBuffer("fill1.buf", f64(), 4);
    exec::CompiledModule cm = e.compile(sm, opt::PassConfig{2});
    cm.apply("fill1@spec0", {});
    auto id = e.session()->namedBuffer("fill1.buf");
    REQUIRE(id);
    exec::BufferView view{*id, 0, f64(), 4};
    CHECK(exec::readF64Buffer(*e.session(), view)[0] == 1.5);
  }
}

TEST_CASE("specialize with a static array size unrolls the loop it bounds") {
  // sum(p, n): while (i < n) acc += p[i]; bind n = 4 statically.
  Module m;
  StmtRef body = block({set("acc", add(var("acc"),
                                       load(gep(var("p"), {var("i")})))),
                        set("i", add1(var("i")))});
  ExprRef driver = let({{"i", ui64(0), i64()}, {"acc", ui64(0), i64()}},
                       whileLoop(icmpUlt(var("i"), var("n")), body), var("acc"));
  moduleAdd(m, function("sum", {{"p", ptr(i64())}, {"n", i64()}}, i64(),
                        ret(driver)));
  opt::Bindings b;
  b["n"] = opt::staticArraySize(4);
  Module sm = opt::specialize(typecheckOrThrow(m), "sum", b);
  const Function *spec = sm.findFunction("sum@spec0");
  REQUIRE(spec);
  REQUIRE(spec->params.size() == 1); // only the pointer remains
  // Constant trip count of 4 fully unrolls: no loop blocks survive.
  opt::PipelineResult pr = opt::runPipeline(sm, opt::PassConfig{3});
  lir::InstrCount c = lir::staticInstrCount(*pr.lmod.findFunction("sum@spec0"));
  CHECK(c.of("condbr") == 0);
  CHECK(c.of("br") == 0);
  // Agreement with the original.
  exec::Engine e;
  exec::CompiledModule cm = e.compile(sm, opt::PassConfig{3});
  std::vector<int64_t> arr{10, 20, 30, 40};
  auto direct = cm.apply("sum", {arr});
  exec::Value pv = exec::toNative(*e.session(), arr, ptr(i64()));
  exec::BufferView view{pv.buf, 0, i64(), 4};
  auto specd = cm.apply("sum@spec0", {view});
  CHECK(std::get<int64_t>(direct.first) == 100);
  CHECK(std::get<int64_t>(specd.first) == 100);
}

TEST_CASE("unroll expands short countable loops exactly") {
  // let i = 0; while (i < 5) { acc = acc + x; i = i + 1 }
  StmtRef body = block({set("acc", add(var("acc"), var("x"))),
                        set("i", add1(var("i")))});
  ExprRef loop = let({{"i", ui64(0), i64()}, {"acc", ui64(0), i64()}},
                     whileLoop(icmpUlt(var("i"), ui64(5)), body), var("acc"));
  Function f = function("f", {{"x", i64()}}, i64(), ret(loop));
  Module m0;
  moduleAdd(m0, f);
  Function unrolled = opt::unrollLoops(typecheckOrThrow(m0).functions[0]);
  // No while remains (structural probe through the dump).
  Module m2;
  moduleAdd(m2, unrolled);
  std::string text = dumpModule(m2);
  CHECK(text.find("(while") == std::string::npos);

  // Behavior identical.
  Module orig;
  moduleAdd(orig, f);
  exec::Engine e1, e2;
  auto r1 = e1.compile(orig, opt::PassConfig{0}).apply("f", {int64_t(7)});
  auto r2 = e2.compile(m2, opt::PassConfig{0}).apply("f", {int64_t(7)});
  CHECK(std::get<int64_t>(r1.first) == 35);
  CHECK(std::get<int64_t>(r2.first) == 35);

  // A 17-trip loop stays a loop.
  ExprRef loop17 = let({{"i", ui64(0), i64()}, {"acc", ui64(0), i64()}},
                       whileLoop(icmpUlt(var("i"), ui64(17)), body), var("acc"));
  Module m3;
  moduleAdd(m3, function("f", {{"x", i64()}}, i64(), ret(loop17)));
  Function u3 = opt::unrollLoops(typecheckOrThrow(m3).functions[0]);
  Module m4;
  moduleAdd(m4, u3);
  CHECK(dumpModule(m4).find("(while") != std::string::npos);
}

TEST_CASE("run-pipeline respects levels and explicit pass lists") {
  Module m = programs::powModule();
  SUBCASE("opt 0 and 3 agree on outputs across random inputs") {
    exec::Engine e0, e3;
    exec::CompiledModule c0 = e0.compile(m, opt::PassConfig{0});
    exec::CompiledModule c3 = e3.compile(m, opt::PassConfig{3});
    gen::Rng rng(gen::baseSeed() ^ 0x900);
    for (int i = 0; i < 1000; i++) {
      int64_t x = int64_t(rng() % 2000) - 1000;
      int64_t n = int64_t(rng() % 16);
      auto [a, s0] = c0.apply("pow", {x, n});
      auto [b, s3] = c3.apply("pow", {x, n});
      CHECK(std::get<int64_t>(a) == std::get<int64_t>(b));
    }
  }
  SUBCASE("monotone static counts") {
    opt::PipelineResult p0 = opt::runPipeline(m, opt::PassConfig{0});
    opt::PipelineResult p3 = opt::runPipeline(m, opt::PassConfig{3});
    lir::InstrCount c0 = lir::staticInstrCount(p0.lmod);
    lir::InstrCount c3 = lir::staticInstrCount(p3.lmod);
    CHECK(c3.total + c3.terminators <= c0.total + c0.terminators);
  }
  SUBCASE("explicit list runs only the named passes") {
    opt::PassConfig cfg;
    cfg.passList = std::vector<std::string>{"licm"};
    opt::PipelineResult pr = opt::runPipeline(m, cfg);
    REQUIRE(pr.stats.size() == 1);
    CHECK(pr.stats[0].pass == "licm");
    CHECK(pr.stats[0].stage == "hir");
  }
  SUBCASE("per-pass stats report before and after") {
    opt::PipelineResult pr = opt::runPipeline(m, opt::PassConfig{3});
    CHECK(pr.stats.size() >= 5);
    for (const opt::PassStat &s : pr.stats) {
      CHECK(!s.pass.empty());
      CHECK(s.before > 0);
    }
  }
}
