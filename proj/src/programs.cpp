#include "dslkit/programs.hpp"

namespace dslkit::programs {

using namespace hir;
using ast::NodePtr;

hir::Module powModule() {
  Module m;
  m.name = "pow-module";
  StmtRef body = ifStmt(
      icmpUle(var("n"), ui64(0)), ret(ui64(1)),
      ret(mul(var("x"),
              app(defined("pow"),
                  {var("x"), primOp(Op::SubNuw, {var("n"), ui64(1)})}))));
  moduleAdd(m, function("pow", {{"x", i64()}, {"n", i64()}}, i64(), body));
  return m;
}

hir::ExprRef buildPow(hir::ExprRef x, uint64_t n) {
  if (n == 0)
    return ui64(1);
  return mul(x, buildPow(x, n - 1));
}

mhk::Program normalizeProgram() {
  using namespace mhk;
  NodePtr a = varRef(tyArr(tyReal()), "a");
  NodePtr n = varRef(tyNat(), "n");
  NodePtr sum = summateNode(tyReal(), "j", valNat(0), n,
                            apply(tyReal(), "index", {a, varRef(tyNat(), "j")}));
  NodePtr body = apply(tyReal(), "/",
                       {apply(tyReal(), "index", {a, varRef(tyNat(), "i")}), sum});
  mhk::Program prog;
  prog.arrays = {{"a", true, "n"}};
  prog.expr = forNode(tyArr(tyReal()), "i", valNat(0), n, body);
  return prog;
}

mhk::Program fusionPairProgram() {
  using namespace mhk;
  NodePtr a = varRef(tyArr(tyReal()), "a");
  NodePtr n = varRef(tyNat(), "n");
  auto at = [&](const char *idx) {
    return apply(tyReal(), "index", {a, varRef(tyNat(), idx)});
  };
  NodePtr s1 = summateNode(tyReal(), "i", valNat(0), n, at("i"));
  NodePtr s2 = summateNode(tyReal(), "i", valNat(0), n,
                           apply(tyReal(), "*", {at("i"), at("i")}));
  mhk::Program prog;
  prog.arrays = {{"a", true, "n"}};
  prog.expr = apply(tyReal(), "+", {s1, s2});
  return prog;
}

} // namespace dslkit::programs
