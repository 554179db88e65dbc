#include "dslkit/dsl/mhk.hpp"

#include <algorithm>
#include <functional>

namespace dslkit::mhk {

using ast::Child;
using ast::GrammarPtr;
using ast::Leaf;
using ast::NodePtr;

// ---------------------------------------------------------------- grammar

GrammarPtr grammar() {
  static GrammarPtr g = [] {
    using namespace ast;
    Group expr{"expr", {}};
    expr.productions.push_back(
        {"val", {{"ty", single("ty")}, {"v", terminal("number?")}}});
    expr.productions.push_back({"if",
                                {{"ty", single("ty")},
                                 {"tst", single("expr")},
                                 {"thn", single("expr")},
                                 {"els", single("expr")}}});
    expr.productions.push_back({"app",
                                {{"ty", single("ty")},
                                 {"rator", single("expr")},
                                 {"rands", repeat(single("expr"))}}});
    expr.productions.push_back({"match",
                                {{"ty", single("ty")},
                                 {"tst", single("expr")},
                                 {"branches", repeat(single("expr.branch"))}}});
    expr.productions.push_back(
        {"branch", {{"p", single("pat")}, {"body", single("expr")}}});
    expr.productions.push_back({"intrf", {{"s", terminal("symbol?")}}});
    expr.productions.push_back({"var",
                                {{"ty", single("ty")},
                                 {"name", terminal("symbol?")},
                                 {"info", terminal("number?")}}});
    expr.productions.push_back({"for",
                                {{"ty", single("ty")},
                                 {"index", terminal("symbol?")},
                                 {"lo", single("expr")},
                                 {"hi", single("expr")},
                                 {"body", single("expr")}}});
    expr.productions.push_back({"summate",
                                {{"ty", single("ty")},
                                 {"index", terminal("symbol?")},
                                 {"lo", single("expr")},
                                 {"hi", single("expr")},
                                 {"body", single("expr")}}});
    expr.productions.push_back({"bucket",
                                {{"ty", single("ty")},
                                 {"s", single("expr")},
                                 {"e", single("expr")},
                                 {"r", single("reducer")}}});
    Group reducer{"reducer",
                  {{"index",
                    {{"n", single("expr")},
                     {"i", single("expr")},
                     {"a", single("reducer")}}},
                   {"nop", {}}}};
    Group pat{"pat",
              {{"pair", {{"a", single("pat")}, {"b", single("pat")}}},
               {"pvar", {{"name", terminal("symbol?")}}}}};
    Group ty{"ty",
             {{"nat", {}},
              {"real", {}},
              {"arr", {{"elem", single("ty")}}},
              {"constant", {{"v", terminal("number?")}, {"base", single("ty")}}}}};
    return Grammar::define("mhk", {std::move(expr), std::move(reducer),
                                   std::move(pat), std::move(ty)});
  }();
  return g;
}

ast::NodePtr parseExpr(std::string_view text) {
  return ast::parseNode(grammar(), text);
}

// ---------------------------------------------------------------- builders

NodePtr tyNat() { return ast::makeNode(grammar(), "nat", {}); }
NodePtr tyReal() { return ast::makeNode(grammar(), "real", {}); }
NodePtr tyArr(NodePtr elem) {
  return ast::makeNode(grammar(), "arr", {Child(std::move(elem))});
}
NodePtr tyConstant(double v, NodePtr base) {
  return ast::makeNode(grammar(), "constant",
                       {Child(Leaf::floating(v)), Child(std::move(base))});
}

NodePtr val(NodePtr ty, double v) {
  bool real = ty->production() == "real";
  Leaf leaf = real ? Leaf::floating(v) : Leaf::integer(int64_t(v));
  return ast::makeNode(grammar(), "val", {Child(std::move(ty)), Child(leaf)});
}

NodePtr valNat(int64_t v) {
  return ast::makeNode(grammar(), "val",
                       {Child(tyNat()), Child(Leaf::integer(v))});
}

NodePtr valReal(double v) {
  return ast::makeNode(grammar(), "val",
                       {Child(tyReal()), Child(Leaf::floating(v))});
}

NodePtr varRef(NodePtr ty, const std::string &name) {
  return ast::makeNode(grammar(), "var",
                       {Child(std::move(ty)), Child(Leaf::symbol(name)),
                        Child(Leaf::integer(0))});
}

NodePtr intrf(const std::string &op) {
  return ast::makeNode(grammar(), "intrf", {Child(Leaf::symbol(op))});
}

NodePtr apply(NodePtr ty, const std::string &op, std::vector<NodePtr> rands) {
  std::vector<Child> list;
  for (NodePtr &r : rands)
    list.push_back(Child(std::move(r)));
  return ast::makeNode(grammar(), "app",
                       {Child(std::move(ty)), Child(intrf(op)),
                        Child::listOf(std::move(list))});
}

NodePtr ifNode(NodePtr ty, NodePtr tst, NodePtr thn, NodePtr els) {
  return ast::makeNode(grammar(), "if",
                       {Child(std::move(ty)), Child(std::move(tst)),
                        Child(std::move(thn)), Child(std::move(els))});
}

NodePtr letNode(NodePtr ty, const std::string &name, NodePtr init, NodePtr body) {
  NodePtr pv = ast::makeNode(grammar(), "pvar", {Child(Leaf::symbol(name))});
  NodePtr br = ast::makeNode(grammar(), "branch",
                             {Child(std::move(pv)), Child(std::move(body))});
  return ast::makeNode(grammar(), "match",
                       {Child(std::move(ty)), Child(std::move(init)),
                        Child::listOf({Child(std::move(br))})});
}

NodePtr forNode(NodePtr ty, const std::string &index, NodePtr lo, NodePtr hi,
                NodePtr body) {
  return ast::makeNode(grammar(), "for",
                       {Child(std::move(ty)), Child(Leaf::symbol(index)),
                        Child(std::move(lo)), Child(std::move(hi)),
                        Child(std::move(body))});
}

NodePtr summateNode(NodePtr ty, const std::string &index, NodePtr lo, NodePtr hi,
                    NodePtr body) {
  return ast::makeNode(grammar(), "summate",
                       {Child(std::move(ty)), Child(Leaf::symbol(index)),
                        Child(std::move(lo)), Child(std::move(hi)),
                        Child(std::move(body))});
}

// ---------------------------------------------------------------- ty info

namespace {

const NodePtr &fieldNode(const NodePtr &n, std::string_view name) {
  return n->field(name).node;
}

const Leaf &fieldLeaf(const NodePtr &n, std::string_view name) {
  return n->field(name).leaf;
}

NodePtr exprTy(const NodePtr &n) {
  const std::string &p = n->production();
  if (p == "intrf" || p == "branch")
    return nullptr;
  return fieldNode(n, "ty");
}

struct TyInfo {
  bool isArr = false;
  bool real = false; // scalar kind, or element kind for arrays
  bool isConst = false;
  double constVal = 0;
  bool elemConst = false;
  double elemConstVal = 0;
};

double leafNumber(const Leaf &l) {
  return l.kind == Leaf::Kind::Int ? double(l.i) : l.f;
}

TyInfo tyInfo(const NodePtr &ty) {
  TyInfo info;
  const std::string &p = ty->production();
  if (p == "real") {
    info.real = true;
  } else if (p == "constant") {
    info = tyInfo(fieldNode(ty, "base"));
    info.isConst = true;
    info.constVal = leafNumber(fieldLeaf(ty, "v"));
  } else if (p == "arr") {
    TyInfo elem = tyInfo(fieldNode(ty, "elem"));
    info.isArr = true;
    info.real = elem.real;
    info.elemConst = elem.isConst;
    info.elemConstVal = elem.constVal;
  }
  return info;
}

hir::TypeRef hirTypeOf(const NodePtr &ty) {
  TyInfo info = tyInfo(ty);
  hir::TypeRef scalar = info.real ? hir::f64() : hir::i64();
  return info.isArr ? hir::ptr(scalar) : scalar;
}

bool isAppOf(const NodePtr &n, std::string_view op) {
  if (n->production() != "app")
    return false;
  const NodePtr &rator = fieldNode(n, "rator");
  return rator->production() == "intrf" && fieldLeaf(rator, "s").text == op;
}

std::vector<NodePtr> randsOf(const NodePtr &n) {
  std::vector<NodePtr> out;
  for (const Child &c : n->field("rands").list)
    out.push_back(c.node);
  return out;
}

bool isLoop(const NodePtr &n) {
  return n->production() == "for" || n->production() == "summate";
}

void freeVarsInto(const NodePtr &n, std::set<std::string> &bound,
                  std::set<std::string> &out) {
  const std::string &p = n->production();
  if (p == "var") {
    const std::string &name = fieldLeaf(n, "name").text;
    if (!bound.count(name))
      out.insert(name);
    return;
  }
  if (p == "for" || p == "summate") {
    freeVarsInto(fieldNode(n, "lo"), bound, out);
    freeVarsInto(fieldNode(n, "hi"), bound, out);
    const std::string &idx = fieldLeaf(n, "index").text;
    bool added = bound.insert(idx).second;
    freeVarsInto(fieldNode(n, "body"), bound, out);
    if (added)
      bound.erase(idx);
    return;
  }
  if (p == "match") {
    freeVarsInto(fieldNode(n, "tst"), bound, out);
    for (const Child &c : n->field("branches").list) {
      const NodePtr &br = c.node;
      const NodePtr &pat = fieldNode(br, "p");
      std::vector<std::string> added;
      if (pat->production() == "pvar") {
        const std::string &name = fieldLeaf(pat, "name").text;
        if (bound.insert(name).second)
          added.push_back(name);
      }
      freeVarsInto(fieldNode(br, "body"), bound, out);
      for (const std::string &name : added)
        bound.erase(name);
    }
    return;
  }
  for (size_t i = 0; i < n->fields().size(); i++) {
    const Child &c = n->fields()[i];
    if (c.kind == Child::Kind::Node && c.node->group() == "expr")
      freeVarsInto(c.node, bound, out);
    else if (c.kind == Child::Kind::List)
      for (const Child &e : c.list)
        if (e.kind == Child::Kind::Node && e.node->group() == "expr")
          freeVarsInto(e.node, bound, out);
  }
}

std::set<std::string> freeVarsOf(const NodePtr &n) {
  std::set<std::string> bound, out;
  freeVarsInto(n, bound, out);
  return out;
}

} // namespace

// ---------------------------------------------------------------- anf

namespace {

struct AnfPass {
  int fresh = 0;

  bool atomic(const NodePtr &n) const {
    const std::string &p = n->production();
    return p == "val" || p == "var" || p == "intrf";
  }

  NodePtr bindNonAtomic(std::vector<std::pair<std::string, NodePtr>> &binds,
                        const NodePtr &e) {
    if (atomic(e))
      return e;
    std::string name = "$anf" + std::to_string(fresh++);
    binds.emplace_back(name, e);
    return varRef(exprTy(e), name);
  }

  NodePtr wrap(std::vector<std::pair<std::string, NodePtr>> &binds, NodePtr body) {
    for (auto it = binds.rbegin(); it != binds.rend(); ++it) {
      NodePtr ty = exprTy(body);
      body = letNode(std::move(ty), it->first, it->second, std::move(body));
    }
    return body;
  }

  NodePtr run(const NodePtr &n) {
    const std::string &p = n->production();
    if (p == "app") {
      std::vector<std::pair<std::string, NodePtr>> binds;
      std::vector<NodePtr> rands;
      for (const NodePtr &r : randsOf(n))
        rands.push_back(bindNonAtomic(binds, run(r)));
      std::vector<Child> list;
      for (NodePtr &r : rands)
        list.push_back(Child(std::move(r)));
      NodePtr out = ast::makeNode(grammar(), "app",
                                  {n->fields()[0], n->fields()[1],
                                   Child::listOf(std::move(list))});
      return wrap(binds, out);
    }
    if (p == "if") {
      std::vector<std::pair<std::string, NodePtr>> binds;
      NodePtr tst = bindNonAtomic(binds, run(fieldNode(n, "tst")));
      NodePtr out = ifNode(exprTy(n), tst, run(fieldNode(n, "thn")),
                           run(fieldNode(n, "els")));
      return wrap(binds, out);
    }
    if (p == "for" || p == "summate") {
      NodePtr ty = exprTy(n);
      std::string idx = fieldLeaf(n, "index").text;
      NodePtr lo = run(fieldNode(n, "lo"));
      NodePtr hi = run(fieldNode(n, "hi"));
      NodePtr body = run(fieldNode(n, "body"));
      return p == "for" ? forNode(ty, idx, lo, hi, body)
                        : summateNode(ty, idx, lo, hi, body);
    }
    if (p == "match") {
      std::vector<Child> branches;
      for (const Child &c : n->field("branches").list) {
        const NodePtr &br = c.node;
        branches.push_back(Child(ast::makeNode(
            grammar(), "branch",
            {br->fields()[0], Child(run(fieldNode(br, "body")))})));
      }
      return ast::makeNode(grammar(), "match",
                           {n->fields()[0], Child(run(fieldNode(n, "tst"))),
                            Child::listOf(std::move(branches))});
    }
    return n; // val, var, intrf, bucket (left for lower to reject)
  }
};

} // namespace

NodePtr anf(const NodePtr &e) {
  AnfPass pass;
  return pass.run(e);
}

// ---------------------------------------------------------------- rewrite

NodePtr indexRewrite(const NodePtr &e) {
  std::vector<ast::Rule> rules;

  // Constant two-way index into a short array literal distributes over the if.
  rules.push_back([](const NodePtr &n) -> std::optional<NodePtr> {
    if (!isAppOf(n, "index"))
      return std::nullopt;
    std::vector<NodePtr> rands = randsOf(n);
    if (rands.size() != 2 || !isAppOf(rands[0], "array-literal") ||
        rands[1]->production() != "if")
      return std::nullopt;
    std::vector<NodePtr> contents = randsOf(rands[0]);
    if (contents.size() >= 5)
      return std::nullopt;
    const NodePtr &sel = rands[1];
    const NodePtr &thn = fieldNode(sel, "thn");
    const NodePtr &els = fieldNode(sel, "els");
    if (thn->production() != "val" || els->production() != "val")
      return std::nullopt;
    int64_t vthn = int64_t(leafNumber(fieldLeaf(thn, "v")));
    int64_t vels = int64_t(leafNumber(fieldLeaf(els, "v")));
    if (vthn < 0 || vels < 0 || uint64_t(vthn) >= contents.size() ||
        uint64_t(vels) >= contents.size())
      return std::nullopt;
    return ifNode(exprTy(n), fieldNode(sel, "tst"), contents[size_t(vthn)],
                  contents[size_t(vels)]);
  });

  // Indexing a variable whose element type carries a constant value.
  rules.push_back([](const NodePtr &n) -> std::optional<NodePtr> {
    if (!isAppOf(n, "index"))
      return std::nullopt;
    std::vector<NodePtr> rands = randsOf(n);
    if (rands.size() != 2 || rands[0]->production() != "var")
      return std::nullopt;
    TyInfo info = tyInfo(fieldNode(rands[0], "ty"));
    if (!info.isArr || !info.elemConst)
      return std::nullopt;
    return val(exprTy(n), info.elemConstVal);
  });

  // Indexing a constant-value-array yields its content.
  rules.push_back([](const NodePtr &n) -> std::optional<NodePtr> {
    if (!isAppOf(n, "index"))
      return std::nullopt;
    std::vector<NodePtr> rands = randsOf(n);
    if (rands.size() != 2 || !isAppOf(rands[0], "constant-value-array"))
      return std::nullopt;
    std::vector<NodePtr> cva = randsOf(rands[0]);
    if (cva.size() != 2)
      return std::nullopt;
    return cva[1];
  });

  return ast::rewriteBottomUp(rules, e);
}

// ---------------------------------------------------------------- lower

namespace {

using namespace hir;

struct Lowerer {
  LowerOptions opts;
  Module mod;
  int fresh = 0;
  int helperCount = 0;

  struct Binding {
    ExprRef expr;
    NodePtr ty;
  };
  using Env = std::map<std::string, Binding>;

  std::string freshName(const char *base) {
    return "$" + std::string(base) + std::to_string(fresh++);
  }

  ExprRef promote(ExprRef e, const NodePtr &fromTy, bool wantReal) {
    if (wantReal && !tyInfo(fromTy).real)
      return cast(CastKind::SiToFp, std::move(e), f64());
    return e;
  }

  ExprRef zeroOf(bool real) { return real ? f64Lit(0) : si64(0); }

  ExprRef lowerVal(const NodePtr &n) {
    TyInfo info = tyInfo(exprTy(n));
    double v = leafNumber(fieldLeaf(n, "v"));
    return info.real ? f64Lit(v) : si64(int64_t(v));
  }

  ExprRef lowerApp(const NodePtr &n, Env &env, int depth) {
    const NodePtr &rator = fieldNode(n, "rator");
    if (rator->production() != "intrf")
      raise(Err::UnsupportedConstruct, "application of a non-operator");
    const std::string &op = fieldLeaf(rator, "s").text;
    std::vector<NodePtr> rands = randsOf(n);
    TyInfo resultInfo = tyInfo(exprTy(n));

    if (op == "+" || op == "-" || op == "*" || op == "/") {
      bool real = resultInfo.real || op == "/";
      if (rands.size() < 2)
        raise(Err::UnsupportedConstruct, "'" + op + "' wants >= 2 operands");
      Op binop = real ? (op == "+"   ? Op::FAdd
                         : op == "-" ? Op::FSub
                         : op == "*" ? Op::FMul
                                     : Op::FDiv)
                      : (op == "+"   ? Op::Add
                         : op == "-" ? Op::Sub
                                     : Op::Mul);
      ExprRef acc = promote(lower(rands[0], env, depth), exprTy(rands[0]), real);
      for (size_t i = 1; i < rands.size(); i++)
        acc = primOp(binop, {acc, promote(lower(rands[i], env, depth),
                                          exprTy(rands[i]), real)});
      return acc;
    }
    if (op == "<" || op == "==") {
      if (rands.size() != 2)
        raise(Err::UnsupportedConstruct, "'" + op + "' wants 2 operands");
      bool real = tyInfo(exprTy(rands[0])).real || tyInfo(exprTy(rands[1])).real;
      ExprRef a = promote(lower(rands[0], env, depth), exprTy(rands[0]), real);
      ExprRef b = promote(lower(rands[1], env, depth), exprTy(rands[1]), real);
      Op cmp = real ? (op == "<" ? Op::FcmpOlt : Op::FcmpOeq)
                    : (op == "<" ? Op::IcmpSlt : Op::IcmpEq);
      // Comparisons are ordinary nat values (0 or 1) in this language.
      return cast(CastKind::Zext, primOp(cmp, {a, b}), i64());
    }
    if (op == "index") {
      if (rands.size() != 2)
        raise(Err::UnsupportedConstruct, "index wants (array, position)");
      ExprRef arr = lower(rands[0], env, depth);
      ExprRef idx = lower(rands[1], env, depth);
      return arrayRef(std::move(arr), std::move(idx));
    }
    if (op == "array-literal") {
      bool real = resultInfo.real;
      TypeRef elem = real ? f64() : i64();
      std::string t = freshName("arr");
      ExprRef mallocCall =
          app(intrinsic("malloc", fnType({i64()}, ptr(i8()))),
              {ui64(rands.size() * 8)});
      ExprRef buf = cast(CastKind::PtrCast, mallocCall, ptr(elem));
      std::vector<StmtRef> stores;
      for (size_t i = 0; i < rands.size(); i++)
        stores.push_back(store(promote(lower(rands[i], env, depth),
                                       exprTy(rands[i]), real),
                               gep(var(t), {ui64(i)})));
      return let({{t, buf, ptr(elem)}}, block(std::move(stores)), var(t));
    }
    if (op == "constant-value-array") {
      if (rands.size() != 2)
        raise(Err::UnsupportedConstruct, "constant-value-array wants (size, content)");
      bool real = resultInfo.real;
      TypeRef elem = real ? f64() : i64();
      std::string sz = freshName("n"), c = freshName("c"), t = freshName("arr"),
                  i = freshName("i");
      ExprRef szE = lower(rands[0], env, depth);
      ExprRef cE = promote(lower(rands[1], env, depth), exprTy(rands[1]), real);
      ExprRef mallocCall =
          app(intrinsic("malloc", fnType({i64()}, ptr(i8()))),
              {mul(var(sz), ui64(8))});
      ExprRef fill = let(
          {{t, cast(CastKind::PtrCast, mallocCall, ptr(elem)), ptr(elem)},
           {i, si64(0), i64()}},
          whileLoop(icmpSlt(var(i), var(sz)),
                    block({store(var(c), gep(var(t), {var(i)})),
                           set(i, add1(var(i)))})),
          var(t));
      return let({{sz, szE, i64()}, {c, cE, elem}}, svoid(), fill);
    }
    raise(Err::UnsupportedConstruct, "operator '" + op + "'");
  }

  // Inline loop lowering (used at the top level and inside helpers).
  ExprRef lowerLoopInline(const NodePtr &n, Env &env, int depth) {
    bool isFor = n->production() == "for";
    TyInfo resultInfo = tyInfo(exprTy(n));
    bool real = resultInfo.real;
    TypeRef elem = real ? f64() : i64();
    std::string idx = fieldLeaf(n, "index").text;
    std::string lo = freshName("lo"), hi = freshName("hi"), iv = freshName("i");
    ExprRef loE = lower(fieldNode(n, "lo"), env, depth);
    ExprRef hiE = lower(fieldNode(n, "hi"), env, depth);

    Env inner = env;
    inner[idx] = {var(iv), tyNat()};
    ExprRef bodyE = lower(fieldNode(n, "body"), inner, depth + 1);
    bodyE = promote(bodyE, exprTy(fieldNode(n, "body")), real);

    if (!isFor) {
      std::string acc = freshName("acc");
      ExprRef loop =
          let({{acc, zeroOf(real), elem}, {iv, var(lo), i64()}},
              whileLoop(icmpSlt(var(iv), var(hi)),
                        block({set(acc, primOp(real ? Op::FAdd : Op::Add,
                                               {var(acc), bodyE})),
                               set(iv, add1(var(iv)))})),
              var(acc));
      return let({{lo, loE, i64()}, {hi, hiE, i64()}}, svoid(), loop);
    }

    std::string cnt = freshName("n"), t = freshName("arr");
    ExprRef mallocCall = app(intrinsic("malloc", fnType({i64()}, ptr(i8()))),
                             {mul(var(cnt), ui64(8))});
    ExprRef loop = let(
        {{t, cast(CastKind::PtrCast, mallocCall, ptr(elem)), ptr(elem)},
         {iv, var(lo), i64()}},
        whileLoop(icmpSlt(var(iv), var(hi)),
                  block({store(bodyE, gep(var(t), {sub(var(iv), var(lo))})),
                         set(iv, add1(var(iv)))})),
        var(t));
    ExprRef clamped =
        let({{cnt, sub(var(hi), var(lo)), i64()}},
            ifStmt(icmpSlt(var(cnt), si64(0)), set(cnt, si64(0)), svoid()),
            loop);
    return let({{lo, loE, i64()}, {hi, hiE, i64()}}, svoid(), clamped);
  }

  // A reduction nested in a loop body becomes a call to a pure helper so
  // invariant calls can be hoisted out of the enclosing loop.
  ExprRef lowerLoopAsHelper(const NodePtr &n, Env &env) {
    std::set<std::string> free = freeVarsOf(n);
    std::vector<std::string> captured(free.begin(), free.end());
    std::vector<Param> params;
    std::vector<ExprRef> args;
    Env helperEnv;
    for (const std::string &name : captured) {
      auto it = env.find(name);
      if (it == env.end())
        raise(Err::ShapeError, "unbound variable '" + name + "'");
      params.push_back({name, hirTypeOf(it->second.ty)});
      args.push_back(it->second.expr);
      helperEnv[name] = {var(name), it->second.ty};
    }
    bool isFor = n->production() == "for";
    std::string helperName =
        std::string(isFor ? "tab." : "sum.") + std::to_string(helperCount++);
    ExprRef body = lowerLoopInline(n, helperEnv, 0);
    moduleAdd(mod, function(helperName, std::move(params),
                            hirTypeOf(exprTy(n)), ret(body), {kAttrPure}));
    return app(defined(helperName), std::move(args));
  }

  // Chain of single-branch matches binding loops over identical bounds.
  struct FuseLink {
    std::string binder;
    NodePtr loop;
    NodePtr ty;
  };

  bool collectFusionChain(const NodePtr &n, std::vector<FuseLink> &links,
                          NodePtr &innerBody) {
    const NodePtr *cur = &n;
    std::set<std::string> bindersSoFar;
    while ((*cur)->production() == "match" &&
           (*cur)->field("branches").list.size() == 1) {
      const NodePtr &br = (*cur)->field("branches").list[0].node;
      const NodePtr &pat = fieldNode(br, "p");
      const NodePtr &init = fieldNode(*cur, "tst");
      if (pat->production() != "pvar" || !isLoop(init))
        break;
      if (!links.empty()) {
        const NodePtr &first = links[0].loop;
        if (!ast::nodeEquals(fieldNode(first, "lo"), fieldNode(init, "lo")) ||
            !ast::nodeEquals(fieldNode(first, "hi"), fieldNode(init, "hi")))
          break;
        std::set<std::string> initFree = freeVarsOf(init);
        bool dependent = false;
        for (const std::string &b : bindersSoFar)
          dependent = dependent || initFree.count(b);
        if (dependent)
          break;
      }
      std::string binder = fieldLeaf(pat, "name").text;
      links.push_back({binder, init, exprTy(init)});
      bindersSoFar.insert(binder);
      innerBody = fieldNode(br, "body");
      cur = &innerBody;
    }
    return links.size() >= 2;
  }

  ExprRef lowerFused(const std::vector<FuseLink> &links, const NodePtr &innerBody,
                     Env &env, int depth) {
    std::string lo = freshName("lo"), hi = freshName("hi"), iv = freshName("i");
    ExprRef loE = lower(fieldNode(links[0].loop, "lo"), env, depth);
    ExprRef hiE = lower(fieldNode(links[0].loop, "hi"), env, depth);

    // One accumulator or output buffer per fused loop, one shared index.
    std::vector<LetBinding> accBindings;
    std::vector<StmtRef> iter;
    Env bodyEnv = env;
    std::string cnt = freshName("n");
    bool anyFor = false;
    struct Slot {
      std::string name;
      bool isFor;
      bool real;
    };
    std::vector<Slot> slots;
    for (const FuseLink &link : links) {
      TyInfo info = tyInfo(link.ty);
      bool isFor = link.loop->production() == "for";
      anyFor = anyFor || isFor;
      std::string name = freshName(isFor ? "arr" : "acc");
      slots.push_back({name, isFor, info.real});
      TypeRef elem = info.real ? f64() : i64();
      if (isFor) {
        ExprRef mallocCall =
            app(intrinsic("malloc", fnType({i64()}, ptr(i8()))),
                {mul(var(cnt), ui64(8))});
        accBindings.push_back(
            {name, cast(CastKind::PtrCast, mallocCall, ptr(elem)), ptr(elem)});
      } else {
        accBindings.push_back({name, zeroOf(info.real), elem});
      }
    }
    accBindings.push_back({iv, var(lo), i64()});

    for (size_t k = 0; k < links.size(); k++) {
      const FuseLink &link = links[k];
      TyInfo info = tyInfo(link.ty);
      Env iterEnv = env;
      iterEnv[fieldLeaf(link.loop, "index").text] = {var(iv), tyNat()};
      ExprRef bodyE = lower(fieldNode(link.loop, "body"), iterEnv, depth + 1);
      bodyE = promote(bodyE, exprTy(fieldNode(link.loop, "body")), info.real);
      if (slots[k].isFor)
        iter.push_back(store(bodyE, gep(var(slots[k].name),
                                        {sub(var(iv), var(lo))})));
      else
        iter.push_back(set(slots[k].name,
                           primOp(info.real ? Op::FAdd : Op::Add,
                                  {var(slots[k].name), bodyE})));
      bodyEnv[link.binder] = {var(slots[k].name), link.ty};
    }
    iter.push_back(set(iv, add1(var(iv))));

    ExprRef rest = lower(innerBody, bodyEnv, depth);
    ExprRef merged =
        let(std::move(accBindings),
            whileLoop(icmpSlt(var(iv), var(hi)), block(std::move(iter))), rest);
    if (anyFor) {
      merged = let({{cnt, sub(var(hi), var(lo)), i64()}},
                   ifStmt(icmpSlt(var(cnt), si64(0)), set(cnt, si64(0)), svoid()),
                   merged);
    }
    return let({{lo, loE, i64()}, {hi, hiE, i64()}}, svoid(), merged);
  }

  ExprRef lower(const NodePtr &n, Env &env, int depth) {
    const std::string &p = n->production();
    if (p == "val")
      return lowerVal(n);
    if (p == "var") {
      const std::string &name = fieldLeaf(n, "name").text;
      auto it = env.find(name);
      if (it == env.end())
        raise(Err::ShapeError, "unbound variable '" + name + "'");
      return it->second.expr;
    }
    if (p == "app")
      return lowerApp(n, env, depth);
    if (p == "if") {
      TyInfo info = tyInfo(exprTy(n));
      TypeRef ty = hirTypeOf(exprTy(n));
      bool real = info.real && !info.isArr;
      std::string r = freshName("r");
      // The scrutinee is a nat; nonzero selects the then branch.
      if (tyInfo(exprTy(fieldNode(n, "tst"))).real)
        raise(Err::UnsupportedConstruct, "if over a real-valued test");
      ExprRef tst = primOp(Op::IcmpNe,
                           {lower(fieldNode(n, "tst"), env, depth), si64(0)});
      ExprRef thn = promote(lower(fieldNode(n, "thn"), env, depth),
                            exprTy(fieldNode(n, "thn")), real);
      ExprRef els = promote(lower(fieldNode(n, "els"), env, depth),
                            exprTy(fieldNode(n, "els")), real);
      std::optional<ExprRef> init;
      if (!info.isArr)
        init = zeroOf(info.real);
      return let({{r, init, ty}},
                 ifStmt(tst, set(r, thn), set(r, els)), var(r));
    }
    if (p == "match") {
      if (opts.fuse && depth == 0) {
        std::vector<FuseLink> links;
        NodePtr innerBody;
        if (collectFusionChain(n, links, innerBody))
          return lowerFused(links, innerBody, env, depth);
      }
      if (n->field("branches").list.size() != 1)
        raise(Err::UnsupportedConstruct, "match with multiple branches");
      const NodePtr &br = n->field("branches").list[0].node;
      const NodePtr &pat = fieldNode(br, "p");
      if (pat->production() != "pvar")
        raise(Err::UnsupportedConstruct, "non-variable pattern");
      const NodePtr &init = fieldNode(n, "tst");
      std::string binder = fieldLeaf(pat, "name").text;
      std::string local = freshName("x");
      ExprRef initE = lower(init, env, depth);
      Env inner = env;
      inner[binder] = {var(local), exprTy(init)};
      ExprRef bodyE = lower(fieldNode(br, "body"), inner, depth);
      return let({{local, initE, hirTypeOf(exprTy(init))}}, svoid(), bodyE);
    }
    if (p == "for" || p == "summate") {
      if (depth > 0)
        return lowerLoopAsHelper(n, env);
      return lowerLoopInline(n, env, depth);
    }
    if (p == "bucket")
      raise(Err::UnsupportedConstruct, "bucket/reducer");
    raise(Err::UnsupportedConstruct, "cannot lower production '" + p + "'");
  }
};

} // namespace

hir::Module lower(const Program &prog, const LowerOptions &opts) {
  Lowerer lw{opts};
  lw.mod.name = "mhk";
  Lowerer::Env env;
  std::vector<Param> params;
  for (const ArrayParam &a : prog.arrays) {
    TypeRef elem = a.realElems ? f64() : i64();
    params.push_back({a.name, ptr(elem)});
    params.push_back({a.lenName, i64()});
    env[a.name] = {var(a.name),
                   tyArr(a.realElems ? tyReal() : tyNat())};
    env[a.lenName] = {var(a.lenName), tyNat()};
  }
  ExprRef body = lw.lower(prog.expr, env, 0);
  moduleAdd(lw.mod, function(kEntryName, std::move(params),
                             hirTypeOf(exprTy(prog.expr)), ret(body)));
  return std::move(lw.mod);
}

// ---------------------------------------------------------------- io / run

Program parseProgram(std::string_view text) {
  Sexpr form = readSexpr(text);
  if (form.head() != "mhk")
    throw ParseError("expected (mhk (arrays ...) (expr ...))", form.line, form.col);
  Program prog;
  for (size_t i = 1; i < form.size(); i++) {
    const Sexpr &item = form.at(i);
    if (item.head() == "arrays") {
      for (size_t j = 1; j < item.size(); j++) {
        const Sexpr &a = item.at(j);
        ArrayParam p;
        p.name = a.at(0).asSymbol();
        const std::string &kind = a.at(1).asSymbol();
        if (kind != "real" && kind != "nat")
          throw ParseError("array element kind must be real or nat", a.line, a.col);
        p.realElems = kind == "real";
        p.lenName = a.at(2).asSymbol();
        prog.arrays.push_back(std::move(p));
      }
    } else if (item.head() == "expr") {
      prog.expr = ast::nodeFromSexpr(grammar(), item.at(1));
    } else {
      throw ParseError("unknown mhk section", item.line, item.col);
    }
  }
  if (!prog.expr)
    throw ParseError("missing (expr ...) section", form.line, form.col);
  return prog;
}

Arrays parseArrays(std::string_view text, const Program &prog) {
  Sexpr form = readSexpr(text);
  if (form.head() != "arrays")
    throw ParseError("expected (arrays (<name> <num>...)...)", form.line, form.col);
  Arrays out;
  for (size_t i = 1; i < form.size(); i++) {
    const Sexpr &a = form.at(i);
    const std::string &name = a.at(0).asSymbol();
    bool real = true;
    for (const ArrayParam &p : prog.arrays)
      if (p.name == name)
        real = p.realElems;
    if (real) {
      std::vector<double> vals;
      for (size_t j = 1; j < a.size(); j++)
        vals.push_back(a.at(j).asDouble());
      out.real[name] = std::move(vals);
    } else {
      std::vector<int64_t> vals;
      for (size_t j = 1; j < a.size(); j++)
        vals.push_back(a.at(j).asInt());
      out.nat[name] = std::move(vals);
    }
  }
  return out;
}

RunResult run(const Program &prog, const Arrays &arrays,
              const opt::PassConfig &cfg, const LowerOptions &opts) {
  // Index rewriting matches nested application shapes, so it runs before
  // normalization breaks them apart.
  Program staged = prog;
  staged.expr = anf(indexRewrite(prog.expr));
  hir::Module m = lower(staged, opts);
  exec::Engine engine;
  exec::CompiledModule cm = engine.compile(m, cfg);

  std::vector<exec::HostValue> args;
  for (const ArrayParam &a : prog.arrays) {
    if (a.realElems) {
      auto it = arrays.real.find(a.name);
      if (it == arrays.real.end())
        raise(Err::MarshalError, "missing array '" + a.name + "'");
      args.push_back(it->second);
    } else {
      auto it = arrays.nat.find(a.name);
      if (it == arrays.nat.end())
        raise(Err::MarshalError, "missing array '" + a.name + "'");
      args.push_back(it->second);
    }
  }
  auto [result, stats] = cm.apply(kEntryName, args);

  RunResult r;
  r.stats = stats;
  r.passStats = cm.passStats;
  r.compileMs = cm.compileMs;
  TyInfo info = tyInfo(exprTy(prog.expr));
  r.isArray = info.isArr;
  r.realValued = info.real;
  if (info.isArr) {
    auto view = std::get<exec::BufferView>(result);
    if (info.real)
      r.realArray = exec::readF64Buffer(*engine.session(), view);
    else
      r.natArray = exec::readI64Buffer(*engine.session(), view);
  } else if (info.real) {
    r.real = std::get<double>(result);
  } else {
    r.nat = std::get<int64_t>(result);
  }
  return r;
}

} // namespace dslkit::mhk
