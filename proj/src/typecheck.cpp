#include "dslkit/typecheck.hpp"

#include "dslkit/intrinsics.hpp"
#include "hir_rewrite.hpp"

#include <functional>
#include <map>
#include <set>

namespace dslkit::hir {

namespace {

ExprRef withType(const Expr &e, TypeRef t) {
  auto out = std::make_shared<Expr>(e);
  out->type = std::move(t);
  return out;
}

struct Checker {
  const Module &mod;
  std::vector<Diag> diags;
  const Function *fn = nullptr;
  std::vector<std::map<std::string, TypeRef>> scopes;
  std::set<std::string> labels;

  void report(const std::string &code, const std::string &msg) {
    diags.push_back({code, fn ? fn->name : mod.name, msg});
  }

  const TypeRef *lookupVar(const std::string &name) const {
    for (auto it = scopes.rbegin(); it != scopes.rend(); ++it) {
      auto found = it->find(name);
      if (found != it->end())
        return &found->second;
    }
    return nullptr;
  }

  // ---- expressions -------------------------------------------------

  ExprRef check(const ExprRef &e, const TypeRef &hint = nullptr) {
    if (auto *v = e->as<VarE>()) {
      const TypeRef *t = lookupVar(v->name);
      if (!t) {
        report("UnboundVariable", "'" + v->name + "'");
        return withType(*e, nullptr);
      }
      return withType(*e, *t);
    }
    if (auto *lit = e->as<IntLitE>()) {
      TypeRef t = lit->ty;
      if (!t)
        t = (hint && hint->isInt()) ? hint : i64();
      Expr out = *e;
      auto &node = std::get<IntLitE>(out.node);
      node.ty = t;
      if (t->width < 64)
        node.bits &= (uint64_t(1) << t->width) - 1;
      return withType(out, t);
    }
    if (auto *lit = e->as<FloatLitE>()) {
      if (!lit->ty || !lit->ty->isFloat()) {
        report("TypeMismatch", "float literal needs f32/f64 type");
        return withType(*e, nullptr);
      }
      return withType(*e, lit->ty);
    }
    if (e->is<SymLitE>())
      return withType(*e, symType());
    if (e->is<BoolLitE>())
      return withType(*e, hostBool());
    if (auto *a = e->as<AddrLitE>()) {
      if (!mod.findGlobal(a->global)) {
        report("UnboundVariable", "global '" + a->global + "'");
        return withType(*e, nullptr);
      }
      return withType(*e, a->ty);
    }
    if (auto *p = e->as<PrimOpE>())
      return checkPrimOp(*e, *p);
    if (auto *a = e->as<AppE>())
      return checkApp(*e, *a);
    if (auto *l = e->as<LetE>())
      return checkLet(*e, *l);
    if (auto *g = e->as<GepE>())
      return checkGep(*e, *g);
    if (auto *l = e->as<LoadE>()) {
      ExprRef addr = check(l->addr);
      Expr out = *e;
      std::get<LoadE>(out.node).addr = addr;
      if (!addr->type)
        return withType(out, nullptr);
      if (!addr->type->isPtr()) {
        report("TypeMismatch", "load address must be a pointer, got " +
                                   typeName(addr->type));
        return withType(out, nullptr);
      }
      const TypeRef &pointee = addr->type->elem;
      switch (pointee->kind) {
      case Type::Kind::Int: case Type::Kind::F32: case Type::Kind::F64:
      case Type::Kind::Ptr: case Type::Kind::Sym: case Type::Kind::HostBool:
        break;
      default:
        report("TypeMismatch", "load of non-scalar type " + typeName(pointee));
        return withType(out, nullptr);
      }
      return withType(out, pointee);
    }
    if (auto *c = e->as<CastE>())
      return checkCast(*e, *c);
    report("TypeMismatch", "unhandled expression");
    return withType(*e, nullptr);
  }

  ExprRef checkPrimOp(const Expr &e, const PrimOpE &p) {
    // An untyped integer literal adopts the sibling operand's width.
    ExprRef lhs, rhs;
    auto untypedInt = [](const ExprRef &x) {
      auto *l = x->as<IntLitE>();
      return l && !l->ty;
    };
    if (untypedInt(p.args[0]) && !untypedInt(p.args[1])) {
      rhs = check(p.args[1]);
      lhs = check(p.args[0], rhs->type);
    } else {
      lhs = check(p.args[0]);
      rhs = check(p.args[1], lhs->type);
    }
    Expr out = e;
    auto &node = std::get<PrimOpE>(out.node);
    node.args = {lhs, rhs};
    if (!lhs->type || !rhs->type)
      return withType(out, nullptr);
    if (!typeEquals(lhs->type, rhs->type)) {
      report("TypeMismatch", std::string(opName(p.op)) + ": operand types " +
                                 typeName(lhs->type) + " vs " + typeName(rhs->type));
      return withType(out, nullptr);
    }
    bool isFloatOp = opIsFloat(p.op);
    if (isFloatOp && !lhs->type->isFloat()) {
      report("TypeMismatch", std::string(opName(p.op)) + " wants float operands");
      return withType(out, nullptr);
    }
    if (!isFloatOp && !lhs->type->isInt()) {
      report("TypeMismatch", std::string(opName(p.op)) + " wants integer operands");
      return withType(out, nullptr);
    }
    return withType(out, opIsCmp(p.op) ? i1() : lhs->type);
  }

  ExprRef checkApp(const Expr &e, const AppE &a) {
    TypeRef fnTy;
    switch (a.rator.kind) {
    case Rator::Kind::Defined: {
      const Function *callee = mod.findFunction(a.rator.name);
      if (!callee) {
        report("UnboundVariable", "function '" + a.rator.name + "'");
        return withType(e, nullptr);
      }
      std::vector<TypeRef> ps;
      for (const Param &p : callee->params)
        ps.push_back(p.type);
      fnTy = fnType(std::move(ps), callee->ret);
      break;
    }
    case Rator::Kind::Intrinsic: {
      const IntrinsicInfo *info = findIntrinsic(a.rator.name);
      if (!info) {
        report("UnknownIntrinsic", "'" + a.rator.name + "'");
        return withType(e, nullptr);
      }
      if (!intrinsicSignatureOk(*info, a.rator.fnTy)) {
        report("TypeMismatch", "intrinsic '" + a.rator.name +
                                   "' declared with wrong signature");
        return withType(e, nullptr);
      }
      fnTy = a.rator.fnTy;
      break;
    }
    case Rator::Kind::External:
    case Rator::Kind::Host:
      if (!a.rator.fnTy || a.rator.fnTy->kind != Type::Kind::Fn) {
        report("TypeMismatch", "registry rator '" + a.rator.name +
                                   "' needs a function type");
        return withType(e, nullptr);
      }
      fnTy = a.rator.fnTy;
      break;
    }
    if (a.args.size() != fnTy->params.size()) {
      report("TypeMismatch", "call to '" + a.rator.name + "' wants " +
                                 std::to_string(fnTy->params.size()) + " args, got " +
                                 std::to_string(a.args.size()));
      return withType(e, nullptr);
    }
    Expr out = e;
    auto &node = std::get<AppE>(out.node);
    bool bad = false;
    for (size_t i = 0; i < a.args.size(); i++) {
      ExprRef arg = check(a.args[i], fnTy->params[i]);
      if (arg->type && !typeEquals(arg->type, fnTy->params[i])) {
        report("TypeMismatch", "arg " + std::to_string(i) + " of '" + a.rator.name +
                                   "': expected " + typeName(fnTy->params[i]) +
                                   ", found " + typeName(arg->type));
        bad = true;
      }
      if (!arg->type)
        bad = true;
      node.args[i] = arg;
    }
    return withType(out, bad ? nullptr : fnTy->ret);
  }

  ExprRef checkLet(const Expr &e, const LetE &l) {
    Expr out = e;
    auto &node = std::get<LetE>(out.node);
    std::map<std::string, TypeRef> frame;
    for (size_t i = 0; i < l.bindings.size(); i++) {
      const LetBinding &b = l.bindings[i];
      if (frame.count(b.name))
        report("DuplicateBinding", "'" + b.name + "' bound twice in one let");
      if (b.init) {
        // Inits see the outer scope only (parallel binding).
        ExprRef init = check(*b.init, b.type);
        if (init->type && !typeEquals(init->type, b.type))
          report("TypeMismatch", "binding '" + b.name + "': expected " +
                                     typeName(b.type) + ", found " +
                                     typeName(init->type));
        node.bindings[i].init = init;
      }
      frame[b.name] = b.type;
    }
    scopes.push_back(std::move(frame));
    node.body = checkStmt(l.body);
    ExprRef result = check(l.result);
    node.result = result;
    scopes.pop_back();
    return withType(out, result->type);
  }

  ExprRef checkGep(const Expr &e, const GepE &g) {
    Expr out = e;
    auto &node = std::get<GepE>(out.node);
    ExprRef base = check(g.base);
    node.base = base;
    for (size_t i = 0; i < g.indices.size(); i++)
      node.indices[i] = check(g.indices[i], i64());
    if (!base->type)
      return withType(out, nullptr);
    if (!base->type->isPtr()) {
      report("TypeMismatch", "gep base must be a pointer, got " + typeName(base->type));
      return withType(out, nullptr);
    }
    for (const ExprRef &idx : node.indices)
      if (idx->type && !idx->type->isInt()) {
        report("TypeMismatch", "gep index must be an integer");
        return withType(out, nullptr);
      }
    // First index steps over whole elements; the rest descend into the type.
    TypeRef cur = base->type->elem;
    for (size_t i = 1; i < node.indices.size(); i++) {
      if (cur->kind == Type::Kind::Array) {
        cur = cur->elem;
      } else if (cur->kind == Type::Kind::Struct) {
        auto *lit = node.indices[i]->as<IntLitE>();
        if (!lit) {
          report("TypeMismatch", "struct gep index must be a literal");
          return withType(out, nullptr);
        }
        if (lit->bits >= cur->fields.size()) {
          report("TypeMismatch", "struct gep index out of range");
          return withType(out, nullptr);
        }
        cur = cur->fields[size_t(lit->bits)].second;
      } else {
        report("TypeMismatch", "gep cannot descend into " + typeName(cur));
        return withType(out, nullptr);
      }
    }
    return withType(out, ptr(cur));
  }

  ExprRef checkCast(const Expr &e, const CastE &c) {
    Expr out = e;
    auto &node = std::get<CastE>(out.node);
    ExprRef arg = check(c.arg);
    node.arg = arg;
    if (!arg->type)
      return withType(out, nullptr);
    const TypeRef &from = arg->type, &to = c.to;
    bool ok = false;
    switch (c.kind) {
    case CastKind::UiToFp:
    case CastKind::SiToFp:
      ok = from->isInt() && to->isFloat();
      break;
    case CastKind::FpToUi:
    case CastKind::FpToSi:
      ok = from->isFloat() && to->isInt();
      break;
    case CastKind::Trunc:
      ok = from->isInt() && to->isInt() && from->width > to->width;
      break;
    case CastKind::Zext:
    case CastKind::Sext:
      ok = from->isInt() && to->isInt() && from->width < to->width;
      break;
    case CastKind::PtrCast:
      ok = from->isPtr() && to->isPtr();
      break;
    }
    if (!ok) {
      report("TypeMismatch", std::string("cast ") + castName(c.kind) + " from " +
                                 typeName(from) + " to " + typeName(to));
      return withType(out, nullptr);
    }
    return withType(out, to);
  }

  // ---- statements --------------------------------------------------

  StmtRef checkStmt(const StmtRef &s) {
    if (auto *e = s->as<ExprStmtS>())
      return exprStmt(check(e->expr));
    if (auto *b = s->as<BlockS>()) {
      std::vector<StmtRef> out;
      out.reserve(b->stmts.size());
      for (const StmtRef &x : b->stmts)
        out.push_back(checkStmt(x));
      return block(std::move(out));
    }
    if (s->is<SVoidS>())
      return s;
    if (auto *r = s->as<ReturnS>()) {
      if (!r->value) {
        if (fn->ret->kind != Type::Kind::Void)
          report("TypeMismatch", "return without value in non-void function");
        return s;
      }
      ExprRef v = check(*r->value, fn->ret);
      if (v->type && !typeEquals(v->type, fn->ret))
        report("TypeMismatch", "return: expected " + typeName(fn->ret) +
                                   ", found " + typeName(v->type));
      return ret(v);
    }
    if (auto *w = s->as<WhileS>()) {
      ExprRef cond = check(w->cond);
      if (cond->type && !cond->type->isBoolish())
        report("TypeMismatch", "while condition must be i1/bool, got " +
                                   typeName(cond->type));
      return whileLoop(cond, checkStmt(w->body));
    }
    if (auto *i = s->as<IfS>()) {
      ExprRef cond = check(i->cond);
      if (cond->type && !cond->type->isBoolish())
        report("TypeMismatch", "if condition must be i1/bool, got " +
                                   typeName(cond->type));
      return ifStmt(cond, checkStmt(i->thenBranch), checkStmt(i->elseBranch));
    }
    if (auto *t = s->as<SetS>()) {
      const TypeRef *target = lookupVar(t->name);
      if (!target) {
        report("UnboundVariable", "set! target '" + t->name + "'");
        return set(t->name, check(t->value));
      }
      ExprRef v = check(t->value, *target);
      if (v->type && !typeEquals(v->type, *target))
        report("TypeMismatch", "set! '" + t->name + "': expected " +
                                   typeName(*target) + ", found " + typeName(v->type));
      return set(t->name, v);
    }
    if (auto *w = s->as<SwitchS>())
      return checkSwitch(*w);
    if (auto *l = s->as<LabelS>())
      return label(l->name, checkStmt(l->body));
    if (auto *j = s->as<JumpS>()) {
      if (!labels.count(j->label))
        report("UnresolvedLabel", "'" + j->label + "'");
      return s;
    }
    if (auto *t = s->as<StoreS>()) {
      ExprRef addr = check(t->addr);
      TypeRef want;
      if (addr->type) {
        if (!addr->type->isPtr())
          report("TypeMismatch", "store address must be a pointer, got " +
                                     typeName(addr->type));
        else
          want = addr->type->elem;
      }
      ExprRef v = check(t->value, want);
      if (v->type && want && !typeEquals(v->type, want))
        report("TypeMismatch", "store: expected " + typeName(want) + ", found " +
                                   typeName(v->type));
      return store(v, addr);
    }
    report("TypeMismatch", "unhandled statement");
    return s;
  }

  StmtRef checkSwitch(const SwitchS &w) {
    ExprRef scrut = check(w.scrutinee);
    if (scrut->type && !(scrut->type->isInt() || scrut->type->kind == Type::Kind::Sym))
      report("TypeMismatch", "switch scrutinee must be integer or sym, got " +
                                 typeName(scrut->type));
    std::vector<std::pair<ExprRef, StmtRef>> cases;
    std::set<std::string> seen;
    for (auto &[c, body] : w.cases) {
      ExprRef cc = check(c, scrut->type);
      if (!cc->is<IntLitE>() && !cc->is<SymLitE>())
        report("TypeMismatch", "switch case must be an integer or sym literal");
      else if (scrut->type && cc->type && !typeEquals(cc->type, scrut->type))
        report("TypeMismatch", "switch case type " + typeName(cc->type) +
                                   " vs scrutinee " + typeName(scrut->type));
      std::string key;
      if (auto *il = cc->as<IntLitE>())
        key = "i" + std::to_string(il->bits);
      else if (auto *sl = cc->as<SymLitE>())
        key = "s" + sl->text;
      if (!key.empty() && !seen.insert(key).second)
        report("DuplicateCase", "duplicate switch case");
      cases.emplace_back(cc, checkStmt(body));
    }
    return switchStmt(scrut, std::move(cases), checkStmt(w.defaultBody));
  }

  // ---- control flow ------------------------------------------------

  // Labels are function-scoped and can sit under expressions (let bodies).
  static void collectLabels(const StmtRef &s, std::set<std::string> &out,
                            std::vector<Diag> &diags, const std::string &fnName) {
    if (auto *l = s->as<LabelS>())
      if (!out.insert(l->name).second)
        diags.push_back({"DuplicateLabel", fnName, "'" + l->name + "'"});
    ExprFn fe = [&](const ExprRef &x) {
      collectLabelsExpr(x, out, diags, fnName);
      return x;
    };
    mapStmtChildren(
        s, fe,
        [&](const StmtRef &x) {
          collectLabels(x, out, diags, fnName);
          return x;
        });
  }

  static void collectLabelsExpr(const ExprRef &e, std::set<std::string> &out,
                                std::vector<Diag> &diags,
                                const std::string &fnName) {
    mapExprChildren(
        e,
        [&](const ExprRef &x) {
          collectLabelsExpr(x, out, diags, fnName);
          return x;
        },
        [&](const StmtRef &x) {
          collectLabels(x, out, diags, fnName);
          return x;
        });
  }

  Function checkFunction(const Function &f) {
    fn = &f;
    scopes.clear();
    labels.clear();
    std::map<std::string, TypeRef> frame;
    for (const Param &p : f.params) {
      if (frame.count(p.name))
        report("DuplicateParam", "'" + p.name + "'");
      frame[p.name] = p.type;
    }
    scopes.push_back(std::move(frame));
    collectLabels(f.body, labels, diags, f.name);
    Function out = f;
    out.body = checkStmt(f.body);
    if (f.ret->kind != Type::Kind::Void && !definitelyExits(f.body))
      report("MissingReturn", "not every path returns");
    scopes.pop_back();
    fn = nullptr;
    return out;
  }
};

} // namespace

TypecheckResult typecheckModule(const Module &m) {
  Checker c{m};
  Module out;
  out.name = m.name;
  out.globals = m.globals;
  out.typeDefs = m.typeDefs;
  std::set<std::string> names;
  for (const Function &f : m.functions)
    if (!names.insert(f.name).second)
      c.diags.push_back({"DuplicateFunction", m.name, "'" + f.name + "'"});
  for (const Function &f : m.functions)
    out.functions.push_back(c.checkFunction(f));
  TypecheckResult r;
  r.diags = std::move(c.diags);
  if (r.diags.empty())
    r.module = std::move(out);
  return r;
}

Module typecheckOrThrow(const Module &m) {
  TypecheckResult r = typecheckModule(m);
  if (!r.ok()) {
    std::string msg;
    for (const Diag &d : r.diags) {
      if (!msg.empty())
        msg += "; ";
      msg += d.str();
    }
    raise(Err::TypecheckFailed, msg);
  }
  return std::move(*r.module);
}

} // namespace dslkit::hir
