#include "hir_rewrite.hpp"

namespace dslkit::hir {

ExprRef withTypeOf(ExprRef fresh, const ExprRef &original) {
  if (!fresh->type && original->type) {
    auto e = std::make_shared<Expr>(*fresh);
    e->type = original->type;
    return e;
  }
  return fresh;
}

ExprRef mapExprChildren(const ExprRef &e, const ExprFn &fe, const StmtFn &fs) {
  Expr out = *e;
  if (auto *a = std::get_if<AppE>(&out.node)) {
    for (ExprRef &x : a->args)
      x = fe(x);
  } else if (auto *l = std::get_if<LetE>(&out.node)) {
    for (LetBinding &b : l->bindings)
      if (b.init)
        b.init = fe(*b.init);
    l->body = fs(l->body);
    l->result = fe(l->result);
  } else if (auto *g = std::get_if<GepE>(&out.node)) {
    g->base = fe(g->base);
    for (ExprRef &x : g->indices)
      x = fe(x);
  } else if (auto *l = std::get_if<LoadE>(&out.node)) {
    l->addr = fe(l->addr);
  } else if (auto *c = std::get_if<CastE>(&out.node)) {
    c->arg = fe(c->arg);
  } else if (auto *p = std::get_if<PrimOpE>(&out.node)) {
    for (ExprRef &x : p->args)
      x = fe(x);
  }
  return std::make_shared<Expr>(std::move(out));
}

StmtRef mapStmtChildren(const StmtRef &s, const ExprFn &fe, const StmtFn &fs) {
  Stmt out = *s;
  if (auto *e = std::get_if<ExprStmtS>(&out.node)) {
    e->expr = fe(e->expr);
  } else if (auto *b = std::get_if<BlockS>(&out.node)) {
    for (StmtRef &x : b->stmts)
      x = fs(x);
  } else if (auto *r = std::get_if<ReturnS>(&out.node)) {
    if (r->value)
      r->value = fe(*r->value);
  } else if (auto *w = std::get_if<WhileS>(&out.node)) {
    w->cond = fe(w->cond);
    w->body = fs(w->body);
  } else if (auto *i = std::get_if<IfS>(&out.node)) {
    i->cond = fe(i->cond);
    i->thenBranch = fs(i->thenBranch);
    i->elseBranch = fs(i->elseBranch);
  } else if (auto *t = std::get_if<SetS>(&out.node)) {
    t->value = fe(t->value);
  } else if (auto *w = std::get_if<SwitchS>(&out.node)) {
    w->scrutinee = fe(w->scrutinee);
    for (auto &[c, body] : w->cases) {
      c = fe(c);
      body = fs(body);
    }
    w->defaultBody = fs(w->defaultBody);
  } else if (auto *l = std::get_if<LabelS>(&out.node)) {
    l->body = fs(l->body);
  } else if (auto *t = std::get_if<StoreS>(&out.node)) {
    t->value = fe(t->value);
    t->addr = fe(t->addr);
  }
  return std::make_shared<Stmt>(std::move(out));
}

namespace {

void freeVarsExprInner(const ExprRef &e, std::set<std::string> &out,
                       std::set<std::string> &bound) {
  if (auto *v = e->as<VarE>()) {
    if (!bound.count(v->name))
      out.insert(v->name);
    return;
  }
  if (auto *l = e->as<LetE>()) {
    for (const LetBinding &b : l->bindings)
      if (b.init)
        freeVarsExprInner(*b.init, out, bound);
    std::vector<std::string> added;
    for (const LetBinding &b : l->bindings)
      if (bound.insert(b.name).second)
        added.push_back(b.name);
    freeVarsStmt(l->body, out, bound);
    freeVarsExprInner(l->result, out, bound);
    for (const std::string &n : added)
      bound.erase(n);
    return;
  }
  mapExprChildren(
      e,
      [&](const ExprRef &x) {
        freeVarsExprInner(x, out, bound);
        return x;
      },
      [&](const StmtRef &x) {
        freeVarsStmt(x, out, bound);
        return x;
      });
}

} // namespace

void freeVarsStmt(const StmtRef &s, std::set<std::string> &out,
                  std::set<std::string> &bound) {
  if (auto *t = s->as<SetS>()) {
    if (!bound.count(t->name))
      out.insert(t->name);
    freeVarsExprInner(t->value, out, bound);
    return;
  }
  mapStmtChildren(
      s,
      [&](const ExprRef &x) {
        freeVarsExprInner(x, out, bound);
        return x;
      },
      [&](const StmtRef &x) {
        freeVarsStmt(x, out, bound);
        return x;
      });
}

std::set<std::string> freeVars(const ExprRef &e) {
  std::set<std::string> out, bound;
  freeVarsExprInner(e, out, bound);
  return out;
}

void setTargetsExpr(const ExprRef &e, std::set<std::string> &out) {
  mapExprChildren(
      e,
      [&](const ExprRef &x) {
        setTargetsExpr(x, out);
        return x;
      },
      [&](const StmtRef &x) {
        setTargets(x, out);
        return x;
      });
}

void setTargets(const StmtRef &s, std::set<std::string> &out) {
  if (auto *t = s->as<SetS>())
    out.insert(t->name);
  mapStmtChildren(
      s,
      [&](const ExprRef &x) {
        setTargetsExpr(x, out);
        return x;
      },
      [&](const StmtRef &x) {
        setTargets(x, out);
        return x;
      });
}

void boundNamesExpr(const ExprRef &e, std::set<std::string> &out) {
  if (auto *l = e->as<LetE>())
    for (const LetBinding &b : l->bindings)
      out.insert(b.name);
  mapExprChildren(
      e,
      [&](const ExprRef &x) {
        boundNamesExpr(x, out);
        return x;
      },
      [&](const StmtRef &x) {
        boundNames(x, out);
        return x;
      });
}

void boundNames(const StmtRef &s, std::set<std::string> &out) {
  mapStmtChildren(
      s,
      [&](const ExprRef &x) {
        boundNamesExpr(x, out);
        return x;
      },
      [&](const StmtRef &x) {
        boundNames(x, out);
        return x;
      });
}

ExprRef substExpr(const ExprRef &e, const std::map<std::string, ExprRef> &subst) {
  if (subst.empty())
    return e;
  if (auto *v = e->as<VarE>()) {
    auto it = subst.find(v->name);
    return it == subst.end() ? e : it->second;
  }
  if (auto *l = e->as<LetE>()) {
    // Bindings shadow: narrow the substitution inside the body/result.
    std::map<std::string, ExprRef> inner = subst;
    Expr out = *e;
    auto &node = std::get<LetE>(out.node);
    for (LetBinding &b : node.bindings)
      if (b.init)
        b.init = substExpr(*b.init, subst);
    for (const LetBinding &b : node.bindings)
      inner.erase(b.name);
    node.body = substStmt(l->body, inner);
    node.result = substExpr(l->result, inner);
    return std::make_shared<Expr>(std::move(out));
  }
  return mapExprChildren(
      e, [&](const ExprRef &x) { return substExpr(x, subst); },
      [&](const StmtRef &x) { return substStmt(x, subst); });
}

StmtRef substStmt(const StmtRef &s, const std::map<std::string, ExprRef> &subst) {
  if (subst.empty())
    return s;
  return mapStmtChildren(
      s, [&](const ExprRef &x) { return substExpr(x, subst); },
      [&](const StmtRef &x) { return substStmt(x, subst); });
}

bool pureTotal(const ExprRef &e) {
  if (e->is<AppE>() || e->is<LoadE>() || e->is<LetE>())
    return false;
  if (auto *p = e->as<PrimOpE>())
    if (opCanTrap(p->op))
      return false;
  bool pure = true;
  mapExprChildren(
      e,
      [&](const ExprRef &x) {
        pure = pure && pureTotal(x);
        return x;
      },
      [&](const StmtRef &x) {
        pure = false;
        return x;
      });
  return pure;
}

namespace {

ExprRef renameLabelsExpr(const ExprRef &e, const std::string &prefix) {
  return mapExprChildren(
      e, [&](const ExprRef &x) { return renameLabelsExpr(x, prefix); },
      [&](const StmtRef &x) { return renameLabels(x, prefix); });
}

ExprRef redirectReturnsExpr(const ExprRef &e, const std::string &retVar,
                            const std::string &exitLabel) {
  return mapExprChildren(
      e,
      [&](const ExprRef &x) { return redirectReturnsExpr(x, retVar, exitLabel); },
      [&](const StmtRef &x) { return redirectReturns(x, retVar, exitLabel); });
}

} // namespace

StmtRef renameLabels(const StmtRef &s, const std::string &prefix) {
  StmtRef m = mapStmtChildren(
      s, [&](const ExprRef &x) { return renameLabelsExpr(x, prefix); },
      [&](const StmtRef &x) { return renameLabels(x, prefix); });
  if (auto *l = m->as<LabelS>())
    return label(prefix + l->name, l->body);
  if (auto *j = m->as<JumpS>())
    return jump(prefix + j->label);
  return m;
}

StmtRef redirectReturns(const StmtRef &s, const std::string &retVar,
                        const std::string &exitLabel) {
  StmtRef m = mapStmtChildren(
      s,
      [&](const ExprRef &x) { return redirectReturnsExpr(x, retVar, exitLabel); },
      [&](const StmtRef &x) { return redirectReturns(x, retVar, exitLabel); });
  if (auto *r = m->as<ReturnS>()) {
    std::vector<StmtRef> seq;
    if (r->value)
      seq.push_back(set(retVar, *r->value));
    seq.push_back(jump(exitLabel));
    return block(std::move(seq));
  }
  return m;
}

namespace {

ExprRef zeroValueOf(const TypeRef &t) {
  switch (t->kind) {
  case Type::Kind::Int: return intLit(0, t);
  case Type::Kind::F32: return f32Lit(0);
  case Type::Kind::F64: return f64Lit(0);
  case Type::Kind::HostBool: return boolLit(false);
  case Type::Kind::Sym: return symLit("");
  default: return nullptr; // pointer-ish: slot stays uninitialized
  }
}

bool isLiteral(const ExprRef &e) {
  return e->is<IntLitE>() || e->is<FloatLitE>() || e->is<SymLitE>() ||
         e->is<BoolLitE>() || e->is<AddrLitE>();
}

} // namespace

ExprRef expandCallInline(const Function &callee,
                         const std::vector<ExprRef> &args, int instance) {
  std::string prefix = "$inl" + std::to_string(instance) + ".";
  std::set<std::string> mutated, calleeBound;
  setTargets(callee.body, mutated);
  boundNames(callee.body, calleeBound);

  std::map<std::string, ExprRef> paramSubst;
  std::vector<LetBinding> bindings;
  for (size_t i = 0; i < callee.params.size(); i++) {
    const Param &p = callee.params[i];
    bool direct = !mutated.count(p.name) && isLiteral(args[i]);
    if (auto *v = args[i]->as<VarE>())
      // A variable argument may substitute directly only when nothing in the
      // callee could capture or shadow it.
      direct = !mutated.count(p.name) && !calleeBound.count(v->name);
    if (direct) {
      paramSubst[p.name] = args[i];
    } else {
      std::string fresh = prefix + p.name;
      bindings.push_back({fresh, args[i], p.type});
      paramSubst[p.name] = var(fresh);
    }
  }
  bool isVoid = callee.ret->kind == Type::Kind::Void;
  std::string retVar = prefix + "ret";
  std::string exitLabel = prefix + "exit";
  if (!isVoid) {
    ExprRef zero = zeroValueOf(callee.ret);
    bindings.push_back({retVar,
                        zero ? std::optional<ExprRef>(zero) : std::nullopt,
                        callee.ret});
  }
  StmtRef body = substStmt(callee.body, paramSubst);
  body = renameLabels(body, prefix);
  body = redirectReturns(body, retVar, exitLabel);
  StmtRef wrapped = block({body, label(exitLabel, svoid())});
  ExprRef result = isVoid ? ui64(0) : var(retVar);
  return let(std::move(bindings), wrapped, result);
}

bool definitelyExits(const StmtRef &s) {
  if (s->is<ReturnS>() || s->is<JumpS>())
    return true;
  if (auto *b = s->as<BlockS>()) {
    for (const StmtRef &x : b->stmts)
      if (definitelyExits(x))
        return true;
    return false;
  }
  if (auto *i = s->as<IfS>())
    return definitelyExits(i->thenBranch) && definitelyExits(i->elseBranch);
  if (auto *w = s->as<SwitchS>()) {
    for (auto &[c, body] : w->cases)
      if (!definitelyExits(body))
        return false;
    return definitelyExits(w->defaultBody);
  }
  if (auto *l = s->as<LabelS>())
    return definitelyExits(l->body);
  if (auto *e = s->as<ExprStmtS>()) {
    if (auto *let = e->expr->as<LetE>())
      return definitelyExits(let->body);
    return false;
  }
  return false;
}

} // namespace dslkit::hir
