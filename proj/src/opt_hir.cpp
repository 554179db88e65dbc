#include "dslkit/opt.hpp"

#include "dslkit/arith.hpp"
#include "dslkit/intrinsics.hpp"
#include "dslkit/typecheck.hpp"
#include "hir_rewrite.hpp"

#include <algorithm>

namespace dslkit::opt {

using namespace hir;

// ---------------------------------------------------------------- const-fold

namespace {

const IntLitE *asIntLit(const ExprRef &e) { return e->as<IntLitE>(); }
const FloatLitE *asFloatLit(const ExprRef &e) { return e->as<FloatLitE>(); }

ExprRef mkIntLit(uint64_t bits, const TypeRef &ty, const ExprRef &like) {
  return withTypeOf(intLit(bits, ty), like);
}

ExprRef mkFloatLit(double v, const TypeRef &ty, const ExprRef &like) {
  if (ty->kind == Type::Kind::F32)
    v = double(float(v));
  auto e = std::make_shared<Expr>(Expr{FloatLitE{v, ty}, nullptr});
  return withTypeOf(e, like);
}

// Is the condition a known boolean?
std::optional<bool> knownTruth(const ExprRef &e) {
  if (auto *b = e->as<BoolLitE>())
    return b->value;
  if (auto *i = e->as<IntLitE>())
    if (i->ty && i->ty->isInt(1))
      return i->bits != 0;
  return std::nullopt;
}

ExprRef foldPrimOp(const ExprRef &e) {
  const auto &p = std::get<PrimOpE>(e->node);
  const ExprRef &a = p.args[0], &b = p.args[1];
  const IntLitE *ia = asIntLit(a), *ib = asIntLit(b);
  const FloatLitE *fa = asFloatLit(a), *fb = asFloatLit(b);

  if (ia && ib && ia->ty && ib->ty && typeEquals(ia->ty, ib->ty)) {
    int w = ia->ty->width;
    if (opIsCmp(p.op))
      return mkIntLit(arith::evalIntCmp(p.op, w, ia->bits, ib->bits) ? 1 : 0,
                      i1(), e);
    arith::IntResult r = arith::evalIntBinop(p.op, w, ia->bits, ib->bits);
    // Leave would-be traps in place so runtime behavior is unchanged.
    if (r.status == arith::IntResult::Status::Ok)
      return mkIntLit(r.bits, ia->ty, e);
    return e;
  }
  if (fa && fb && typeEquals(fa->ty, fb->ty)) {
    if (opIsCmp(p.op))
      return mkIntLit(arith::evalFCmp(p.op, fa->value, fb->value) ? 1 : 0, i1(), e);
    if (fa->ty->kind == Type::Kind::F32)
      return mkFloatLit(arith::evalF32Binop(p.op, float(fa->value), float(fb->value)),
                        fa->ty, e);
    return mkFloatLit(arith::evalF64Binop(p.op, fa->value, fb->value), fa->ty, e);
  }

  // Integer identities: x*1, x+0, x*0 (and mirrored).
  auto intValue = [](const IntLitE *l) -> std::optional<uint64_t> {
    if (l && l->ty && l->ty->isInt())
      return l->bits;
    return std::nullopt;
  };
  if (p.op == Op::Mul) {
    if (intValue(ib) == uint64_t(1))
      return a;
    if (intValue(ia) == uint64_t(1))
      return b;
    if (intValue(ib) == uint64_t(0) && pureTotal(a))
      return b;
    if (intValue(ia) == uint64_t(0) && pureTotal(b))
      return a;
  }
  if (p.op == Op::Add) {
    if (intValue(ib) == uint64_t(0))
      return a;
    if (intValue(ia) == uint64_t(0))
      return b;
  }
  return e;
}

ExprRef foldCast(const ExprRef &e) {
  const auto &c = std::get<CastE>(e->node);
  if (auto *il = asIntLit(c.arg)) {
    if (!il->ty)
      return e;
    int fromW = il->ty->width;
    switch (c.kind) {
    case CastKind::Trunc:
    case CastKind::Zext:
      return mkIntLit(arith::maskW(il->bits, c.to->width), c.to, e);
    case CastKind::Sext:
      return mkIntLit(arith::maskW(uint64_t(arith::sextW(il->bits, fromW)),
                                   c.to->width),
                      c.to, e);
    case CastKind::UiToFp:
      return mkFloatLit(arith::uiToFp(il->bits, fromW), c.to, e);
    case CastKind::SiToFp:
      return mkFloatLit(arith::siToFp(il->bits, fromW), c.to, e);
    default:
      return e;
    }
  }
  if (auto *fl = asFloatLit(c.arg)) {
    switch (c.kind) {
    case CastKind::FpToUi:
      return mkIntLit(arith::fpToUi(fl->value, c.to->width), c.to, e);
    case CastKind::FpToSi:
      return mkIntLit(arith::fpToSi(fl->value, c.to->width), c.to, e);
    default:
      return e;
    }
  }
  if (c.kind == CastKind::PtrCast) {
    if (auto *al = c.arg->as<AddrLitE>())
      return withTypeOf(addrLit(al->global, c.to), e);
  }
  return e;
}

ExprRef foldExpr(const ExprRef &e);

StmtRef foldStmt(const StmtRef &s) {
  StmtRef m = mapStmtChildren(s, foldExpr, foldStmt);
  if (auto *i = m->as<IfS>()) {
    if (auto truth = knownTruth(i->cond))
      return *truth ? i->thenBranch : i->elseBranch;
  }
  if (auto *w = m->as<WhileS>()) {
    auto truth = knownTruth(w->cond);
    if (truth && !*truth)
      return svoid();
  }
  if (auto *w = m->as<SwitchS>()) {
    const ExprRef &scrut = w->scrutinee;
    auto *si = scrut->as<IntLitE>();
    auto *ss = scrut->as<SymLitE>();
    if (si || ss) {
      for (auto &[c, body] : w->cases) {
        if (si) {
          auto *ci = c->as<IntLitE>();
          if (ci && ci->bits == si->bits)
            return body;
        } else {
          auto *cs = c->as<SymLitE>();
          if (cs && cs->text == ss->text)
            return body;
        }
      }
      return w->defaultBody;
    }
  }
  return m;
}

ExprRef foldExpr(const ExprRef &e) {
  ExprRef m = mapExprChildren(e, foldExpr, foldStmt);
  if (m->is<PrimOpE>())
    return foldPrimOp(m);
  if (m->is<CastE>())
    return foldCast(m);
  return m;
}

} // namespace

Function constFold(const Function &f) {
  Function out = f;
  out.body = foldStmt(f.body);
  return out;
}

Module constFoldModule(const Module &m) {
  Module out = m;
  for (Function &f : out.functions)
    f = constFold(f);
  return typecheckOrThrow(out);
}

// ---------------------------------------------------------------- dce

namespace {

bool containsLabel(const StmtRef &s);

bool containsLabelExpr(const ExprRef &e) {
  bool found = false;
  mapExprChildren(
      e,
      [&](const ExprRef &x) {
        found = found || containsLabelExpr(x);
        return x;
      },
      [&](const StmtRef &x) {
        found = found || containsLabel(x);
        return x;
      });
  return found;
}

bool containsLabel(const StmtRef &s) {
  if (s->is<LabelS>())
    return true;
  bool found = false;
  mapStmtChildren(
      s,
      [&](const ExprRef &x) {
        found = found || containsLabelExpr(x);
        return x;
      },
      [&](const StmtRef &x) {
        found = found || containsLabel(x);
        return x;
      });
  return found;
}

void usedVarsExpr(const ExprRef &e, std::set<std::string> &out);
void usedVarsStmt(const StmtRef &s, std::set<std::string> &out) {
  if (auto *t = s->as<SetS>())
    out.insert(t->name);
  mapStmtChildren(
      s,
      [&](const ExprRef &x) {
        usedVarsExpr(x, out);
        return x;
      },
      [&](const StmtRef &x) {
        usedVarsStmt(x, out);
        return x;
      });
}
void usedVarsExpr(const ExprRef &e, std::set<std::string> &out) {
  if (auto *v = e->as<VarE>())
    out.insert(v->name);
  mapExprChildren(
      e,
      [&](const ExprRef &x) {
        usedVarsExpr(x, out);
        return x;
      },
      [&](const StmtRef &x) {
        usedVarsStmt(x, out);
        return x;
      });
}

ExprRef dceExpr(const ExprRef &e);

StmtRef dceStmt(const StmtRef &s) {
  StmtRef m = mapStmtChildren(s, dceExpr, dceStmt);
  if (auto *es = m->as<ExprStmtS>()) {
    if (pureTotal(es->expr))
      return svoid();
    return m;
  }
  if (auto *b = m->as<BlockS>()) {
    std::vector<StmtRef> kept;
    for (const StmtRef &x : b->stmts) {
      if (x->is<SVoidS>())
        continue;
      if (auto *inner = x->as<BlockS>()) { // flatten nested blocks
        for (const StmtRef &y : inner->stmts)
          kept.push_back(y);
      } else {
        kept.push_back(x);
      }
    }
    // A jump straight into the following label is a fall-through.
    std::vector<StmtRef> seq;
    for (size_t i = 0; i < kept.size(); i++) {
      if (auto *j = kept[i]->as<JumpS>(); j && i + 1 < kept.size()) {
        if (auto *l = kept[i + 1]->as<LabelS>(); l && l->name == j->label)
          continue;
      }
      seq.push_back(kept[i]);
      if (definitelyExits(kept[i])) {
        // Later statements are unreachable by fall-through; they stay only
        // if control can jump back in via a label.
        bool labelsBelow = false;
        for (size_t k = i + 1; k < kept.size() && !labelsBelow; k++)
          labelsBelow = containsLabel(kept[k]);
        if (!labelsBelow)
          break;
      }
    }
    if (seq.empty())
      return svoid();
    if (seq.size() == 1)
      return seq[0];
    return block(std::move(seq));
  }
  return m;
}

ExprRef dceExpr(const ExprRef &e) {
  ExprRef m = mapExprChildren(e, dceExpr, dceStmt);
  if (auto *l = m->as<LetE>()) {
    // A binding is dead when its name is never referenced and its init
    // cannot trap or have effects.  Over-approximates across shadowing.
    std::set<std::string> used;
    usedVarsStmt(l->body, used);
    usedVarsExpr(l->result, used);
    std::vector<LetBinding> kept;
    for (const LetBinding &b : l->bindings) {
      bool dead = !used.count(b.name) && (!b.init || pureTotal(*b.init));
      if (!dead)
        kept.push_back(b);
    }
    if (kept.empty() && l->body->is<SVoidS>())
      return l->result;
    if (kept.size() != l->bindings.size()) {
      Expr out = *m;
      std::get<LetE>(out.node).bindings = std::move(kept);
      return std::make_shared<Expr>(std::move(out));
    }
  }
  return m;
}

void jumpTargets(const StmtRef &s, std::set<std::string> &out);
void jumpTargetsExpr(const ExprRef &e, std::set<std::string> &out) {
  mapExprChildren(
      e,
      [&](const ExprRef &x) {
        jumpTargetsExpr(x, out);
        return x;
      },
      [&](const StmtRef &x) {
        jumpTargets(x, out);
        return x;
      });
}
void jumpTargets(const StmtRef &s, std::set<std::string> &out) {
  if (auto *j = s->as<JumpS>())
    out.insert(j->label);
  mapStmtChildren(
      s,
      [&](const ExprRef &x) {
        jumpTargetsExpr(x, out);
        return x;
      },
      [&](const StmtRef &x) {
        jumpTargets(x, out);
        return x;
      });
}

StmtRef unwrapLabels(const StmtRef &s, const std::set<std::string> &jumped);
ExprRef unwrapLabelsExpr(const ExprRef &e, const std::set<std::string> &jumped) {
  return mapExprChildren(
      e, [&](const ExprRef &x) { return unwrapLabelsExpr(x, jumped); },
      [&](const StmtRef &x) { return unwrapLabels(x, jumped); });
}
StmtRef unwrapLabels(const StmtRef &s, const std::set<std::string> &jumped) {
  StmtRef m = mapStmtChildren(
      s, [&](const ExprRef &x) { return unwrapLabelsExpr(x, jumped); },
      [&](const StmtRef &x) { return unwrapLabels(x, jumped); });
  if (auto *l = m->as<LabelS>())
    if (!jumped.count(l->name))
      return l->body; // nothing jumps here; the wrapper is noise
  return m;
}

} // namespace

Function dce(const Function &f) {
  Function out = f;
  out.body = dceStmt(f.body);
  for (int i = 0; i < 4; i++) {
    std::set<std::string> jumped;
    jumpTargets(out.body, jumped);
    StmtRef next = dceStmt(unwrapLabels(out.body, jumped));
    if (stmtEquals(next, out.body))
      break;
    out.body = next;
  }
  return out;
}

namespace {

void collectCallees(const StmtRef &s, std::set<std::string> &out);
void collectCalleesExpr(const ExprRef &e, std::set<std::string> &out) {
  if (auto *a = e->as<AppE>())
    if (a->rator.kind == Rator::Kind::Defined)
      out.insert(a->rator.name);
  mapExprChildren(
      e,
      [&](const ExprRef &x) {
        collectCalleesExpr(x, out);
        return x;
      },
      [&](const StmtRef &x) {
        collectCallees(x, out);
        return x;
      });
}
void collectCallees(const StmtRef &s, std::set<std::string> &out) {
  mapStmtChildren(
      s,
      [&](const ExprRef &x) {
        collectCalleesExpr(x, out);
        return x;
      },
      [&](const StmtRef &x) {
        collectCallees(x, out);
        return x;
      });
}

} // namespace

Module dceModule(const Module &m) {
  Module out;
  out.name = m.name;
  out.globals = m.globals;
  out.typeDefs = m.typeDefs;
  for (const Function &f : m.functions)
    out.functions.push_back(dce(f));

  // Drop always-inline functions no longer referenced from the surviving
  // entry points (non-inline functions are roots).
  std::map<std::string, std::set<std::string>> callees;
  for (const Function &f : out.functions)
    collectCallees(f.body, callees[f.name]);
  std::set<std::string> live;
  std::vector<std::string> work;
  for (const Function &f : out.functions)
    if (!f.hasAttr(kAttrAlwaysInline)) {
      live.insert(f.name);
      work.push_back(f.name);
    }
  while (!work.empty()) {
    std::string cur = work.back();
    work.pop_back();
    for (const std::string &callee : callees[cur])
      if (live.insert(callee).second)
        work.push_back(callee);
  }
  std::vector<Function> kept;
  for (Function &f : out.functions)
    if (live.count(f.name))
      kept.push_back(std::move(f));
  out.functions = std::move(kept);
  return typecheckOrThrow(out);
}

// ---------------------------------------------------------------- inline

namespace {

struct Inliner {
  const Module &mod;
  std::set<std::string> inlinable; // always-inline function names
  std::map<std::string, Function> processed; // bodies with nested calls expanded
  int instance = 0;

  ExprRef walkExpr(const ExprRef &e) {
    ExprRef m = mapExprChildren(
        e, [&](const ExprRef &x) { return walkExpr(x); },
        [&](const StmtRef &x) { return walkStmt(x); });
    if (auto *a = m->as<AppE>())
      if (a->rator.kind == Rator::Kind::Defined && inlinable.count(a->rator.name))
        return expandCallInline(processed.at(a->rator.name), a->args, instance++);
    return m;
  }

  StmtRef walkStmt(const StmtRef &s) {
    return mapStmtChildren(
        s, [&](const ExprRef &x) { return walkExpr(x); },
        [&](const StmtRef &x) { return walkStmt(x); });
  }
};

} // namespace

Module inlineAlways(const Module &m) {
  Inliner inliner{m};
  for (const Function &f : m.functions)
    if (f.hasAttr(kAttrAlwaysInline))
      inliner.inlinable.insert(f.name);

  // Topological order over calls between always-inline functions; a cycle
  // cannot be expanded.
  std::map<std::string, std::set<std::string>> deps;
  for (const Function &f : m.functions) {
    if (!inliner.inlinable.count(f.name))
      continue;
    std::set<std::string> callees;
    collectCallees(f.body, callees);
    for (const std::string &c : callees)
      if (inliner.inlinable.count(c))
        deps[f.name].insert(c);
  }
  std::vector<std::string> order;
  std::map<std::string, int> state; // 0 new, 1 visiting, 2 done
  std::function<void(const std::string &)> visit = [&](const std::string &n) {
    int &st = state[n];
    if (st == 2)
      return;
    if (st == 1) {
      std::string names;
      for (auto &[k, v] : state)
        if (v == 1)
          names += (names.empty() ? "" : ", ") + k;
      raise(Err::InlineCycle, names);
    }
    st = 1;
    for (const std::string &c : deps[n])
      visit(c);
    st = 2;
    order.push_back(n);
  };
  for (const std::string &n : inliner.inlinable)
    visit(n);

  // Expand innermost-first so inlined bodies are already call-free.
  for (const std::string &n : order) {
    const Function *f = m.findFunction(n);
    Function pf = *f;
    pf.body = inliner.walkStmt(f->body);
    inliner.processed.emplace(n, std::move(pf));
  }

  Module out;
  out.name = m.name;
  out.globals = m.globals;
  out.typeDefs = m.typeDefs;
  for (const Function &f : m.functions) {
    if (inliner.inlinable.count(f.name)) {
      out.functions.push_back(inliner.processed.at(f.name));
    } else {
      Function nf = f;
      nf.body = inliner.walkStmt(f.body);
      out.functions.push_back(std::move(nf));
    }
  }
  return typecheckOrThrow(out);
}

// ---------------------------------------------------------------- licm

namespace {

struct Licm {
  const Module &mod;
  int counter = 0;

  bool pureCallee(const Rator &r) const {
    switch (r.kind) {
    case Rator::Kind::Defined: {
      const Function *f = mod.findFunction(r.name);
      return f && f->hasAttr(kAttrPure);
    }
    case Rator::Kind::Intrinsic: {
      const IntrinsicInfo *info = findIntrinsic(r.name);
      return info && info->pure;
    }
    default:
      return false;
    }
  }

  // Hoistable: no load, no let (which could hide mutation), no trapping op,
  // only pure callees.
  bool hoistableShape(const ExprRef &e) const {
    if (e->is<LoadE>() || e->is<LetE>())
      return false;
    if (auto *p = e->as<PrimOpE>())
      if (opCanTrap(p->op))
        return false;
    if (auto *a = e->as<AppE>())
      if (!pureCallee(a->rator))
        return false;
    bool ok = true;
    mapExprChildren(
        e,
        [&](const ExprRef &x) {
          ok = ok && hoistableShape(x);
          return x;
        },
        [&](const StmtRef &x) {
          ok = false;
          return x;
        });
    return ok;
  }

  bool nontrivial(const ExprRef &e) const {
    return !(e->is<VarE>() || e->is<IntLitE>() || e->is<FloatLitE>() ||
             e->is<SymLitE>() || e->is<BoolLitE>() || e->is<AddrLitE>());
  }

  void gatherExpr(const ExprRef &e, const std::set<std::string> &loopVars,
                  std::vector<ExprRef> &out) {
    if (nontrivial(e) && hoistableShape(e)) {
      std::set<std::string> fv = freeVars(e);
      bool invariant = true;
      for (const std::string &v : fv)
        if (loopVars.count(v)) {
          invariant = false;
          break;
        }
      if (invariant && e->type) {
        for (const ExprRef &prev : out)
          if (exprEquals(prev, e))
            return;
        out.push_back(e);
        return; // maximal: do not descend
      }
    }
    mapExprChildren(
        e,
        [&](const ExprRef &x) {
          gatherExpr(x, loopVars, out);
          return x;
        },
        [&](const StmtRef &x) {
          gatherStmt(x, loopVars, out);
          return x;
        });
  }

  void gatherStmt(const StmtRef &s, const std::set<std::string> &loopVars,
                  std::vector<ExprRef> &out) {
    mapStmtChildren(
        s,
        [&](const ExprRef &x) {
          gatherExpr(x, loopVars, out);
          return x;
        },
        [&](const StmtRef &x) {
          gatherStmt(x, loopVars, out);
          return x;
        });
  }

  ExprRef replaceInExpr(const ExprRef &e, const ExprRef &needle, const ExprRef &repl) {
    if (exprEquals(e, needle))
      return repl;
    return mapExprChildren(
        e, [&](const ExprRef &x) { return replaceInExpr(x, needle, repl); },
        [&](const StmtRef &x) { return replaceInStmt(x, needle, repl); });
  }

  StmtRef replaceInStmt(const StmtRef &s, const ExprRef &needle, const ExprRef &repl) {
    return mapStmtChildren(
        s, [&](const ExprRef &x) { return replaceInExpr(x, needle, repl); },
        [&](const StmtRef &x) { return replaceInStmt(x, needle, repl); });
  }

  StmtRef walk(const StmtRef &s) {
    // Inside-out: children first, so an inner loop's hoisted helpers are in
    // place before the outer loop is analyzed.
    StmtRef m = mapStmtChildren(
        s, [&](const ExprRef &x) { return walkExpr(x); },
        [&](const StmtRef &x) { return walk(x); });
    auto *w = m->as<WhileS>();
    if (!w)
      return m;

    std::set<std::string> loopVars;
    setTargets(w->body, loopVars);
    setTargetsExpr(w->cond, loopVars);
    boundNames(w->body, loopVars);
    boundNamesExpr(w->cond, loopVars);

    std::vector<ExprRef> hoists;
    gatherExpr(w->cond, loopVars, hoists);
    gatherStmt(w->body, loopVars, hoists);
    if (hoists.empty())
      return m;

    std::vector<LetBinding> bindings;
    ExprRef cond = w->cond;
    StmtRef body = w->body;
    for (const ExprRef &h : hoists) {
      std::string name = "$licm" + std::to_string(counter++);
      ExprRef v = var(name);
      auto tv = std::make_shared<Expr>(*v);
      tv->type = h->type;
      cond = replaceInExpr(cond, h, tv);
      body = replaceInStmt(body, h, tv);
      bindings.push_back({name, h, h->type});
    }
    return exprStmt(let(std::move(bindings), whileLoop(cond, body), ui64(0)));
  }

  ExprRef walkExpr(const ExprRef &e) {
    return mapExprChildren(
        e, [&](const ExprRef &x) { return walkExpr(x); },
        [&](const StmtRef &x) { return walk(x); });
  }
};

} // namespace

Function licm(const Module &ctx, const Function &f) {
  Licm pass{ctx};
  Function out = f;
  out.body = pass.walk(f.body);
  return out;
}

Module licmModule(const Module &m) {
  Module out = m;
  for (Function &f : out.functions)
    f = licm(m, f);
  return typecheckOrThrow(out);
}

// ---------------------------------------------------------------- unroll

namespace {

struct LitEnv {
  std::map<std::string, IntLitE> known;

  void kill(const std::set<std::string> &names) {
    for (const std::string &n : names)
      known.erase(n);
  }
};

const SetS *trailingSet(const StmtRef &s) {
  if (auto *t = s->as<SetS>())
    return t;
  if (auto *b = s->as<BlockS>()) {
    if (b->stmts.empty())
      return nullptr;
    return trailingSet(b->stmts.back());
  }
  return nullptr;
}

bool containsControlEscape(const StmtRef &s) {
  bool found = false;
  std::function<void(const StmtRef &)> go = [&](const StmtRef &x) {
    if (x->is<JumpS>() || x->is<LabelS>() || x->is<ReturnS>())
      found = true;
    mapStmtChildren(
        x, [&](const ExprRef &e) { return e; },
        [&](const StmtRef &c) {
          go(c);
          return c;
        });
  };
  go(s);
  return found;
}

struct Unroller {
  uint64_t maxTrip;

  // Loops live in statements, including let bodies nested in expressions.
  ExprRef walkLetExpr(const ExprRef &e, LitEnv &env) {
    auto *l = e->as<LetE>();
    if (!l)
      return e;
    LitEnv saved = env;
    for (const LetBinding &b : l->bindings) {
      env.known.erase(b.name);
      if (b.init)
        if (auto *lit = (*b.init)->as<IntLitE>(); lit && lit->ty)
          env.known[b.name] = *lit;
    }
    StmtRef body = walk(l->body, env);
    Expr out = *e;
    auto &node = std::get<LetE>(out.node);
    node.body = body;
    node.result = walkLetExpr(l->result, env);
    env = saved;
    std::set<std::string> sets;
    setTargets(l->body, sets);
    env.kill(sets);
    return std::make_shared<Expr>(std::move(out));
  }

  StmtRef walk(const StmtRef &s, LitEnv &env) {
    if (auto *b = s->as<BlockS>()) {
      std::vector<StmtRef> out;
      for (const StmtRef &x : b->stmts)
        out.push_back(walk(x, env));
      return block(std::move(out));
    }
    if (auto *t = s->as<SetS>()) {
      ExprRef value = walkLetExpr(t->value, env);
      if (auto *lit = value->as<IntLitE>(); lit && lit->ty)
        env.known[t->name] = *lit;
      else
        env.known.erase(t->name);
      return set(t->name, value);
    }
    if (auto *r = s->as<ReturnS>()) {
      if (r->value)
        return ret(walkLetExpr(*r->value, env));
      return s;
    }
    if (auto *e = s->as<ExprStmtS>())
      return exprStmt(walkLetExpr(e->expr, env));
    if (auto *i = s->as<IfS>()) {
      LitEnv te = env, ee = env;
      StmtRef thenB = walk(i->thenBranch, te);
      StmtRef elseB = walk(i->elseBranch, ee);
      std::set<std::string> sets;
      setTargets(i->thenBranch, sets);
      setTargets(i->elseBranch, sets);
      env.kill(sets);
      return ifStmt(i->cond, thenB, elseB);
    }
    if (auto *w = s->as<WhileS>())
      return walkWhile(*w, env);
    if (auto *sw = s->as<SwitchS>()) {
      std::vector<std::pair<ExprRef, StmtRef>> cases;
      for (auto &[c, body] : sw->cases) {
        LitEnv ce = env;
        cases.emplace_back(c, walk(body, ce));
      }
      LitEnv de = env;
      StmtRef def = walk(sw->defaultBody, de);
      std::set<std::string> sets;
      setTargets(s, sets);
      env.kill(sets);
      return switchStmt(sw->scrutinee, std::move(cases), def);
    }
    return s;
  }

  size_t countSetsOf(const StmtRef &s, const std::string &name) {
    size_t count = 0;
    std::function<void(const StmtRef &)> goStmt;
    std::function<void(const ExprRef &)> goExpr = [&](const ExprRef &x) {
      if (auto *l = x->as<LetE>())
        for (const LetBinding &b : l->bindings)
          if (b.name == name)
            count += 1000; // rebinding disqualifies the loop
      mapExprChildren(
          x,
          [&](const ExprRef &e2) {
            goExpr(e2);
            return e2;
          },
          [&](const StmtRef &c) {
            goStmt(c);
            return c;
          });
    };
    goStmt = [&](const StmtRef &x) {
      if (auto *t = x->as<SetS>())
        if (t->name == name)
          count++;
      mapStmtChildren(
          x,
          [&](const ExprRef &e2) {
            goExpr(e2);
            return e2;
          },
          [&](const StmtRef &c) {
            goStmt(c);
            return c;
          });
    };
    goStmt(s);
    return count;
  }

  // Canonical countable loop: while (icmp op i K) { ... ; i = i + S } with a
  // known literal start for i.  Returns the trip count, or nullopt.
  std::optional<uint64_t> tripCount(const WhileS &w, LitEnv &env,
                                    std::string &ivName, uint64_t &stepBits,
                                    TypeRef &ivTy, uint64_t &finalBits) {
    auto *cmp = w.cond->as<PrimOpE>();
    if (!cmp)
      return std::nullopt;
    Op op = cmp->op;
    if (op != Op::IcmpUlt && op != Op::IcmpUle && op != Op::IcmpSlt &&
        op != Op::IcmpSle)
      return std::nullopt;
    auto *iv = cmp->args[0]->as<VarE>();
    auto *bound = cmp->args[1]->as<IntLitE>();
    if (!iv || !bound || !bound->ty)
      return std::nullopt;
    auto it = env.known.find(iv->name);
    if (it == env.known.end() || !typeEquals(it->second.ty, bound->ty))
      return std::nullopt;
    if (containsControlEscape(w.body))
      return std::nullopt;
    const SetS *inc = trailingSet(w.body);
    if (!inc || inc->name != iv->name)
      return std::nullopt;
    auto *add = inc->value->as<PrimOpE>();
    if (!add || add->op != Op::Add)
      return std::nullopt;
    const IntLitE *step = nullptr;
    if (auto *v0 = add->args[0]->as<VarE>(); v0 && v0->name == iv->name)
      step = add->args[1]->as<IntLitE>();
    else if (auto *v1 = add->args[1]->as<VarE>(); v1 && v1->name == iv->name)
      step = add->args[0]->as<IntLitE>();
    if (!step || !step->ty)
      return std::nullopt;
    if (countSetsOf(w.body, iv->name) != 1)
      return std::nullopt;
    int width = bound->ty->width;
    uint64_t i = it->second.bits, trips = 0;
    while (arith::evalIntCmp(op, width, i, bound->bits)) {
      if (++trips > maxTrip)
        return std::nullopt;
      i = arith::evalIntBinop(Op::Add, width, i, step->bits).bits;
    }
    ivName = iv->name;
    stepBits = step->bits;
    ivTy = bound->ty;
    finalBits = i;
    return trips;
  }

  StmtRef walkWhile(const WhileS &w, LitEnv &env) {
    std::set<std::string> bodySets;
    setTargets(w.body, bodySets);

    std::string ivName;
    uint64_t stepBits = 0, finalBits = 0;
    TypeRef ivTy;
    if (auto trips = tripCount(w, env, ivName, stepBits, ivTy, finalBits)) {
      bool isSigned = env.known[ivName].isSigned;
      // Each copy is walked with the induction value it will observe, so
      // nested countable loops unroll too; other tracked vars flow through.
      uint64_t i = env.known[ivName].bits;
      std::vector<StmtRef> copies;
      for (uint64_t k = 0; k < *trips; k++) {
        env.known[ivName] = IntLitE{i, ivTy, isSigned};
        copies.push_back(walk(w.body, env));
        i = arith::evalIntBinop(Op::Add, ivTy->width, i, stepBits).bits;
      }
      env.known[ivName] = IntLitE{finalBits, ivTy, isSigned};
      return copies.empty() ? svoid() : block(std::move(copies));
    }

    LitEnv bodyEnv = env;
    bodyEnv.kill(bodySets);
    StmtRef body = walk(w.body, bodyEnv);
    env.kill(bodySets);
    return whileLoop(w.cond, body);
  }
};

} // namespace

Function unrollLoops(const Function &f, uint64_t maxTrip) {
  Unroller u{maxTrip};
  LitEnv env;
  Function out = f;
  out.body = u.walk(f.body, env);
  return out;
}

} // namespace dslkit::opt
