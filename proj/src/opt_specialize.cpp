#include "dslkit/opt.hpp"

#include "dslkit/typecheck.hpp"
#include "hir_rewrite.hpp"

#include <functional>

namespace dslkit::opt {

using namespace hir;

BindingValue staticValue(ExprRef literal) {
  BindingValue b;
  b.kind = BindingValue::Kind::Value;
  b.literal = std::move(literal);
  return b;
}

BindingValue staticArraySize(uint64_t count) {
  BindingValue b;
  b.kind = BindingValue::Kind::ArraySize;
  b.arraySize = count;
  return b;
}

BindingValue staticAddress(std::string bufferName, TypeRef elem, uint64_t count) {
  BindingValue b;
  b.kind = BindingValue::Kind::Address;
  b.bufferName = std::move(bufferName);
  b.bufferElem = std::move(elem);
  b.bufferCount = count;
  return b;
}

namespace {

bool isLiteralExpr(const ExprRef &e) {
  return e->is<IntLitE>() || e->is<FloatLitE>() || e->is<SymLitE>() ||
         e->is<BoolLitE>() || e->is<AddrLitE>();
}

// Unfolds calls back into the function being specialized once their bound
// argument positions have become literals; folding in between keeps the
// recursion shrinking toward a base case.
struct Unfolder {
  const Function &original;
  std::vector<size_t> boundPositions;
  int instance = 0;
  int budget = 256;
  bool any = false;

  ExprRef walkExpr(const ExprRef &e) {
    ExprRef m = mapExprChildren(
        e, [&](const ExprRef &x) { return walkExpr(x); },
        [&](const StmtRef &x) { return walkStmt(x); });
    auto *a = m->as<AppE>();
    if (!a || a->rator.kind != Rator::Kind::Defined ||
        a->rator.name != original.name || budget <= 0)
      return m;
    for (size_t pos : boundPositions)
      if (!isLiteralExpr(a->args[pos]))
        return m;
    budget--;
    any = true;
    return expandCallInline(original, a->args, 100000 + instance++);
  }

  StmtRef walkStmt(const StmtRef &s) {
    return mapStmtChildren(
        s, [&](const ExprRef &x) { return walkExpr(x); },
        [&](const StmtRef &x) { return walkStmt(x); });
  }
};

} // namespace

Module specialize(const Module &m, const std::string &fnName,
                  const Bindings &bindings) {
  const Function *fn = m.findFunction(fnName);
  if (!fn)
    raise(Err::UnknownParam, "no function '" + fnName + "'");

  std::set<std::string> mutated;
  setTargets(fn->body, mutated);

  std::map<std::string, ExprRef> subst;
  std::vector<size_t> boundPositions;
  std::vector<Param> remaining;
  std::vector<Global> newGlobals;
  for (size_t i = 0; i < fn->params.size(); i++) {
    const Param &p = fn->params[i];
    auto it = bindings.find(p.name);
    if (it == bindings.end()) {
      remaining.push_back(p);
      continue;
    }
    if (mutated.count(p.name))
      raise(Err::BindingTypeMismatch,
            "parameter '" + p.name + "' is assigned in the body");
    const BindingValue &bv = it->second;
    ExprRef repl;
    switch (bv.kind) {
    case BindingValue::Kind::Value: {
      if (!bv.literal || !isLiteralExpr(bv.literal))
        raise(Err::BindingTypeMismatch, "'" + p.name + "' needs a literal");
      repl = bv.literal;
      if (auto *il = repl->as<IntLitE>()) {
        if (!p.type->isInt())
          raise(Err::BindingTypeMismatch, "'" + p.name + "' is " + typeName(p.type));
        if (!il->ty)
          repl = intLit(il->bits, p.type, il->isSigned);
        else if (!typeEquals(il->ty, p.type))
          raise(Err::BindingTypeMismatch, "'" + p.name + "' is " + typeName(p.type) +
                                              ", literal is " + typeName(il->ty));
      } else if (auto *fl = repl->as<FloatLitE>()) {
        if (!typeEquals(fl->ty, p.type))
          raise(Err::BindingTypeMismatch, "'" + p.name + "' is " + typeName(p.type));
      } else if (repl->is<SymLitE>()) {
        if (p.type->kind != Type::Kind::Sym)
          raise(Err::BindingTypeMismatch, "'" + p.name + "' is " + typeName(p.type));
      } else if (repl->is<BoolLitE>()) {
        if (p.type->kind != Type::Kind::HostBool)
          raise(Err::BindingTypeMismatch, "'" + p.name + "' is " + typeName(p.type));
      }
      break;
    }
    case BindingValue::Kind::ArraySize:
      if (!p.type->isInt())
        raise(Err::BindingTypeMismatch,
              "array-size binding on non-integer '" + p.name + "'");
      repl = intLit(bv.arraySize, p.type);
      break;
    case BindingValue::Kind::Address: {
      if (!p.type->isPtr() || !typeEquals(p.type->elem, bv.bufferElem))
        raise(Err::BindingTypeMismatch,
              "address binding on '" + p.name + "' of " + typeName(p.type));
      repl = addrLit(bv.bufferName, p.type);
      Global g;
      g.name = bv.bufferName;
      g.type = (bv.bufferCount > 1) ? array(bv.bufferElem, bv.bufferCount)
                                    : bv.bufferElem;
      g.engineBuffer = true;
      newGlobals.push_back(std::move(g));
      break;
    }
    }
    subst[p.name] = repl;
    boundPositions.push_back(i);
  }
  for (auto &[name, bv] : bindings) {
    bool found = false;
    for (const Param &p : fn->params)
      found = found || p.name == name;
    if (!found)
      raise(Err::UnknownParam, "'" + name + "' is not a parameter of " + fnName);
  }

  int specIndex = 0;
  for (const Function &f : m.functions)
    if (f.name.rfind(fnName + "@spec", 0) == 0)
      specIndex++;

  Function spec;
  spec.name = fnName + "@spec" + std::to_string(specIndex);
  spec.params = std::move(remaining);
  spec.ret = fn->ret;
  spec.attributes = fn->attributes;
  spec.body = substStmt(fn->body, subst);

  Module out = m;
  for (Global &g : newGlobals)
    if (!out.findGlobal(g.name))
      out.globals.push_back(std::move(g));

  // Settle recursion: fold, then unfold self-calls whose bound positions are
  // literal, until nothing changes.
  Unfolder unfolder{*fn, boundPositions};
  for (int round = 0; round < 300; round++) {
    spec = constFold(spec);
    unfolder.any = false;
    spec.body = unfolder.walkStmt(spec.body);
    if (!unfolder.any)
      break;
  }

  spec = unrollLoops(spec);
  spec = constFold(spec);
  moduleAdd(out, spec);
  out = typecheckOrThrow(out); // annotate before licm
  for (Function &f : out.functions)
    if (f.name == spec.name) {
      f = licm(out, f);
      f = constFold(f);
      f = dce(f);
    }
  return typecheckOrThrow(out);
}

} // namespace dslkit::opt
