#include "dslkit/lir.hpp"

#include "dslkit/intrinsics.hpp"

#include <algorithm>
#include <charconv>

namespace dslkit::lir {

using hir::Type;
using hir::typeEquals;
using hir::typeName;

// ---------------------------------------------------------------- consts

bool ConstVal::operator==(const ConstVal &o) const {
  if (kind != o.kind || !typeEquals(type, o.type))
    return false;
  switch (kind) {
  case Kind::Int: return bits == o.bits;
  case Kind::Float: return fval == o.fval || (fval != fval && o.fval != o.fval);
  case Kind::Sym: return text == o.text;
  case Kind::Bool: return b == o.b;
  case Kind::Null: return true;
  case Kind::GlobalAddr: return text == o.text;
  }
  return false;
}

ConstVal constInt(uint64_t bits, TypeRef ty) {
  ConstVal c;
  c.kind = ConstVal::Kind::Int;
  if (ty->width < 64)
    bits &= (uint64_t(1) << ty->width) - 1;
  c.bits = bits;
  c.type = std::move(ty);
  return c;
}

ConstVal constFloat(double v, TypeRef ty) {
  ConstVal c;
  c.kind = ConstVal::Kind::Float;
  c.fval = (ty->kind == Type::Kind::F32) ? double(float(v)) : v;
  c.type = std::move(ty);
  return c;
}

ConstVal constSym(std::string text) {
  ConstVal c;
  c.kind = ConstVal::Kind::Sym;
  c.text = std::move(text);
  c.type = hir::symType();
  return c;
}

ConstVal constBool(bool b) {
  ConstVal c;
  c.kind = ConstVal::Kind::Bool;
  c.b = b;
  c.type = hir::hostBool();
  return c;
}

ConstVal constNull(TypeRef ptrTy) {
  ConstVal c;
  c.kind = ConstVal::Kind::Null;
  c.type = std::move(ptrTy);
  return c;
}

ConstVal constGlobalAddr(std::string name, TypeRef ptrTy) {
  ConstVal c;
  c.kind = ConstVal::Kind::GlobalAddr;
  c.text = std::move(name);
  c.type = std::move(ptrTy);
  return c;
}

bool isTerminator(ICode c) {
  switch (c) {
  case ICode::Ret: case ICode::Br: case ICode::CondBr: case ICode::Switch:
  case ICode::Unreachable:
    return true;
  default:
    return false;
  }
}

const char *icodeName(ICode c) {
  switch (c) {
  case ICode::Alloca: return "alloca";
  case ICode::Load: return "load";
  case ICode::Store: return "store";
  case ICode::Binop: return "binop";
  case ICode::Cmp: return "cmp";
  case ICode::Cast: return "cast";
  case ICode::Gep: return "gep";
  case ICode::Call: return "call";
  case ICode::Const: return "const";
  case ICode::Ret: return "ret";
  case ICode::Br: return "br";
  case ICode::CondBr: return "condbr";
  case ICode::Switch: return "switch";
  case ICode::Unreachable: return "unreachable";
  }
  return "?";
}

uint32_t Function::findBlock(std::string_view label) const {
  for (uint32_t i = 0; i < blocks.size(); i++)
    if (blocks[i].label == label)
      return i;
  return kNoBlock;
}

const Function *Module::findFunction(std::string_view name) const {
  for (const Function &f : functions)
    if (f.name == name)
      return &f;
  return nullptr;
}

const Global *Module::findGlobal(std::string_view name) const {
  for (const Global &g : globals)
    if (g.name == name)
      return &g;
  return nullptr;
}

// ---------------------------------------------------------------- verify

namespace {

struct Verifier {
  const Module &mod;
  std::vector<Diag> diags;

  void report(const std::string &code, const std::string &where,
              const std::string &msg) {
    diags.push_back({code, where, msg});
  }

  TypeRef regType(const Function &f, Reg r) const {
    if (r == kNoReg || r >= f.regTypes.size())
      return nullptr;
    return f.regTypes[r];
  }

  TypeRef calleeSignature(const Instr &in, const std::string &where) {
    switch (in.calleeKind) {
    case hir::Rator::Kind::Defined: {
      const Function *callee = mod.findFunction(in.callee);
      if (!callee) {
        report("UnknownCallee", where, "'" + in.callee + "'");
        return nullptr;
      }
      std::vector<TypeRef> ps;
      for (auto &[n, t] : callee->params)
        ps.push_back(t);
      return hir::fnType(std::move(ps), callee->ret);
    }
    case hir::Rator::Kind::Intrinsic: {
      const IntrinsicInfo *info = findIntrinsic(in.callee);
      if (!info) {
        report("UnknownIntrinsic", where, "'" + in.callee + "'");
        return nullptr;
      }
      if (!intrinsicSignatureOk(*info, in.calleeType)) {
        report("TypeMismatch", where,
               "intrinsic '" + in.callee + "' signature mismatch");
        return nullptr;
      }
      return in.calleeType;
    }
    default:
      if (!in.calleeType || in.calleeType->kind != Type::Kind::Fn) {
        report("TypeMismatch", where, "registry call needs a function type");
        return nullptr;
      }
      return in.calleeType;
    }
  }

  void checkInstr(const Function &f, uint32_t bi, size_t ii) {
    const Instr &in = f.blocks[bi].instrs[ii];
    std::string where =
        f.name + "/" + f.blocks[bi].label + "#" + std::to_string(ii);
    auto arg = [&](size_t i) -> TypeRef {
      if (i >= in.args.size())
        return nullptr;
      return regType(f, in.args[i]);
    };
    auto want = [&](size_t n) {
      if (in.args.size() != n)
        report("BadOperandCount", where,
               std::string(icodeName(in.code)) + " wants " + std::to_string(n) +
                   " operands");
      return in.args.size() == n;
    };
    auto result = [&]() { return regType(f, in.result); };
    auto checkResult = [&](const TypeRef &t) {
      if (in.result == kNoReg) {
        report("MissingResult", where, "instruction needs a result register");
        return;
      }
      if (t && !typeEquals(result(), t))
        report("TypeMismatch", where, "result register type " +
                                          typeName(result()) + " vs computed " +
                                          typeName(t));
    };

    switch (in.code) {
    case ICode::Alloca:
      if (want(0))
        checkResult(hir::ptr(in.type));
      break;
    case ICode::Const:
      checkResult(in.cval.type);
      break;
    case ICode::Load: {
      if (!want(1))
        break;
      TypeRef p = arg(0);
      if (!p || !p->isPtr()) {
        report("TypeMismatch", where, "load address must be a pointer");
        break;
      }
      checkResult(p->elem);
      break;
    }
    case ICode::Store: {
      if (!want(2))
        break;
      TypeRef v = arg(0), p = arg(1);
      if (!p || !p->isPtr())
        report("TypeMismatch", where, "store address must be a pointer");
      else if (v && !typeEquals(v, p->elem))
        report("TypeMismatch", where, "store of " + typeName(v) + " into " +
                                          typeName(p));
      if (in.result != kNoReg)
        report("UnexpectedResult", where, "store has no result");
      break;
    }
    case ICode::Binop: {
      if (!want(2))
        break;
      TypeRef a = arg(0), b = arg(1);
      if (!a || !b || !typeEquals(a, b)) {
        report("TypeMismatch", where, "binop operand types differ");
        break;
      }
      if (hir::opIsCmp(in.op)) {
        report("TypeMismatch", where, "comparison op in binop instruction");
        break;
      }
      bool flt = hir::opIsFloat(in.op);
      if (flt != a->isFloat() || (!flt && !a->isInt())) {
        report("TypeMismatch", where,
               std::string(hir::opName(in.op)) + " on " + typeName(a));
        break;
      }
      checkResult(a);
      break;
    }
    case ICode::Cmp: {
      if (!want(2))
        break;
      TypeRef a = arg(0), b = arg(1);
      if (!a || !b || !typeEquals(a, b)) {
        report("TypeMismatch", where, "cmp operand types differ");
        break;
      }
      if (!hir::opIsCmp(in.op)) {
        report("TypeMismatch", where, "non-comparison op in cmp instruction");
        break;
      }
      bool flt = hir::opIsFloat(in.op);
      if (flt != a->isFloat() || (!flt && !a->isInt())) {
        report("TypeMismatch", where,
               std::string(hir::opName(in.op)) + " on " + typeName(a));
        break;
      }
      checkResult(hir::i1());
      break;
    }
    case ICode::Cast: {
      if (!want(1))
        break;
      TypeRef from = arg(0), to = in.type;
      bool ok = false;
      if (from && to) {
        switch (in.castKind) {
        case hir::CastKind::UiToFp:
        case hir::CastKind::SiToFp: ok = from->isInt() && to->isFloat(); break;
        case hir::CastKind::FpToUi:
        case hir::CastKind::FpToSi: ok = from->isFloat() && to->isInt(); break;
        case hir::CastKind::Trunc:
          ok = from->isInt() && to->isInt() && from->width > to->width;
          break;
        case hir::CastKind::Zext:
        case hir::CastKind::Sext:
          ok = from->isInt() && to->isInt() && from->width < to->width;
          break;
        case hir::CastKind::PtrCast: ok = from->isPtr() && to->isPtr(); break;
        }
      }
      if (!ok) {
        report("TypeMismatch", where, "bad cast");
        break;
      }
      checkResult(to);
      break;
    }
    case ICode::Gep: {
      if (!want(2))
        break;
      TypeRef base = arg(0), off = arg(1);
      if (!base || !base->isPtr())
        report("TypeMismatch", where, "gep base must be a pointer");
      if (!off || !off->isInt(64))
        report("TypeMismatch", where, "gep offset must be i64");
      // Byte arithmetic may retarget the element type (struct descent), so
      // the instruction carries its own result pointer type.
      if (!in.type || !in.type->isPtr())
        report("TypeMismatch", where, "gep needs a pointer result type");
      else
        checkResult(in.type);
      break;
    }
    case ICode::Call: {
      TypeRef sig = calleeSignature(in, where);
      if (!sig)
        break;
      if (in.args.size() != sig->params.size()) {
        report("TypeMismatch", where, "call arity");
        break;
      }
      for (size_t i = 0; i < in.args.size(); i++) {
        TypeRef want2 = sig->params[i], got = arg(i);
        bool anyPtr = want2 && want2->isPtr() && !want2->elem;
        if (got && !(anyPtr ? got->isPtr() : typeEquals(want2, got)))
          report("TypeMismatch", where, "call arg " + std::to_string(i));
      }
      if (sig->ret->kind == Type::Kind::Void) {
        if (in.result != kNoReg)
          report("UnexpectedResult", where, "void call has a result");
      } else if (in.result == kNoReg) {
        // Permitted: value discarded.
      } else if (!(sig->ret->isPtr() && !sig->ret->elem)) {
        checkResult(sig->ret);
      }
      break;
    }
    case ICode::Ret: {
      bool isVoid = f.ret->kind == Type::Kind::Void;
      if (isVoid && !in.args.empty())
        report("TypeMismatch", where, "void function returns a value");
      if (!isVoid) {
        if (!want(1))
          break;
        TypeRef v = arg(0);
        if (v && !typeEquals(v, f.ret))
          report("TypeMismatch", where, "return of " + typeName(v) +
                                            " from function returning " +
                                            typeName(f.ret));
      }
      break;
    }
    case ICode::Br:
      if (in.targets.size() != 1)
        report("BadTargets", where, "br wants one target");
      break;
    case ICode::CondBr: {
      if (in.targets.size() != 2)
        report("BadTargets", where, "condbr wants two targets");
      TypeRef c = arg(0);
      if (!want(1))
        break;
      if (c && !c->isBoolish())
        report("TypeMismatch", where, "condbr condition must be i1/bool");
      break;
    }
    case ICode::Switch: {
      if (!want(1))
        break;
      if (in.targets.size() != in.switchConsts.size() + 1) {
        report("BadTargets", where, "switch case/target mismatch");
        break;
      }
      TypeRef s = arg(0);
      if (s && !(s->isInt() || s->kind == Type::Kind::Sym))
        report("TypeMismatch", where, "switch scrutinee must be int or sym");
      for (size_t i = 0; i < in.switchConsts.size(); i++) {
        if (s && !typeEquals(in.switchConsts[i].type, s))
          report("TypeMismatch", where, "switch case type");
        for (size_t j = i + 1; j < in.switchConsts.size(); j++)
          if (in.switchConsts[i] == in.switchConsts[j])
            report("DuplicateCase", where, "duplicate switch case");
      }
      break;
    }
    case ICode::Unreachable:
      break;
    }

    for (uint32_t t : in.targets)
      if (t >= f.blocks.size())
        report("BadTargets", where, "branch target out of range");
  }

  void checkFunction(const Function &f) {
    if (f.blocks.empty()) {
      report("EmptyFunction", f.name, "no blocks");
      return;
    }
    std::set<std::string> labels;
    for (const Block &b : f.blocks)
      if (!labels.insert(b.label).second)
        report("DuplicateLabel", f.name, "'" + b.label + "'");
    if (f.regTypes.size() < f.params.size())
      report("InternalError", f.name, "missing parameter registers");
    for (size_t i = 0; i < f.params.size() && i < f.regTypes.size(); i++)
      if (!typeEquals(f.regTypes[i], f.params[i].second))
        report("TypeMismatch", f.name, "param register type mismatch");

    // Structure: exactly one terminator, at the end.
    for (uint32_t bi = 0; bi < f.blocks.size(); bi++) {
      const Block &b = f.blocks[bi];
      std::string where = f.name + "/" + b.label;
      if (b.instrs.empty()) {
        report("MissingTerminator", where, "empty block");
        continue;
      }
      size_t terms = 0;
      for (size_t ii = 0; ii < b.instrs.size(); ii++) {
        if (isTerminator(b.instrs[ii].code)) {
          terms++;
          if (ii + 1 != b.instrs.size())
            report("MultipleTerminators", where,
                   "instructions after terminator at #" + std::to_string(ii));
        }
      }
      if (terms == 0)
        report("MissingTerminator", where, "block does not end in a terminator");
      else if (terms > 1)
        report("MultipleTerminators", where,
               std::to_string(terms) + " terminators in one block");
    }

    // Single assignment; params are pre-assigned.
    std::vector<int> defCount(f.regTypes.size(), 0);
    for (size_t i = 0; i < f.params.size() && i < defCount.size(); i++)
      defCount[i] = 1;
    for (const Block &b : f.blocks)
      for (size_t ii = 0; ii < b.instrs.size(); ii++) {
        const Instr &in = b.instrs[ii];
        if (in.result == kNoReg)
          continue;
        if (in.result >= f.regTypes.size()) {
          report("BadRegister", f.name + "/" + b.label + "#" + std::to_string(ii),
                 "result register out of range");
          continue;
        }
        if (++defCount[in.result] > 1)
          report("MultipleAssignment",
                 f.name + "/" + b.label + "#" + std::to_string(ii),
                 "%" + std::to_string(in.result) + " assigned more than once");
      }

    // Def-before-use along every path.
    defBeforeUse(f);

    // Entry has no predecessors.
    for (const Block &b : f.blocks)
      for (const Instr &in : b.instrs)
        for (uint32_t t : in.targets)
          if (t == 0)
            report("EntryHasPredecessor", f.name, "branch targets entry block");

    for (uint32_t bi = 0; bi < f.blocks.size(); bi++)
      for (size_t ii = 0; ii < f.blocks[bi].instrs.size(); ii++)
        checkInstr(f, bi, ii);
  }

  void defBeforeUse(const Function &f) {
    size_t nb = f.blocks.size(), nr = f.regTypes.size();
    // available[b][r]: register r defined on every path into block b.
    std::vector<std::vector<bool>> in(nb, std::vector<bool>(nr, true));
    for (size_t r = 0; r < nr; r++)
      in[0][r] = r < f.params.size();
    std::vector<std::vector<uint32_t>> preds(nb);
    for (uint32_t bi = 0; bi < nb; bi++)
      for (const Instr &instr : f.blocks[bi].instrs)
        for (uint32_t t : instr.targets)
          if (t < nb)
            preds[t].push_back(bi);

    auto outOf = [&](uint32_t bi) {
      std::vector<bool> live = in[bi];
      for (const Instr &instr : f.blocks[bi].instrs)
        if (instr.result != kNoReg && instr.result < nr)
          live[instr.result] = true;
      return live;
    };

    bool changed = true;
    while (changed) {
      changed = false;
      for (uint32_t bi = 1; bi < nb; bi++) {
        if (preds[bi].empty())
          continue; // unreachable; dce's business
        std::vector<bool> meet(nr, true);
        for (uint32_t p : preds[bi]) {
          std::vector<bool> o = outOf(p);
          for (size_t r = 0; r < nr; r++)
            meet[r] = meet[r] && o[r];
        }
        if (meet != in[bi]) {
          in[bi] = std::move(meet);
          changed = true;
        }
      }
    }

    for (uint32_t bi = 0; bi < nb; bi++) {
      std::vector<bool> live = in[bi];
      for (size_t ii = 0; ii < f.blocks[bi].instrs.size(); ii++) {
        const Instr &instr = f.blocks[bi].instrs[ii];
        for (Reg r : instr.args) {
          if (r >= nr) {
            report("BadRegister",
                   f.name + "/" + f.blocks[bi].label + "#" + std::to_string(ii),
                   "operand register out of range");
          } else if (!live[r]) {
            report("UseBeforeDef",
                   f.name + "/" + f.blocks[bi].label + "#" + std::to_string(ii),
                   "%" + std::to_string(r) + " may be used before definition");
          }
        }
        if (instr.result != kNoReg && instr.result < nr)
          live[instr.result] = true;
      }
    }
  }
};

} // namespace

std::vector<Diag> verify(const Module &m) {
  Verifier v{m};
  for (const Function &f : m.functions)
    v.checkFunction(f);
  for (const Global &g : m.globals)
    if (g.sizeBytes == 0)
      v.report("BadGlobal", g.name, "zero-sized global");
  return std::move(v.diags);
}

void verifyOrThrow(const Module &m) {
  std::vector<Diag> diags = verify(m);
  if (diags.empty())
    return;
  std::string msg;
  for (const Diag &d : diags) {
    if (!msg.empty())
      msg += "; ";
    msg += d.str();
  }
  raise(Err::VerifyFailed, msg);
}

// ---------------------------------------------------------------- text

namespace {

Sexpr regSym(Reg r) { return Sexpr::symbol("%" + std::to_string(r)); }

Sexpr rawInt(uint64_t bits) {
  Sexpr e;
  e.kind = Sexpr::Kind::Int;
  e.text = std::to_string(bits);
  return e;
}

Sexpr constToSexpr(const ConstVal &c) {
  using K = ConstVal::Kind;
  switch (c.kind) {
  case K::Int:
    return Sexpr::list({Sexpr::symbol("int"), rawInt(c.bits),
                        hir::typeToSexpr(c.type)});
  case K::Float: {
    Sexpr lex;
    lex.kind = Sexpr::Kind::Float;
    lex.text = (c.type->kind == Type::Kind::F32) ? formatFloat(float(c.fval))
                                                 : formatDouble(c.fval);
    return Sexpr::list({Sexpr::symbol("float"), lex, hir::typeToSexpr(c.type)});
  }
  case K::Sym:
    return Sexpr::list({Sexpr::symbol("sym"), Sexpr::symbol(c.text)});
  case K::Bool:
    return Sexpr::list({Sexpr::symbol("bool"), Sexpr::boolean_(c.b)});
  case K::Null:
    return Sexpr::list({Sexpr::symbol("null"), hir::typeToSexpr(c.type)});
  case K::GlobalAddr:
    return Sexpr::list({Sexpr::symbol("addr"), Sexpr::symbol(c.text),
                        hir::typeToSexpr(c.type)});
  }
  return Sexpr::symbol("?");
}

Sexpr instrToSexpr(const Instr &in, const Function &f) {
  std::vector<Sexpr> out;
  switch (in.code) {
  case ICode::Alloca:
    out = {Sexpr::symbol("alloca"), regSym(in.result), hir::typeToSexpr(in.type)};
    break;
  case ICode::Const:
    out = {Sexpr::symbol("const"), regSym(in.result), constToSexpr(in.cval)};
    break;
  case ICode::Load:
    out = {Sexpr::symbol("load"), regSym(in.result), regSym(in.args[0])};
    break;
  case ICode::Store:
    out = {Sexpr::symbol("store"), regSym(in.args[0]), regSym(in.args[1])};
    break;
  case ICode::Binop:
  case ICode::Cmp:
    out = {Sexpr::symbol(hir::opName(in.op)), regSym(in.result),
           regSym(in.args[0]), regSym(in.args[1])};
    break;
  case ICode::Cast:
    out = {Sexpr::symbol("cast"), regSym(in.result),
           Sexpr::symbol(hir::castName(in.castKind)), regSym(in.args[0]),
           hir::typeToSexpr(in.type)};
    break;
  case ICode::Gep:
    out = {Sexpr::symbol("gep"), regSym(in.result), regSym(in.args[0]),
           regSym(in.args[1]), hir::typeToSexpr(in.type)};
    break;
  case ICode::Call: {
    const char *kind = "defined";
    switch (in.calleeKind) {
    case hir::Rator::Kind::Defined: kind = "defined"; break;
    case hir::Rator::Kind::Intrinsic: kind = "intrinsic"; break;
    case hir::Rator::Kind::External: kind = "external"; break;
    case hir::Rator::Kind::Host: kind = "host"; break;
    }
    out = {Sexpr::symbol("call"),
           in.result == kNoReg ? Sexpr::symbol("_") : regSym(in.result),
           Sexpr::symbol(kind), Sexpr::symbol(in.callee)};
    if (in.calleeKind != hir::Rator::Kind::Defined)
      out.push_back(hir::typeToSexpr(in.calleeType));
    std::vector<Sexpr> args;
    for (Reg r : in.args)
      args.push_back(regSym(r));
    out.push_back(Sexpr::list(std::move(args)));
    break;
  }
  case ICode::Ret:
    out = {Sexpr::symbol("ret")};
    if (!in.args.empty())
      out.push_back(regSym(in.args[0]));
    break;
  case ICode::Br:
    out = {Sexpr::symbol("br"), Sexpr::symbol(f.blocks[in.targets[0]].label)};
    break;
  case ICode::CondBr:
    out = {Sexpr::symbol("condbr"), regSym(in.args[0]),
           Sexpr::symbol(f.blocks[in.targets[0]].label),
           Sexpr::symbol(f.blocks[in.targets[1]].label)};
    break;
  case ICode::Switch: {
    std::vector<Sexpr> cases;
    for (size_t i = 0; i < in.switchConsts.size(); i++)
      cases.push_back(Sexpr::list({constToSexpr(in.switchConsts[i]),
                                   Sexpr::symbol(f.blocks[in.targets[i + 1]].label)}));
    out = {Sexpr::symbol("switch"), regSym(in.args[0]),
           Sexpr::list(std::move(cases)),
           Sexpr::symbol(f.blocks[in.targets[0]].label)};
    break;
  }
  case ICode::Unreachable:
    out = {Sexpr::symbol("unreachable")};
    break;
  }
  return Sexpr::list(std::move(out));
}

} // namespace

std::string dumpText(const Module &m) {
  std::string out = "(module " + m.name;
  for (const Global &g : m.globals) {
    out += "\n  (global " + g.name + " " + typeName(g.elemType) + " " +
           std::to_string(g.sizeBytes);
    if (g.scalarInit)
      out += " init " + formatDouble(*g.scalarInit);
    if (g.engineBuffer)
      out += " engine-buffer";
    out += ")";
  }
  if (!m.pureFns.empty()) {
    out += "\n  (pure";
    for (const std::string &f : m.pureFns)
      out += " " + f;
    out += ")";
  }
  for (const Function &f : m.functions) {
    out += "\n  (fn " + f.name + " (";
    for (size_t i = 0; i < f.params.size(); i++) {
      if (i)
        out += " ";
      out += "(" + f.params[i].first + " " + typeName(f.params[i].second) + ")";
    }
    out += ") " + typeName(f.ret);
    for (const Block &b : f.blocks) {
      out += "\n    (block " + b.label;
      for (const Instr &in : b.instrs) {
        out += "\n      ";
        writeSexpr(instrToSexpr(in, f), out);
      }
      out += ")";
    }
    out += ")";
  }
  out += ")\n";
  return out;
}

// ---------------------------------------------------------------- parse

namespace {

uint64_t parseU64(const Sexpr &e) {
  if (e.kind != Sexpr::Kind::Int)
    throw ParseError("expected integer constant", e.line, e.col);
  uint64_t v = 0;
  bool neg = !e.text.empty() && e.text[0] == '-';
  const char *begin = e.text.data() + (neg ? 1 : 0);
  auto [p, ec] = std::from_chars(begin, e.text.data() + e.text.size(), v);
  if (ec != std::errc() || p != e.text.data() + e.text.size())
    throw ParseError("bad integer constant", e.line, e.col);
  return neg ? uint64_t(-int64_t(v)) : v;
}

Reg parseReg(const Sexpr &e) {
  if (!e.isSymbol() || e.text.size() < 2 || e.text[0] != '%')
    throw ParseError("expected register like %0", e.line, e.col);
  uint32_t v = 0;
  auto [p, ec] = std::from_chars(e.text.data() + 1, e.text.data() + e.text.size(), v);
  if (ec != std::errc() || p != e.text.data() + e.text.size())
    throw ParseError("bad register '" + e.text + "'", e.line, e.col);
  return v;
}

ConstVal parseConst(const Sexpr &e) {
  std::string_view head = e.head();
  if (head == "int")
    return constInt(parseU64(e.at(1)), hir::typeFromSexpr(e.at(2)));
  if (head == "float") {
    TypeRef t = hir::typeFromSexpr(e.at(2));
    double v = (t->kind == Type::Kind::F32) ? double(e.at(1).asFloat())
                                            : e.at(1).asDouble();
    return constFloat(v, t);
  }
  if (head == "sym")
    return constSym(e.at(1).asSymbol());
  if (head == "bool") {
    if (e.at(1).kind != Sexpr::Kind::Bool)
      throw ParseError("expected #t/#f", e.line, e.col);
    return constBool(e.at(1).boolean);
  }
  if (head == "null")
    return constNull(hir::typeFromSexpr(e.at(1)));
  if (head == "addr")
    return constGlobalAddr(e.at(1).asSymbol(), hir::typeFromSexpr(e.at(2)));
  throw ParseError("bad constant form", e.line, e.col);
}

struct PendingBranch {
  uint32_t block;
  size_t instr;
  std::vector<std::string> labels;
};

Instr parseInstr(const Sexpr &e, std::vector<std::string> &labelRefs) {
  if (!e.isList() || e.items.empty() || !e.items[0].isSymbol())
    throw ParseError("expected instruction form", e.line, e.col);
  const std::string &head = e.items[0].text;
  Instr in;
  if (head == "alloca") {
    in.code = ICode::Alloca;
    in.result = parseReg(e.at(1));
    in.type = hir::typeFromSexpr(e.at(2));
    return in;
  }
  if (head == "const") {
    in.code = ICode::Const;
    in.result = parseReg(e.at(1));
    in.cval = parseConst(e.at(2));
    in.type = in.cval.type;
    return in;
  }
  if (head == "load") {
    in.code = ICode::Load;
    in.result = parseReg(e.at(1));
    in.args = {parseReg(e.at(2))};
    return in;
  }
  if (head == "store") {
    in.code = ICode::Store;
    in.args = {parseReg(e.at(1)), parseReg(e.at(2))};
    return in;
  }
  if (head == "cast") {
    in.code = ICode::Cast;
    in.result = parseReg(e.at(1));
    auto k = hir::castFromName(e.at(2).asSymbol());
    if (!k)
      throw ParseError("unknown cast kind", e.line, e.col);
    in.castKind = *k;
    in.args = {parseReg(e.at(3))};
    in.type = hir::typeFromSexpr(e.at(4));
    return in;
  }
  if (head == "gep") {
    in.code = ICode::Gep;
    in.result = parseReg(e.at(1));
    in.args = {parseReg(e.at(2)), parseReg(e.at(3))};
    in.type = hir::typeFromSexpr(e.at(4));
    return in;
  }
  if (head == "call") {
    in.code = ICode::Call;
    in.result = e.at(1).isSymbol("_") ? kNoReg : parseReg(e.at(1));
    const std::string &kind = e.at(2).asSymbol();
    size_t argIdx = 4;
    if (kind == "defined") {
      in.calleeKind = hir::Rator::Kind::Defined;
    } else {
      if (kind == "intrinsic")
        in.calleeKind = hir::Rator::Kind::Intrinsic;
      else if (kind == "external")
        in.calleeKind = hir::Rator::Kind::External;
      else if (kind == "host")
        in.calleeKind = hir::Rator::Kind::Host;
      else
        throw ParseError("unknown callee kind '" + kind + "'", e.line, e.col);
      in.calleeType = hir::typeFromSexpr(e.at(4));
      argIdx = 5;
    }
    in.callee = e.at(3).asSymbol();
    for (const Sexpr &a : e.at(argIdx).items)
      in.args.push_back(parseReg(a));
    return in;
  }
  if (head == "ret") {
    in.code = ICode::Ret;
    if (e.size() == 2)
      in.args = {parseReg(e.at(1))};
    return in;
  }
  if (head == "br") {
    in.code = ICode::Br;
    labelRefs = {e.at(1).asSymbol()};
    return in;
  }
  if (head == "condbr") {
    in.code = ICode::CondBr;
    in.args = {parseReg(e.at(1))};
    labelRefs = {e.at(2).asSymbol(), e.at(3).asSymbol()};
    return in;
  }
  if (head == "switch") {
    in.code = ICode::Switch;
    in.args = {parseReg(e.at(1))};
    labelRefs = {e.at(3).asSymbol()}; // default first
    for (const Sexpr &c : e.at(2).items) {
      in.switchConsts.push_back(parseConst(c.at(0)));
      labelRefs.push_back(c.at(1).asSymbol());
    }
    return in;
  }
  if (head == "unreachable") {
    in.code = ICode::Unreachable;
    return in;
  }
  if (auto op = hir::opFromName(head)) {
    in.code = hir::opIsCmp(*op) ? ICode::Cmp : ICode::Binop;
    in.op = *op;
    in.result = parseReg(e.at(1));
    in.args = {parseReg(e.at(2)), parseReg(e.at(3))};
    return in;
  }
  throw ParseError("unknown instruction '" + head + "'", e.line, e.col);
}

// Reconstructs register types from definitions (types are derived data and
// not serialized).  Iterates because a def's type can depend on operands
// defined in a later block.
void rebuildRegTypes(Module &m, Function &f) {
  Reg maxReg = 0;
  bool any = false;
  auto see = [&](Reg r) {
    if (r != kNoReg) {
      maxReg = std::max(maxReg, r);
      any = true;
    }
  };
  for (size_t i = 0; i < f.params.size(); i++)
    see(Reg(i));
  for (const Block &b : f.blocks)
    for (const Instr &in : b.instrs) {
      see(in.result);
      for (Reg r : in.args)
        see(r);
    }
  f.regTypes.assign(any ? maxReg + 1 : 0, nullptr);
  for (size_t i = 0; i < f.params.size() && i < f.regTypes.size(); i++)
    f.regTypes[i] = f.params[i].second;

  bool changed = true;
  while (changed) {
    changed = false;
    for (Block &b : f.blocks) {
      for (Instr &in : b.instrs) {
        if (in.result == kNoReg || f.regTypes[in.result])
          continue;
        TypeRef t;
        switch (in.code) {
        case ICode::Alloca: t = hir::ptr(in.type); break;
        case ICode::Const: t = in.cval.type; break;
        case ICode::Load: {
          TypeRef p = f.regTypes[in.args[0]];
          if (p && p->isPtr())
            t = p->elem;
          break;
        }
        case ICode::Binop: t = f.regTypes[in.args[0]]; break;
        case ICode::Cmp: t = hir::i1(); break;
        case ICode::Cast: t = in.type; break;
        case ICode::Gep: t = in.type; break;
        case ICode::Call: {
          if (in.calleeKind == hir::Rator::Kind::Defined) {
            if (const Function *callee = m.findFunction(in.callee))
              t = callee->ret;
          } else if (in.calleeType) {
            t = in.calleeType->ret;
          }
          break;
        }
        default: break;
        }
        if (t) {
          f.regTypes[in.result] = t;
          changed = true;
        }
      }
    }
  }
}

} // namespace

Module parseText(std::string_view text) {
  Sexpr top = readSexpr(text);
  if (top.head() != "module" || top.size() < 2)
    throw ParseError("expected (module <name> ...)", top.line, top.col);
  Module m;
  m.name = top.at(1).asSymbol();
  for (size_t i = 2; i < top.size(); i++) {
    const Sexpr &form = top.at(i);
    std::string_view head = form.head();
    if (head == "global") {
      Global g;
      g.name = form.at(1).asSymbol();
      g.elemType = hir::typeFromSexpr(form.at(2));
      g.sizeBytes = parseU64(form.at(3));
      size_t j = 4;
      if (j + 1 < form.size() && form.at(j).isSymbol("init")) {
        g.scalarInit = form.at(j + 1).asDouble();
        j += 2;
      }
      if (j < form.size() && form.at(j).isSymbol("engine-buffer"))
        g.engineBuffer = true;
      m.globals.push_back(std::move(g));
    } else if (head == "pure") {
      for (size_t j = 1; j < form.size(); j++)
        m.pureFns.insert(form.at(j).asSymbol());
    } else if (head == "fn") {
      Function f;
      f.name = form.at(1).asSymbol();
      for (const Sexpr &p : form.at(2).items)
        f.params.emplace_back(p.at(0).asSymbol(), hir::typeFromSexpr(p.at(1)));
      f.ret = hir::typeFromSexpr(form.at(3));
      std::vector<PendingBranch> pending;
      for (size_t bi = 4; bi < form.size(); bi++) {
        const Sexpr &bf = form.at(bi);
        if (bf.head() != "block")
          throw ParseError("expected (block <label> ...)", bf.line, bf.col);
        Block b;
        b.label = bf.at(1).asSymbol();
        for (size_t ii = 2; ii < bf.size(); ii++) {
          std::vector<std::string> labelRefs;
          Instr in = parseInstr(bf.at(ii), labelRefs);
          if (!labelRefs.empty())
            pending.push_back({uint32_t(f.blocks.size()), b.instrs.size(),
                               std::move(labelRefs)});
          b.instrs.push_back(std::move(in));
        }
        f.blocks.push_back(std::move(b));
      }
      for (const PendingBranch &pb : pending) {
        Instr &in = f.blocks[pb.block].instrs[pb.instr];
        for (const std::string &lbl : pb.labels) {
          uint32_t t = f.findBlock(lbl);
          if (t == kNoBlock)
            throw ParseError("unknown block label '" + lbl + "' in " + f.name, 0, 0);
          in.targets.push_back(t);
        }
        if (in.code == ICode::CondBr && in.targets.size() != 2)
          throw ParseError("condbr wants two targets", 0, 0);
      }
      m.functions.push_back(std::move(f));
    } else {
      throw ParseError("unknown module form", form.line, form.col);
    }
  }
  for (Function &f : m.functions)
    rebuildRegTypes(m, f);
  return m;
}

// ---------------------------------------------------------------- metrics

namespace {

void countFunction(const Function &f, InstrCount &c) {
  for (const Block &b : f.blocks)
    for (const Instr &in : b.instrs) {
      std::string key = (in.code == ICode::Binop || in.code == ICode::Cmp)
                            ? hir::opName(in.op)
                            : icodeName(in.code);
      c.byOpcode[key]++;
      if (isTerminator(in.code))
        c.terminators++;
      else
        c.total++;
    }
}

} // namespace

InstrCount staticInstrCount(const Function &f) {
  InstrCount c;
  countFunction(f, c);
  return c;
}

InstrCount staticInstrCount(const Module &m) {
  InstrCount c;
  for (const Function &f : m.functions)
    countFunction(f, c);
  return c;
}

} // namespace dslkit::lir
