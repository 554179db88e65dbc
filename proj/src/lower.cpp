#include "dslkit/lower.hpp"

#include <map>

namespace dslkit::lower {

using namespace hir;
using lir::ICode;
using lir::Instr;
using lir::kNoBlock;
using lir::kNoReg;
using lir::Reg;

Layout layoutOf(const TypeRef &t) {
  if (!t)
    raise(Err::UnsizedType, "null type");
  Layout l;
  switch (t->kind) {
  case Type::Kind::Int:
    l.size = l.align = (t->width <= 8) ? 1 : uint64_t(t->width) / 8;
    return l;
  case Type::Kind::HostBool:
    l.size = l.align = 1;
    return l;
  case Type::Kind::F32:
    l.size = l.align = 4;
    return l;
  case Type::Kind::F64:
  case Type::Kind::Ptr:
  case Type::Kind::Sym:
    l.size = l.align = 8;
    return l;
  case Type::Kind::Array: {
    if (!t->length)
      raise(Err::UnsizedType, "array without length");
    Layout e = layoutOf(t->elem);
    l.stride = (e.size + e.align - 1) / e.align * e.align;
    l.size = l.stride * *t->length;
    l.align = e.align;
    return l;
  }
  case Type::Kind::Struct: {
    uint64_t off = 0, maxAlign = 1;
    for (auto &[name, ft] : t->fields) {
      Layout fl = layoutOf(ft);
      off = (off + fl.align - 1) / fl.align * fl.align;
      l.fieldOffsets.push_back(off);
      off += fl.size;
      maxAlign = std::max(maxAlign, fl.align);
    }
    l.align = maxAlign;
    l.size = (off + maxAlign - 1) / maxAlign * maxAlign;
    return l;
  }
  case Type::Kind::Void:
  case Type::Kind::Fn:
    raise(Err::UnsizedType, typeName(t));
  }
  raise(Err::UnsizedType, typeName(t));
}

namespace {

uint64_t strideOf(const TypeRef &elem) {
  Layout e = layoutOf(elem);
  return (e.size + e.align - 1) / e.align * e.align;
}

struct FnLowerer {
  const Module &hmod;
  const Function &hf;
  lir::Function out;
  uint32_t cur = 0;
  size_t entryAllocaCursor = 0; // insertion point for slot allocas in entry
  int nameCounter = 0;
  std::vector<std::map<std::string, Reg>> scopes; // variable -> slot register
  std::map<std::string, uint32_t> labelBlocks;

  explicit FnLowerer(const Module &m, const Function &f) : hmod(m), hf(f) {}

  uint32_t newBlock(std::string label) {
    out.blocks.push_back({std::move(label), {}});
    return uint32_t(out.blocks.size() - 1);
  }

  std::string fresh(const char *construct) {
    return hf.name + "." + construct + "." + std::to_string(nameCounter);
  }

  bool terminated() const {
    const auto &ins = out.blocks[cur].instrs;
    return !ins.empty() && lir::isTerminator(ins.back().code);
  }

  void openIfClosed() {
    if (terminated()) {
      nameCounter++;
      cur = newBlock(fresh("dead"));
    }
  }

  Reg emit(Instr in) {
    openIfClosed();
    Reg r = in.result;
    out.blocks[cur].instrs.push_back(std::move(in));
    return r;
  }

  void terminate(Instr in) {
    if (terminated())
      return; // unreachable terminator; drop
    out.blocks[cur].instrs.push_back(std::move(in));
  }

  Reg slotAlloca(const TypeRef &ty) {
    Instr in;
    in.code = ICode::Alloca;
    in.type = ty;
    in.result = out.newReg(ptr(ty));
    Reg r = in.result;
    auto &entry = out.blocks[0].instrs;
    entry.insert(entry.begin() + entryAllocaCursor, std::move(in));
    entryAllocaCursor++;
    return r;
  }

  Reg lookupSlot(const std::string &name) {
    for (auto it = scopes.rbegin(); it != scopes.rend(); ++it) {
      auto f = it->find(name);
      if (f != it->end())
        return f->second;
    }
    raise(Err::InternalError, "no slot for '" + name + "'");
  }

  Reg emitConst(lir::ConstVal c) {
    Instr in;
    in.code = ICode::Const;
    in.type = c.type;
    in.result = out.newReg(c.type);
    in.cval = std::move(c);
    return emit(std::move(in));
  }

  Reg emitLoad(Reg addr) {
    Instr in;
    in.code = ICode::Load;
    in.args = {addr};
    in.result = out.newReg(out.regTypes[addr]->elem);
    return emit(std::move(in));
  }

  void emitStore(Reg value, Reg addr) {
    Instr in;
    in.code = ICode::Store;
    in.args = {value, addr};
    emit(std::move(in));
  }

  Reg emitBinop(Op op, Reg a, Reg b) {
    Instr in;
    in.code = opIsCmp(op) ? ICode::Cmp : ICode::Binop;
    in.op = op;
    in.args = {a, b};
    in.result = out.newReg(opIsCmp(op) ? i1() : out.regTypes[a]);
    return emit(std::move(in));
  }

  void br(uint32_t target) {
    Instr in;
    in.code = ICode::Br;
    in.targets = {target};
    terminate(std::move(in));
  }

  void condbr(Reg c, uint32_t t, uint32_t e) {
    Instr in;
    in.code = ICode::CondBr;
    in.args = {c};
    in.targets = {t, e};
    terminate(std::move(in));
  }

  // ---- expressions --------------------------------------------------

  Reg lowerExpr(const ExprRef &e) {
    if (auto *v = e->as<VarE>())
      return emitLoad(lookupSlot(v->name));
    if (auto *l = e->as<IntLitE>())
      return emitConst(lir::constInt(l->bits, l->ty));
    if (auto *f = e->as<FloatLitE>())
      return emitConst(lir::constFloat(f->value, f->ty));
    if (auto *s = e->as<SymLitE>())
      return emitConst(lir::constSym(s->text));
    if (auto *b = e->as<BoolLitE>())
      return emitConst(lir::constBool(b->value));
    if (auto *a = e->as<AddrLitE>())
      return emitConst(lir::constGlobalAddr(a->global, a->ty));
    if (auto *a = e->as<AppE>()) {
      std::vector<Reg> args;
      args.reserve(a->args.size());
      for (const ExprRef &x : a->args)
        args.push_back(lowerExpr(x));
      Instr in;
      in.code = ICode::Call;
      in.calleeKind = a->rator.kind;
      in.callee = a->rator.name;
      in.calleeType = a->rator.fnTy;
      in.args = std::move(args);
      bool isVoid = e->type->kind == Type::Kind::Void;
      in.result = isVoid ? kNoReg : out.newReg(e->type);
      return emit(std::move(in));
    }
    if (auto *l = e->as<LetE>())
      return lowerLet(*l);
    if (auto *g = e->as<GepE>())
      return lowerGep(*e, *g);
    if (auto *l = e->as<LoadE>())
      return emitLoad(lowerExpr(l->addr));
    if (auto *c = e->as<CastE>()) {
      Reg arg = lowerExpr(c->arg);
      Instr in;
      in.code = ICode::Cast;
      in.castKind = c->kind;
      in.type = c->to;
      in.args = {arg};
      in.result = out.newReg(c->to);
      return emit(std::move(in));
    }
    if (auto *p = e->as<PrimOpE>()) {
      Reg a = lowerExpr(p->args[0]);
      Reg b = lowerExpr(p->args[1]);
      return emitBinop(p->op, a, b);
    }
    raise(Err::InternalError, "unlowerable expression");
  }

  Reg lowerLet(const LetE &l) {
    // All inits evaluate left-to-right before any binding takes effect.
    std::vector<std::pair<size_t, Reg>> initRegs;
    for (size_t i = 0; i < l.bindings.size(); i++)
      if (l.bindings[i].init)
        initRegs.emplace_back(i, lowerExpr(*l.bindings[i].init));
    std::map<std::string, Reg> frame;
    std::vector<Reg> slots(l.bindings.size());
    for (size_t i = 0; i < l.bindings.size(); i++) {
      slots[i] = slotAlloca(l.bindings[i].type);
      frame[l.bindings[i].name] = slots[i];
    }
    for (auto &[i, r] : initRegs)
      emitStore(r, slots[i]);
    scopes.push_back(std::move(frame));
    lowerStmt(l.body);
    Reg result = lowerExpr(l.result);
    scopes.pop_back();
    return result;
  }

  Reg lowerGep(const Expr &e, const GepE &g) {
    Reg base = lowerExpr(g.base);
    TypeRef cur = g.base->type->elem;
    uint64_t constOff = 0;
    Reg dynOff = kNoReg;
    auto addTerm = [&](Reg term) {
      if (dynOff == kNoReg)
        dynOff = term;
      else
        dynOff = emitBinop(Op::Add, dynOff, term);
    };
    for (size_t i = 0; i < g.indices.size(); i++) {
      uint64_t scale;
      if (i == 0) {
        scale = strideOf(cur);
      } else if (cur->kind == Type::Kind::Array) {
        scale = strideOf(cur->elem);
        cur = cur->elem;
      } else { // struct; index is a literal (typecheck)
        auto *lit = g.indices[i]->as<IntLitE>();
        Layout sl = layoutOf(cur);
        constOff += sl.fieldOffsets[size_t(lit->bits)];
        cur = cur->fields[size_t(lit->bits)].second;
        continue;
      }
      if (auto *lit = g.indices[i]->as<IntLitE>()) {
        int64_t sval = int64_t(lit->bits);
        if (lit->ty->width < 64 && lit->isSigned) {
          uint64_t sign = uint64_t(1) << (lit->ty->width - 1);
          sval = int64_t((lit->bits ^ sign)) - int64_t(sign);
        } else if (lit->ty->width < 64) {
          sval = int64_t(lit->bits);
        }
        constOff += uint64_t(sval) * scale;
      } else {
        Reg idx = lowerExpr(g.indices[i]);
        if (g.indices[i]->type->width < 64) {
          Instr zx;
          zx.code = ICode::Cast;
          zx.castKind = CastKind::Zext;
          zx.type = i64();
          zx.args = {idx};
          zx.result = out.newReg(i64());
          idx = emit(std::move(zx));
        }
        Reg scaleReg = emitConst(lir::constInt(scale, i64()));
        addTerm(emitBinop(Op::Mul, idx, scaleReg));
      }
    }
    if (dynOff == kNoReg && constOff == 0 &&
        typeEquals(e.type, out.regTypes[base]))
      return base; // no displacement, no retype
    Reg off;
    if (dynOff == kNoReg) {
      off = emitConst(lir::constInt(constOff, i64()));
    } else if (constOff == 0) {
      off = dynOff;
    } else {
      Reg c = emitConst(lir::constInt(constOff, i64()));
      off = emitBinop(Op::Add, dynOff, c);
    }
    Instr in;
    in.code = ICode::Gep;
    in.type = e.type;
    in.args = {base, off};
    in.result = out.newReg(e.type);
    return emit(std::move(in));
  }

  // ---- statements ---------------------------------------------------

  void lowerStmt(const StmtRef &s) {
    if (auto *e = s->as<ExprStmtS>()) {
      lowerExpr(e->expr);
      return;
    }
    if (auto *b = s->as<BlockS>()) {
      for (const StmtRef &x : b->stmts)
        lowerStmt(x);
      return;
    }
    if (s->is<SVoidS>())
      return;
    if (auto *r = s->as<ReturnS>()) {
      Instr in;
      in.code = ICode::Ret;
      if (r->value)
        in.args = {lowerExpr(*r->value)};
      terminate(std::move(in));
      return;
    }
    if (auto *w = s->as<WhileS>()) {
      nameCounter++;
      uint32_t head = newBlock(fresh("head"));
      uint32_t body = newBlock(fresh("body"));
      uint32_t exit = newBlock(fresh("exit"));
      br(head);
      cur = head;
      Reg c = lowerExpr(w->cond);
      condbr(c, body, exit);
      cur = body;
      lowerStmt(w->body);
      br(head); // back-edge
      cur = exit;
      return;
    }
    if (auto *i = s->as<IfS>()) {
      nameCounter++;
      std::string joinName = fresh("join");
      uint32_t thenB = newBlock(fresh("then"));
      uint32_t elseB = newBlock(fresh("else"));
      Reg c = lowerExpr(i->cond);
      condbr(c, thenB, elseB);
      uint32_t join = kNoBlock;
      cur = thenB;
      lowerStmt(i->thenBranch);
      if (!terminated()) {
        if (join == kNoBlock)
          join = newBlock(joinName);
        br(join);
      }
      cur = elseB;
      lowerStmt(i->elseBranch);
      if (!terminated()) {
        if (join == kNoBlock)
          join = newBlock(joinName);
        br(join);
      }
      if (join != kNoBlock)
        cur = join;
      // Both branches terminated: whatever follows is unreachable and will
      // land in a fresh dead block on demand.
      return;
    }
    if (auto *t = s->as<SetS>()) {
      Reg v = lowerExpr(t->value);
      emitStore(v, lookupSlot(t->name));
      return;
    }
    if (auto *w = s->as<SwitchS>()) {
      nameCounter++;
      std::string joinName = fresh("join");
      Reg scrut = lowerExpr(w->scrutinee);
      Instr term;
      term.code = ICode::Switch;
      term.args = {scrut};
      uint32_t defaultB = newBlock(fresh("default"));
      std::vector<uint32_t> caseBlocks;
      int k = 0;
      for (auto &[cexpr, body] : w->cases) {
        caseBlocks.push_back(
            newBlock(hf.name + ".case." + std::to_string(nameCounter) + "." +
                     std::to_string(k++)));
        if (auto *il = cexpr->as<IntLitE>())
          term.switchConsts.push_back(lir::constInt(il->bits, il->ty));
        else if (auto *sl = cexpr->as<SymLitE>())
          term.switchConsts.push_back(lir::constSym(sl->text));
        else
          raise(Err::InternalError, "switch case is not a constant");
      }
      term.targets.push_back(defaultB);
      for (uint32_t cb : caseBlocks)
        term.targets.push_back(cb);
      terminate(std::move(term));
      uint32_t join = kNoBlock;
      for (size_t ci = 0; ci < w->cases.size(); ci++) {
        cur = caseBlocks[ci];
        lowerStmt(w->cases[ci].second);
        if (!terminated()) {
          if (join == kNoBlock)
            join = newBlock(joinName);
          br(join);
        }
      }
      cur = defaultB;
      lowerStmt(w->defaultBody);
      if (!terminated()) {
        if (join == kNoBlock)
          join = newBlock(joinName);
        br(join);
      }
      if (join != kNoBlock)
        cur = join;
      return;
    }
    if (auto *l = s->as<LabelS>()) {
      uint32_t b = labelBlock(l->name);
      br(b); // fall into the labeled block
      cur = b;
      lowerStmt(l->body);
      return; // fall-through continues in the current block
    }
    if (auto *j = s->as<JumpS>()) {
      br(labelBlock(j->label));
      return;
    }
    if (auto *t = s->as<StoreS>()) {
      Reg v = lowerExpr(t->value);
      Reg a = lowerExpr(t->addr);
      emitStore(v, a);
      return;
    }
    raise(Err::InternalError, "unlowerable statement");
  }

  uint32_t labelBlock(const std::string &name) {
    auto it = labelBlocks.find(name);
    if (it != labelBlocks.end())
      return it->second;
    uint32_t b = newBlock(name); // user labels keep their names verbatim
    labelBlocks.emplace(name, b);
    return b;
  }

  lir::Function run() {
    out.name = hf.name;
    out.ret = hf.ret;
    for (const Param &p : hf.params) {
      out.params.emplace_back(p.name, p.type);
      out.newReg(p.type);
    }
    cur = newBlock("entry");
    // Parameter slots first, then their initial stores.
    std::map<std::string, Reg> frame;
    std::vector<Reg> paramSlots;
    for (size_t i = 0; i < hf.params.size(); i++) {
      Instr in;
      in.code = ICode::Alloca;
      in.type = hf.params[i].type;
      in.result = out.newReg(ptr(hf.params[i].type));
      Reg slot = in.result;
      out.blocks[0].instrs.push_back(std::move(in));
      entryAllocaCursor++;
      paramSlots.push_back(slot);
      frame[hf.params[i].name] = slot;
    }
    for (size_t i = 0; i < hf.params.size(); i++)
      emitStore(Reg(i), paramSlots[i]);
    scopes.push_back(std::move(frame));
    lowerStmt(hf.body);
    if (!terminated()) {
      Instr in;
      if (hf.ret->kind == Type::Kind::Void)
        in.code = ICode::Ret;
      else
        in.code = ICode::Unreachable; // typecheck proved this unreachable
      terminate(std::move(in));
    }
    // Close any dangling dead blocks.
    for (lir::Block &b : out.blocks)
      if (b.instrs.empty() || !lir::isTerminator(b.instrs.back().code)) {
        Instr in;
        in.code = ICode::Unreachable;
        b.instrs.push_back(std::move(in));
      }
    return std::move(out);
  }
};

} // namespace

lir::Module lowerModule(const Module &typed) {
  lir::Module out;
  out.name = typed.name;
  for (const Global &g : typed.globals) {
    lir::Global lg;
    lg.name = g.name;
    lg.elemType = g.type;
    lg.sizeBytes = layoutOf(g.type).size;
    lg.scalarInit = g.scalarInit;
    lg.engineBuffer = g.engineBuffer;
    out.globals.push_back(std::move(lg));
  }
  for (const Function &f : typed.functions) {
    if (f.hasAttr(kAttrPure))
      out.pureFns.insert(f.name);
    FnLowerer lowerer(typed, f);
    out.functions.push_back(lowerer.run());
  }
  return out;
}

} // namespace dslkit::lower
