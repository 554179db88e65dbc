#include "dslkit/opt.hpp"

#include "dslkit/arith.hpp"
#include "dslkit/intrinsics.hpp"

#include <algorithm>
#include <functional>

namespace dslkit::opt {

using namespace lir;
using hir::Op;
using hir::Type;
using hir::TypeRef;

namespace {

// Resolves a register through a replacement chain.
Reg resolve(const std::map<Reg, Reg> &remap, Reg r) {
  auto it = remap.find(r);
  while (it != remap.end()) {
    r = it->second;
    it = remap.find(r);
  }
  return r;
}

void applyRemap(Function &f, const std::map<Reg, Reg> &remap) {
  if (remap.empty())
    return;
  for (Block &b : f.blocks)
    for (Instr &in : b.instrs)
      for (Reg &r : in.args)
        r = resolve(remap, r);
}

// Alloca result registers whose only uses are load addresses and store
// addresses; nothing else can observe the slot.
std::set<Reg> nonEscapingSlots(const Function &f) {
  std::set<Reg> allocas;
  for (const Block &b : f.blocks)
    for (const Instr &in : b.instrs)
      if (in.code == ICode::Alloca)
        allocas.insert(in.result);
  std::set<Reg> escaping;
  for (const Block &b : f.blocks)
    for (const Instr &in : b.instrs) {
      for (size_t i = 0; i < in.args.size(); i++) {
        Reg r = in.args[i];
        if (!allocas.count(r))
          continue;
        bool benign = (in.code == ICode::Load && i == 0) ||
                      (in.code == ICode::Store && i == 1);
        if (!benign)
          escaping.insert(r);
      }
    }
  std::set<Reg> out;
  for (Reg r : allocas)
    if (!escaping.count(r))
      out.insert(r);
  return out;
}

} // namespace

// ---------------------------------------------------------------- const-fold

Function constFold(const Function &fIn) {
  Function f = fIn;
  std::map<Reg, ConstVal> consts;
  std::map<Reg, Reg> remap;
  bool changed = true;
  while (changed) {
    changed = false;
    for (Block &b : f.blocks) {
      for (Instr &in : b.instrs) {
        for (Reg &r : in.args)
          r = resolve(remap, r);
        if (in.code == ICode::Const) {
          consts.emplace(in.result, in.cval);
          continue;
        }
        auto cOf = [&](size_t i) -> const ConstVal * {
          auto it = consts.find(in.args[i]);
          return it == consts.end() ? nullptr : &it->second;
        };
        auto toConst = [&](ConstVal cv) {
          in.code = ICode::Const;
          in.cval = std::move(cv);
          in.type = in.cval.type;
          in.args.clear();
          consts.emplace(in.result, in.cval);
          changed = true;
        };

        if (in.code == ICode::Binop || in.code == ICode::Cmp) {
          const ConstVal *a = cOf(0), *bv = cOf(1);
          if (a && bv && a->kind == ConstVal::Kind::Int &&
              bv->kind == ConstVal::Kind::Int) {
            int w = a->type->width;
            if (in.code == ICode::Cmp) {
              toConst(constInt(
                  arith::evalIntCmp(in.op, w, a->bits, bv->bits) ? 1 : 0,
                  hir::i1()));
              continue;
            }
            arith::IntResult r = arith::evalIntBinop(in.op, w, a->bits, bv->bits);
            if (r.status == arith::IntResult::Status::Ok) {
              toConst(constInt(r.bits, a->type));
              continue;
            }
          } else if (a && bv && a->kind == ConstVal::Kind::Float &&
                     bv->kind == ConstVal::Kind::Float) {
            if (in.code == ICode::Cmp) {
              toConst(constInt(arith::evalFCmp(in.op, a->fval, bv->fval) ? 1 : 0,
                               hir::i1()));
              continue;
            }
            double r = (a->type->kind == Type::Kind::F32)
                           ? double(arith::evalF32Binop(in.op, float(a->fval),
                                                        float(bv->fval)))
                           : arith::evalF64Binop(in.op, a->fval, bv->fval);
            toConst(constFloat(r, a->type));
            continue;
          }
          // Integer identities: the instruction stays as a dead definition
          // (dce drops it); uses are rerouted.
          if (in.code == ICode::Binop) {
            auto isIntConst = [&](const ConstVal *c, uint64_t v) {
              return c && c->kind == ConstVal::Kind::Int && c->type->isInt() &&
                     c->bits == v;
            };
            if (in.op == Op::Mul) {
              if (isIntConst(bv, 1) && !remap.count(in.result)) {
                remap[in.result] = in.args[0];
                changed = true;
              } else if (isIntConst(a, 1) && !remap.count(in.result)) {
                remap[in.result] = in.args[1];
                changed = true;
              } else if ((isIntConst(bv, 0) || isIntConst(a, 0))) {
                TypeRef ty = a ? a->type : bv->type;
                toConst(constInt(0, ty));
              }
            } else if (in.op == Op::Add) {
              if (isIntConst(bv, 0) && !remap.count(in.result)) {
                remap[in.result] = in.args[0];
                changed = true;
              } else if (isIntConst(a, 0) && !remap.count(in.result)) {
                remap[in.result] = in.args[1];
                changed = true;
              }
            }
          }
        } else if (in.code == ICode::Cast) {
          const ConstVal *a = cOf(0);
          if (!a)
            continue;
          switch (in.castKind) {
          case hir::CastKind::Trunc:
          case hir::CastKind::Zext:
            if (a->kind == ConstVal::Kind::Int)
              toConst(constInt(arith::maskW(a->bits, in.type->width), in.type));
            break;
          case hir::CastKind::Sext:
            if (a->kind == ConstVal::Kind::Int)
              toConst(constInt(
                  arith::maskW(uint64_t(arith::sextW(a->bits, a->type->width)),
                               in.type->width),
                  in.type));
            break;
          case hir::CastKind::UiToFp:
            if (a->kind == ConstVal::Kind::Int)
              toConst(constFloat(arith::uiToFp(a->bits, a->type->width), in.type));
            break;
          case hir::CastKind::SiToFp:
            if (a->kind == ConstVal::Kind::Int)
              toConst(constFloat(arith::siToFp(a->bits, a->type->width), in.type));
            break;
          case hir::CastKind::FpToUi:
            if (a->kind == ConstVal::Kind::Float)
              toConst(constInt(arith::fpToUi(a->fval, in.type->width), in.type));
            break;
          case hir::CastKind::FpToSi:
            if (a->kind == ConstVal::Kind::Float)
              toConst(constInt(arith::fpToSi(a->fval, in.type->width), in.type));
            break;
          case hir::CastKind::PtrCast:
            if (a->kind == ConstVal::Kind::GlobalAddr)
              toConst(constGlobalAddr(a->text, in.type));
            else if (a->kind == ConstVal::Kind::Null)
              toConst(constNull(in.type));
            break;
          }
        } else if (in.code == ICode::CondBr) {
          const ConstVal *c = cOf(0);
          if (!c)
            continue;
          bool truth = (c->kind == ConstVal::Kind::Bool) ? c->b : c->bits != 0;
          uint32_t target = truth ? in.targets[0] : in.targets[1];
          in.code = ICode::Br;
          in.args.clear();
          in.targets = {target};
          changed = true;
        } else if (in.code == ICode::Switch) {
          const ConstVal *c = cOf(0);
          if (!c)
            continue;
          uint32_t target = in.targets[0]; // default
          for (size_t i = 0; i < in.switchConsts.size(); i++) {
            const ConstVal &cc = in.switchConsts[i];
            bool match = (c->kind == ConstVal::Kind::Int &&
                          cc.kind == ConstVal::Kind::Int && c->bits == cc.bits) ||
                         (c->kind == ConstVal::Kind::Sym &&
                          cc.kind == ConstVal::Kind::Sym && c->text == cc.text);
            if (match) {
              target = in.targets[i + 1];
              break;
            }
          }
          in.code = ICode::Br;
          in.args.clear();
          in.switchConsts.clear();
          in.targets = {target};
          changed = true;
        }
      }
    }
  }
  return f;
}

Module constFoldLir(const Module &m) {
  Module out = m;
  for (Function &f : out.functions)
    f = constFold(f);
  return out;
}

// ---------------------------------------------------------------- load/store

Function loadStoreElim(const Function &fIn) {
  Function f = fIn;
  std::set<Reg> slots = nonEscapingSlots(f);
  auto isSlot = [&](Reg r) { return slots.count(r) != 0; };
  std::map<Reg, Reg> remap;

  for (Block &b : f.blocks) {
    // Forward: store-to-load forwarding and redundant-load merging.
    std::map<Reg, Reg> memVal; // pointer reg -> value register known in memory
    std::vector<size_t> toDelete;
    for (size_t i = 0; i < b.instrs.size(); i++) {
      Instr &in = b.instrs[i];
      for (Reg &r : in.args)
        r = resolve(remap, r);
      switch (in.code) {
      case ICode::Load: {
        Reg p = in.args[0];
        auto it = memVal.find(p);
        if (it != memVal.end()) {
          remap[in.result] = it->second;
          toDelete.push_back(i);
        } else {
          memVal[p] = in.result;
        }
        break;
      }
      case ICode::Store: {
        Reg v = in.args[0], p = in.args[1];
        for (auto it = memVal.begin(); it != memVal.end();) {
          Reg q = it->first;
          bool mayAlias = !(q == p || (isSlot(q) && q != p) ||
                            (isSlot(p) && p != q));
          if (q != p && mayAlias)
            it = memVal.erase(it);
          else
            ++it;
        }
        memVal[p] = v;
        break;
      }
      case ICode::Call: {
        // A call may touch anything whose address it can see.
        for (auto it = memVal.begin(); it != memVal.end();)
          it = isSlot(it->first) ? std::next(it) : memVal.erase(it);
        break;
      }
      default:
        break;
      }
    }
    for (auto it = toDelete.rbegin(); it != toDelete.rend(); ++it)
      b.instrs.erase(b.instrs.begin() + *it);

    // Backward: dead stores overwritten before any possible read.
    std::set<Reg> overwritten;
    std::vector<size_t> deadStores;
    for (size_t i = b.instrs.size(); i-- > 0;) {
      Instr &in = b.instrs[i];
      switch (in.code) {
      case ICode::Store: {
        Reg p = in.args[1];
        if (overwritten.count(p))
          deadStores.push_back(i);
        else
          overwritten.insert(p);
        break;
      }
      case ICode::Load: {
        Reg q = in.args[0];
        for (auto it = overwritten.begin(); it != overwritten.end();) {
          Reg p = *it;
          bool mayAlias = !(p != q && (isSlot(p) || isSlot(q)));
          if (p == q || mayAlias)
            it = overwritten.erase(it);
          else
            ++it;
        }
        break;
      }
      case ICode::Call: {
        for (auto it = overwritten.begin(); it != overwritten.end();)
          it = isSlot(*it) ? std::next(it) : overwritten.erase(it);
        break;
      }
      default:
        break;
      }
    }
    std::sort(deadStores.begin(), deadStores.end());
    for (auto it = deadStores.rbegin(); it != deadStores.rend(); ++it)
      b.instrs.erase(b.instrs.begin() + *it);
  }

  applyRemap(f, remap);
  return f;
}

Module loadStoreElimLir(const Module &m) {
  Module out = m;
  for (Function &f : out.functions)
    f = loadStoreElim(f);
  return out;
}

// ---------------------------------------------------------------- dce

namespace {

bool calleeIsPure(const Instr &in, const Module &ctx) {
  switch (in.calleeKind) {
  case hir::Rator::Kind::Defined:
    return ctx.pureFns.count(in.callee) != 0;
  case hir::Rator::Kind::Intrinsic: {
    const IntrinsicInfo *info = findIntrinsic(in.callee);
    return info && info->pure;
  }
  default:
    return false;
  }
}

void dropUnreachableBlocks(Function &f) {
  std::vector<bool> reach(f.blocks.size(), false);
  std::vector<uint32_t> work{0};
  reach[0] = true;
  while (!work.empty()) {
    uint32_t b = work.back();
    work.pop_back();
    for (const Instr &in : f.blocks[b].instrs)
      for (uint32_t t : in.targets)
        if (!reach[t]) {
          reach[t] = true;
          work.push_back(t);
        }
  }
  if (std::all_of(reach.begin(), reach.end(), [](bool r) { return r; }))
    return;
  std::vector<uint32_t> newIdx(f.blocks.size(), kNoBlock);
  std::vector<Block> kept;
  for (uint32_t i = 0; i < f.blocks.size(); i++)
    if (reach[i]) {
      newIdx[i] = uint32_t(kept.size());
      kept.push_back(std::move(f.blocks[i]));
    }
  for (Block &b : kept)
    for (Instr &in : b.instrs)
      for (uint32_t &t : in.targets)
        t = newIdx[t];
  f.blocks = std::move(kept);
}

} // namespace

Function dce(const Function &fIn, const Module &ctx) {
  Function f = fIn;
  dropUnreachableBlocks(f);
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<uint32_t> uses(f.regTypes.size(), 0);
    // Track whether a register is used anywhere except as a store address.
    std::vector<uint32_t> nonStoreAddrUses(f.regTypes.size(), 0);
    std::set<Reg> allocaRegs;
    for (const Block &b : f.blocks)
      for (const Instr &in : b.instrs) {
        if (in.code == ICode::Alloca)
          allocaRegs.insert(in.result);
        for (size_t i = 0; i < in.args.size(); i++) {
          uses[in.args[i]]++;
          if (!(in.code == ICode::Store && i == 1))
            nonStoreAddrUses[in.args[i]]++;
        }
      }

    std::set<Reg> deadSlots; // allocas only ever stored to
    for (const Block &b : f.blocks)
      for (const Instr &in : b.instrs)
        if (in.code == ICode::Alloca && nonStoreAddrUses[in.result] == 0)
          deadSlots.insert(in.result);

    for (Block &b : f.blocks) {
      std::vector<size_t> toDelete;
      for (size_t i = 0; i < b.instrs.size(); i++) {
        const Instr &in = b.instrs[i];
        if (isTerminator(in.code))
          continue;
        bool removable = false;
        if (in.code == ICode::Store) {
          removable = deadSlots.count(in.args[1]) != 0;
        } else if (in.result != kNoReg && uses[in.result] == 0) {
          switch (in.code) {
          case ICode::Binop:
            // Division and flagged ops can trap; their effect is observable.
            removable = !hir::opCanTrap(in.op);
            break;
          case ICode::Const:
          case ICode::Cmp:
          case ICode::Cast:
          case ICode::Gep:
          case ICode::Alloca:
            removable = true;
            break;
          case ICode::Load:
            // Loads straight off a stack slot cannot fault.
            removable = allocaRegs.count(in.args[0]) != 0;
            break;
          case ICode::Call:
            removable = calleeIsPure(in, ctx);
            break;
          default:
            break;
          }
        }
        if (removable)
          toDelete.push_back(i);
      }
      for (auto it = toDelete.rbegin(); it != toDelete.rend(); ++it) {
        b.instrs.erase(b.instrs.begin() + *it);
        changed = true;
      }
    }
  }
  return f;
}

Module dceLir(const Module &m) {
  Module out = m;
  for (Function &f : out.functions)
    f = dce(f, m);
  return out;
}

} // namespace dslkit::opt
