#pragma once

#include "dslkit/hir.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

// The low IR: functions as basic blocks of flat register-based instructions
// with explicit terminators.  Registers are single-assignment; mutable state
// lives behind alloca'd stack slots (no phi nodes anywhere).
namespace dslkit::lir {

using hir::TypeRef;

using Reg = uint32_t;
inline constexpr Reg kNoReg = ~Reg(0);
inline constexpr uint32_t kNoBlock = ~uint32_t(0);

// Literal payload of a const instruction or a switch case.
struct ConstVal {
  enum class Kind { Int, Float, Sym, Bool, Null, GlobalAddr };
  Kind kind = Kind::Int;
  uint64_t bits = 0;    // Int: value bits masked to width
  double fval = 0;      // Float (f32 values round-trip through the f32 lexeme)
  std::string text;     // Sym text or global name
  bool b = false;       // Bool
  TypeRef type;

  bool operator==(const ConstVal &o) const;
};

ConstVal constInt(uint64_t bits, TypeRef ty);
ConstVal constFloat(double v, TypeRef ty);
ConstVal constSym(std::string text);
ConstVal constBool(bool b);
ConstVal constNull(TypeRef ptrTy);
ConstVal constGlobalAddr(std::string name, TypeRef ptrTy);

enum class ICode {
  Alloca, Load, Store, Binop, Cmp, Cast, Gep, Call, Const,
  // terminators
  Ret, Br, CondBr, Switch, Unreachable,
};

bool isTerminator(ICode c);
const char *icodeName(ICode c);

struct Instr {
  ICode code = ICode::Unreachable;
  Reg result = kNoReg;
  hir::Op op = hir::Op::Add;            // Binop/Cmp
  hir::CastKind castKind = hir::CastKind::Zext;
  TypeRef type;                         // Alloca: slot type; Cast: target; Const: type
  ConstVal cval;                        // Const
  std::vector<Reg> args;                // operand registers (see per-op layout)
  hir::Rator::Kind calleeKind = hir::Rator::Kind::Defined;
  std::string callee;
  TypeRef calleeType;                   // Intrinsic/External/Host signature
  std::vector<uint32_t> targets;        // Br: [t]; CondBr: [then, else]; Switch: [default, cases...]
  std::vector<ConstVal> switchConsts;   // Switch: parallel to targets[1..]
};

struct Block {
  std::string label;
  std::vector<Instr> instrs; // verify() enforces exactly one trailing terminator
};

struct Function {
  std::string name;
  std::vector<std::pair<std::string, TypeRef>> params; // registers 0..n-1
  TypeRef ret;
  std::vector<Block> blocks; // entry first
  std::vector<TypeRef> regTypes;

  uint32_t findBlock(std::string_view label) const;
  Reg newReg(TypeRef t) {
    regTypes.push_back(std::move(t));
    return Reg(regTypes.size() - 1);
  }
};

struct Global {
  std::string name;
  TypeRef elemType;     // element type of the buffer
  uint64_t sizeBytes = 0;
  std::optional<double> scalarInit; // scalar globals; arrays zero-fill
  bool engineBuffer = false;        // storage supplied by the engine arena
};

struct Module {
  std::string name;
  std::vector<Function> functions;
  std::vector<Global> globals;
  std::set<std::string> pureFns; // callee names whose calls are side-effect free

  const Function *findFunction(std::string_view name) const;
  const Global *findGlobal(std::string_view name) const;
};

// ---------------------------------------------------------------- verify

// Structural and type checks: one trailing terminator per block, single
// assignment per register, def-before-use along every path (forward dataflow
// over reverse postorder), branch targets exist, entry has no predecessors,
// and operand types agree with each opcode.
std::vector<Diag> verify(const Module &m);
void verifyOrThrow(const Module &m);

// ---------------------------------------------------------------- text

std::string dumpText(const Module &m);
Module parseText(std::string_view text); // throws ParseError

// ---------------------------------------------------------------- metrics

struct InstrCount {
  std::map<std::string, uint64_t> byOpcode; // binops/cmps keyed by mnemonic
  uint64_t total = 0;       // non-terminator instructions
  uint64_t terminators = 0;

  uint64_t of(const std::string &key) const {
    auto it = byOpcode.find(key);
    return it == byOpcode.end() ? 0 : it->second;
  }
};

InstrCount staticInstrCount(const Module &m);
InstrCount staticInstrCount(const Function &f);

} // namespace dslkit::lir
