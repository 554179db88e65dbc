#pragma once

#include "dslkit/errors.hpp"
#include "dslkit/sexpr.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

// The high-level typed IR: expressions, statements, functions and modules,
// with builders usable both directly and from generator code.
namespace dslkit::hir {

// ---------------------------------------------------------------- types

class Type;
using TypeRef = std::shared_ptr<const Type>;

class Type {
public:
  enum class Kind { Int, F32, F64, Void, Ptr, Array, Struct, Fn, Sym, HostBool };

  Kind kind = Kind::Void;
  int width = 0;                                     // Int: 1|8|16|32|64
  TypeRef elem;                                      // Ptr/Array element
  std::optional<uint64_t> length;                    // Array, when sized
  std::vector<std::pair<std::string, TypeRef>> fields; // Struct
  std::vector<TypeRef> params;                       // Fn
  TypeRef ret;                                       // Fn

  bool isInt(int w = 0) const {
    return kind == Kind::Int && (w == 0 || width == w);
  }
  bool isFloat() const { return kind == Kind::F32 || kind == Kind::F64; }
  bool isPtr() const { return kind == Kind::Ptr; }
  bool isBoolish() const { return isInt(1) || kind == Kind::HostBool; }
};

TypeRef intType(int width);
TypeRef i1();
TypeRef i8();
TypeRef i16();
TypeRef i32();
TypeRef i64();
TypeRef f32();
TypeRef f64();
TypeRef voidType();
TypeRef symType();
TypeRef hostBool();
TypeRef ptr(TypeRef elem);
TypeRef array(TypeRef elem, std::optional<uint64_t> length);
TypeRef structType(std::vector<std::pair<std::string, TypeRef>> fields);
TypeRef fnType(std::vector<TypeRef> params, TypeRef ret);

bool typeEquals(const TypeRef &a, const TypeRef &b);
std::string typeName(const TypeRef &t);
Sexpr typeToSexpr(const TypeRef &t);
TypeRef typeFromSexpr(const Sexpr &e);

// ---------------------------------------------------------------- rators

struct Rator {
  enum class Kind { Defined, Intrinsic, External, Host };
  Kind kind = Kind::Defined;
  std::string name;
  TypeRef fnTy; // required for Intrinsic/External/Host, null for Defined
};

Rator defined(std::string name);
Rator intrinsic(std::string name, TypeRef fnTy);
Rator external(std::string name, TypeRef fnTy);
Rator host(std::string name, TypeRef fnTy);

// ---------------------------------------------------------------- ops

enum class Op {
  Add, Sub, SubNuw, Mul, UDiv, SDiv, URem, SRem,
  And, Or, Xor, Shl, LShr, AShr,
  FAdd, FSub, FMul, FDiv, FRem,
  IcmpEq, IcmpNe, IcmpUlt, IcmpUle, IcmpUgt, IcmpSlt, IcmpSle,
  FcmpOlt, FcmpOle, FcmpOeq,
};

const char *opName(Op op);
std::optional<Op> opFromName(std::string_view name);
bool opIsFloat(Op op);
bool opIsCmp(Op op);
bool opCanTrap(Op op); // division/remainder and flagged ops

enum class CastKind { UiToFp, SiToFp, FpToUi, FpToSi, Trunc, Zext, Sext, PtrCast };
const char *castName(CastKind k);
std::optional<CastKind> castFromName(std::string_view name);

// ---------------------------------------------------------------- exprs

struct Expr;
using ExprRef = std::shared_ptr<const Expr>;
struct Stmt;
using StmtRef = std::shared_ptr<const Stmt>;

struct VarE { std::string name; };
struct AppE { Rator rator; std::vector<ExprRef> args; };

struct LetBinding {
  std::string name;
  std::optional<ExprRef> init; // absent: uninitialized slot (internal use)
  TypeRef type;
};

struct LetE {
  std::vector<LetBinding> bindings; // inits evaluated left-to-right, bound in parallel
  StmtRef body;
  ExprRef result;
};

struct IntLitE {
  uint64_t bits = 0;   // value masked to the type width
  TypeRef ty;          // null: width inferred from context at typecheck
  bool isSigned = false;
};
struct FloatLitE { double value = 0; TypeRef ty; };
struct SymLitE { std::string text; };
struct BoolLitE { bool value = false; };
struct GepE { ExprRef base; std::vector<ExprRef> indices; };
struct LoadE { ExprRef addr; };
struct CastE { CastKind kind = CastKind::Zext; ExprRef arg; TypeRef to; };
struct PrimOpE { Op op = Op::Add; std::vector<ExprRef> args; };
// Pointer literal naming a module global / engine buffer.
struct AddrLitE { std::string global; TypeRef ty; };

struct Expr {
  std::variant<VarE, AppE, LetE, IntLitE, FloatLitE, SymLitE, BoolLitE, GepE,
               LoadE, CastE, PrimOpE, AddrLitE>
      node;
  TypeRef type; // resolved by typecheck

  template <class T> const T *as() const { return std::get_if<T>(&node); }
  template <class T> bool is() const { return std::holds_alternative<T>(node); }
};

// ---------------------------------------------------------------- stmts

struct ExprStmtS { ExprRef expr; };
struct BlockS { std::vector<StmtRef> stmts; };
struct SVoidS {};
struct ReturnS { std::optional<ExprRef> value; };
struct WhileS { ExprRef cond; StmtRef body; };
struct IfS { ExprRef cond; StmtRef thenBranch; StmtRef elseBranch; };
struct SetS { std::string name; ExprRef value; };
struct SwitchS {
  ExprRef scrutinee;
  std::vector<std::pair<ExprRef, StmtRef>> cases; // constant -> body
  StmtRef defaultBody;
};
struct LabelS { std::string name; StmtRef body; };
struct JumpS { std::string label; };
struct StoreS { ExprRef value; ExprRef addr; };

struct Stmt {
  std::variant<ExprStmtS, BlockS, SVoidS, ReturnS, WhileS, IfS, SetS, SwitchS,
               LabelS, JumpS, StoreS>
      node;

  template <class T> const T *as() const { return std::get_if<T>(&node); }
  template <class T> bool is() const { return std::holds_alternative<T>(node); }
};

// ---------------------------------------------------------------- functions

inline constexpr const char *kAttrAlwaysInline = "always-inline";
inline constexpr const char *kAttrPure = "pure";

struct Param {
  std::string name;
  TypeRef type;
};

struct Function {
  std::string name;
  std::vector<Param> params;
  TypeRef ret;
  StmtRef body;
  std::set<std::string> attributes;

  bool hasAttr(std::string_view a) const {
    return attributes.count(std::string(a)) != 0;
  }
};

struct Global {
  std::string name;
  TypeRef type;                     // pointee type of the global's address
  std::optional<double> scalarInit; // scalars only; arrays are zero-filled
  bool engineBuffer = false;        // storage preallocated in the engine arena
};

struct Module {
  std::string name;
  std::vector<Function> functions; // insertion order preserved
  std::vector<Global> globals;
  std::map<std::string, TypeRef> typeDefs;

  const Function *findFunction(std::string_view name) const;
  const Global *findGlobal(std::string_view name) const;
};

// Adds fn; DuplicateFunction unless replace is set.
void moduleAdd(Module &m, Function fn, bool replace = false);

// ---------------------------------------------------------------- builders

ExprRef var(std::string name);
ExprRef app(Rator rator, std::vector<ExprRef> args);
ExprRef let(std::vector<LetBinding> bindings, StmtRef body, ExprRef result);
ExprRef intLit(uint64_t bits, TypeRef ty, bool isSigned = false);
ExprRef ui64(uint64_t v);
ExprRef si64(int64_t v);
ExprRef ui32(uint32_t v);
ExprRef f32Lit(float v);
ExprRef f64Lit(double v);
ExprRef symLit(std::string text);
ExprRef boolLit(bool v);
ExprRef gep(ExprRef base, std::vector<ExprRef> indices);
ExprRef load(ExprRef addr);
ExprRef cast(CastKind kind, ExprRef arg, TypeRef to);
ExprRef primOp(Op op, std::vector<ExprRef> args);
ExprRef addrLit(std::string global, TypeRef ptrTy);

// Convenience forms.
ExprRef add1(ExprRef e);       // add(e, literal 1 of e's type)
ExprRef add(ExprRef a, ExprRef b);
ExprRef sub(ExprRef a, ExprRef b);
ExprRef mul(ExprRef a, ExprRef b);
ExprRef icmpUlt(ExprRef a, ExprRef b);
ExprRef icmpUle(ExprRef a, ExprRef b);
ExprRef icmpSlt(ExprRef a, ExprRef b);
ExprRef icmpEq(ExprRef a, ExprRef b);
// Loads the element at index i of a pointed-to array.
ExprRef arrayRef(ExprRef base, ExprRef index);

StmtRef exprStmt(ExprRef e);
StmtRef block(std::vector<StmtRef> stmts);
StmtRef svoid();
StmtRef ret(std::optional<ExprRef> value = std::nullopt);
StmtRef whileLoop(ExprRef cond, StmtRef body);
StmtRef ifStmt(ExprRef cond, StmtRef thenBranch, StmtRef elseBranch);
StmtRef set(std::string name, ExprRef value);
StmtRef switchStmt(ExprRef scrutinee,
                   std::vector<std::pair<ExprRef, StmtRef>> cases,
                   StmtRef defaultBody);
StmtRef label(std::string name, StmtRef body);
StmtRef jump(std::string target);
StmtRef store(ExprRef value, ExprRef addr);

// DuplicateParam when two params share a name.
Function function(std::string name, std::vector<Param> params, TypeRef ret,
                  StmtRef body, std::set<std::string> attributes = {});

// ---------------------------------------------------------------- utilities

bool exprEquals(const ExprRef &a, const ExprRef &b);
bool stmtEquals(const StmtRef &a, const StmtRef &b);

// Node counts, used for per-pass statistics.
size_t exprSize(const ExprRef &e);
size_t stmtSize(const StmtRef &s);
size_t functionSize(const Function &f);
size_t moduleSize(const Module &m);

// Deterministic s-expression dump, stable field ordering.
std::string dumpModule(const Module &m);
Sexpr moduleToSexpr(const Module &m);

} // namespace dslkit::hir
