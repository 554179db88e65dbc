#include "dslkit/hir.hpp"

#include <algorithm>

namespace dslkit::hir {

// ---------------------------------------------------------------- types

namespace {

TypeRef makeScalar(Type::Kind k, int width = 0) {
  auto t = std::make_shared<Type>();
  t->kind = k;
  t->width = width;
  return t;
}

uint64_t maskToWidth(uint64_t bits, int width) {
  if (width >= 64)
    return bits;
  return bits & ((uint64_t(1) << width) - 1);
}

} // namespace

TypeRef intType(int width) {
  switch (width) {
  case 1: return i1();
  case 8: return i8();
  case 16: return i16();
  case 32: return i32();
  case 64: return i64();
  default:
    raise(Err::ShapeError, "unsupported integer width " + std::to_string(width));
  }
}

TypeRef i1() { static TypeRef t = makeScalar(Type::Kind::Int, 1); return t; }
TypeRef i8() { static TypeRef t = makeScalar(Type::Kind::Int, 8); return t; }
TypeRef i16() { static TypeRef t = makeScalar(Type::Kind::Int, 16); return t; }
TypeRef i32() { static TypeRef t = makeScalar(Type::Kind::Int, 32); return t; }
TypeRef i64() { static TypeRef t = makeScalar(Type::Kind::Int, 64); return t; }
TypeRef f32() { static TypeRef t = makeScalar(Type::Kind::F32); return t; }
TypeRef f64() { static TypeRef t = makeScalar(Type::Kind::F64); return t; }
TypeRef voidType() { static TypeRef t = makeScalar(Type::Kind::Void); return t; }
TypeRef symType() { static TypeRef t = makeScalar(Type::Kind::Sym); return t; }
TypeRef hostBool() { static TypeRef t = makeScalar(Type::Kind::HostBool); return t; }

TypeRef ptr(TypeRef elem) {
  auto t = std::make_shared<Type>();
  t->kind = Type::Kind::Ptr;
  t->elem = std::move(elem);
  return t;
}

TypeRef array(TypeRef elem, std::optional<uint64_t> length) {
  if (length && *length == 0)
    raise(Err::ShapeError, "array length must be > 0");
  auto t = std::make_shared<Type>();
  t->kind = Type::Kind::Array;
  t->elem = std::move(elem);
  t->length = length;
  return t;
}

TypeRef structType(std::vector<std::pair<std::string, TypeRef>> fields) {
  for (size_t i = 0; i < fields.size(); i++)
    for (size_t j = i + 1; j < fields.size(); j++)
      if (fields[i].first == fields[j].first)
        raise(Err::DuplicateName, "struct field '" + fields[i].first + "'");
  auto t = std::make_shared<Type>();
  t->kind = Type::Kind::Struct;
  t->fields = std::move(fields);
  return t;
}

TypeRef fnType(std::vector<TypeRef> params, TypeRef ret) {
  auto t = std::make_shared<Type>();
  t->kind = Type::Kind::Fn;
  t->params = std::move(params);
  t->ret = std::move(ret);
  return t;
}

bool typeEquals(const TypeRef &a, const TypeRef &b) {
  if (a == b)
    return true;
  if (!a || !b || a->kind != b->kind)
    return false;
  switch (a->kind) {
  case Type::Kind::Int:
    return a->width == b->width;
  case Type::Kind::F32:
  case Type::Kind::F64:
  case Type::Kind::Void:
  case Type::Kind::Sym:
  case Type::Kind::HostBool:
    return true;
  case Type::Kind::Ptr:
    return typeEquals(a->elem, b->elem);
  case Type::Kind::Array:
    return a->length == b->length && typeEquals(a->elem, b->elem);
  case Type::Kind::Struct:
    if (a->fields.size() != b->fields.size())
      return false;
    for (size_t i = 0; i < a->fields.size(); i++)
      if (a->fields[i].first != b->fields[i].first ||
          !typeEquals(a->fields[i].second, b->fields[i].second))
        return false;
    return true;
  case Type::Kind::Fn:
    if (a->params.size() != b->params.size() || !typeEquals(a->ret, b->ret))
      return false;
    for (size_t i = 0; i < a->params.size(); i++)
      if (!typeEquals(a->params[i], b->params[i]))
        return false;
    return true;
  }
  return false;
}

Sexpr typeToSexpr(const TypeRef &t) {
  if (!t)
    return Sexpr::symbol("?");
  switch (t->kind) {
  case Type::Kind::Int:
    return Sexpr::symbol("i" + std::to_string(t->width));
  case Type::Kind::F32: return Sexpr::symbol("f32");
  case Type::Kind::F64: return Sexpr::symbol("f64");
  case Type::Kind::Void: return Sexpr::symbol("void");
  case Type::Kind::Sym: return Sexpr::symbol("sym");
  case Type::Kind::HostBool: return Sexpr::symbol("bool");
  case Type::Kind::Ptr:
    return Sexpr::list({Sexpr::symbol("ptr"), typeToSexpr(t->elem)});
  case Type::Kind::Array: {
    std::vector<Sexpr> items{Sexpr::symbol("arr"), typeToSexpr(t->elem)};
    if (t->length)
      items.push_back(Sexpr::integer(int64_t(*t->length)));
    return Sexpr::list(std::move(items));
  }
  case Type::Kind::Struct: {
    std::vector<Sexpr> items{Sexpr::symbol("struct")};
    for (auto &[n, ft] : t->fields)
      items.push_back(Sexpr::list({Sexpr::symbol(n), typeToSexpr(ft)}));
    return Sexpr::list(std::move(items));
  }
  case Type::Kind::Fn: {
    std::vector<Sexpr> ps;
    for (auto &p : t->params)
      ps.push_back(typeToSexpr(p));
    return Sexpr::list({Sexpr::symbol("fn"), Sexpr::list(std::move(ps)),
                        typeToSexpr(t->ret)});
  }
  }
  return Sexpr::symbol("?");
}

TypeRef typeFromSexpr(const Sexpr &e) {
  if (e.isSymbol()) {
    const std::string &s = e.text;
    if (s == "i1") return i1();
    if (s == "i8") return i8();
    if (s == "i16") return i16();
    if (s == "i32") return i32();
    if (s == "i64") return i64();
    if (s == "f32") return f32();
    if (s == "f64") return f64();
    if (s == "void") return voidType();
    if (s == "sym") return symType();
    if (s == "bool") return hostBool();
    throw ParseError("unknown type '" + s + "'", e.line, e.col);
  }
  std::string_view head = e.head();
  if (head == "ptr" && e.size() == 2)
    return ptr(typeFromSexpr(e.at(1)));
  if (head == "arr" && (e.size() == 2 || e.size() == 3)) {
    std::optional<uint64_t> len;
    if (e.size() == 3)
      len = uint64_t(e.at(2).asInt());
    return array(typeFromSexpr(e.at(1)), len);
  }
  if (head == "struct") {
    std::vector<std::pair<std::string, TypeRef>> fields;
    for (size_t i = 1; i < e.size(); i++) {
      const Sexpr &f = e.at(i);
      fields.emplace_back(f.at(0).asSymbol(), typeFromSexpr(f.at(1)));
    }
    return structType(std::move(fields));
  }
  if (head == "fn" && e.size() == 3) {
    std::vector<TypeRef> params;
    for (const Sexpr &p : e.at(1).items)
      params.push_back(typeFromSexpr(p));
    return fnType(std::move(params), typeFromSexpr(e.at(2)));
  }
  throw ParseError("bad type form", e.line, e.col);
}

std::string typeName(const TypeRef &t) { return writeSexpr(typeToSexpr(t)); }

// ---------------------------------------------------------------- rators

Rator defined(std::string name) { return {Rator::Kind::Defined, std::move(name), nullptr}; }
Rator intrinsic(std::string name, TypeRef fnTy) {
  return {Rator::Kind::Intrinsic, std::move(name), std::move(fnTy)};
}
Rator external(std::string name, TypeRef fnTy) {
  return {Rator::Kind::External, std::move(name), std::move(fnTy)};
}
Rator host(std::string name, TypeRef fnTy) {
  return {Rator::Kind::Host, std::move(name), std::move(fnTy)};
}

// ---------------------------------------------------------------- op tables

namespace {

struct OpInfo {
  Op op;
  const char *name;
};

constexpr OpInfo kOps[] = {
    {Op::Add, "add"}, {Op::Sub, "sub"}, {Op::SubNuw, "sub-nuw"}, {Op::Mul, "mul"},
    {Op::UDiv, "udiv"}, {Op::SDiv, "sdiv"}, {Op::URem, "urem"}, {Op::SRem, "srem"},
    {Op::And, "and"}, {Op::Or, "or"}, {Op::Xor, "xor"}, {Op::Shl, "shl"},
    {Op::LShr, "lshr"}, {Op::AShr, "ashr"}, {Op::FAdd, "fadd"}, {Op::FSub, "fsub"},
    {Op::FMul, "fmul"}, {Op::FDiv, "fdiv"}, {Op::FRem, "frem"},
    {Op::IcmpEq, "icmp-eq"}, {Op::IcmpNe, "icmp-ne"}, {Op::IcmpUlt, "icmp-ult"},
    {Op::IcmpUle, "icmp-ule"}, {Op::IcmpUgt, "icmp-ugt"}, {Op::IcmpSlt, "icmp-slt"},
    {Op::IcmpSle, "icmp-sle"}, {Op::FcmpOlt, "fcmp-olt"}, {Op::FcmpOle, "fcmp-ole"},
    {Op::FcmpOeq, "fcmp-oeq"},
};

} // namespace

const char *opName(Op op) {
  for (const OpInfo &info : kOps)
    if (info.op == op)
      return info.name;
  return "?";
}

std::optional<Op> opFromName(std::string_view name) {
  for (const OpInfo &info : kOps)
    if (name == info.name)
      return info.op;
  return std::nullopt;
}

bool opIsFloat(Op op) {
  switch (op) {
  case Op::FAdd: case Op::FSub: case Op::FMul: case Op::FDiv: case Op::FRem:
  case Op::FcmpOlt: case Op::FcmpOle: case Op::FcmpOeq:
    return true;
  default:
    return false;
  }
}

bool opIsCmp(Op op) {
  switch (op) {
  case Op::IcmpEq: case Op::IcmpNe: case Op::IcmpUlt: case Op::IcmpUle:
  case Op::IcmpUgt: case Op::IcmpSlt: case Op::IcmpSle:
  case Op::FcmpOlt: case Op::FcmpOle: case Op::FcmpOeq:
    return true;
  default:
    return false;
  }
}

bool opCanTrap(Op op) {
  switch (op) {
  case Op::UDiv: case Op::SDiv: case Op::URem: case Op::SRem: case Op::SubNuw:
    return true;
  default:
    return false;
  }
}

namespace {

struct CastInfo {
  CastKind kind;
  const char *name;
};

constexpr CastInfo kCasts[] = {
    {CastKind::UiToFp, "ui->fp"}, {CastKind::SiToFp, "si->fp"},
    {CastKind::FpToUi, "fp->ui"}, {CastKind::FpToSi, "fp->si"},
    {CastKind::Trunc, "trunc"},   {CastKind::Zext, "zext"},
    {CastKind::Sext, "sext"},     {CastKind::PtrCast, "ptrcast"},
};

} // namespace

const char *castName(CastKind k) {
  for (const CastInfo &info : kCasts)
    if (info.kind == k)
      return info.name;
  return "?";
}

std::optional<CastKind> castFromName(std::string_view name) {
  for (const CastInfo &info : kCasts)
    if (name == info.name)
      return info.kind;
  return std::nullopt;
}

// ---------------------------------------------------------------- module

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

void moduleAdd(Module &m, Function fn, bool replace) {
  for (Function &existing : m.functions) {
    if (existing.name == fn.name) {
      if (!replace)
        raise(Err::DuplicateFunction, "'" + fn.name + "'");
      existing = std::move(fn);
      return;
    }
  }
  m.functions.push_back(std::move(fn));
}

// ---------------------------------------------------------------- builders

namespace {

ExprRef mk(Expr e) { return std::make_shared<Expr>(std::move(e)); }
StmtRef mk(Stmt s) { return std::make_shared<Stmt>(std::move(s)); }

} // namespace

ExprRef var(std::string name) { return mk(Expr{VarE{std::move(name)}, nullptr}); }

ExprRef app(Rator rator, std::vector<ExprRef> args) {
  for (const ExprRef &a : args)
    if (!a)
      raise(Err::ShapeError, "null argument to app");
  return mk(Expr{AppE{std::move(rator), std::move(args)}, nullptr});
}

ExprRef let(std::vector<LetBinding> bindings, StmtRef body, ExprRef result) {
  if (!body || !result)
    raise(Err::ShapeError, "let needs body and result");
  return mk(Expr{LetE{std::move(bindings), std::move(body), std::move(result)}, nullptr});
}

ExprRef intLit(uint64_t bits, TypeRef ty, bool isSigned) {
  if (ty) {
    if (!ty->isInt())
      raise(Err::ShapeError, "integer literal with non-integer type");
    bits = maskToWidth(bits, ty->width);
  }
  return mk(Expr{IntLitE{bits, std::move(ty), isSigned}, nullptr});
}

ExprRef ui64(uint64_t v) { return intLit(v, i64(), false); }
ExprRef si64(int64_t v) { return intLit(uint64_t(v), i64(), true); }
ExprRef ui32(uint32_t v) { return intLit(v, i32(), false); }

ExprRef f32Lit(float v) { return mk(Expr{FloatLitE{double(v), f32()}, nullptr}); }
ExprRef f64Lit(double v) { return mk(Expr{FloatLitE{v, f64()}, nullptr}); }
ExprRef symLit(std::string text) { return mk(Expr{SymLitE{std::move(text)}, nullptr}); }
ExprRef boolLit(bool v) { return mk(Expr{BoolLitE{v}, nullptr}); }

ExprRef gep(ExprRef base, std::vector<ExprRef> indices) {
  if (!base || indices.empty())
    raise(Err::ShapeError, "gep needs a base and at least one index");
  return mk(Expr{GepE{std::move(base), std::move(indices)}, nullptr});
}

ExprRef load(ExprRef addr) {
  if (!addr)
    raise(Err::ShapeError, "load needs an address");
  return mk(Expr{LoadE{std::move(addr)}, nullptr});
}

ExprRef cast(CastKind kind, ExprRef arg, TypeRef to) {
  if (!arg || !to)
    raise(Err::ShapeError, "cast needs an argument and a target type");
  return mk(Expr{CastE{kind, std::move(arg), std::move(to)}, nullptr});
}

ExprRef primOp(Op op, std::vector<ExprRef> args) {
  if (args.size() != 2)
    raise(Err::ShapeError, std::string("binary op '") + opName(op) + "' wants 2 args");
  return mk(Expr{PrimOpE{op, std::move(args)}, nullptr});
}

ExprRef addrLit(std::string global, TypeRef ptrTy) {
  if (!ptrTy || !ptrTy->isPtr())
    raise(Err::ShapeError, "addr literal needs a pointer type");
  return mk(Expr{AddrLitE{std::move(global), std::move(ptrTy)}, nullptr});
}

ExprRef add1(ExprRef e) {
  // The literal's width is adopted from the sibling operand at typecheck.
  return primOp(Op::Add, {std::move(e), intLit(1, nullptr, false)});
}

ExprRef add(ExprRef a, ExprRef b) { return primOp(Op::Add, {std::move(a), std::move(b)}); }
ExprRef sub(ExprRef a, ExprRef b) { return primOp(Op::Sub, {std::move(a), std::move(b)}); }
ExprRef mul(ExprRef a, ExprRef b) { return primOp(Op::Mul, {std::move(a), std::move(b)}); }
ExprRef icmpUlt(ExprRef a, ExprRef b) { return primOp(Op::IcmpUlt, {std::move(a), std::move(b)}); }
ExprRef icmpUle(ExprRef a, ExprRef b) { return primOp(Op::IcmpUle, {std::move(a), std::move(b)}); }
ExprRef icmpSlt(ExprRef a, ExprRef b) { return primOp(Op::IcmpSlt, {std::move(a), std::move(b)}); }
ExprRef icmpEq(ExprRef a, ExprRef b) { return primOp(Op::IcmpEq, {std::move(a), std::move(b)}); }

ExprRef arrayRef(ExprRef base, ExprRef index) {
  return load(gep(std::move(base), {std::move(index)}));
}

StmtRef exprStmt(ExprRef e) {
  if (!e)
    raise(Err::ShapeError, "expression statement needs an expression");
  return mk(Stmt{ExprStmtS{std::move(e)}});
}

StmtRef block(std::vector<StmtRef> stmts) {
  for (const StmtRef &s : stmts)
    if (!s)
      raise(Err::ShapeError, "null statement in block");
  return mk(Stmt{BlockS{std::move(stmts)}});
}

StmtRef svoid() { return mk(Stmt{SVoidS{}}); }

StmtRef ret(std::optional<ExprRef> value) { return mk(Stmt{ReturnS{std::move(value)}}); }

StmtRef whileLoop(ExprRef cond, StmtRef body) {
  if (!cond || !body)
    raise(Err::ShapeError, "while needs condition and body");
  return mk(Stmt{WhileS{std::move(cond), std::move(body)}});
}

StmtRef ifStmt(ExprRef cond, StmtRef thenBranch, StmtRef elseBranch) {
  if (!cond || !thenBranch || !elseBranch)
    raise(Err::ShapeError, "if needs condition and both branches");
  return mk(Stmt{IfS{std::move(cond), std::move(thenBranch), std::move(elseBranch)}});
}

StmtRef set(std::string name, ExprRef value) {
  if (!value)
    raise(Err::ShapeError, "set needs a value");
  return mk(Stmt{SetS{std::move(name), std::move(value)}});
}

StmtRef switchStmt(ExprRef scrutinee,
                   std::vector<std::pair<ExprRef, StmtRef>> cases,
                   StmtRef defaultBody) {
  if (!scrutinee || !defaultBody)
    raise(Err::ShapeError, "switch needs scrutinee and default");
  for (auto &[c, s] : cases)
    if (!c || !s)
      raise(Err::ShapeError, "switch case needs constant and body");
  return mk(Stmt{SwitchS{std::move(scrutinee), std::move(cases), std::move(defaultBody)}});
}

StmtRef label(std::string name, StmtRef body) {
  if (!body)
    raise(Err::ShapeError, "label needs a body");
  return mk(Stmt{LabelS{std::move(name), std::move(body)}});
}

StmtRef jump(std::string target) { return mk(Stmt{JumpS{std::move(target)}}); }

StmtRef store(ExprRef value, ExprRef addr) {
  if (!value || !addr)
    raise(Err::ShapeError, "store needs value and address");
  return mk(Stmt{StoreS{std::move(value), std::move(addr)}});
}

Function function(std::string name, std::vector<Param> params, TypeRef ret,
                  StmtRef body, std::set<std::string> attributes) {
  for (size_t i = 0; i < params.size(); i++)
    for (size_t j = i + 1; j < params.size(); j++)
      if (params[i].name == params[j].name)
        raise(Err::DuplicateParam, "'" + params[i].name + "' in " + name);
  Function f;
  f.name = std::move(name);
  f.params = std::move(params);
  f.ret = std::move(ret);
  f.body = std::move(body);
  f.attributes = std::move(attributes);
  return f;
}

// ---------------------------------------------------------------- equality

bool exprEquals(const ExprRef &a, const ExprRef &b) {
  if (a == b)
    return true;
  if (!a || !b || a->node.index() != b->node.index())
    return false;
  if (!((a->type == nullptr) == (b->type == nullptr)))
    return false;
  if (a->type && !typeEquals(a->type, b->type))
    return false;
  if (auto *va = a->as<VarE>())
    return va->name == b->as<VarE>()->name;
  if (auto *aa = a->as<AppE>()) {
    auto *ab = b->as<AppE>();
    if (aa->rator.kind != ab->rator.kind || aa->rator.name != ab->rator.name ||
        aa->args.size() != ab->args.size())
      return false;
    if ((aa->rator.fnTy == nullptr) != (ab->rator.fnTy == nullptr))
      return false;
    if (aa->rator.fnTy && !typeEquals(aa->rator.fnTy, ab->rator.fnTy))
      return false;
    for (size_t i = 0; i < aa->args.size(); i++)
      if (!exprEquals(aa->args[i], ab->args[i]))
        return false;
    return true;
  }
  if (auto *la = a->as<LetE>()) {
    auto *lb = b->as<LetE>();
    if (la->bindings.size() != lb->bindings.size())
      return false;
    for (size_t i = 0; i < la->bindings.size(); i++) {
      const LetBinding &x = la->bindings[i], &y = lb->bindings[i];
      if (x.name != y.name || !typeEquals(x.type, y.type) ||
          x.init.has_value() != y.init.has_value())
        return false;
      if (x.init && !exprEquals(*x.init, *y.init))
        return false;
    }
    return stmtEquals(la->body, lb->body) && exprEquals(la->result, lb->result);
  }
  if (auto *ia = a->as<IntLitE>()) {
    auto *ib = b->as<IntLitE>();
    return ia->bits == ib->bits && ia->isSigned == ib->isSigned &&
           ((ia->ty == nullptr) == (ib->ty == nullptr)) &&
           (!ia->ty || typeEquals(ia->ty, ib->ty));
  }
  if (auto *fa = a->as<FloatLitE>()) {
    auto *fb = b->as<FloatLitE>();
    return fa->value == fb->value && typeEquals(fa->ty, fb->ty);
  }
  if (auto *sa = a->as<SymLitE>())
    return sa->text == b->as<SymLitE>()->text;
  if (auto *ba = a->as<BoolLitE>())
    return ba->value == b->as<BoolLitE>()->value;
  if (auto *ga = a->as<GepE>()) {
    auto *gb = b->as<GepE>();
    if (!exprEquals(ga->base, gb->base) || ga->indices.size() != gb->indices.size())
      return false;
    for (size_t i = 0; i < ga->indices.size(); i++)
      if (!exprEquals(ga->indices[i], gb->indices[i]))
        return false;
    return true;
  }
  if (auto *la = a->as<LoadE>())
    return exprEquals(la->addr, b->as<LoadE>()->addr);
  if (auto *ca = a->as<CastE>()) {
    auto *cb = b->as<CastE>();
    return ca->kind == cb->kind && typeEquals(ca->to, cb->to) &&
           exprEquals(ca->arg, cb->arg);
  }
  if (auto *pa = a->as<PrimOpE>()) {
    auto *pb = b->as<PrimOpE>();
    if (pa->op != pb->op || pa->args.size() != pb->args.size())
      return false;
    for (size_t i = 0; i < pa->args.size(); i++)
      if (!exprEquals(pa->args[i], pb->args[i]))
        return false;
    return true;
  }
  if (auto *aa = a->as<AddrLitE>()) {
    auto *ab = b->as<AddrLitE>();
    return aa->global == ab->global && typeEquals(aa->ty, ab->ty);
  }
  return false;
}

bool stmtEquals(const StmtRef &a, const StmtRef &b) {
  if (a == b)
    return true;
  if (!a || !b || a->node.index() != b->node.index())
    return false;
  if (auto *ea = a->as<ExprStmtS>())
    return exprEquals(ea->expr, b->as<ExprStmtS>()->expr);
  if (auto *ba = a->as<BlockS>()) {
    auto *bb = b->as<BlockS>();
    if (ba->stmts.size() != bb->stmts.size())
      return false;
    for (size_t i = 0; i < ba->stmts.size(); i++)
      if (!stmtEquals(ba->stmts[i], bb->stmts[i]))
        return false;
    return true;
  }
  if (a->is<SVoidS>())
    return true;
  if (auto *ra = a->as<ReturnS>()) {
    auto *rb = b->as<ReturnS>();
    if (ra->value.has_value() != rb->value.has_value())
      return false;
    return !ra->value || exprEquals(*ra->value, *rb->value);
  }
  if (auto *wa = a->as<WhileS>()) {
    auto *wb = b->as<WhileS>();
    return exprEquals(wa->cond, wb->cond) && stmtEquals(wa->body, wb->body);
  }
  if (auto *ia = a->as<IfS>()) {
    auto *ib = b->as<IfS>();
    return exprEquals(ia->cond, ib->cond) &&
           stmtEquals(ia->thenBranch, ib->thenBranch) &&
           stmtEquals(ia->elseBranch, ib->elseBranch);
  }
  if (auto *sa = a->as<SetS>()) {
    auto *sb = b->as<SetS>();
    return sa->name == sb->name && exprEquals(sa->value, sb->value);
  }
  if (auto *wa = a->as<SwitchS>()) {
    auto *wb = b->as<SwitchS>();
    if (!exprEquals(wa->scrutinee, wb->scrutinee) || wa->cases.size() != wb->cases.size())
      return false;
    for (size_t i = 0; i < wa->cases.size(); i++)
      if (!exprEquals(wa->cases[i].first, wb->cases[i].first) ||
          !stmtEquals(wa->cases[i].second, wb->cases[i].second))
        return false;
    return stmtEquals(wa->defaultBody, wb->defaultBody);
  }
  if (auto *la = a->as<LabelS>()) {
    auto *lb = b->as<LabelS>();
    return la->name == lb->name && stmtEquals(la->body, lb->body);
  }
  if (auto *ja = a->as<JumpS>())
    return ja->label == b->as<JumpS>()->label;
  if (auto *ta = a->as<StoreS>()) {
    auto *tb = b->as<StoreS>();
    return exprEquals(ta->value, tb->value) && exprEquals(ta->addr, tb->addr);
  }
  return false;
}

// ---------------------------------------------------------------- sizing

size_t exprSize(const ExprRef &e) {
  if (!e)
    return 0;
  size_t n = 1;
  if (auto *a = e->as<AppE>()) {
    for (const ExprRef &x : a->args)
      n += exprSize(x);
  } else if (auto *l = e->as<LetE>()) {
    for (const LetBinding &b : l->bindings)
      if (b.init)
        n += exprSize(*b.init);
    n += stmtSize(l->body) + exprSize(l->result);
  } else if (auto *g = e->as<GepE>()) {
    n += exprSize(g->base);
    for (const ExprRef &x : g->indices)
      n += exprSize(x);
  } else if (auto *l = e->as<LoadE>()) {
    n += exprSize(l->addr);
  } else if (auto *c = e->as<CastE>()) {
    n += exprSize(c->arg);
  } else if (auto *p = e->as<PrimOpE>()) {
    for (const ExprRef &x : p->args)
      n += exprSize(x);
  }
  return n;
}

size_t stmtSize(const StmtRef &s) {
  if (!s)
    return 0;
  size_t n = 1;
  if (auto *e = s->as<ExprStmtS>()) {
    n += exprSize(e->expr);
  } else if (auto *b = s->as<BlockS>()) {
    for (const StmtRef &x : b->stmts)
      n += stmtSize(x);
  } else if (auto *r = s->as<ReturnS>()) {
    if (r->value)
      n += exprSize(*r->value);
  } else if (auto *w = s->as<WhileS>()) {
    n += exprSize(w->cond) + stmtSize(w->body);
  } else if (auto *i = s->as<IfS>()) {
    n += exprSize(i->cond) + stmtSize(i->thenBranch) + stmtSize(i->elseBranch);
  } else if (auto *t = s->as<SetS>()) {
    n += exprSize(t->value);
  } else if (auto *w = s->as<SwitchS>()) {
    n += exprSize(w->scrutinee);
    for (auto &[c, body] : w->cases)
      n += exprSize(c) + stmtSize(body);
    n += stmtSize(w->defaultBody);
  } else if (auto *l = s->as<LabelS>()) {
    n += stmtSize(l->body);
  } else if (auto *t = s->as<StoreS>()) {
    n += exprSize(t->value) + exprSize(t->addr);
  }
  return n;
}

size_t functionSize(const Function &f) { return stmtSize(f.body); }

size_t moduleSize(const Module &m) {
  size_t n = 0;
  for (const Function &f : m.functions)
    n += functionSize(f);
  return n;
}

// ---------------------------------------------------------------- dump

namespace {

Sexpr rawInt(std::string lexeme) {
  Sexpr e;
  e.kind = Sexpr::Kind::Int;
  e.text = std::move(lexeme);
  return e;
}

Sexpr intLitToSexpr(const IntLitE &lit) {
  std::string lex;
  if (lit.isSigned) {
    int64_t v = int64_t(lit.bits);
    if (lit.ty && lit.ty->width < 64) {
      uint64_t sign = uint64_t(1) << (lit.ty->width - 1);
      v = int64_t((lit.bits ^ sign)) - int64_t(sign);
    }
    lex = std::to_string(v);
  } else {
    lex = std::to_string(lit.bits);
  }
  return rawInt(std::move(lex));
}

Sexpr ratorToSexpr(const Rator &r) {
  const char *kind = "defined";
  switch (r.kind) {
  case Rator::Kind::Defined: kind = "defined"; break;
  case Rator::Kind::Intrinsic: kind = "intrinsic"; break;
  case Rator::Kind::External: kind = "external"; break;
  case Rator::Kind::Host: kind = "host"; break;
  }
  std::vector<Sexpr> items{Sexpr::symbol(kind), Sexpr::symbol(r.name)};
  if (r.fnTy)
    items.push_back(typeToSexpr(r.fnTy));
  return Sexpr::list(std::move(items));
}

Sexpr exprToSexpr(const ExprRef &e);
Sexpr stmtToSexpr(const StmtRef &s);

Sexpr exprToSexpr(const ExprRef &e) {
  if (auto *v = e->as<VarE>())
    return Sexpr::list({Sexpr::symbol("var"), Sexpr::symbol(v->name)});
  if (auto *a = e->as<AppE>()) {
    std::vector<Sexpr> items{Sexpr::symbol("app"), ratorToSexpr(a->rator)};
    for (const ExprRef &x : a->args)
      items.push_back(exprToSexpr(x));
    return Sexpr::list(std::move(items));
  }
  if (auto *l = e->as<LetE>()) {
    std::vector<Sexpr> bs;
    for (const LetBinding &b : l->bindings) {
      std::vector<Sexpr> one{Sexpr::symbol(b.name),
                             b.init ? exprToSexpr(*b.init) : Sexpr::symbol("_"),
                             typeToSexpr(b.type)};
      bs.push_back(Sexpr::list(std::move(one)));
    }
    return Sexpr::list({Sexpr::symbol("let"), Sexpr::list(std::move(bs)),
                        stmtToSexpr(l->body), exprToSexpr(l->result)});
  }
  if (auto *i = e->as<IntLitE>())
    return Sexpr::list({Sexpr::symbol("int"), intLitToSexpr(*i), typeToSexpr(i->ty)});
  if (auto *f = e->as<FloatLitE>()) {
    Sexpr lit;
    lit.kind = Sexpr::Kind::Float;
    lit.text = (f->ty && f->ty->kind == Type::Kind::F32)
                   ? formatFloat(float(f->value))
                   : formatDouble(f->value);
    return Sexpr::list({Sexpr::symbol("float"), lit, typeToSexpr(f->ty)});
  }
  if (auto *s = e->as<SymLitE>())
    return Sexpr::list({Sexpr::symbol("sym"), Sexpr::symbol(s->text)});
  if (auto *b = e->as<BoolLitE>())
    return Sexpr::list({Sexpr::symbol("bool"), Sexpr::boolean_(b->value)});
  if (auto *g = e->as<GepE>()) {
    std::vector<Sexpr> items{Sexpr::symbol("gep"), exprToSexpr(g->base)};
    for (const ExprRef &x : g->indices)
      items.push_back(exprToSexpr(x));
    return Sexpr::list(std::move(items));
  }
  if (auto *l = e->as<LoadE>())
    return Sexpr::list({Sexpr::symbol("load"), exprToSexpr(l->addr)});
  if (auto *c = e->as<CastE>())
    return Sexpr::list({Sexpr::symbol("cast"), Sexpr::symbol(castName(c->kind)),
                        exprToSexpr(c->arg), typeToSexpr(c->to)});
  if (auto *p = e->as<PrimOpE>()) {
    std::vector<Sexpr> items{Sexpr::symbol(opName(p->op))};
    for (const ExprRef &x : p->args)
      items.push_back(exprToSexpr(x));
    return Sexpr::list(std::move(items));
  }
  if (auto *a = e->as<AddrLitE>())
    return Sexpr::list({Sexpr::symbol("addr"), Sexpr::symbol(a->global),
                        typeToSexpr(a->ty)});
  return Sexpr::symbol("?");
}

Sexpr stmtToSexpr(const StmtRef &s) {
  if (auto *e = s->as<ExprStmtS>())
    return Sexpr::list({Sexpr::symbol("expr"), exprToSexpr(e->expr)});
  if (auto *b = s->as<BlockS>()) {
    std::vector<Sexpr> items{Sexpr::symbol("block")};
    for (const StmtRef &x : b->stmts)
      items.push_back(stmtToSexpr(x));
    return Sexpr::list(std::move(items));
  }
  if (s->is<SVoidS>())
    return Sexpr::list({Sexpr::symbol("svoid")});
  if (auto *r = s->as<ReturnS>()) {
    std::vector<Sexpr> items{Sexpr::symbol("return")};
    if (r->value)
      items.push_back(exprToSexpr(*r->value));
    return Sexpr::list(std::move(items));
  }
  if (auto *w = s->as<WhileS>())
    return Sexpr::list({Sexpr::symbol("while"), exprToSexpr(w->cond),
                        stmtToSexpr(w->body)});
  if (auto *i = s->as<IfS>())
    return Sexpr::list({Sexpr::symbol("if"), exprToSexpr(i->cond),
                        stmtToSexpr(i->thenBranch), stmtToSexpr(i->elseBranch)});
  if (auto *t = s->as<SetS>())
    return Sexpr::list({Sexpr::symbol("set!"), Sexpr::symbol(t->name),
                        exprToSexpr(t->value)});
  if (auto *w = s->as<SwitchS>()) {
    std::vector<Sexpr> cases;
    for (auto &[c, body] : w->cases)
      cases.push_back(Sexpr::list({exprToSexpr(c), stmtToSexpr(body)}));
    return Sexpr::list({Sexpr::symbol("switch"), exprToSexpr(w->scrutinee),
                        Sexpr::list(std::move(cases)), stmtToSexpr(w->defaultBody)});
  }
  if (auto *l = s->as<LabelS>())
    return Sexpr::list({Sexpr::symbol("label"), Sexpr::symbol(l->name),
                        stmtToSexpr(l->body)});
  if (auto *j = s->as<JumpS>())
    return Sexpr::list({Sexpr::symbol("jump"), Sexpr::symbol(j->label)});
  if (auto *t = s->as<StoreS>())
    return Sexpr::list({Sexpr::symbol("store!"), exprToSexpr(t->value),
                        exprToSexpr(t->addr)});
  return Sexpr::symbol("?");
}

} // namespace

Sexpr moduleToSexpr(const Module &m) {
  std::vector<Sexpr> items{Sexpr::symbol("module"), Sexpr::symbol(m.name)};
  for (const Global &g : m.globals) {
    std::vector<Sexpr> gi{Sexpr::symbol("global"), Sexpr::symbol(g.name),
                          typeToSexpr(g.type)};
    if (g.scalarInit)
      gi.push_back(Sexpr::floating(*g.scalarInit));
    if (g.engineBuffer)
      gi.push_back(Sexpr::symbol("engine-buffer"));
    items.push_back(Sexpr::list(std::move(gi)));
  }
  for (const auto &[name, ty] : m.typeDefs)
    items.push_back(Sexpr::list(
        {Sexpr::symbol("type"), Sexpr::symbol(name), typeToSexpr(ty)}));
  for (const Function &f : m.functions) {
    std::vector<Sexpr> ps;
    for (const Param &p : f.params)
      ps.push_back(Sexpr::list({Sexpr::symbol(p.name), typeToSexpr(p.type)}));
    std::vector<Sexpr> attrs;
    for (const std::string &a : f.attributes)
      attrs.push_back(Sexpr::symbol(a));
    items.push_back(Sexpr::list({Sexpr::symbol("fn"), Sexpr::symbol(f.name),
                                 Sexpr::list(std::move(ps)), typeToSexpr(f.ret),
                                 Sexpr::list(std::move(attrs)),
                                 stmtToSexpr(f.body)}));
  }
  return Sexpr::list(std::move(items));
}

std::string dumpModule(const Module &m) {
  // One function per line keeps diffs reviewable and the bytes deterministic.
  Sexpr e = moduleToSexpr(m);
  std::string out = "(module " + m.name;
  for (size_t i = 2; i < e.items.size(); i++) {
    out += "\n  ";
    writeSexpr(e.items[i], out);
  }
  out += ")\n";
  return out;
}

} // namespace dslkit::hir
