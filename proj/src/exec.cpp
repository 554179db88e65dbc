#include "dslkit/exec.hpp"

#include "dslkit/arith.hpp"
#include "dslkit/intrinsics.hpp"
#include "dslkit/lower.hpp"

#include <chrono>
#include <cmath>
#include <cstring>

namespace dslkit::exec {

using hir::Type;
using lir::ICode;
using lir::Instr;

// ---------------------------------------------------------------- values

Value Value::intV(int width, uint64_t bits) {
  Value v;
  v.kind = Kind::Int;
  v.width = uint8_t(width);
  v.bits = arith::maskW(bits, width);
  return v;
}

Value Value::f32V(float x) {
  Value v;
  v.kind = Kind::F32;
  v.f32v = x;
  return v;
}

Value Value::f64V(double x) {
  Value v;
  v.kind = Kind::F64;
  v.f64v = x;
  return v;
}

Value Value::ptrV(uint32_t buf, uint64_t off) {
  Value v;
  v.kind = Kind::Ptr;
  v.buf = buf;
  v.off = off;
  return v;
}

Value Value::symV(uint32_t id) {
  Value v;
  v.kind = Kind::Sym;
  v.sym = id;
  return v;
}

Value Value::boolV(bool b) {
  Value v;
  v.kind = Kind::Bool;
  v.b = b;
  return v;
}

Value Value::unit() { return {}; }

// ---------------------------------------------------------------- session

Session::Session() {
  arena_.reserve(kMaxBuffers);
  symbols_.reserve(kMaxSymbols);
  opaques_.reserve(kMaxOpaques);
  arena_.push_back({{}, nullptr, true, false}); // id 0: the null buffer
  arenaSize_.store(1, std::memory_order_release);
}

uint32_t Session::newBuffer(uint64_t sizeBytes, TypeRef elem, bool typed) {
  std::lock_guard<std::mutex> lock(growth_);
  if (arena_.size() == kMaxBuffers)
    raise(Err::InternalError, "arena buffer limit reached");
  arena_.push_back({std::vector<uint8_t>(sizeBytes, 0), std::move(elem), true, typed});
  uint32_t id = uint32_t(arena_.size() - 1);
  arenaSize_.store(id + 1, std::memory_order_release);
  return id;
}

void Session::freeBuffer(uint32_t id, const char *fn, const char *block, int instr) {
  if (id == 0 || !bufferAlive(id))
    throw Trap(TrapKind::UseAfterFree, fn, block, instr);
  arena_[id].alive = false;
  arena_[id].bytes.clear();
  arena_[id].bytes.shrink_to_fit();
}

std::vector<uint8_t> &Session::bufferBytes(uint32_t id) { return arena_[id].bytes; }
bool Session::bufferAlive(uint32_t id) const {
  return id < arenaSize_.load(std::memory_order_acquire) && arena_[id].alive;
}
uint64_t Session::bufferSize(uint32_t id) const { return arena_[id].bytes.size(); }
TypeRef Session::bufferElem(uint32_t id) const { return arena_[id].elem; }

uint32_t Session::intern(const std::string &text) {
  std::lock_guard<std::mutex> lock(growth_);
  auto it = symIndex_.find(text);
  if (it != symIndex_.end())
    return it->second;
  if (symbols_.size() == kMaxSymbols)
    raise(Err::InternalError, "symbol limit reached");
  uint32_t id = uint32_t(symbols_.size());
  symbols_.push_back(text);
  symIndex_.emplace(text, id);
  symbolCount_.store(id + 1, std::memory_order_release);
  return id;
}

const std::string &Session::symText(uint32_t id) const { return symbols_.at(id); }

OpaqueHandle Session::wrapOpaque(std::any value) {
  std::lock_guard<std::mutex> lock(growth_);
  if (opaques_.size() == kMaxOpaques)
    raise(Err::InternalError, "opaque handle limit reached");
  opaques_.push_back(std::move(value));
  return {uint32_t(opaques_.size() - 1)};
}

std::any &Session::opaqueValue(OpaqueHandle h) { return opaques_.at(h.id); }

uint32_t Session::opaqueSym(OpaqueHandle h) {
  return intern("#opaque:" + std::to_string(h.id));
}

std::optional<OpaqueHandle> Session::opaqueOfSym(uint32_t sym) const {
  if (sym >= symbolCount_.load(std::memory_order_acquire))
    return std::nullopt;
  const std::string &t = symbols_[sym];
  if (t.rfind("#opaque:", 0) != 0)
    return std::nullopt;
  return OpaqueHandle{uint32_t(std::stoul(t.substr(8)))};
}

void Session::registerHostFn(const std::string &name, TypeRef fnTy, HostFn fn,
                             bool replace) {
  if (!replace && registry_.count(name))
    raise(Err::DuplicateRegistration, "'" + name + "'");
  registry_[name] = {std::move(fnTy), std::move(fn)};
}

const HostEntry *Session::findHostFn(const std::string &name) const {
  auto it = registry_.find(name);
  return it == registry_.end() ? nullptr : &it->second;
}

void Session::registerNamedBuffer(const std::string &name, uint32_t id) {
  std::lock_guard<std::mutex> lock(growth_);
  namedBuffers_[name] = id;
}

std::optional<uint32_t> Session::namedBuffer(const std::string &name) const {
  auto it = namedBuffers_.find(name);
  if (it == namedBuffers_.end())
    return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------- memory

namespace {

uint64_t scalarSize(const TypeRef &t) {
  switch (t->kind) {
  case Type::Kind::Int: return t->width <= 8 ? 1 : uint64_t(t->width) / 8;
  case Type::Kind::HostBool: return 1;
  case Type::Kind::F32: return 4;
  case Type::Kind::F64:
  case Type::Kind::Ptr:
  case Type::Kind::Sym: return 8;
  default:
    raise(Err::InternalError, "non-scalar memory access of " + hir::typeName(t));
  }
}

// Pointers live in memory as (buf << 40) | offset.
constexpr uint64_t kPtrOffMask = (uint64_t(1) << 40) - 1;

uint64_t encodePtr(const Value &v) { return (uint64_t(v.buf) << 40) | (v.off & kPtrOffMask); }
Value decodePtr(uint64_t bits) { return Value::ptrV(uint32_t(bits >> 40), bits & kPtrOffMask); }

struct Coords {
  const char *fn = "?";
  const char *block = "?";
  int instr = -1;
};

struct MemAccess {
  Session &ses;

  void check(const Value &p, uint64_t size, bool isStore, const Coords &c) {
    TrapKind oob = isStore ? TrapKind::OobStore : TrapKind::OobLoad;
    if (p.kind != Value::Kind::Ptr || p.buf == 0)
      throw Trap(oob, c.fn, c.block, c.instr);
    if (!ses.bufferAlive(p.buf))
      throw Trap(TrapKind::UseAfterFree, c.fn, c.block, c.instr);
    if (p.off + size > ses.bufferSize(p.buf))
      throw Trap(oob, c.fn, c.block, c.instr);
    TypeRef tag = ses.bufferElem(p.buf);
    if (tag && scalarSizeOf(tag) != 0 && scalarSizeOf(tag) != size &&
        size != 0) {
      // Width tag mismatch counts as an out-of-bounds class fault.
      throw Trap(oob, c.fn, c.block, c.instr);
    }
  }

  static uint64_t scalarSizeOf(const TypeRef &t) {
    switch (t->kind) {
    case Type::Kind::Int: return t->width <= 8 ? 1 : uint64_t(t->width) / 8;
    case Type::Kind::HostBool: return 1;
    case Type::Kind::F32: return 4;
    case Type::Kind::F64:
    case Type::Kind::Ptr:
    case Type::Kind::Sym: return 8;
    default: return 0; // aggregates: element accesses go through geps
    }
  }

  uint64_t readRaw(const Value &p, uint64_t size) {
    const auto &bytes = ses.bufferBytes(p.buf);
    uint64_t v = 0;
    std::memcpy(&v, bytes.data() + p.off, size); // little-endian host assumed
    return v;
  }

  void writeRaw(const Value &p, uint64_t size, uint64_t v) {
    auto &bytes = ses.bufferBytes(p.buf);
    std::memcpy(bytes.data() + p.off, &v, size);
  }

  Value read(const Value &p, const TypeRef &t, const Coords &c) {
    uint64_t size = scalarSize(t);
    check(p, size, false, c);
    uint64_t raw = readRaw(p, size);
    switch (t->kind) {
    case Type::Kind::Int: return Value::intV(t->width, raw);
    case Type::Kind::HostBool: return Value::boolV(raw != 0);
    case Type::Kind::F32: {
      float f;
      uint32_t u = uint32_t(raw);
      std::memcpy(&f, &u, 4);
      return Value::f32V(f);
    }
    case Type::Kind::F64: {
      double d;
      std::memcpy(&d, &raw, 8);
      return Value::f64V(d);
    }
    case Type::Kind::Ptr: return decodePtr(raw);
    case Type::Kind::Sym: return Value::symV(uint32_t(raw));
    default:
      raise(Err::InternalError, "bad load type");
    }
  }

  void write(const Value &p, const Value &v, const TypeRef &t, const Coords &c) {
    uint64_t size = scalarSize(t);
    check(p, size, true, c);
    uint64_t raw = 0;
    switch (t->kind) {
    case Type::Kind::Int: raw = arith::maskW(v.bits, t->width); break;
    case Type::Kind::HostBool: raw = v.b ? 1 : 0; break;
    case Type::Kind::F32: {
      uint32_t u;
      std::memcpy(&u, &v.f32v, 4);
      raw = u;
      break;
    }
    case Type::Kind::F64: std::memcpy(&raw, &v.f64v, 8); break;
    case Type::Kind::Ptr: raw = encodePtr(v); break;
    case Type::Kind::Sym: raw = v.sym; break;
    default:
      raise(Err::InternalError, "bad store type");
    }
    writeRaw(p, size, raw);
  }
};

// ---------------------------------------------------------------- interp

struct Interp {
  Session &ses;
  const lir::Module &mod;
  const std::map<std::string, uint32_t> &globals;
  ExecStats &stats;
  bool checkNuw;
  int depth = 0;

  Value constValue(const lir::ConstVal &c, const Coords &coords) {
    using K = lir::ConstVal::Kind;
    switch (c.kind) {
    case K::Int: return Value::intV(c.type->width, c.bits);
    case K::Float:
      return c.type->kind == Type::Kind::F32 ? Value::f32V(float(c.fval))
                                             : Value::f64V(c.fval);
    case K::Sym: return Value::symV(ses.intern(c.text));
    case K::Bool: return Value::boolV(c.b);
    case K::Null: return Value::ptrV(0, 0);
    case K::GlobalAddr: {
      auto it = globals.find(c.text);
      if (it == globals.end())
        raise(Err::InternalError, "unresolved global '" + c.text + "'");
      return Value::ptrV(it->second, 0);
    }
    }
    return Value::unit();
  }

  Value binop(const Instr &in, const Value &a, const Value &b, const Coords &c) {
    if (a.kind == Value::Kind::Int) {
      arith::IntResult r = arith::evalIntBinop(in.op, a.width, a.bits, b.bits);
      if (r.status == arith::IntResult::Status::DivZero)
        throw Trap(TrapKind::DivByZero, c.fn, c.block, c.instr);
      if (r.status == arith::IntResult::Status::NuwWrap && checkNuw)
        throw Trap(TrapKind::NuwOverflow, c.fn, c.block, c.instr);
      return Value::intV(a.width, r.bits);
    }
    if (a.kind == Value::Kind::F32)
      return Value::f32V(arith::evalF32Binop(in.op, a.f32v, b.f32v));
    return Value::f64V(arith::evalF64Binop(in.op, a.f64v, b.f64v));
  }

  Value cmp(const Instr &in, const Value &a, const Value &b) {
    bool r;
    if (a.kind == Value::Kind::Int)
      r = arith::evalIntCmp(in.op, a.width, a.bits, b.bits);
    else if (a.kind == Value::Kind::F32)
      r = arith::evalFCmp(in.op, double(a.f32v), double(b.f32v));
    else
      r = arith::evalFCmp(in.op, a.f64v, b.f64v);
    return Value::intV(1, r ? 1 : 0);
  }

  Value castV(const Instr &in, const Value &a) {
    using CK = hir::CastKind;
    const TypeRef &to = in.type;
    switch (in.castKind) {
    case CK::UiToFp: {
      double d = arith::uiToFp(a.bits, a.width);
      return to->kind == Type::Kind::F32 ? Value::f32V(float(d)) : Value::f64V(d);
    }
    case CK::SiToFp: {
      double d = arith::siToFp(a.bits, a.width);
      return to->kind == Type::Kind::F32 ? Value::f32V(float(d)) : Value::f64V(d);
    }
    case CK::FpToUi: {
      double d = a.kind == Value::Kind::F32 ? double(a.f32v) : a.f64v;
      return Value::intV(to->width, arith::fpToUi(d, to->width));
    }
    case CK::FpToSi: {
      double d = a.kind == Value::Kind::F32 ? double(a.f32v) : a.f64v;
      return Value::intV(to->width, arith::fpToSi(d, to->width));
    }
    case CK::Trunc:
    case CK::Zext:
      return Value::intV(to->width, a.bits);
    case CK::Sext:
      return Value::intV(to->width, uint64_t(arith::sextW(a.bits, a.width)));
    case CK::PtrCast:
      return a;
    }
    return a;
  }

  Value intrinsicCall(const Instr &in, std::vector<Value> &args, const Coords &c) {
    const std::string &n = in.callee;
    auto f32arg = [&] { return args[0].f32v; };
    auto f64arg = [&] { return args[0].f64v; };
    if (n == "sqrt.f32") return Value::f32V(std::sqrt(f32arg()));
    if (n == "sqrt.f64") return Value::f64V(std::sqrt(f64arg()));
    if (n == "log.f32") return Value::f32V(std::log(f32arg()));
    if (n == "log.f64") return Value::f64V(std::log(f64arg()));
    if (n == "sin.f32") return Value::f32V(std::sin(f32arg()));
    if (n == "sin.f64") return Value::f64V(std::sin(f64arg()));
    if (n == "exp.f32") return Value::f32V(std::exp(f32arg()));
    if (n == "exp.f64") return Value::f64V(std::exp(f64arg()));
    if (n == "round.f32") return Value::f32V(std::round(f32arg()));
    if (n == "round.f64") return Value::f64V(std::round(f64arg()));
    if (n == "trunc.f32") return Value::f32V(std::trunc(f32arg()));
    if (n == "trunc.f64") return Value::f64V(std::trunc(f64arg()));
    if (n == "malloc") {
      uint32_t id = ses.newBuffer(args[0].bits, nullptr, false);
      return Value::ptrV(id, 0);
    }
    if (n == "free") {
      if (args[0].off != 0)
        throw Trap(TrapKind::UseAfterFree, c.fn, c.block, c.instr);
      ses.freeBuffer(args[0].buf, c.fn, c.block, c.instr);
      return Value::unit();
    }
    raise(Err::InternalError, "unknown intrinsic '" + n + "'");
  }

  Value hostCall(const Instr &in, std::vector<Value> &args, const Coords &c) {
    const HostEntry *entry = ses.findHostFn(in.callee);
    if (!entry)
      raise(Err::UnresolvedHostFunction, "'" + in.callee + "'");
    std::vector<HostValue> hargs;
    hargs.reserve(args.size());
    for (size_t i = 0; i < args.size(); i++)
      hargs.push_back(fromNative(ses, args[i], in.calleeType->params[i]));
    HostValue result = entry->fn(hargs);
    if (in.calleeType->ret->kind == Type::Kind::Void)
      return Value::unit();
    return toNative(ses, result, in.calleeType->ret);
  }

  Value run(const lir::Function &f, std::vector<Value> args) {
    if (++depth > 4096)
      raise(Err::InternalError, "call depth limit exceeded in " + f.name);
    std::vector<Value> regs(f.regTypes.size());
    for (size_t i = 0; i < args.size(); i++)
      regs[i] = args[i];
    std::vector<bool> visited(f.blocks.size(), false);
    std::vector<uint32_t> frameBuffers;
    MemAccess mem{ses};

    auto releaseFrame = [&] {
      for (uint32_t id : frameBuffers)
        if (ses.bufferAlive(id))
          ses.freeBuffer(id, f.name.c_str(), "frame", -1);
      depth--;
    };

    uint32_t bi = 0;
    visited[0] = true;
    try {
      for (;;) {
        const lir::Block &b = f.blocks[bi];
        Coords coords{f.name.c_str(), b.label.c_str(), 0};
        for (size_t ii = 0; ii < b.instrs.size(); ii++) {
          coords.instr = int(ii);
          const Instr &in = b.instrs[ii];
          stats.instructions++;
          switch (in.code) {
          case ICode::Alloca: {
            uint32_t id =
                ses.newBuffer(lower::layoutOf(in.type).size, in.type, true);
            frameBuffers.push_back(id);
            regs[in.result] = Value::ptrV(id, 0);
            break;
          }
          case ICode::Const:
            regs[in.result] = constValue(in.cval, coords);
            break;
          case ICode::Load: {
            stats.loads++;
            const TypeRef &t = f.regTypes[in.result];
            regs[in.result] = mem.read(regs[in.args[0]], t, coords);
            break;
          }
          case ICode::Store: {
            stats.stores++;
            const TypeRef &pt = f.regTypes[in.args[1]];
            mem.write(regs[in.args[1]], regs[in.args[0]], pt->elem, coords);
            break;
          }
          case ICode::Binop:
            regs[in.result] = binop(in, regs[in.args[0]], regs[in.args[1]], coords);
            break;
          case ICode::Cmp:
            regs[in.result] = cmp(in, regs[in.args[0]], regs[in.args[1]]);
            break;
          case ICode::Cast:
            regs[in.result] = castV(in, regs[in.args[0]]);
            break;
          case ICode::Gep: {
            Value base = regs[in.args[0]];
            int64_t delta = arith::sextW(regs[in.args[1]].bits, 64);
            regs[in.result] = Value::ptrV(base.buf, base.off + uint64_t(delta));
            break;
          }
          case ICode::Call: {
            stats.calls++;
            std::vector<Value> callArgs;
            callArgs.reserve(in.args.size());
            for (lir::Reg r : in.args)
              callArgs.push_back(regs[r]);
            Value result;
            switch (in.calleeKind) {
            case hir::Rator::Kind::Defined: {
              const lir::Function *callee = mod.findFunction(in.callee);
              if (!callee)
                raise(Err::InternalError, "missing function " + in.callee);
              result = run(*callee, std::move(callArgs));
              break;
            }
            case hir::Rator::Kind::Intrinsic:
              result = intrinsicCall(in, callArgs, coords);
              break;
            default:
              result = hostCall(in, callArgs, coords);
              break;
            }
            if (in.result != lir::kNoReg)
              regs[in.result] = result;
            break;
          }
          case ICode::Ret: {
            Value out = in.args.empty() ? Value::unit() : regs[in.args[0]];
            releaseFrame();
            return out;
          }
          case ICode::Br:
          case ICode::CondBr: {
            uint32_t target;
            if (in.code == ICode::Br)
              target = in.targets[0];
            else
              target = regs[in.args[0]].truthy() ? in.targets[0] : in.targets[1];
            // A back-edge re-enters a loop header: it points backward in the
            // block layout at a block already executed this invocation.
            if (target <= bi && visited[target])
              stats.backEdges++;
            visited[target] = true;
            bi = target;
            goto nextBlock;
          }
          case ICode::Switch: {
            const Value &scrut = regs[in.args[0]];
            uint32_t target = in.targets[0];
            for (size_t k = 0; k < in.switchConsts.size(); k++) {
              const lir::ConstVal &cv = in.switchConsts[k];
              bool match =
                  (scrut.kind == Value::Kind::Sym)
                      ? (cv.kind == lir::ConstVal::Kind::Sym &&
                         ses.intern(cv.text) == scrut.sym)
                      : (cv.kind == lir::ConstVal::Kind::Int &&
                         cv.bits == scrut.bits);
              if (match) {
                target = in.targets[k + 1];
                break;
              }
            }
            visited[target] = true;
            bi = target;
            goto nextBlock;
          }
          case ICode::Unreachable:
            throw Trap(TrapKind::Unreachable, coords.fn, coords.block, coords.instr);
          }
        }
        raise(Err::InternalError, "block fell through without terminator");
      nextBlock:;
      }
    } catch (...) {
      releaseFrame();
      throw;
    }
  }
};

} // namespace

// ---------------------------------------------------------------- marshal

Value toNative(Session &ses, const HostValue &v, const TypeRef &t) {
  switch (t->kind) {
  case Type::Kind::Int: {
    int64_t iv;
    if (auto *p = std::get_if<int64_t>(&v)) {
      iv = *p;
    } else if (auto *d = std::get_if<double>(&v)) {
      if (std::trunc(*d) != *d)
        raise(Err::MarshalError, "non-integral real for " + hir::typeName(t));
      iv = int64_t(*d);
    } else {
      raise(Err::MarshalError, "expected integer for " + hir::typeName(t));
    }
    if (t->width < 64) {
      int64_t lo = -(int64_t(1) << (t->width - 1));
      int64_t hi = (int64_t(1) << t->width) - 1;
      if (iv < lo || iv > hi)
        raise(Err::MarshalError, "integer out of range for " + hir::typeName(t));
    }
    return Value::intV(t->width, uint64_t(iv));
  }
  case Type::Kind::F32:
    if (auto *d = std::get_if<double>(&v))
      return Value::f32V(float(*d));
    if (auto *p = std::get_if<int64_t>(&v))
      return Value::f32V(float(*p));
    raise(Err::MarshalError, "expected real for f32");
  case Type::Kind::F64:
    if (auto *d = std::get_if<double>(&v))
      return Value::f64V(*d);
    if (auto *p = std::get_if<int64_t>(&v))
      return Value::f64V(double(*p));
    raise(Err::MarshalError, "expected real for f64");
  case Type::Kind::Sym:
    if (auto *s = std::get_if<std::string>(&v))
      return Value::symV(ses.intern(*s));
    if (auto *h = std::get_if<OpaqueHandle>(&v))
      return Value::symV(ses.opaqueSym(*h));
    raise(Err::MarshalError, "expected symbol");
  case Type::Kind::HostBool:
    if (auto *b = std::get_if<bool>(&v))
      return Value::boolV(*b);
    raise(Err::MarshalError, "expected boolean");
  case Type::Kind::Ptr: {
    const TypeRef &elem = t->elem;
    if (auto *view = std::get_if<BufferView>(&v)) {
      if (view->elem && elem && !hir::typeEquals(view->elem, elem))
        raise(Err::MarshalError, "buffer view element type mismatch");
      return Value::ptrV(view->buf, view->off);
    }
    if (auto *syms = std::get_if<std::vector<std::string>>(&v)) {
      if (elem->kind != Type::Kind::Sym)
        raise(Err::MarshalError, "symbol vector for " + hir::typeName(t));
      uint32_t id = ses.newBuffer(syms->size() * 8, elem, true);
      auto &bytes = ses.bufferBytes(id);
      for (size_t i = 0; i < syms->size(); i++) {
        uint64_t sym = ses.intern((*syms)[i]);
        std::memcpy(bytes.data() + i * 8, &sym, 8);
      }
      return Value::ptrV(id, 0);
    }
    if (auto *ints = std::get_if<std::vector<int64_t>>(&v)) {
      if (!elem->isInt())
        raise(Err::MarshalError, "integer vector for " + hir::typeName(t));
      uint64_t stride = elem->width <= 8 ? 1 : uint64_t(elem->width) / 8;
      uint32_t id = ses.newBuffer(ints->size() * stride, elem, true);
      auto &bytes = ses.bufferBytes(id);
      for (size_t i = 0; i < ints->size(); i++) {
        uint64_t masked = arith::maskW(uint64_t((*ints)[i]), elem->width);
        std::memcpy(bytes.data() + i * stride, &masked, stride);
      }
      return Value::ptrV(id, 0);
    }
    if (auto *reals = std::get_if<std::vector<double>>(&v)) {
      if (!elem->isFloat())
        raise(Err::MarshalError, "real vector for " + hir::typeName(t));
      uint64_t stride = elem->kind == Type::Kind::F32 ? 4 : 8;
      uint32_t id = ses.newBuffer(reals->size() * stride, elem, true);
      auto &bytes = ses.bufferBytes(id);
      for (size_t i = 0; i < reals->size(); i++) {
        if (stride == 4) {
          float fv = float((*reals)[i]);
          std::memcpy(bytes.data() + i * 4, &fv, 4);
        } else {
          double dv = (*reals)[i];
          std::memcpy(bytes.data() + i * 8, &dv, 8);
        }
      }
      return Value::ptrV(id, 0);
    }
    raise(Err::MarshalError, "expected array-like value for " + hir::typeName(t));
  }
  case Type::Kind::Void:
    return Value::unit();
  default:
    raise(Err::MarshalError, "cannot marshal into " + hir::typeName(t));
  }
}

HostValue fromNative(Session &ses, const Value &v, const TypeRef &t) {
  switch (t->kind) {
  case Type::Kind::Int:
    return int64_t(arith::sextW(v.bits, v.width ? v.width : 64));
  case Type::Kind::F32:
    return double(v.f32v);
  case Type::Kind::F64:
    return v.f64v;
  case Type::Kind::HostBool:
    return v.b;
  case Type::Kind::Sym: {
    if (auto h = ses.opaqueOfSym(v.sym))
      return *h;
    return ses.symText(v.sym);
  }
  case Type::Kind::Ptr: {
    BufferView view;
    view.buf = v.buf;
    view.off = v.off;
    view.elem = t->elem;
    if (ses.bufferAlive(v.buf) && t->elem) {
      uint64_t stride = MemAccess::scalarSizeOf(t->elem);
      if (stride)
        view.lenElems = (ses.bufferSize(v.buf) - v.off) / stride;
    }
    return view;
  }
  default:
    return std::monostate{};
  }
}

std::vector<double> readF32Buffer(Session &ses, const BufferView &view) {
  std::vector<double> out;
  const auto &bytes = ses.bufferBytes(view.buf);
  for (uint64_t i = view.off; i + 4 <= bytes.size(); i += 4) {
    float f;
    std::memcpy(&f, bytes.data() + i, 4);
    out.push_back(double(f));
  }
  return out;
}

std::vector<double> readF64Buffer(Session &ses, const BufferView &view) {
  std::vector<double> out;
  const auto &bytes = ses.bufferBytes(view.buf);
  for (uint64_t i = view.off; i + 8 <= bytes.size(); i += 8) {
    double d;
    std::memcpy(&d, bytes.data() + i, 8);
    out.push_back(d);
  }
  return out;
}

std::vector<int64_t> readI64Buffer(Session &ses, const BufferView &view) {
  std::vector<int64_t> out;
  const auto &bytes = ses.bufferBytes(view.buf);
  for (uint64_t i = view.off; i + 8 <= bytes.size(); i += 8) {
    int64_t d;
    std::memcpy(&d, bytes.data() + i, 8);
    out.push_back(d);
  }
  return out;
}

// ---------------------------------------------------------------- apply

namespace {

bool isHostVector(const HostValue &v) {
  return std::holds_alternative<std::vector<std::string>>(v) ||
         std::holds_alternative<std::vector<int64_t>>(v) ||
         std::holds_alternative<std::vector<double>>(v);
}

uint64_t hostVectorLen(const HostValue &v) {
  if (auto *s = std::get_if<std::vector<std::string>>(&v))
    return s->size();
  if (auto *i = std::get_if<std::vector<int64_t>>(&v))
    return i->size();
  if (auto *d = std::get_if<std::vector<double>>(&v))
    return d->size();
  return 0;
}

} // namespace

std::pair<HostValue, ExecStats>
CompiledModule::apply(const std::string &fnName,
                      const std::vector<HostValue> &args) const {
  std::unique_lock<std::mutex> lock(*serialLock_, std::defer_lock);
  if (serial)
    lock.lock();

  const lir::Function *fn = mod.findFunction(fnName);
  if (!fn)
    raise(Err::UnknownParam, "no function '" + fnName + "'");

  Session &ses = *session;
  // Allocation accounting: every buffer created during this invocation.
  size_t arenaBefore = ses.arenaCount();

  std::vector<Value> vals;
  size_t argIdx = 0;
  for (size_t i = 0; i < fn->params.size(); i++) {
    const TypeRef &pt = fn->params[i].second;
    bool autoLen = pt->isPtr() && i + 1 < fn->params.size() &&
                   fn->params[i + 1].second->isInt(64) && argIdx < args.size() &&
                   isHostVector(args[argIdx]);
    if (argIdx >= args.size())
      raise(Err::MarshalError, "too few arguments for '" + fnName + "'");
    try {
      vals.push_back(toNative(ses, args[argIdx], pt));
    } catch (Error &e) {
      if (e.code == Err::MarshalError)
        raise(Err::MarshalError,
              "arg " + std::to_string(argIdx) + ": " + e.detail);
      throw;
    }
    if (autoLen) {
      vals.push_back(Value::intV(64, hostVectorLen(args[argIdx])));
      i++; // the length parameter is derived, not supplied
    }
    argIdx++;
  }
  if (argIdx != args.size())
    raise(Err::MarshalError, "too many arguments for '" + fnName + "'");

  ExecStats stats;
  Interp interp{ses, mod, globalBuffers, stats, cfg.checkNuwOverflow()};
  Value result = interp.run(*fn, std::move(vals));
  stats.allocations = uint64_t(ses.arenaCount() - arenaBefore);

  return {fromNative(ses, result, fn->ret), stats};
}

// ---------------------------------------------------------------- engine

BufferView Engine::preallocateBuffer(const std::string &name, TypeRef elem,
                                     uint64_t count) {
  uint64_t stride = MemAccess::scalarSizeOf(elem);
  if (!stride)
    stride = lower::layoutOf(elem).size;
  uint32_t id = session_->newBuffer(count * stride, elem, true);
  session_->registerNamedBuffer(name, id);
  BufferView view;
  view.buf = id;
  view.elem = std::move(elem);
  view.lenElems = count;
  return view;
}

namespace {

void checkHostCallees(const lir::Module &m, const Session &ses) {
  for (const lir::Function &f : m.functions)
    for (const lir::Block &b : f.blocks)
      for (const Instr &in : b.instrs) {
        if (in.code != ICode::Call)
          continue;
        if (in.calleeKind == hir::Rator::Kind::External ||
            in.calleeKind == hir::Rator::Kind::Host)
          if (!ses.findHostFn(in.callee))
            raise(Err::UnresolvedHostFunction, "'" + in.callee + "'");
      }
}

} // namespace

CompiledModule Engine::compile(const hir::Module &m, const opt::PassConfig &cfg) {
  auto t0 = std::chrono::steady_clock::now();
  opt::PipelineResult pr = opt::runPipeline(m, cfg);
  lir::verifyOrThrow(pr.lmod);
  checkHostCallees(pr.lmod, *session_);

  CompiledModule cm;
  cm.session = session_;
  cm.cfg = cfg;
  cm.passStats = std::move(pr.stats);
  for (const lir::Global &g : pr.lmod.globals) {
    if (g.engineBuffer) {
      auto id = session_->namedBuffer(g.name);
      if (!id)
        raise(Err::InternalError,
              "engine buffer '" + g.name + "' was not preallocated");
      if (session_->bufferSize(*id) < g.sizeBytes)
        raise(Err::InternalError, "engine buffer '" + g.name + "' too small");
      cm.globalBuffers[g.name] = *id;
    } else {
      uint32_t id = session_->newBuffer(g.sizeBytes, g.elemType, true);
      if (g.scalarInit) {
        MemAccess mem{*session_};
        Coords c{"globals", g.name.c_str(), -1};
        Value v;
        if (g.elemType->kind == Type::Kind::F32)
          v = Value::f32V(float(*g.scalarInit));
        else if (g.elemType->kind == Type::Kind::F64)
          v = Value::f64V(*g.scalarInit);
        else
          v = Value::intV(g.elemType->width, uint64_t(int64_t(*g.scalarInit)));
        mem.write(Value::ptrV(id, 0), v, g.elemType, c);
      }
      cm.globalBuffers[g.name] = id;
    }
  }
  cm.serial = !pr.lmod.globals.empty();
  cm.mod = std::move(pr.lmod);
  cm.hmod = std::move(pr.hmod);
  auto t1 = std::chrono::steady_clock::now();
  cm.compileMs = std::chrono::duration<double, std::milli>(t1 - t0).count();
  return cm;
}

} // namespace dslkit::exec
