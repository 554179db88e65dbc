#pragma once

#include "dslkit/lir.hpp"
#include "dslkit/opt.hpp"

#include <any>
#include <atomic>
#include <functional>
#include <memory>
#include <mutex>
#include <variant>

// Deterministic reference execution engine for verified low IR, with
// instruction accounting and host interop: value marshaling in both
// directions, a host-function registry and symbol interning.
namespace dslkit::exec {

using hir::TypeRef;

// ---------------------------------------------------------------- values

struct Value {
  enum class Kind : uint8_t { Int, F32, F64, Ptr, Sym, Bool, Unit };
  Kind kind = Kind::Unit;
  uint8_t width = 64; // Int
  uint64_t bits = 0;  // Int payload, masked to width
  float f32v = 0;
  double f64v = 0;
  uint32_t buf = 0;   // Ptr buffer id
  uint64_t off = 0;   // Ptr byte offset
  uint32_t sym = 0;   // Sym intern id
  bool b = false;     // Bool

  static Value intV(int width, uint64_t bits);
  static Value f32V(float v);
  static Value f64V(double v);
  static Value ptrV(uint32_t buf, uint64_t off);
  static Value symV(uint32_t id);
  static Value boolV(bool b);
  static Value unit();

  bool truthy() const { return kind == Kind::Bool ? b : bits != 0; }
};

// ---------------------------------------------------------------- stats

struct ExecStats {
  uint64_t instructions = 0;
  uint64_t loads = 0;
  uint64_t stores = 0;
  uint64_t calls = 0;
  uint64_t backEdges = 0;
  uint64_t allocations = 0;
};

// ---------------------------------------------------------------- host side

struct OpaqueHandle {
  uint32_t id = 0;
};

struct BufferView {
  uint32_t buf = 0;
  uint64_t off = 0;
  TypeRef elem;       // element type seen through this view
  uint64_t lenElems = 0;
};

using HostValue =
    std::variant<std::monostate, int64_t, double, bool,
                 std::string,                // a symbol
                 std::vector<std::string>,   // vector of symbols
                 std::vector<int64_t>, std::vector<double>,
                 BufferView, OpaqueHandle>;

using HostFn = std::function<HostValue(const std::vector<HostValue> &)>;

struct HostEntry {
  TypeRef fnTy;
  HostFn fn;
};

// ---------------------------------------------------------------- session

// Shared mutable execution state: the arena, the intern table, the host
// registry and opaque handles.  One session backs an engine and every module
// it compiles.
class Session {
public:
  Session();

  // Arena.
  uint32_t newBuffer(uint64_t sizeBytes, TypeRef elem, bool typed);
  void freeBuffer(uint32_t id, const char *fn, const char *block, int instr);
  std::vector<uint8_t> &bufferBytes(uint32_t id);
  bool bufferAlive(uint32_t id) const;
  uint64_t bufferSize(uint32_t id) const;
  TypeRef bufferElem(uint32_t id) const;

  // Interning; ids are dense in first-seen order.
  uint32_t intern(const std::string &text);
  const std::string &symText(uint32_t id) const;

  // Opaque host handles ride through the IR as reserved symbols.
  OpaqueHandle wrapOpaque(std::any value);
  std::any &opaqueValue(OpaqueHandle h);
  uint32_t opaqueSym(OpaqueHandle h);
  std::optional<OpaqueHandle> opaqueOfSym(uint32_t sym) const;

  // Registry.
  void registerHostFn(const std::string &name, TypeRef fnTy, HostFn fn,
                      bool replace = false);
  const HostEntry *findHostFn(const std::string &name) const;

  // Named buffers preallocated for specialization / globals.
  void registerNamedBuffer(const std::string &name, uint32_t id);
  std::optional<uint32_t> namedBuffer(const std::string &name) const;

  size_t arenaCount() const {
    return arenaSize_.load(std::memory_order_acquire);
  }

  // Hard ceilings; hitting one raises InternalError.  Reserved up front so
  // element storage never moves while another invocation allocates.
  static constexpr size_t kMaxBuffers = size_t(1) << 20;
  static constexpr size_t kMaxSymbols = size_t(1) << 16;
  static constexpr size_t kMaxOpaques = size_t(1) << 12;

private:
  struct Buffer {
    std::vector<uint8_t> bytes;
    TypeRef elem;
    bool alive = false;
    bool typed = false;
  };
  // Growth happens under the mutex and is published through the atomic
  // counts, so invocations on disjoint buffers can run concurrently.
  mutable std::mutex growth_;
  std::vector<Buffer> arena_;
  std::atomic<uint32_t> arenaSize_{0};
  std::vector<std::string> symbols_;
  std::atomic<uint32_t> symbolCount_{0};
  std::map<std::string, uint32_t> symIndex_;
  std::vector<std::any> opaques_;
  std::map<std::string, HostEntry> registry_;
  std::map<std::string, uint32_t> namedBuffers_;
};

using SessionPtr = std::shared_ptr<Session>;

// ---------------------------------------------------------------- modules

class CompiledModule {
public:
  SessionPtr session;
  lir::Module mod;       // verified
  hir::Module hmod;      // post-pipeline HIR (for dumps/inspection)
  opt::PassConfig cfg;
  std::map<std::string, uint32_t> globalBuffers;
  std::vector<opt::PassStat> passStats;
  double compileMs = 0;
  bool serial = false;   // modules with globals run one invocation at a time

  // Marshals host arguments (deriving (ptr,i64) lengths from vector args),
  // interprets to return, and unmarshals the result.
  std::pair<HostValue, ExecStats> apply(const std::string &fnName,
                                        const std::vector<HostValue> &args) const;

private:
  std::shared_ptr<std::mutex> serialLock_ = std::make_shared<std::mutex>();
};

// ---------------------------------------------------------------- engine

class Engine {
public:
  Engine() : session_(std::make_shared<Session>()) {}

  const SessionPtr &session() const { return session_; }

  void registerHostFn(const std::string &name, TypeRef fnTy, HostFn fn,
                      bool replace = false) {
    session_->registerHostFn(name, std::move(fnTy), std::move(fn), replace);
  }

  // Preallocates an arena buffer for StaticAddress specialization; the same
  // name given to opt::staticAddress resolves here at compile time.
  BufferView preallocateBuffer(const std::string &name, TypeRef elem,
                               uint64_t count);

  OpaqueHandle wrapOpaque(std::any v) { return session_->wrapOpaque(std::move(v)); }

  // Typechecks, runs the pass pipeline, verifies, resolves globals and host
  // functions, and returns an immutable executable module.
  CompiledModule compile(const hir::Module &m, const opt::PassConfig &cfg = {});

private:
  SessionPtr session_;
};

// ---------------------------------------------------------------- marshal

// Copies a host value into the engine representation for type t.
Value toNative(Session &ses, const HostValue &v, const TypeRef &t);
// Reads back a result value.
HostValue fromNative(Session &ses, const Value &v, const TypeRef &t);

// Typed views over arena buffers (tests and the CLI read results this way).
std::vector<double> readF32Buffer(Session &ses, const BufferView &view);
std::vector<double> readF64Buffer(Session &ses, const BufferView &view);
std::vector<int64_t> readI64Buffer(Session &ses, const BufferView &view);

} // namespace dslkit::exec
