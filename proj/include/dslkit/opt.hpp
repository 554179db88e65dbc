#pragma once

#include "dslkit/hir.hpp"
#include "dslkit/lir.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

// The pass library: constant folding, always-inline inlining, loop-invariant
// code motion, block-local load/store elimination, dead-code elimination and
// runtime specialization, plus the opt-level pipeline driver.
namespace dslkit::opt {

// Per-parameter specialization binding.
struct BindingValue {
  enum class Kind { Value, ArraySize, Address };
  Kind kind = Kind::Value;
  hir::ExprRef literal;      // Value: an Int/Float/Sym/Bool literal
  uint64_t arraySize = 0;    // ArraySize
  std::string bufferName;    // Address: engine-preallocated buffer
  hir::TypeRef bufferElem;   // Address: element type
  uint64_t bufferCount = 0;  // Address: element count
};

BindingValue staticValue(hir::ExprRef literal);
BindingValue staticArraySize(uint64_t count);
BindingValue staticAddress(std::string bufferName, hir::TypeRef elem, uint64_t count);

using Bindings = std::map<std::string, BindingValue>;

struct PassConfig {
  int optLevel = 3; // 0: none; 1: fold+dce; 2: +inline+lse; 3: +licm, refold
  std::optional<std::vector<std::string>> passList; // explicit override
  // Specializations applied before the pass pipeline, per function name.
  std::map<std::string, Bindings> specializations;

  bool checkNuwOverflow() const { return optLevel == 0; }
};

struct PassStat {
  std::string pass;
  std::string stage; // "hir" | "lir"
  size_t before = 0;
  size_t after = 0;
};

// ---- HIR passes (input must be typed; output is re-typechecked) ----

hir::Function constFold(const hir::Function &f);
hir::Module constFoldModule(const hir::Module &m);

hir::Function dce(const hir::Function &f);
// Also drops always-inline functions that are no longer referenced.
hir::Module dceModule(const hir::Module &m);

// Replaces calls to always-inline functions by their bodies with the
// parameters let-bound.  InlineCycle when such functions are mutually
// recursive.
hir::Module inlineAlways(const hir::Module &m);

hir::Function licm(const hir::Module &ctx, const hir::Function &f);
hir::Module licmModule(const hir::Module &m);

// Fully unrolls while loops with a provably constant trip count <= maxTrip.
hir::Function unrollLoops(const hir::Function &f, uint64_t maxTrip = 16);

// Adds `fn@spec<i>` with the bound parameters removed; re-runs const-fold,
// unroll, licm and dce on the new body.  Self-calls whose bound argument
// positions become literals are unfolded in place.
hir::Module specialize(const hir::Module &m, const std::string &fn,
                       const Bindings &bindings);

// ---- LIR passes ----

lir::Function constFold(const lir::Function &f);
lir::Module constFoldLir(const lir::Module &m);

lir::Function loadStoreElim(const lir::Function &f);
lir::Module loadStoreElimLir(const lir::Module &m);

lir::Function dce(const lir::Function &f, const lir::Module &ctx);
lir::Module dceLir(const lir::Module &m);

// ---- driver ----

struct PipelineResult {
  hir::Module hmod; // typed, after HIR passes
  lir::Module lmod; // lowered, after LIR passes, verified
  std::vector<PassStat> stats;
};

// Passes applicable at each stage, in order, for an opt level or an explicit
// pass list ("const-fold" and "dce" run at both stages).
std::vector<std::string> hirPassNames(const PassConfig &cfg);
std::vector<std::string> lirPassNames(const PassConfig &cfg);

// The built-in pipeline for an opt level, as one ordered list.
std::vector<std::string> defaultPasses(int optLevel);

PipelineResult runPipeline(const hir::Module &m, const PassConfig &cfg);

} // namespace dslkit::opt
