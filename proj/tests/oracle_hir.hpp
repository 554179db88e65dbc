#pragma once

#include "dslkit/hir.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

// A tiny tree-walking evaluator over the i64 arithmetic / If / While / Let /
// Set subset of the high IR, written directly against the node definitions.
// It shares no code with the lowering or execution paths; differential tests
// pin those against this.
namespace oracle {

struct HirResult {
  bool trapped = false;   // division by zero
  uint64_t value = 0;
};

HirResult evalFunction(const dslkit::hir::Function &fn,
                       const std::vector<uint64_t> &args);

} // namespace oracle
