#pragma once

#include "dslkit/hir.hpp"

namespace dslkit::hir {

struct TypecheckResult {
  std::optional<Module> module; // typed module, present when diags is empty
  std::vector<Diag> diags;

  bool ok() const { return diags.empty(); }
};

// Annotates every expression with its resolved type, verifies Set targets,
// switch constant distinctness, label resolution, all-paths-return and call
// signatures.  Idempotent on typed modules.
TypecheckResult typecheckModule(const Module &m);

// Convenience path; throws Error(TypecheckFailed) carrying joined diags.
Module typecheckOrThrow(const Module &m);

} // namespace dslkit::hir
