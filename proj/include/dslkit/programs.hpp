#pragma once

#include "dslkit/dsl/mhk.hpp"
#include "dslkit/hir.hpp"

// Small bundled programs used by the CLI bench suites and the tests.
namespace dslkit::programs {

// pow(x, n) = x^n by recursion on n, with the decrement flagged no-wrap.
hir::Module powModule();

// Generator-style expansion: n multiplications ending in the unit literal.
hir::ExprRef buildPow(hir::ExprRef x, uint64_t n);

// normalize: for(i, 0, n) a[i] / summate(j, 0, n) a[j]
mhk::Program normalizeProgram();

// Two reductions over the same range: sum(a) + sum(a^2); fusable siblings.
mhk::Program fusionPairProgram();

} // namespace dslkit::programs
