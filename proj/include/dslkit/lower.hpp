#pragma once

#include "dslkit/hir.hpp"
#include "dslkit/lir.hpp"

namespace dslkit::lower {

struct Layout {
  uint64_t size = 0;
  uint64_t align = 1;
  std::vector<uint64_t> fieldOffsets; // structs
  uint64_t stride = 0;                // arrays
};

// Byte layout of a sized type.  Scalars: i1/i8/bool 1, i16 2, i32/f32 4,
// i64/f64/ptr/sym 8 with alignment = size; struct fields padded to field
// alignment and the struct size rounded up to the max field alignment;
// arrays contiguous.  UnsizedType for void, functions and unsized arrays.
Layout layoutOf(const hir::TypeRef &t);

// Lowers a typechecked module: expression trees flatten into single-result
// instructions, every variable becomes a stack slot in the entry block,
// structured control flow becomes blocks and branches, and Label/Jump embed
// verbatim-named blocks.  The result verifies.
lir::Module lowerModule(const hir::Module &typed);

} // namespace dslkit::lower
