#pragma once

#include "dslkit/hir.hpp"

#include <optional>
#include <string_view>

namespace dslkit {

// The fixed intrinsic table available to IR code.  Math intrinsics are pure;
// malloc/free manage arena buffers.  malloc's pointer result and free's
// pointer argument are polymorphic in the element type.
struct IntrinsicInfo {
  std::string name;
  hir::TypeRef fnTy; // canonical signature; null elem types mean "any pointer"
  bool pure = false;
};

const IntrinsicInfo *findIntrinsic(std::string_view name);

// Checks a declared signature against the table entry (exact match for math,
// element-polymorphic for malloc/free).
bool intrinsicSignatureOk(const IntrinsicInfo &info, const hir::TypeRef &declared);

} // namespace dslkit
