#include "dslkit/intrinsics.hpp"

#include <vector>

namespace dslkit {

namespace {

using namespace hir;

std::vector<IntrinsicInfo> buildTable() {
  std::vector<IntrinsicInfo> t;
  auto math1 = [&](const char *base) {
    t.push_back({std::string(base) + ".f32", fnType({f32()}, f32()), true});
    t.push_back({std::string(base) + ".f64", fnType({f64()}, f64()), true});
  };
  math1("sqrt");
  math1("log");
  math1("sin");
  math1("round");
  math1("trunc");
  math1("exp");
  // malloc(bytes) -> ptr; free(ptr).  Element type left open.
  t.push_back({"malloc", fnType({i64()}, ptr(nullptr)), false});
  t.push_back({"free", fnType({ptr(nullptr)}, voidType()), false});
  return t;
}

const std::vector<IntrinsicInfo> &table() {
  static const std::vector<IntrinsicInfo> t = buildTable();
  return t;
}

} // namespace

const IntrinsicInfo *findIntrinsic(std::string_view name) {
  for (const IntrinsicInfo &info : table())
    if (info.name == name)
      return &info;
  return nullptr;
}

bool intrinsicSignatureOk(const IntrinsicInfo &info, const hir::TypeRef &declared) {
  if (!declared || declared->kind != Type::Kind::Fn)
    return false;
  const TypeRef &canon = info.fnTy;
  if (declared->params.size() != canon->params.size())
    return false;
  auto matches = [](const TypeRef &want, const TypeRef &got) {
    if (want && want->isPtr() && !want->elem) // any pointer
      return got && got->isPtr();
    return typeEquals(want, got);
  };
  for (size_t i = 0; i < canon->params.size(); i++)
    if (!matches(canon->params[i], declared->params[i]))
      return false;
  return matches(canon->ret, declared->ret);
}

} // namespace dslkit
