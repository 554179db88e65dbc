#include "dslkit/opt.hpp"

#include "dslkit/lower.hpp"
#include "dslkit/typecheck.hpp"

namespace dslkit::opt {

namespace {

enum class Stage { Hir, Lir, Both };

std::optional<Stage> stageOf(const std::string &pass) {
  if (pass == "const-fold" || pass == "dce")
    return Stage::Both;
  if (pass == "inline-always" || pass == "licm" || pass == "unroll")
    return Stage::Hir;
  if (pass == "load-store-elim")
    return Stage::Lir;
  return std::nullopt;
}

std::vector<std::string> linearPasses(const PassConfig &cfg) {
  if (cfg.passList)
    return *cfg.passList;
  return defaultPasses(cfg.optLevel);
}

} // namespace

std::vector<std::string> defaultPasses(int optLevel) {
  switch (optLevel) {
  case 0:
    return {};
  case 1:
    return {"const-fold", "dce"};
  case 2:
    return {"const-fold", "dce", "inline-always", "load-store-elim"};
  default:
    return {"const-fold", "dce", "inline-always", "load-store-elim",
            "licm", "const-fold", "dce"};
  }
}

std::vector<std::string> hirPassNames(const PassConfig &cfg) {
  std::vector<std::string> out;
  for (const std::string &p : linearPasses(cfg)) {
    auto s = stageOf(p);
    if (!s)
      raise(Err::ShapeError, "unknown pass '" + p + "'");
    if (*s == Stage::Hir || *s == Stage::Both)
      out.push_back(p);
  }
  return out;
}

std::vector<std::string> lirPassNames(const PassConfig &cfg) {
  std::vector<std::string> out;
  for (const std::string &p : linearPasses(cfg)) {
    auto s = stageOf(p);
    if (s && (*s == Stage::Lir || *s == Stage::Both))
      out.push_back(p);
  }
  return out;
}

PipelineResult runPipeline(const hir::Module &m, const PassConfig &cfg) {
  PipelineResult r;
  hir::Module cur = typecheckOrThrow(m);
  for (const auto &[fn, bindings] : cfg.specializations)
    cur = specialize(cur, fn, bindings);

  for (const std::string &pass : hirPassNames(cfg)) {
    size_t before = hir::moduleSize(cur);
    if (pass == "const-fold")
      cur = constFoldModule(cur);
    else if (pass == "dce")
      cur = dceModule(cur);
    else if (pass == "inline-always")
      cur = inlineAlways(cur);
    else if (pass == "licm")
      cur = licmModule(cur);
    else if (pass == "unroll") {
      for (hir::Function &f : cur.functions)
        f = unrollLoops(f);
      cur = hir::typecheckOrThrow(cur);
    }
    r.stats.push_back({pass, "hir", before, hir::moduleSize(cur)});
  }

  lir::Module lmod = lower::lowerModule(cur);
  lir::verifyOrThrow(lmod);

  for (const std::string &pass : lirPassNames(cfg)) {
    lir::InstrCount c0 = lir::staticInstrCount(lmod);
    if (pass == "const-fold")
      lmod = constFoldLir(lmod);
    else if (pass == "dce")
      lmod = dceLir(lmod);
    else if (pass == "load-store-elim")
      lmod = loadStoreElimLir(lmod);
    lir::verifyOrThrow(lmod);
    lir::InstrCount c1 = lir::staticInstrCount(lmod);
    r.stats.push_back({pass, "lir", size_t(c0.total + c0.terminators),
                       size_t(c1.total + c1.terminators)});
  }

  r.hmod = std::move(cur);
  r.lmod = std::move(lmod);
  return r;
}

} // namespace dslkit::opt
