#pragma once

#include "dslkit/hir.hpp"

#include <functional>
#include <set>

// Internal helpers for passes that rebuild HIR trees.
namespace dslkit::hir {

using ExprFn = std::function<ExprRef(const ExprRef &)>;
using StmtFn = std::function<StmtRef(const StmtRef &)>;

// Rebuilds one node with every direct child expression/statement mapped.
ExprRef mapExprChildren(const ExprRef &e, const ExprFn &fe, const StmtFn &fs);
StmtRef mapStmtChildren(const StmtRef &s, const ExprFn &fe, const StmtFn &fs);

ExprRef withTypeOf(ExprRef fresh, const ExprRef &original);

// Free variables of an expression (let-bound names excluded inside their
// scope).
std::set<std::string> freeVars(const ExprRef &e);
void freeVarsStmt(const StmtRef &s, std::set<std::string> &out,
                  std::set<std::string> &bound);

// Names assigned by set! anywhere inside.
void setTargets(const StmtRef &s, std::set<std::string> &out);
void setTargetsExpr(const ExprRef &e, std::set<std::string> &out);

// Names bound by any let inside.
void boundNames(const StmtRef &s, std::set<std::string> &out);
void boundNamesExpr(const ExprRef &e, std::set<std::string> &out);

// Capture-aware substitution of variables by expressions.  Shadowed scopes
// stop the substitution for the shadowed name.
ExprRef substExpr(const ExprRef &e,
                  const std::map<std::string, ExprRef> &subst);
StmtRef substStmt(const StmtRef &s,
                  const std::map<std::string, ExprRef> &subst);

// True when evaluating the expression can have no side effect and no trap:
// no call, no load, no division/remainder, no flagged op.
bool pureTotal(const ExprRef &e);

// True once a statement is guaranteed to leave the enclosing sequence
// (return on all paths, or an unconditional jump).
bool definitelyExits(const StmtRef &s);

// Inline-expansion plumbing, shared by inline-always and specialize.
StmtRef renameLabels(const StmtRef &s, const std::string &prefix);
StmtRef redirectReturns(const StmtRef &s, const std::string &retVar,
                        const std::string &exitLabel);

// Expands one call: direct-substitutable arguments (literals, or variables
// the callee never assigns) replace the parameter in place; the rest are
// let-bound.  Instance numbering keeps introduced names and labels unique.
ExprRef expandCallInline(const Function &callee,
                         const std::vector<ExprRef> &args, int instance);

} // namespace dslkit::hir
