#pragma once

#include "dslkit/astdef.hpp"
#include "dslkit/exec.hpp"
#include "dslkit/hir.hpp"

#include <map>
#include <string>
#include <vector>

// mhk: a small pure array language with loops and reductions, defined as a
// grammar on the AST toolkit.  Expressions carry type annotations; `for`
// builds an array, `summate` reduces to a scalar.  Passes: A-normal form,
// index rewriting, and lowering to the high IR with loop fusion and pure
// helper extraction for nested reductions.
namespace dslkit::mhk {

// Groups: expr (val if app match branch intrf var for summate bucket),
// reducer (index nop), pat (pair pvar), ty (nat real arr constant).
ast::GrammarPtr grammar();

ast::NodePtr parseExpr(std::string_view text);

struct ArrayParam {
  std::string name;
  bool realElems = true; // f64 elements; false: i64
  std::string lenName;
};

struct Program {
  std::vector<ArrayParam> arrays;
  ast::NodePtr expr;
};

// (mhk (arrays (<name> <real|nat> <len-sym>)...) (expr <node>))
Program parseProgram(std::string_view text);

// Every app argument and if scrutinee becomes atomic (a var or a val);
// bindings are single-branch matches on a variable pattern.
ast::NodePtr anf(const ast::NodePtr &e);

// Bottom-up index simplification: selecting from a short array literal by a
// two-way constant index distributes over the if; indexing an array whose
// element type carries a constant value, or a constant-value-array, yields
// the constant/content directly.
ast::NodePtr indexRewrite(const ast::NodePtr &e);

struct LowerOptions {
  bool fuse = true; // merge sibling loops over identical bounds
};

inline constexpr const char *kEntryName = "mhk_main";

// Closed, ANF-converted expression with array params declared.  The entry
// takes (ptr, i64 length) pairs per array.  Reductions nested inside loop
// bodies become pure helper functions, which loop-invariant code motion can
// hoist.  UnsupportedConstruct for bucket/reducer and non-variable patterns.
hir::Module lower(const Program &prog, const LowerOptions &opts = {});

struct Arrays {
  std::map<std::string, std::vector<double>> real;
  std::map<std::string, std::vector<int64_t>> nat;
};

// (arrays (<name> <num>...)...)
Arrays parseArrays(std::string_view text, const Program &prog);

struct RunResult {
  bool isArray = false;
  bool realValued = true;
  double real = 0;
  int64_t nat = 0;
  std::vector<double> realArray;
  std::vector<int64_t> natArray;
  exec::ExecStats stats;
  std::vector<opt::PassStat> passStats;
  double compileMs = 0;
};

RunResult run(const Program &prog, const Arrays &arrays,
              const opt::PassConfig &cfg, const LowerOptions &opts = {});

// ---- node helpers used by passes, tests and generators ----

ast::NodePtr tyNat();
ast::NodePtr tyReal();
ast::NodePtr tyArr(ast::NodePtr elem);
ast::NodePtr tyConstant(double v, ast::NodePtr base);
ast::NodePtr val(ast::NodePtr ty, double v);
ast::NodePtr valNat(int64_t v);
ast::NodePtr valReal(double v);
ast::NodePtr varRef(ast::NodePtr ty, const std::string &name);
ast::NodePtr intrf(const std::string &op);
ast::NodePtr apply(ast::NodePtr ty, const std::string &op,
                   std::vector<ast::NodePtr> rands);
ast::NodePtr ifNode(ast::NodePtr ty, ast::NodePtr tst, ast::NodePtr thn,
                    ast::NodePtr els);
ast::NodePtr letNode(ast::NodePtr ty, const std::string &name, ast::NodePtr init,
                     ast::NodePtr body); // match on a pvar
ast::NodePtr forNode(ast::NodePtr ty, const std::string &index, ast::NodePtr lo,
                     ast::NodePtr hi, ast::NodePtr body);
ast::NodePtr summateNode(ast::NodePtr ty, const std::string &index,
                         ast::NodePtr lo, ast::NodePtr hi, ast::NodePtr body);

} // namespace dslkit::mhk
