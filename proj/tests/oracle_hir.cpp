#include "oracle_hir.hpp"

#include <stdexcept>

namespace oracle {

using namespace dslkit::hir;

namespace {

struct Trapped {};
struct Returned {
  uint64_t value;
};

struct Eval {
  std::vector<std::map<std::string, uint64_t>> scopes;

  uint64_t *find(const std::string &name) {
    for (auto it = scopes.rbegin(); it != scopes.rend(); ++it) {
      auto f = it->find(name);
      if (f != it->end())
        return &f->second;
    }
    throw std::runtime_error("oracle: unbound " + name);
  }

  uint64_t expr(const ExprRef &e) {
    if (auto *v = e->as<VarE>())
      return *find(v->name);
    if (auto *l = e->as<IntLitE>())
      return l->bits;
    if (auto *p = e->as<PrimOpE>()) {
      uint64_t a = expr(p->args[0]);
      uint64_t b = expr(p->args[1]);
      int64_t sa = int64_t(a), sb = int64_t(b);
      switch (p->op) {
      case Op::Add: return a + b;
      case Op::Sub: return a - b;
      case Op::Mul: return a * b;
      case Op::And: return a & b;
      case Op::Or: return a | b;
      case Op::Xor: return a ^ b;
      case Op::Shl: return a << (b & 63);
      case Op::LShr: return a >> (b & 63);
      case Op::AShr: return uint64_t(sa >> (b & 63));
      case Op::UDiv:
        if (b == 0)
          throw Trapped{};
        return a / b;
      case Op::SDiv:
        if (b == 0)
          throw Trapped{};
        if (sb == -1 && sa == INT64_MIN)
          return uint64_t(sa);
        return uint64_t(sa / sb);
      case Op::URem:
        if (b == 0)
          throw Trapped{};
        return a % b;
      case Op::SRem:
        if (b == 0)
          throw Trapped{};
        if (sb == -1)
          return 0;
        return uint64_t(sa % sb);
      case Op::IcmpEq: return a == b;
      case Op::IcmpNe: return a != b;
      case Op::IcmpUlt: return a < b;
      case Op::IcmpUle: return a <= b;
      case Op::IcmpUgt: return a > b;
      case Op::IcmpSlt: return sa < sb;
      case Op::IcmpSle: return sa <= sb;
      default:
        throw std::runtime_error("oracle: unsupported op");
      }
    }
    if (auto *l = e->as<LetE>()) {
      std::map<std::string, uint64_t> frame;
      for (const LetBinding &b : l->bindings)
        frame[b.name] = b.init ? expr(*b.init) : 0;
      scopes.push_back(std::move(frame));
      stmt(l->body);
      uint64_t out = expr(l->result);
      scopes.pop_back();
      return out;
    }
    throw std::runtime_error("oracle: unsupported expression");
  }

  // Runs a statement; throws Returned to unwind on return.
  void stmt(const StmtRef &s) {
    if (s->is<SVoidS>())
      return;
    if (auto *e = s->as<ExprStmtS>()) {
      expr(e->expr);
      return;
    }
    if (auto *b = s->as<BlockS>()) {
      for (const StmtRef &x : b->stmts)
        stmt(x);
      return;
    }
    if (auto *r = s->as<ReturnS>())
      throw Returned{r->value ? expr(*r->value) : 0};
    if (auto *w = s->as<WhileS>()) {
      while (expr(w->cond) & 1)
        stmt(w->body);
      return;
    }
    if (auto *i = s->as<IfS>()) {
      if (expr(i->cond) & 1)
        stmt(i->thenBranch);
      else
        stmt(i->elseBranch);
      return;
    }
    if (auto *t = s->as<SetS>()) {
      *find(t->name) = expr(t->value);
      return;
    }
    throw std::runtime_error("oracle: unsupported statement");
  }
};

} // namespace

HirResult evalFunction(const Function &fn, const std::vector<uint64_t> &args) {
  Eval ev;
  std::map<std::string, uint64_t> frame;
  for (size_t i = 0; i < fn.params.size(); i++)
    frame[fn.params[i].name] = args[i];
  ev.scopes.push_back(std::move(frame));
  try {
    ev.stmt(fn.body);
  } catch (Returned r) {
    return {false, r.value};
  } catch (Trapped) {
    return {true, 0};
  }
  return {false, 0};
}

} // namespace oracle
