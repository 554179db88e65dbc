#include "dslkit/astdef.hpp"

#include "generators.hpp"

#include <doctest.h>

using namespace dslkit;
using namespace dslkit::ast;

namespace {

// The little lambda-calculus grammar used throughout.
GrammarPtr lcGrammar() {
  static GrammarPtr g = Grammar::define(
      "LC",
      {Group{"expr",
             {Production{"lambda",
                         {{"x", repeat(single("expr.sym"))}, {"body", single("expr")}}},
              Production{"letrec",
                         {{"ids", repeat(single("expr.sym"))},
                          {"vals", repeat(single("expr"))},
                          {"body", single("expr")}}},
              Production{"app",
                         {{"rator", single("expr")}, {"rands", repeat(single("expr"))}}},
              Production{"n", {{"value", terminal("number?")}}},
              Production{"sym", {{"value", terminal("symbol?")}}}}}});
  return g;
}

NodePtr num(int64_t v) {
  return makeNode(lcGrammar(), "n", {Child(Leaf::integer(v))});
}

NodePtr sym(const std::string &s) {
  return makeNode(lcGrammar(), "sym", {Child(Leaf::symbol(s))});
}

NodePtr plusApp(std::vector<NodePtr> rands) {
  std::vector<Child> list;
  for (NodePtr &r : rands)
    list.push_back(Child(std::move(r)));
  return makeNode(lcGrammar(), "app",
                  {Child(sym("+")), Child::listOf(std::move(list))});
}

// Constant folding over + and * applications with all-numeric operands.
std::optional<NodePtr> foldRule(const NodePtr &n) {
  if (n->production() != "app")
    return std::nullopt;
  const Child &rator = n->field("rator");
  if (rator.node->production() != "sym")
    return std::nullopt;
  const std::string &op = rator.node->field("value").leaf.text;
  if (op != "+" && op != "*")
    return std::nullopt;
  int64_t acc = op == "+" ? 0 : 1;
  for (const Child &c : n->field("rands").list) {
    if (c.node->production() != "n")
      return std::nullopt;
    int64_t v = c.node->field("value").leaf.i;
    acc = op == "+" ? acc + v : acc * v;
  }
  return num(acc);
}

} // namespace

TEST_CASE("define-grammar validates the LC grammar") {
  GrammarPtr g = lcGrammar();
  CHECK(g->groups().size() == 1);
  CHECK(g->groups()[0].productions.size() == 5);
}

TEST_CASE("dangling references are rejected at definition time") {
  CHECK_THROWS_WITH_AS(
      Grammar::define("bad", {Group{"expr",
                                    {Production{"f", {{"t", single("typ")}}}}}}),
      doctest::Contains("typ"), Error);
  try {
    Grammar::define("bad",
                    {Group{"expr", {Production{"f", {{"t", single("typ")}}}}}});
  } catch (const Error &e) {
    CHECK(e.code == Err::DanglingReference);
  }
}

TEST_CASE("duplicate and unknown names are rejected") {
  CHECK_THROWS_AS(Grammar::define("bad", {Group{"e", {Production{"a", {}},
                                                      Production{"a", {}}}}}),
                  Error);
  try {
    Grammar::define("bad",
                    {Group{"e", {Production{"a", {{"v", terminal("frob?")}}}}}});
    FAIL("expected UnknownTerminalPredicate");
  } catch (const Error &e) {
    CHECK(e.code == Err::UnknownTerminalPredicate);
  }
}

TEST_CASE("grammar text form mirrors the structured form") {
  GrammarPtr g = Grammar::fromText(
      "(define-ast LC"
      " (expr (lambda (x (repeat expr.sym)) (body expr))"
      "       (letrec (ids (repeat expr.sym)) (vals (repeat expr)) (body expr))"
      "       (app (rator expr) (rands (repeat expr)))"
      "       (n (value (terminal number?)))"
      "       (sym (value (terminal symbol?)))))");
  CHECK(g->groups().size() == 1);
  CHECK(g->findProduction("letrec") != nullptr);
  CHECK(g->groupOf("app") == "expr");
}

TEST_CASE("make-node checks shapes and predicates") {
  GrammarPtr g = lcGrammar();

  // letrec with ids=[x], vals=[1], body=x: list-valued ids/vals.
  NodePtr letrec = makeNode(g, "letrec",
                            {Child::listOf({Child(sym("x"))}),
                             Child::listOf({Child(num(1))}),
                             Child(sym("x"))});
  CHECK(letrec->production() == "letrec");
  CHECK(letrec->field("ids").list.size() == 1);

  // number predicate failure
  try {
    makeNode(g, "n", {Child(Leaf::symbol("hello"))});
    FAIL("expected TerminalPredicateFailed");
  } catch (const Error &e) {
    CHECK(e.code == Err::TerminalPredicateFailed);
  }

  // missing required field
  try {
    makeNode(g, "app", {});
    FAIL("expected ArityMismatch");
  } catch (const Error &e) {
    CHECK(e.code == Err::ArityMismatch);
  }

  // wrong-group child in a sym-only slot
  CHECK_THROWS_AS(makeNode(g, "lambda",
                           {Child::listOf({Child(num(3))}), Child(num(1))}),
                  Error);
}

TEST_CASE("make-node agrees with a direct pattern checker on random shapes") {
  gen::Rng rng(gen::baseSeed() ^ 0xa57);
  GrammarPtr g = lcGrammar();
  // Random well-formed nodes construct; random mutations get rejected.
  for (int i = 0; i < 200; i++) {
    NodePtr n = gen::randomNode(g, "expr", rng);
    REQUIRE(n != nullptr);
  }
  for (int i = 0; i < 100; i++) {
    NodePtr n = gen::randomNode(g, "expr", rng);
    // Dropping a field must be caught.
    std::vector<Child> fields = n->fields();
    if (fields.empty())
      continue;
    fields.pop_back();
    CHECK_THROWS_AS(makeNode(g, n->production(), std::move(fields)), Error);
  }
}

TEST_CASE("map-children: identity, elementwise mapping, call counts") {
  GrammarPtr g = lcGrammar();
  NodePtr e = plusApp({num(1), num(2)});

  NodePtr same = mapChildren([](const NodePtr &c) { return c; }, e);
  CHECK(nodeEquals(same, e));

  // n v -> n v+1 on the app's children; other nodes pass through.
  auto inc = [&](const NodePtr &c) -> NodePtr {
    if (c->production() == "n")
      return num(c->field("value").leaf.i + 1);
    return c;
  };
  NodePtr bumped = mapChildren(inc, e);
  CHECK(nodeEquals(bumped, plusApp({num(2), num(3)})));

  // letrec with k bindings: ids and vals map elementwise, body once.
  NodePtr letrec = makeNode(g, "letrec",
                            {Child::listOf({Child(sym("x")), Child(sym("y"))}),
                             Child::listOf({Child(num(1)), Child(num(2))}),
                             Child(sym("x"))});
  size_t calls = 0;
  mapChildren(
      [&](const NodePtr &c) {
        calls++;
        return c;
      },
      letrec);
  CHECK(calls == 2 * 2 + 1);
}

TEST_CASE("map-children composes on single-level application") {
  gen::Rng rng(gen::baseSeed() ^ 0x11);
  auto f = [](const NodePtr &c) -> NodePtr {
    if (c->production() == "n")
      return makeNode(c->grammar(), "n",
                      {Child(Leaf::integer(c->field("value").leaf.i * 2))});
    return c;
  };
  auto g2 = [](const NodePtr &c) -> NodePtr {
    if (c->production() == "n")
      return makeNode(c->grammar(), "n",
                      {Child(Leaf::integer(c->field("value").leaf.i + 1))});
    return c;
  };
  for (int i = 0; i < 50; i++) {
    NodePtr n = gen::randomNode(lcGrammar(), "expr", rng);
    NodePtr lhs = mapChildren(f, mapChildren(g2, n));
    NodePtr rhs = mapChildren([&](const NodePtr &c) { return f(g2(c)); }, n);
    CHECK(nodeEquals(lhs, rhs));
  }
}

TEST_CASE("map-children rejects wrong-group results for single slots") {
  GrammarPtr g = lcGrammar();
  NodePtr lam = makeNode(g, "lambda",
                         {Child::listOf({Child(sym("x"))}), Child(num(1))});
  // Mapping a sym slot to an n node violates the slot reference.
  auto swap = [&](const NodePtr &c) -> NodePtr {
    if (c->production() == "sym")
      return num(9);
    return c;
  };
  try {
    mapChildren(swap, lam);
    FAIL("expected ResultShapeMismatch");
  } catch (const Error &e) {
    CHECK(e.code == Err::ResultShapeMismatch);
  }
}

TEST_CASE("rewrite-bottom-up folds constants in one pass") {
  std::vector<Rule> rules{foldRule};

  NodePtr e1 = plusApp({num(1), num(2), num(3)});
  CHECK(nodeEquals(rewriteBottomUp(rules, e1), num(6)));

  // Guard fails when an operand is not a number: unchanged.
  NodePtr e2 = plusApp({num(1), sym("x")});
  CHECK(nodeEquals(rewriteBottomUp(rules, e2), e2));

  // Nested: 2 * (1 + 2) folds bottom-up to 6.
  NodePtr inner = plusApp({num(1), num(2)});
  NodePtr e3 = makeNode(lcGrammar(), "app",
                        {Child(sym("*")),
                         Child::listOf({Child(num(2)), Child(inner)})});
  CHECK(nodeEquals(rewriteBottomUp(rules, e3), num(6)));
}

TEST_CASE("rewrite-bottom-up visits each node exactly once") {
  gen::Rng rng(gen::baseSeed() ^ 0x22);
  std::vector<Rule> rules; // no rules: traversal only
  for (int i = 0; i < 50; i++) {
    NodePtr n = gen::randomNode(lcGrammar(), "expr", rng);
    // Count nodes directly.
    size_t expected = 0;
    std::function<void(const NodePtr &)> count = [&](const NodePtr &c) {
      expected++;
      mapChildren(
          [&](const NodePtr &k) {
            count(k);
            return k;
          },
          c);
    };
    count(n);
    size_t visited = 0;
    rewriteBottomUp(rules, n, &visited);
    CHECK(visited == expected);
  }
}

TEST_CASE("pretty-print canonical forms") {
  CHECK(prettyPrint(num(6)) == "(n 6)");
  CHECK(prettyPrint(plusApp({num(1), num(2)})) == "(app (sym +) (n 1) (n 2))");
  // Two repeat fields keep their grouping.
  NodePtr letrec = makeNode(lcGrammar(), "letrec",
                            {Child::listOf({Child(sym("x"))}),
                             Child::listOf({Child(num(1))}),
                             Child(sym("x"))});
  CHECK(prettyPrint(letrec) == "(letrec ((sym x)) ((n 1)) (sym x))");
}

TEST_CASE("pretty/parse round-trip on 500 random nodes") {
  gen::Rng rng(gen::baseSeed());
  GrammarPtr g = lcGrammar();
  for (int i = 0; i < 500; i++) {
    NodePtr n = gen::randomNode(g, "expr", rng);
    std::string text = prettyPrint(n);
    NodePtr back = parseNode(g, text);
    if (!nodeEquals(back, n)) {
      CAPTURE(text);
      FAIL_CHECK("round-trip mismatch");
      break;
    }
    // And the text itself is stable.
    CHECK(prettyPrint(back) == text);
  }
}

TEST_CASE("ambiguity regression: empty ids versus filled vals") {
  GrammarPtr g = lcGrammar();
  NodePtr a = makeNode(g, "letrec",
                       {Child::listOf({}), Child::listOf({Child(sym("y"))}),
                        Child(sym("z"))});
  NodePtr b = makeNode(g, "letrec",
                       {Child::listOf({Child(sym("y"))}), Child::listOf({}),
                        Child(sym("z"))});
  CHECK(prettyPrint(a) != prettyPrint(b));
  CHECK(nodeEquals(parseNode(g, prettyPrint(a)), a));
  CHECK(nodeEquals(parseNode(g, prettyPrint(b)), b));
}

TEST_CASE("multiple patterns are fixed-length heterogeneous sequences") {
  GrammarPtr g = Grammar::define(
      "M", {Group{"e",
                  {Production{"pairlit",
                              {{"kv", multiple({terminal("symbol?"),
                                                terminal("number?")})}}},
                   Production{"k", {{"value", terminal("number?")}}}}}});
  NodePtr n = makeNode(g, "pairlit",
                       {Child::listOf({Child(Leaf::symbol("a")),
                                       Child(Leaf::integer(3))})});
  CHECK(nodeEquals(parseNode(g, prettyPrint(n)), n));
  CHECK_THROWS_AS(makeNode(g, "pairlit",
                           {Child::listOf({Child(Leaf::symbol("a"))})}),
                  Error);
}
