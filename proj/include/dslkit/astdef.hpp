#pragma once

#include "dslkit/errors.hpp"
#include "dslkit/sexpr.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

// Grammar-driven AST toolkit: a grammar described as a runtime value yields
// checked node constructors, a generic child-mapping combinator, bottom-up
// rewriting, and a pretty printer whose output a generic reader can parse
// back.  Grammars and nodes are immutable after construction.
namespace dslkit::ast {

struct Pattern {
  enum class Kind { Single, Repeat, Multiple, Terminal };
  Kind kind = Kind::Single;
  std::string ref;            // Single: group|production|group.production; Terminal: predicate
  std::vector<Pattern> inner; // Repeat: exactly one; Multiple: element patterns
};

Pattern single(std::string ref);
Pattern repeat(Pattern inner);
Pattern multiple(std::vector<Pattern> inner);
Pattern terminal(std::string predicate);

struct FieldPattern {
  std::string name;
  Pattern pattern;
};

struct Production {
  std::string name;
  std::vector<FieldPattern> fields;
};

struct Group {
  std::string name;
  std::vector<Production> productions;
};

struct Leaf {
  enum class Kind { Int, Float, Symbol, String, Bool };
  Kind kind = Kind::Int;
  int64_t i = 0;
  double f = 0;
  std::string text;
  bool b = false;

  static Leaf integer(int64_t v);
  static Leaf floating(double v);
  static Leaf symbol(std::string s);
  static Leaf string(std::string s);
  static Leaf boolean(bool v);

  bool operator==(const Leaf &o) const;
  std::string str() const;
};

using LeafPredicate = std::function<bool(const Leaf &)>;

class Node;
using NodePtr = std::shared_ptr<const Node>;

// One field slot: a child node, a leaf value, or a list of slots.
struct Child {
  enum class Kind { Node, Leaf, List };
  Kind kind = Kind::Leaf;
  NodePtr node;
  Leaf leaf;
  std::vector<Child> list;

  Child() = default;
  Child(NodePtr n) : kind(Kind::Node), node(std::move(n)) {}
  Child(Leaf l) : kind(Kind::Leaf), leaf(std::move(l)) {}
  static Child listOf(std::vector<Child> cs);
};

class Grammar;
using GrammarPtr = std::shared_ptr<const Grammar>;

class Grammar : public std::enable_shared_from_this<Grammar> {
public:
  // Validates name uniqueness, reference resolution and terminal predicates.
  // The built-in predicate registry {number?, symbol?, string?, boolean?} can
  // be extended per grammar.
  static GrammarPtr define(std::string name, std::vector<Group> groups,
                           std::map<std::string, LeafPredicate> extraPredicates = {});

  // Text form: (define-ast <name> (<group> (<prod> (<field> <pattern>)...)...)...)
  // with <pattern> ::= ref | (repeat <pattern>) | (multiple <pattern>...)
  //                  | (terminal <pred>)
  static GrammarPtr fromSexpr(const Sexpr &form,
                              std::map<std::string, LeafPredicate> extraPredicates = {});
  static GrammarPtr fromText(std::string_view text,
                             std::map<std::string, LeafPredicate> extraPredicates = {});

  const std::string &name() const { return name_; }
  const std::vector<Group> &groups() const { return groups_; }

  const Production *findProduction(std::string_view prod) const;
  const Production &productionOrThrow(std::string_view prod) const;
  // Group a production belongs to.
  const std::string &groupOf(std::string_view prod) const;
  bool hasGroup(std::string_view g) const;
  // True when a node of production `prod` may sit in a slot referencing `ref`.
  bool refAccepts(std::string_view ref, std::string_view prod) const;
  const LeafPredicate &predicate(const std::string &name) const;

private:
  Grammar() = default;
  void validate();

  std::string name_;
  std::vector<Group> groups_;
  std::map<std::string, size_t, std::less<>> groupIndex_;
  std::map<std::string, std::pair<size_t, size_t>, std::less<>> prodIndex_;
  std::map<std::string, LeafPredicate> predicates_;
};

class Node {
public:
  const GrammarPtr &grammar() const { return grammar_; }
  const std::string &production() const { return prod_->name; }
  const Production &productionDef() const { return *prod_; }
  const std::string &group() const;
  const std::vector<Child> &fields() const { return fields_; }
  const Child &field(std::string_view name) const;

private:
  friend NodePtr makeNode(const GrammarPtr &, std::string_view, std::vector<Child>);
  GrammarPtr grammar_;
  const Production *prod_ = nullptr;
  std::vector<Child> fields_;
};

// Checks the children against the production pattern (arity, repetition,
// terminal predicates) and returns an immutable node.
NodePtr makeNode(const GrammarPtr &g, std::string_view production,
                 std::vector<Child> fields);

// Applies f to every node-valued child position (list fields elementwise),
// leaves untouched.  The result of f must still satisfy the slot's reference.
using NodeFn = std::function<NodePtr(const NodePtr &)>;
NodePtr mapChildren(const NodeFn &f, const NodePtr &node);

// A rule either rewrites a node or declines.
using Rule = std::function<std::optional<NodePtr>(const NodePtr &)>;

// Post-order traversal; after a node's children have been rewritten, the
// first matching rule fires once (no fixpoint iteration).  Rules must keep
// the node in its group.  visitCount, when given, counts visited nodes.
NodePtr rewriteBottomUp(std::span<const Rule> rules, const NodePtr &node,
                        size_t *visitCount = nullptr);

bool nodeEquals(const NodePtr &a, const NodePtr &b);

// Canonical text: (production child...) with list fields spliced in field
// order; nested lists print as parenthesized groups.
std::string prettyPrint(const NodePtr &node);
Sexpr nodeToSexpr(const NodePtr &node);

// Generic reader for the canonical form; inverse of prettyPrint.
NodePtr parseNode(const GrammarPtr &g, std::string_view text);
NodePtr nodeFromSexpr(const GrammarPtr &g, const Sexpr &form);

} // namespace dslkit::ast
