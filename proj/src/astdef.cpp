#include "dslkit/astdef.hpp"

#include <algorithm>

namespace dslkit::ast {

Pattern single(std::string ref) {
  Pattern p;
  p.kind = Pattern::Kind::Single;
  p.ref = std::move(ref);
  return p;
}

Pattern repeat(Pattern inner) {
  Pattern p;
  p.kind = Pattern::Kind::Repeat;
  p.inner.push_back(std::move(inner));
  return p;
}

Pattern multiple(std::vector<Pattern> inner) {
  Pattern p;
  p.kind = Pattern::Kind::Multiple;
  p.inner = std::move(inner);
  return p;
}

Pattern terminal(std::string predicate) {
  Pattern p;
  p.kind = Pattern::Kind::Terminal;
  p.ref = std::move(predicate);
  return p;
}

Leaf Leaf::integer(int64_t v) {
  Leaf l;
  l.kind = Kind::Int;
  l.i = v;
  return l;
}

Leaf Leaf::floating(double v) {
  Leaf l;
  l.kind = Kind::Float;
  l.f = v;
  return l;
}

Leaf Leaf::symbol(std::string s) {
  Leaf l;
  l.kind = Kind::Symbol;
  l.text = std::move(s);
  return l;
}

Leaf Leaf::string(std::string s) {
  Leaf l;
  l.kind = Kind::String;
  l.text = std::move(s);
  return l;
}

Leaf Leaf::boolean(bool v) {
  Leaf l;
  l.kind = Kind::Bool;
  l.b = v;
  return l;
}

bool Leaf::operator==(const Leaf &o) const {
  if (kind != o.kind)
    return false;
  switch (kind) {
  case Kind::Int: return i == o.i;
  case Kind::Float: return f == o.f || (f != f && o.f != o.f);
  case Kind::Symbol:
  case Kind::String: return text == o.text;
  case Kind::Bool: return b == o.b;
  }
  return false;
}

std::string Leaf::str() const {
  switch (kind) {
  case Kind::Int: return std::to_string(i);
  case Kind::Float: return formatDouble(f);
  case Kind::Symbol: return text;
  case Kind::String: return writeSexpr(Sexpr::str(text));
  case Kind::Bool: return b ? "#t" : "#f";
  }
  return {};
}

Child Child::listOf(std::vector<Child> cs) {
  Child c;
  c.kind = Kind::List;
  c.list = std::move(cs);
  return c;
}

namespace {

std::map<std::string, LeafPredicate> builtinPredicates() {
  std::map<std::string, LeafPredicate> m;
  m["number?"] = [](const Leaf &l) {
    return l.kind == Leaf::Kind::Int || l.kind == Leaf::Kind::Float;
  };
  m["symbol?"] = [](const Leaf &l) { return l.kind == Leaf::Kind::Symbol; };
  m["string?"] = [](const Leaf &l) { return l.kind == Leaf::Kind::String; };
  m["boolean?"] = [](const Leaf &l) { return l.kind == Leaf::Kind::Bool; };
  return m;
}

} // namespace

GrammarPtr Grammar::define(std::string name, std::vector<Group> groups,
                           std::map<std::string, LeafPredicate> extraPredicates) {
  auto g = std::shared_ptr<Grammar>(new Grammar());
  g->name_ = std::move(name);
  g->groups_ = std::move(groups);
  g->predicates_ = builtinPredicates();
  for (auto &[k, v] : extraPredicates)
    g->predicates_[k] = std::move(v);
  g->validate();
  return g;
}

void Grammar::validate() {
  // Group and production names share one namespace.
  for (size_t gi = 0; gi < groups_.size(); gi++) {
    const Group &grp = groups_[gi];
    if (prodIndex_.count(grp.name) || !groupIndex_.emplace(grp.name, gi).second)
      raise(Err::DuplicateName, "group '" + grp.name + "'");
    if (grp.productions.empty())
      raise(Err::ShapeError, "group '" + grp.name + "' has no productions");
    for (size_t pi = 0; pi < grp.productions.size(); pi++) {
      const Production &prod = grp.productions[pi];
      if (groupIndex_.count(prod.name) ||
          !prodIndex_.emplace(prod.name, std::make_pair(gi, pi)).second)
        raise(Err::DuplicateName, "production '" + prod.name + "'");
      std::vector<std::string> seen;
      for (const FieldPattern &fp : prod.fields) {
        if (std::find(seen.begin(), seen.end(), fp.name) != seen.end())
          raise(Err::DuplicateName,
                "field '" + fp.name + "' in production '" + prod.name + "'");
        seen.push_back(fp.name);
      }
    }
  }

  // References resolve, terminal predicates exist.
  std::function<void(const Pattern &, const std::string &)> checkPat =
      [&](const Pattern &p, const std::string &where) {
        switch (p.kind) {
        case Pattern::Kind::Single: {
          std::string ref = p.ref;
          auto dot = ref.find('.');
          if (dot != std::string::npos) {
            std::string grp = ref.substr(0, dot), prod = ref.substr(dot + 1);
            auto it = prodIndex_.find(prod);
            if (!groupIndex_.count(grp) || it == prodIndex_.end() ||
                groups_[it->second.first].name != grp)
              raise(Err::DanglingReference, "'" + ref + "' in " + where);
          } else if (!groupIndex_.count(ref) && !prodIndex_.count(ref)) {
            raise(Err::DanglingReference, "'" + ref + "' in " + where);
          }
          break;
        }
        case Pattern::Kind::Repeat:
          checkPat(p.inner.at(0), where);
          break;
        case Pattern::Kind::Multiple:
          for (const Pattern &q : p.inner)
            checkPat(q, where);
          break;
        case Pattern::Kind::Terminal:
          if (!predicates_.count(p.ref))
            raise(Err::UnknownTerminalPredicate, "'" + p.ref + "' in " + where);
          break;
        }
      };
  for (const Group &grp : groups_)
    for (const Production &prod : grp.productions)
      for (const FieldPattern &fp : prod.fields)
        checkPat(fp.pattern, "production '" + prod.name + "'");
}

const Production *Grammar::findProduction(std::string_view prod) const {
  auto it = prodIndex_.find(prod);
  if (it == prodIndex_.end())
    return nullptr;
  return &groups_[it->second.first].productions[it->second.second];
}

const Production &Grammar::productionOrThrow(std::string_view prod) const {
  const Production *p = findProduction(prod);
  if (!p)
    raise(Err::DanglingReference, "no production '" + std::string(prod) + "'");
  return *p;
}

const std::string &Grammar::groupOf(std::string_view prod) const {
  auto it = prodIndex_.find(prod);
  if (it == prodIndex_.end())
    raise(Err::DanglingReference, "no production '" + std::string(prod) + "'");
  return groups_[it->second.first].name;
}

bool Grammar::hasGroup(std::string_view g) const {
  return groupIndex_.count(std::string(g)) != 0;
}

bool Grammar::refAccepts(std::string_view ref, std::string_view prod) const {
  auto dot = ref.find('.');
  if (dot != std::string_view::npos)
    return ref.substr(dot + 1) == prod;
  if (groupIndex_.count(std::string(ref)))
    return groupOf(prod) == ref;
  return ref == prod;
}

const LeafPredicate &Grammar::predicate(const std::string &name) const {
  auto it = predicates_.find(name);
  if (it == predicates_.end())
    raise(Err::UnknownTerminalPredicate, "'" + name + "'");
  return it->second;
}

const std::string &Node::group() const { return grammar_->groupOf(prod_->name); }

const Child &Node::field(std::string_view name) const {
  for (size_t i = 0; i < prod_->fields.size(); i++)
    if (prod_->fields[i].name == name)
      return fields_[i];
  raise(Err::DanglingReference,
        "no field '" + std::string(name) + "' in production '" + prod_->name + "'");
}

namespace {

void checkChild(const Grammar &g, const Pattern &pat, const Child &c,
                const std::string &where) {
  switch (pat.kind) {
  case Pattern::Kind::Single:
    if (c.kind != Child::Kind::Node)
      raise(Err::ArityMismatch, where + ": expected node for '" + pat.ref + "'");
    if (!g.refAccepts(pat.ref, c.node->production()))
      raise(Err::ArityMismatch, where + ": node '" + c.node->production() +
                                    "' does not satisfy '" + pat.ref + "'");
    break;
  case Pattern::Kind::Repeat:
    if (c.kind != Child::Kind::List)
      raise(Err::ArityMismatch, where + ": expected list");
    for (const Child &e : c.list)
      checkChild(g, pat.inner[0], e, where);
    break;
  case Pattern::Kind::Multiple:
    if (c.kind != Child::Kind::List || c.list.size() != pat.inner.size())
      raise(Err::ArityMismatch, where + ": expected sequence of " +
                                    std::to_string(pat.inner.size()));
    for (size_t i = 0; i < pat.inner.size(); i++)
      checkChild(g, pat.inner[i], c.list[i], where);
    break;
  case Pattern::Kind::Terminal: {
    if (c.kind != Child::Kind::Leaf)
      raise(Err::ArityMismatch, where + ": expected leaf value");
    if (!g.predicate(pat.ref)(c.leaf))
      raise(Err::TerminalPredicateFailed,
            where + ": value " + c.leaf.str() + " fails " + pat.ref);
    break;
  }
  }
}

} // namespace

NodePtr makeNode(const GrammarPtr &g, std::string_view production,
                 std::vector<Child> fields) {
  const Production &prod = g->productionOrThrow(production);
  if (fields.size() != prod.fields.size())
    raise(Err::ArityMismatch, "production '" + prod.name + "' wants " +
                                  std::to_string(prod.fields.size()) +
                                  " fields, got " + std::to_string(fields.size()));
  for (size_t i = 0; i < fields.size(); i++)
    checkChild(*g, prod.fields[i].pattern, fields[i],
               "'" + prod.name + "." + prod.fields[i].name + "'");
  auto n = std::make_shared<Node>();
  n->grammar_ = g;
  n->prod_ = &prod;
  n->fields_ = std::move(fields);
  return n;
}

namespace {

Child mapChild(const Grammar &g, const Pattern &pat, const Child &c,
               const NodeFn &f, const std::string &where) {
  switch (pat.kind) {
  case Pattern::Kind::Single: {
    NodePtr r = f(c.node);
    if (!r || !g.refAccepts(pat.ref, r->production()))
      raise(Err::ResultShapeMismatch,
            where + ": mapped node does not satisfy '" + pat.ref + "'");
    return Child(std::move(r));
  }
  case Pattern::Kind::Repeat: {
    std::vector<Child> out;
    out.reserve(c.list.size());
    for (const Child &e : c.list)
      out.push_back(mapChild(g, pat.inner[0], e, f, where));
    return Child::listOf(std::move(out));
  }
  case Pattern::Kind::Multiple: {
    std::vector<Child> out;
    out.reserve(c.list.size());
    for (size_t i = 0; i < pat.inner.size(); i++)
      out.push_back(mapChild(g, pat.inner[i], c.list[i], f, where));
    return Child::listOf(std::move(out));
  }
  case Pattern::Kind::Terminal:
    return c;
  }
  return c;
}

} // namespace

NodePtr mapChildren(const NodeFn &f, const NodePtr &node) {
  const Production &prod = node->productionDef();
  std::vector<Child> out;
  out.reserve(node->fields().size());
  for (size_t i = 0; i < prod.fields.size(); i++)
    out.push_back(mapChild(*node->grammar(), prod.fields[i].pattern,
                           node->fields()[i], f,
                           "'" + prod.name + "." + prod.fields[i].name + "'"));
  return makeNode(node->grammar(), prod.name, std::move(out));
}

NodePtr rewriteBottomUp(std::span<const Rule> rules, const NodePtr &node,
                        size_t *visitCount) {
  NodeFn walk = [&](const NodePtr &n) -> NodePtr {
    if (visitCount)
      (*visitCount)++;
    NodePtr mapped = mapChildren([&](const NodePtr &c) { return walk(c); }, n);
    for (const Rule &rule : rules) {
      if (auto r = rule(mapped)) {
        if (!*r || (*r)->group() != mapped->group())
          raise(Err::ResultShapeMismatch,
                "rule result leaves group '" + mapped->group() + "'");
        return *r;
      }
    }
    return mapped;
  };
  return walk(node);
}

namespace {

bool childEquals(const Child &a, const Child &b) {
  if (a.kind != b.kind)
    return false;
  switch (a.kind) {
  case Child::Kind::Node:
    return nodeEquals(a.node, b.node);
  case Child::Kind::Leaf:
    return a.leaf == b.leaf;
  case Child::Kind::List:
    if (a.list.size() != b.list.size())
      return false;
    for (size_t i = 0; i < a.list.size(); i++)
      if (!childEquals(a.list[i], b.list[i]))
        return false;
    return true;
  }
  return false;
}

} // namespace

bool nodeEquals(const NodePtr &a, const NodePtr &b) {
  if (a == b)
    return true;
  if (!a || !b || a->production() != b->production() ||
      a->fields().size() != b->fields().size())
    return false;
  for (size_t i = 0; i < a->fields().size(); i++)
    if (!childEquals(a->fields()[i], b->fields()[i]))
      return false;
  return true;
}

namespace {

Sexpr leafToSexpr(const Leaf &l) {
  switch (l.kind) {
  case Leaf::Kind::Int: return Sexpr::integer(l.i);
  case Leaf::Kind::Float: return Sexpr::floating(l.f);
  case Leaf::Kind::Symbol: return Sexpr::symbol(l.text);
  case Leaf::Kind::String: return Sexpr::str(l.text);
  case Leaf::Kind::Bool: return Sexpr::boolean_(l.b);
  }
  return Sexpr::integer(0);
}

Sexpr childToSexpr(const Child &c) {
  switch (c.kind) {
  case Child::Kind::Node:
    return nodeToSexpr(c.node);
  case Child::Kind::Leaf:
    return leafToSexpr(c.leaf);
  case Child::Kind::List: {
    std::vector<Sexpr> items;
    items.reserve(c.list.size());
    for (const Child &e : c.list)
      items.push_back(childToSexpr(e));
    return Sexpr::list(std::move(items));
  }
  }
  return Sexpr::list({});
}

} // namespace

// Splicing two repeat fields into one flat form would make the boundary
// between them unrecoverable, so such productions keep their list fields
// parenthesized.
static bool spliceLists(const Production &prod) {
  size_t repeats = 0;
  for (const FieldPattern &fp : prod.fields)
    if (fp.pattern.kind == Pattern::Kind::Repeat)
      repeats++;
  return repeats <= 1;
}

Sexpr nodeToSexpr(const NodePtr &node) {
  std::vector<Sexpr> items;
  items.push_back(Sexpr::symbol(node->production()));
  const Production &prod = node->productionDef();
  bool splice = spliceLists(prod);
  for (size_t i = 0; i < prod.fields.size(); i++) {
    const Child &c = node->fields()[i];
    if (splice && c.kind == Child::Kind::List) {
      for (const Child &e : c.list)
        items.push_back(childToSexpr(e));
    } else {
      items.push_back(childToSexpr(c));
    }
  }
  return Sexpr::list(std::move(items));
}

std::string prettyPrint(const NodePtr &node) { return writeSexpr(nodeToSexpr(node)); }

namespace {

Leaf leafFromSexpr(const Sexpr &e) {
  switch (e.kind) {
  case Sexpr::Kind::Int: return Leaf::integer(e.asInt());
  case Sexpr::Kind::Float: return Leaf::floating(e.asDouble());
  case Sexpr::Kind::Symbol: return Leaf::symbol(e.text);
  case Sexpr::Kind::String: return Leaf::string(e.text);
  case Sexpr::Kind::Bool: return Leaf::boolean(e.boolean);
  default:
    throw ParseError("expected leaf value", e.line, e.col);
  }
}

struct NodeReader {
  const GrammarPtr &g;

  // Matches one (non-spliced) pattern against one form.
  std::optional<Child> matchOne(const Pattern &pat, const Sexpr &e) {
    switch (pat.kind) {
    case Pattern::Kind::Single: {
      if (!e.isList() || e.items.empty() || !e.items[0].isSymbol())
        return std::nullopt;
      const Production *prod = g->findProduction(e.items[0].text);
      if (!prod || !g->refAccepts(pat.ref, prod->name))
        return std::nullopt;
      auto n = tryNode(*prod, e);
      if (!n)
        return std::nullopt;
      return Child(*n);
    }
    case Pattern::Kind::Repeat: {
      if (!e.isList())
        return std::nullopt;
      std::vector<Child> out;
      for (const Sexpr &item : e.items) {
        auto c = matchOne(pat.inner[0], item);
        if (!c)
          return std::nullopt;
        out.push_back(std::move(*c));
      }
      return Child::listOf(std::move(out));
    }
    case Pattern::Kind::Multiple: {
      if (!e.isList() || e.items.size() != pat.inner.size())
        return std::nullopt;
      std::vector<Child> out;
      for (size_t i = 0; i < pat.inner.size(); i++) {
        auto c = matchOne(pat.inner[i], e.items[i]);
        if (!c)
          return std::nullopt;
        out.push_back(std::move(*c));
      }
      return Child::listOf(std::move(out));
    }
    case Pattern::Kind::Terminal: {
      if (e.isList())
        return std::nullopt;
      Leaf l = leafFromSexpr(e);
      if (!g->predicate(pat.ref)(l))
        return std::nullopt;
      return Child(std::move(l));
    }
    }
    return std::nullopt;
  }

  // Backtracking match of the spliced field sequence.  Repeat fields are the
  // only source of choice; they try longest matches first.
  bool matchFields(const std::vector<FieldPattern> &fields, size_t fi,
                   const std::vector<Sexpr> &items, size_t ii,
                   std::vector<Child> &out) {
    if (fi == fields.size())
      return ii == items.size();
    const Pattern &pat = fields[fi].pattern;
    if (pat.kind == Pattern::Kind::Repeat) {
      // Greedily collect as many elements as match, then backtrack.
      std::vector<Child> elems;
      size_t j = ii;
      while (j < items.size()) {
        auto c = matchOne(pat.inner[0], items[j]);
        if (!c)
          break;
        elems.push_back(std::move(*c));
        j++;
      }
      for (size_t take = elems.size() + 1; take-- > 0;) {
        out.push_back(Child::listOf(
            std::vector<Child>(elems.begin(), elems.begin() + take)));
        if (matchFields(fields, fi + 1, items, ii + take, out))
          return true;
        out.pop_back();
      }
      return false;
    }
    if (pat.kind == Pattern::Kind::Multiple) {
      // Spliced fixed-length sequence: consume exactly inner.size() items.
      if (ii + pat.inner.size() > items.size())
        return false;
      std::vector<Child> elems;
      for (size_t k = 0; k < pat.inner.size(); k++) {
        auto c = matchOne(pat.inner[k], items[ii + k]);
        if (!c)
          return false;
        elems.push_back(std::move(*c));
      }
      out.push_back(Child::listOf(std::move(elems)));
      if (matchFields(fields, fi + 1, items, ii + pat.inner.size(), out))
        return true;
      out.pop_back();
      return false;
    }
    if (ii >= items.size())
      return false;
    auto c = matchOne(pat, items[ii]);
    if (!c)
      return false;
    out.push_back(std::move(*c));
    if (matchFields(fields, fi + 1, items, ii + 1, out))
      return true;
    out.pop_back();
    return false;
  }

  std::optional<NodePtr> tryNode(const Production &prod, const Sexpr &e) {
    std::vector<Sexpr> rest(e.items.begin() + 1, e.items.end());
    std::vector<Child> out;
    if (spliceLists(prod)) {
      if (!matchFields(prod.fields, 0, rest, 0, out))
        return std::nullopt;
    } else {
      // One form per field; list fields arrive parenthesized.
      if (rest.size() != prod.fields.size())
        return std::nullopt;
      for (size_t i = 0; i < prod.fields.size(); i++) {
        auto c = matchOne(prod.fields[i].pattern, rest[i]);
        if (!c)
          return std::nullopt;
        out.push_back(std::move(*c));
      }
    }
    return makeNode(g, prod.name, std::move(out));
  }
};

} // namespace

NodePtr nodeFromSexpr(const GrammarPtr &g, const Sexpr &form) {
  if (!form.isList() || form.items.empty() || !form.items[0].isSymbol())
    throw ParseError("expected (production ...) form", form.line, form.col);
  const Production *prod = g->findProduction(form.items[0].text);
  if (!prod)
    throw ParseError("unknown production '" + form.items[0].text + "'",
                     form.line, form.col);
  NodeReader r{g};
  auto n = r.tryNode(*prod, form);
  if (!n)
    throw ParseError("children do not match pattern of '" + prod->name + "'",
                     form.line, form.col);
  return *n;
}

NodePtr parseNode(const GrammarPtr &g, std::string_view text) {
  return nodeFromSexpr(g, readSexpr(text));
}

namespace {

Pattern patternFromSexpr(const Sexpr &e) {
  if (e.isSymbol())
    return single(e.text);
  if (!e.isList() || e.items.empty() || !e.items[0].isSymbol())
    throw ParseError("bad pattern", e.line, e.col);
  std::string_view head = e.items[0].text;
  if (head == "repeat") {
    if (e.items.size() != 2)
      throw ParseError("(repeat <pattern>)", e.line, e.col);
    return repeat(patternFromSexpr(e.items[1]));
  }
  if (head == "multiple") {
    std::vector<Pattern> inner;
    for (size_t i = 1; i < e.items.size(); i++)
      inner.push_back(patternFromSexpr(e.items[i]));
    return multiple(std::move(inner));
  }
  if (head == "terminal") {
    if (e.items.size() != 2 || !e.items[1].isSymbol())
      throw ParseError("(terminal <predicate>)", e.line, e.col);
    return terminal(e.items[1].text);
  }
  throw ParseError("unknown pattern head '" + std::string(head) + "'", e.line,
                   e.col);
}

} // namespace

GrammarPtr Grammar::fromSexpr(const Sexpr &form,
                              std::map<std::string, LeafPredicate> extraPredicates) {
  if (!form.isList() || form.items.size() < 2 || !form.items[0].isSymbol("define-ast") ||
      !form.items[1].isSymbol())
    throw ParseError("expected (define-ast <name> <group>...)", form.line, form.col);
  std::vector<Group> groups;
  for (size_t gi = 2; gi < form.items.size(); gi++) {
    const Sexpr &gf = form.items[gi];
    if (!gf.isList() || gf.items.empty() || !gf.items[0].isSymbol())
      throw ParseError("expected (<group> <production>...)", gf.line, gf.col);
    Group grp;
    grp.name = gf.items[0].text;
    for (size_t pi = 1; pi < gf.items.size(); pi++) {
      const Sexpr &pf = gf.items[pi];
      if (!pf.isList() || pf.items.empty() || !pf.items[0].isSymbol())
        throw ParseError("expected (<production> <field>...)", pf.line, pf.col);
      Production prod;
      prod.name = pf.items[0].text;
      for (size_t fi = 1; fi < pf.items.size(); fi++) {
        const Sexpr &ff = pf.items[fi];
        if (!ff.isList() || ff.items.size() != 2 || !ff.items[0].isSymbol())
          throw ParseError("expected (<field> <pattern>)", ff.line, ff.col);
        prod.fields.push_back({ff.items[0].text, patternFromSexpr(ff.items[1])});
      }
      grp.productions.push_back(std::move(prod));
    }
    groups.push_back(std::move(grp));
  }
  return define(form.items[1].text, std::move(groups), std::move(extraPredicates));
}

GrammarPtr Grammar::fromText(std::string_view text,
                             std::map<std::string, LeafPredicate> extraPredicates) {
  return fromSexpr(readSexpr(text), std::move(extraPredicates));
}

} // namespace dslkit::ast
