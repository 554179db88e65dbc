#include "dslkit/dsl/fsa.hpp"

#include "dslkit/sexpr.hpp"

namespace dslkit::fsa {

using namespace hir;

FsaSpec parseSpec(std::string_view text) {
  Sexpr form = readSexpr(text);
  if (form.head() != "fsa" || form.size() < 4)
    throw ParseError("expected (fsa <name> <start> (<final>...) <state>...)",
                     form.line, form.col);
  FsaSpec spec;
  spec.name = form.at(1).asSymbol();
  spec.start = form.at(2).asSymbol();
  for (const Sexpr &f : form.at(3).items)
    spec.finals.insert(f.asSymbol());
  for (size_t i = 4; i < form.size(); i++) {
    const Sexpr &sf = form.at(i);
    State st;
    st.name = sf.at(0).asSymbol();
    for (const Sexpr &tf : sf.at(1).items)
      st.transitions.push_back({tf.at(0).asSymbol(), tf.at(1).asSymbol()});
    spec.states.push_back(std::move(st));
  }
  validate(spec);
  return spec;
}

void validate(const FsaSpec &spec) {
  std::set<std::string> names;
  for (const State &st : spec.states)
    if (!names.insert(st.name).second)
      raise(Err::InvalidSpec, "duplicate state '" + st.name + "'");
  if (!names.count(spec.start))
    raise(Err::InvalidSpec, "start state '" + spec.start + "' not declared");
  if (names.count(spec.name))
    raise(Err::InvalidSpec, "machine name '" + spec.name + "' collides with a state");
  for (const std::string &f : spec.finals)
    if (!names.count(f))
      raise(Err::InvalidSpec, "final state '" + f + "' not declared");
  for (const State &st : spec.states) {
    std::set<std::string> inputs;
    for (const Transition &t : st.transitions) {
      if (!inputs.insert(t.input).second)
        raise(Err::InvalidSpec, "state '" + st.name + "' has duplicate input '" +
                                    t.input + "'");
      if (!names.count(t.next))
        raise(Err::InvalidSpec, "transition target '" + t.next + "' not declared");
    }
  }
}

namespace {

TypeRef symPtr() { return ptr(symType()); }

// if (pos < len) switch inp[pos] ... else return <final?>
StmtRef stateBodyFunctions(const FsaSpec &spec, const State &st) {
  std::vector<std::pair<ExprRef, StmtRef>> cases;
  for (const Transition &t : st.transitions)
    cases.emplace_back(
        symLit(t.input),
        ret(app(defined(t.next), {var("inp"), add1(var("pos")), var("len")})));
  StmtRef dispatch = switchStmt(arrayRef(var("inp"), var("pos")),
                                std::move(cases), ret(boolLit(false)));
  return ifStmt(icmpUlt(var("pos"), var("len")), dispatch,
                ret(boolLit(spec.finals.count(st.name) != 0)));
}

} // namespace

hir::Module compile(const FsaSpec &spec, Style style) {
  validate(spec);
  Module m;
  m.name = spec.name;

  if (style == Style::Functions) {
    // Entry calls the start state with pos = 0.
    moduleAdd(m, function(spec.name,
                          {{"inp", symPtr()}, {"len", i64()}}, hostBool(),
                          ret(app(defined(spec.start),
                                  {var("inp"), ui64(0), var("len")}))));
    for (const State &st : spec.states)
      moduleAdd(m, function(st.name,
                            {{"inp", symPtr()}, {"pos", i64()}, {"len", i64()}},
                            hostBool(), stateBodyFunctions(spec, st)));
    return m;
  }

  // Blocks style: one function, one label per state, jumps for transitions.
  std::vector<StmtRef> labels;
  auto emitState = [&](const State &st) {
    std::vector<std::pair<ExprRef, StmtRef>> cases;
    for (const Transition &t : st.transitions)
      cases.emplace_back(symLit(t.input),
                         block({set("pos", add1(var("pos"))), jump(t.next)}));
    StmtRef dispatch = switchStmt(arrayRef(var("inp"), var("pos")),
                                  std::move(cases), ret(boolLit(false)));
    StmtRef body = ifStmt(icmpUlt(var("pos"), var("len")), dispatch,
                          ret(boolLit(spec.finals.count(st.name) != 0)));
    labels.push_back(label(st.name, body));
  };
  for (const State &st : spec.states)
    if (st.name == spec.start)
      emitState(st);
  for (const State &st : spec.states)
    if (st.name != spec.start)
      emitState(st);

  ExprRef driver = let({{"pos", ui64(0), i64()}}, block(std::move(labels)),
                       boolLit(false));
  moduleAdd(m, function(spec.name, {{"inp", symPtr()}, {"len", i64()}},
                        hostBool(), exprStmt(driver)));
  return m;
}

bool match(const exec::CompiledModule &cm, const FsaSpec &spec,
           const std::vector<std::string> &word) {
  auto [result, stats] = cm.apply(spec.name, {word});
  return std::get<bool>(result);
}

std::vector<hir::Function> buildMoreChain(uint64_t len) {
  if (len < 1)
    raise(Err::ShapeError, "chain length must be >= 1");
  auto linkName = [](uint64_t i) { return "more-" + std::to_string(i); };
  std::vector<Function> out;
  for (uint64_t i = 0; i < len; i++) {
    StmtRef body;
    if (i == len - 1) {
      body = switchStmt(arrayRef(var("inp"), ui64(i)),
                        {{symLit("r"), ret(boolLit(true))}},
                        ret(boolLit(false)));
    } else {
      StmtRef advance = ret(app(defined(linkName(i + 1)), {var("inp")}));
      body = switchStmt(arrayRef(var("inp"), ui64(i)),
                        {{symLit("a"), advance}, {symLit("d"), advance}},
                        ret(boolLit(false)));
    }
    out.push_back(function(linkName(i), {{"inp", symPtr()}}, hostBool(), body,
                           {kAttrAlwaysInline}));
  }
  return out;
}

hir::Module moreChainModule(uint64_t len) {
  Module m;
  m.name = "mores";
  for (Function &f : buildMoreChain(len))
    moduleAdd(m, std::move(f));
  // Words of any other length are rejected before any element is read.
  moduleAdd(m, function("main", {{"inp", symPtr()}, {"len", i64()}}, hostBool(),
                        ifStmt(icmpEq(var("len"), ui64(len)),
                               ret(app(defined("more-0"), {var("inp")})),
                               ret(boolLit(false)))));
  return m;
}

FsaSpec cadrSpec() {
  FsaSpec spec;
  spec.name = "M";
  spec.start = "init";
  spec.finals = {"end"};
  spec.states = {{"init", {{"c", "more"}}},
                 {"more", {{"a", "more"}, {"d", "more"}, {"r", "end"}}},
                 {"end", {}}};
  return spec;
}

} // namespace dslkit::fsa
