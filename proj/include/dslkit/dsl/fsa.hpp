#pragma once

#include "dslkit/exec.hpp"
#include "dslkit/hir.hpp"

#include <set>
#include <string>
#include <vector>

// Finite-automaton compiler: a machine description becomes either one
// function per state (tail calls between states) or a single function whose
// states are labeled blocks joined by jumps.
namespace dslkit::fsa {

struct Transition {
  std::string input; // symbol consumed
  std::string next;  // target state
};

struct State {
  std::string name;
  std::vector<Transition> transitions;
};

struct FsaSpec {
  std::string name;
  std::string start;
  std::set<std::string> finals;
  std::vector<State> states;
};

// Text form: (fsa <name> <start> (<final>...) (<state> ((<input> <next>)...))...)
FsaSpec parseSpec(std::string_view text);

// InvalidSpec on undeclared states, duplicate per-state inputs, or a machine
// name colliding with a state name.
void validate(const FsaSpec &spec);

enum class Style { Functions, Blocks };

// Functions style entry point is the machine name: name(inp, len).
hir::Module compile(const FsaSpec &spec, Style style);

bool match(const exec::CompiledModule &cm, const FsaSpec &spec,
           const std::vector<std::string> &word);

// Generated chain accepting exactly (a|d)^(len-1) r, every link always-inline.
std::vector<hir::Function> buildMoreChain(uint64_t len);
// The chain plus a "main" entry that also checks the word length.
hir::Module moreChainModule(uint64_t len);

// The machine from the worked example: c(a|d)*r.
FsaSpec cadrSpec();

} // namespace dslkit::fsa
