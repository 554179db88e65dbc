#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace dslkit {

enum class Err {
  // astdef
  DanglingReference,
  DuplicateName,
  UnknownTerminalPredicate,
  ArityMismatch,
  TerminalPredicateFailed,
  ResultShapeMismatch,
  // hir builders
  ShapeError,
  DuplicateParam,
  DuplicateFunction,
  // lowering / layout
  UnsizedType,
  InternalError,
  // opt
  InlineCycle,
  BindingTypeMismatch,
  UnknownParam,
  // exec
  UnresolvedHostFunction,
  MarshalError,
  DuplicateRegistration,
  // dsls
  InvalidSpec,
  InvalidScore,
  UnsupportedConstruct,
  IoError,
  // aggregate failures for throw-style entry points
  TypecheckFailed,
  VerifyFailed,
};

const char *errName(Err e);

class Error : public std::runtime_error {
public:
  Error(Err code, std::string detail)
      : std::runtime_error(std::string(errName(code)) + ": " + detail),
        code(code), detail(std::move(detail)) {}
  Err code;
  std::string detail;
};

[[noreturn]] inline void raise(Err code, std::string detail) {
  throw Error(code, std::move(detail));
}

// Non-throwing diagnostic, used by typecheck and verify which report lists.
struct Diag {
  std::string code;    // e.g. "TypeMismatch", "UseBeforeDef"
  std::string where;   // function / block / field coordinates
  std::string message;

  std::string str() const { return code + " [" + where + "] " + message; }
};

// Runtime fault raised by the execution engine, with fault coordinates.
enum class TrapKind {
  DivByZero,
  OobLoad,
  OobStore,
  NuwOverflow,
  Unreachable,
  UseAfterFree,
};

const char *trapName(TrapKind k);

class Trap : public std::runtime_error {
public:
  Trap(TrapKind kind, std::string function, std::string block, int instr)
      : std::runtime_error(std::string("trap: ") + trapName(kind) + " in " +
                           function + " at " + block + "#" +
                           std::to_string(instr)),
        kind(kind), function(std::move(function)), block(std::move(block)),
        instr(instr) {}
  TrapKind kind;
  std::string function;
  std::string block;
  int instr;
};

} // namespace dslkit
