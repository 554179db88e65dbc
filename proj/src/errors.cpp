#include "dslkit/errors.hpp"

namespace dslkit {

const char *errName(Err e) {
  switch (e) {
  case Err::DanglingReference: return "DanglingReference";
  case Err::DuplicateName: return "DuplicateName";
  case Err::UnknownTerminalPredicate: return "UnknownTerminalPredicate";
  case Err::ArityMismatch: return "ArityMismatch";
  case Err::TerminalPredicateFailed: return "TerminalPredicateFailed";
  case Err::ResultShapeMismatch: return "ResultShapeMismatch";
  case Err::ShapeError: return "ShapeError";
  case Err::DuplicateParam: return "DuplicateParam";
  case Err::DuplicateFunction: return "DuplicateFunction";
  case Err::UnsizedType: return "UnsizedType";
  case Err::InternalError: return "InternalError";
  case Err::InlineCycle: return "InlineCycle";
  case Err::BindingTypeMismatch: return "BindingTypeMismatch";
  case Err::UnknownParam: return "UnknownParam";
  case Err::UnresolvedHostFunction: return "UnresolvedHostFunction";
  case Err::MarshalError: return "MarshalError";
  case Err::DuplicateRegistration: return "DuplicateRegistration";
  case Err::InvalidSpec: return "InvalidSpec";
  case Err::InvalidScore: return "InvalidScore";
  case Err::UnsupportedConstruct: return "UnsupportedConstruct";
  case Err::IoError: return "IoError";
  case Err::TypecheckFailed: return "TypecheckFailed";
  case Err::VerifyFailed: return "VerifyFailed";
  }
  return "Error";
}

const char *trapName(TrapKind k) {
  switch (k) {
  case TrapKind::DivByZero: return "div-by-zero";
  case TrapKind::OobLoad: return "oob-load";
  case TrapKind::OobStore: return "oob-store";
  case TrapKind::NuwOverflow: return "nuw-overflow";
  case TrapKind::Unreachable: return "unreachable";
  case TrapKind::UseAfterFree: return "use-after-free";
  }
  return "trap";
}

} // namespace dslkit
