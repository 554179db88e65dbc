#pragma once

#include "dslkit/hir.hpp"

#include <cmath>
#include <cstdint>

// One definition of the IR's scalar arithmetic, shared by the constant folder
// and the interpreter.  Integers are two's-complement wrapping at their width;
// signed division wraps on INT_MIN/-1; shift amounts are masked to the width;
// f32 operations round to f32 at every step.
namespace dslkit::arith {

inline uint64_t maskW(uint64_t bits, int w) {
  return w >= 64 ? bits : (bits & ((uint64_t(1) << w) - 1));
}

inline int64_t sextW(uint64_t bits, int w) {
  if (w >= 64)
    return int64_t(bits);
  uint64_t sign = uint64_t(1) << (w - 1);
  return int64_t((maskW(bits, w) ^ sign)) - int64_t(sign);
}

struct IntResult {
  enum class Status { Ok, DivZero, NuwWrap };
  Status status = Status::Ok;
  uint64_t bits = 0;
};

inline IntResult evalIntBinop(hir::Op op, int w, uint64_t ua, uint64_t ub) {
  using hir::Op;
  ua = maskW(ua, w);
  ub = maskW(ub, w);
  int64_t sa = sextW(ua, w), sb = sextW(ub, w);
  auto ok = [&](uint64_t v) { return IntResult{IntResult::Status::Ok, maskW(v, w)}; };
  switch (op) {
  case Op::Add: return ok(ua + ub);
  case Op::Sub: return ok(ua - ub);
  case Op::SubNuw:
    if (ua < ub)
      return {IntResult::Status::NuwWrap, maskW(ua - ub, w)};
    return ok(ua - ub);
  case Op::Mul: return ok(ua * ub);
  case Op::UDiv:
    if (ub == 0)
      return {IntResult::Status::DivZero, 0};
    return ok(ua / ub);
  case Op::SDiv:
    if (ub == 0)
      return {IntResult::Status::DivZero, 0};
    if (sb == -1 && sa == sextW(uint64_t(1) << (w - 1), w))
      return ok(uint64_t(sa)); // wrap on overflow
    return ok(uint64_t(sa / sb));
  case Op::URem:
    if (ub == 0)
      return {IntResult::Status::DivZero, 0};
    return ok(ua % ub);
  case Op::SRem:
    if (ub == 0)
      return {IntResult::Status::DivZero, 0};
    if (sb == -1)
      return ok(0);
    return ok(uint64_t(sa % sb));
  case Op::And: return ok(ua & ub);
  case Op::Or: return ok(ua | ub);
  case Op::Xor: return ok(ua ^ ub);
  case Op::Shl: return ok(ua << (ub & uint64_t(w - 1)));
  case Op::LShr: return ok(ua >> (ub & uint64_t(w - 1)));
  case Op::AShr: return ok(uint64_t(sa >> (ub & uint64_t(w - 1))));
  default: break;
  }
  return {IntResult::Status::DivZero, 0}; // unreachable for int binops
}

inline bool evalIntCmp(hir::Op op, int w, uint64_t ua, uint64_t ub) {
  using hir::Op;
  ua = maskW(ua, w);
  ub = maskW(ub, w);
  int64_t sa = sextW(ua, w), sb = sextW(ub, w);
  switch (op) {
  case Op::IcmpEq: return ua == ub;
  case Op::IcmpNe: return ua != ub;
  case Op::IcmpUlt: return ua < ub;
  case Op::IcmpUle: return ua <= ub;
  case Op::IcmpUgt: return ua > ub;
  case Op::IcmpSlt: return sa < sb;
  case Op::IcmpSle: return sa <= sb;
  default: return false;
  }
}

inline double evalF64Binop(hir::Op op, double a, double b) {
  using hir::Op;
  switch (op) {
  case Op::FAdd: return a + b;
  case Op::FSub: return a - b;
  case Op::FMul: return a * b;
  case Op::FDiv: return a / b;
  case Op::FRem: return std::fmod(a, b);
  default: return 0;
  }
}

inline float evalF32Binop(hir::Op op, float a, float b) {
  using hir::Op;
  switch (op) {
  case Op::FAdd: return a + b;
  case Op::FSub: return a - b;
  case Op::FMul: return a * b;
  case Op::FDiv: return a / b;
  case Op::FRem: return std::fmod(a, b);
  default: return 0;
  }
}

inline bool evalFCmp(hir::Op op, double a, double b) {
  using hir::Op;
  switch (op) { // ordered comparisons: false on NaN
  case Op::FcmpOlt: return a < b;
  case Op::FcmpOle: return a <= b;
  case Op::FcmpOeq: return a == b;
  default: return false;
  }
}

// float -> int conversion: NaN maps to 0, out-of-range saturates.
inline uint64_t fpToUi(double v, int w) {
  if (std::isnan(v))
    return 0;
  if (v <= 0)
    return 0;
  double max = (w >= 64) ? 18446744073709551615.0
                         : double((uint64_t(1) << w) - 1);
  if (v >= max)
    return maskW(~uint64_t(0), w);
  return maskW(uint64_t(v), w);
}

inline uint64_t fpToSi(double v, int w) {
  if (std::isnan(v))
    return 0;
  double lo = -std::ldexp(1.0, w - 1);
  double hi = std::ldexp(1.0, w - 1) - 1;
  if (v <= lo)
    return maskW(uint64_t(1) << (w - 1), w);
  if (v >= hi)
    return maskW((uint64_t(1) << (w - 1)) - 1, w);
  return maskW(uint64_t(int64_t(v)), w);
}

inline double uiToFp(uint64_t bits, int w) { return double(maskW(bits, w)); }
inline double siToFp(uint64_t bits, int w) { return double(sextW(bits, w)); }

} // namespace dslkit::arith
