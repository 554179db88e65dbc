#pragma once

#include "dslkit/exec.hpp"
#include "dslkit/hir.hpp"

#include <string>
#include <vector>

// Sample renderer: a score (voices with frequency, start, duration, gain)
// becomes one IR function that fills an f32 sample buffer with gain-weighted
// sawtooth waves, plus a PCM WAV writer.
namespace dslkit::synth {

struct Voice {
  double freq = 440;
  uint64_t start = 0;
  uint64_t dur = 0;
  double gain = 1.0;
};

struct Score {
  double rate = 8000;
  uint64_t length = 0; // total samples
  std::vector<Voice> voices;
};

// (score :rate <hz> :length <n> (voice :freq <hz> :start <n> :dur <n> :gain <g>)...)
Score parseScore(std::string_view text);
void validate(const Score &score); // InvalidScore

// Builds fill(out: ptr f32, n: i64, rate: f32): per sample, the sum over
// active voices of gain * sawtooth(freq, x - start, rate).  Voice parameters
// are baked at generation time; the rate stays a runtime argument so it can
// be bound by specialization.
hir::Module build(const Score &score);

inline constexpr const char *kFillName = "fill";
inline constexpr const char *kOutBuffer = "synth.out";

struct RenderResult {
  std::vector<double> samples; // f32 samples widened for inspection
  exec::ExecStats stats;
  std::vector<opt::PassStat> passStats;
  double compileMs = 0;
  std::string fnName;
};

// Compiles and runs the fill function.  With specialize set, the rate is
// bound as a static value and the output buffer as a static address, and the
// derived fill@spec0 is invoked instead.
RenderResult render(const Score &score, int optLevel, bool specialize);

// 16-bit little-endian mono PCM; samples clamped to [-1, 1] and scaled by
// 32767 with ties away from zero.
std::vector<uint8_t> wavBytes(const std::vector<double> &samples, uint32_t rate);
void writeWav(const std::vector<double> &samples, uint32_t rate,
              const std::string &path);

} // namespace dslkit::synth
