#include "dslkit/dsl/synth.hpp"

#include <doctest.h>

using namespace dslkit;

namespace {

synth::Score fiveSampleScore() {
  synth::Score s;
  s.rate = 8;
  s.length = 5;
  s.voices = {{2.0, 0, 5, 1.0}};
  return s;
}

} // namespace

TEST_CASE("score parsing and validation") {
  synth::Score s = synth::parseScore(
      "(score :rate 8000 :length 100 (voice :freq 440 :start 0 :dur 100 :gain 0.5))");
  CHECK(s.rate == 8000);
  CHECK(s.length == 100);
  REQUIRE(s.voices.size() == 1);
  CHECK(s.voices[0].freq == 440);

  SUBCASE("events must lie inside the score") {
    synth::Score bad = fiveSampleScore();
    bad.voices[0].dur = 6;
    try {
      synth::validate(bad);
      FAIL("expected InvalidScore");
    } catch (const Error &e) {
      CHECK(e.code == Err::InvalidScore);
    }
  }
  SUBCASE("gain bounds") {
    synth::Score bad = fiveSampleScore();
    bad.voices[0].gain = 1.5;
    CHECK_THROWS_AS(synth::validate(bad), Error);
  }
}

TEST_CASE("five-sample golden vector") {
  // rate 8, freq 2, gain 1: period 4, half 2 => ramp -1, -0.5, 0, 0.5, wrap.
  synth::RenderResult r = synth::render(fiveSampleScore(), 0, false);
  REQUIRE(r.samples.size() == 5);
  CHECK(r.samples[0] == -1.0);
  CHECK(r.samples[1] == -0.5);
  CHECK(r.samples[2] == 0.0);
  CHECK(r.samples[3] == 0.5);
  CHECK(r.samples[4] == -1.0);
}

TEST_CASE("empty voice list renders silence") {
  synth::Score s;
  s.rate = 8;
  s.length = 8;
  synth::RenderResult r = synth::render(s, 3, false);
  for (double v : r.samples)
    CHECK(v == 0.0);
}

TEST_CASE("buffer identical across optimization levels and runs") {
  synth::Score s;
  s.rate = 800;
  s.length = 400;
  s.voices = {{110.0, 0, 400, 0.7}, {220.0, 100, 200, 0.3}};
  synth::RenderResult base = synth::render(s, 0, false);
  for (int lvl : {1, 2, 3}) {
    synth::RenderResult r = synth::render(s, lvl, false);
    CHECK(r.samples == base.samples);
  }
  CHECK(synth::render(s, 0, false).samples == base.samples);
  CHECK(synth::render(s, 2, true).samples == base.samples);
}

TEST_CASE("single-voice samples stay within [-1, 1] for gain <= 1") {
  synth::Score s;
  s.rate = 8000;
  s.length = 2000;
  s.voices = {{441.5, 0, 2000, 1.0}};
  synth::RenderResult r = synth::render(s, 3, false);
  for (double v : r.samples) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("wav bytes") {
  SUBCASE("zero samples: header only") {
    std::vector<uint8_t> bytes = synth::wavBytes({}, 8000);
    REQUIRE(bytes.size() == 44);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "RIFF");
    CHECK(std::string(bytes.begin() + 8, bytes.begin() + 16) == "WAVEfmt ");
    CHECK(std::string(bytes.begin() + 36, bytes.begin() + 40) == "data");
    // data size zero
    CHECK(bytes[40] == 0);
    CHECK(bytes[41] == 0);
  }
  SUBCASE("full-scale samples") {
    std::vector<uint8_t> hi = synth::wavBytes({1.0}, 8000);
    REQUIRE(hi.size() == 46);
    CHECK(hi[44] == 0xFF);
    CHECK(hi[45] == 0x7F);
    std::vector<uint8_t> lo = synth::wavBytes({-1.0}, 8000);
    CHECK(lo[44] == 0x01);
    CHECK(lo[45] == 0x80);
  }
  SUBCASE("out-of-range input clamps") {
    std::vector<uint8_t> over = synth::wavBytes({2.0}, 8000);
    CHECK(over[44] == 0xFF);
    CHECK(over[45] == 0x7F);
  }
  SUBCASE("header fields") {
    std::vector<uint8_t> bytes = synth::wavBytes({0.0, 0.0}, 8000);
    auto u32 = [&](size_t off) {
      return uint32_t(bytes[off]) | uint32_t(bytes[off + 1]) << 8 |
             uint32_t(bytes[off + 2]) << 16 | uint32_t(bytes[off + 3]) << 24;
    };
    auto u16 = [&](size_t off) {
      return uint32_t(bytes[off]) | uint32_t(bytes[off + 1]) << 8;
    };
    CHECK(u32(4) == 36 + 4);  // riff size
    CHECK(u32(16) == 16);     // fmt chunk size
    CHECK(u16(20) == 1);      // pcm
    CHECK(u16(22) == 1);      // mono
    CHECK(u32(24) == 8000);   // rate
    CHECK(u32(28) == 16000);  // byte rate
    CHECK(u16(32) == 2);      // block align
    CHECK(u16(34) == 16);     // bits
    CHECK(u32(40) == 4);      // data bytes
  }
}

TEST_CASE("specialized render binds the rate and buffer statically") {
  synth::Score s = fiveSampleScore();
  synth::RenderResult r = synth::render(s, 2, true);
  CHECK(r.fnName == "fill@spec0");
  CHECK(r.samples == synth::render(s, 2, false).samples);
}
