#include "dslkit/dsl/synth.hpp"

#include "dslkit/sexpr.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace dslkit::synth {

using namespace hir;

Score parseScore(std::string_view text) {
  Sexpr form = readSexpr(text);
  if (form.head() != "score")
    throw ParseError("expected (score :rate <hz> :length <n> (voice ...)...)",
                     form.line, form.col);
  Score score;
  size_t i = 1;
  while (i < form.size()) {
    const Sexpr &item = form.at(i);
    if (item.isSymbol(":rate")) {
      score.rate = form.at(i + 1).asDouble();
      i += 2;
    } else if (item.isSymbol(":length")) {
      score.length = uint64_t(form.at(i + 1).asInt());
      i += 2;
    } else if (item.head() == "voice") {
      Voice v;
      size_t j = 1;
      while (j + 1 < item.size()) {
        const std::string &key = item.at(j).asSymbol();
        if (key == ":freq")
          v.freq = item.at(j + 1).asDouble();
        else if (key == ":start")
          v.start = uint64_t(item.at(j + 1).asInt());
        else if (key == ":dur")
          v.dur = uint64_t(item.at(j + 1).asInt());
        else if (key == ":gain")
          v.gain = item.at(j + 1).asDouble();
        else
          throw ParseError("unknown voice key '" + key + "'", item.line, item.col);
        j += 2;
      }
      score.voices.push_back(v);
      i++;
    } else {
      throw ParseError("unknown score item", item.line, item.col);
    }
  }
  validate(score);
  return score;
}

void validate(const Score &score) {
  if (score.rate <= 0)
    raise(Err::InvalidScore, "sample rate must be positive");
  for (const Voice &v : score.voices) {
    if (v.freq <= 0)
      raise(Err::InvalidScore, "voice frequency must be positive");
    if (v.gain < 0 || v.gain > 1)
      raise(Err::InvalidScore, "voice gain must be in [0, 1]");
    if (v.start >= score.length || v.start + v.dur > score.length)
      raise(Err::InvalidScore, "voice events must lie within the score");
  }
}

hir::Module build(const Score &score) {
  validate(score);
  // Stage 1 happens here, at generation time: per-voice constants (frequency,
  // window, gain) are computed from the score and baked into the code.  The
  // sample loop is stage 2.
  ExprRef rate = var("rate");
  std::vector<StmtRef> body;

  ExprRef x = var("x");
  std::vector<StmtRef> loop;
  for (size_t vi = 0; vi < score.voices.size(); vi++) {
    const Voice &v = score.voices[vi];
    ExprRef freq = f32Lit(float(v.freq));
    // period = round.f32(rate / freq); half = trunc.f32(period / 2)
    ExprRef period =
        app(intrinsic("round.f32", fnType({f32()}, f32())),
            {primOp(Op::FDiv, {rate, freq})});
    ExprRef half = app(intrinsic("trunc.f32", fnType({f32()}, f32())),
                       {primOp(Op::FDiv, {period, f32Lit(2.0f)})});
    // phase = frem(float(x), period); sample = phase/half - 1
    ExprRef phase = primOp(
        Op::FRem, {cast(CastKind::UiToFp, x, f32()), period});
    ExprRef wave =
        primOp(Op::FSub, {primOp(Op::FDiv, {phase, half}), f32Lit(1.0f)});
    ExprRef contrib = primOp(Op::FMul, {f32Lit(float(v.gain)), wave});
    ExprRef active =
        primOp(Op::And, {primOp(Op::IcmpUle, {ui64(v.start), x}),
                         primOp(Op::IcmpUlt, {x, ui64(v.start + v.dur)})});
    loop.push_back(ifStmt(active,
                          set("acc", primOp(Op::FAdd, {var("acc"), contrib})),
                          svoid()));
  }
  loop.push_back(store(var("acc"), gep(var("out"), {x})));
  loop.push_back(set("x", add1(x)));

  // Fresh accumulator each sample; the x counter drives the single loop.
  StmtRef sampleLoop = whileLoop(
      icmpUlt(x, var("n")),
      exprStmt(let({{"acc", f32Lit(0.0f), f32()}}, block(std::move(loop)),
                   ui64(0))));
  body.push_back(
      exprStmt(let({{"x", ui64(0), i64()}}, sampleLoop, ui64(0))));

  Module m;
  m.name = "synth";
  moduleAdd(m, function(kFillName,
                        {{"out", ptr(f32())}, {"n", i64()}, {"rate", f32()}},
                        voidType(), block(std::move(body))));
  return m;
}

RenderResult render(const Score &score, int optLevel, bool specialize) {
  Module m = build(score);
  exec::Engine engine;
  exec::BufferView out =
      engine.preallocateBuffer(kOutBuffer, f32(), score.length);

  opt::PassConfig cfg;
  cfg.optLevel = optLevel;
  std::string fnName = kFillName;
  if (specialize) {
    opt::Bindings b;
    b["rate"] = opt::staticValue(f32Lit(float(score.rate)));
    b["out"] = opt::staticAddress(kOutBuffer, f32(), score.length);
    cfg.specializations[kFillName] = std::move(b);
    fnName = std::string(kFillName) + "@spec0";
  }

  exec::CompiledModule cm = engine.compile(m, cfg);
  RenderResult r;
  r.fnName = fnName;
  r.passStats = cm.passStats;
  r.compileMs = cm.compileMs;
  std::vector<exec::HostValue> args;
  if (!specialize)
    args.push_back(out);
  args.push_back(int64_t(score.length));
  if (!specialize)
    args.push_back(double(score.rate));
  auto [result, stats] = cm.apply(fnName, args);
  r.stats = stats;
  r.samples = exec::readF32Buffer(*engine.session(), out);
  r.samples.resize(score.length);
  return r;
}

namespace {

void pushU32(std::vector<uint8_t> &out, uint32_t v) {
  for (int i = 0; i < 4; i++)
    out.push_back(uint8_t(v >> (8 * i)));
}

void pushU16(std::vector<uint8_t> &out, uint16_t v) {
  out.push_back(uint8_t(v));
  out.push_back(uint8_t(v >> 8));
}

} // namespace

std::vector<uint8_t> wavBytes(const std::vector<double> &samples, uint32_t rate) {
  uint32_t dataSize = uint32_t(samples.size() * 2);
  std::vector<uint8_t> out;
  out.reserve(44 + dataSize);
  const char *riff = "RIFF";
  out.insert(out.end(), riff, riff + 4);
  pushU32(out, 36 + dataSize);
  const char *wavefmt = "WAVEfmt ";
  out.insert(out.end(), wavefmt, wavefmt + 8);
  pushU32(out, 16);      // fmt chunk size
  pushU16(out, 1);       // PCM
  pushU16(out, 1);       // mono
  pushU32(out, rate);
  pushU32(out, rate * 2); // byte rate
  pushU16(out, 2);       // block align
  pushU16(out, 16);      // bits per sample
  const char *data = "data";
  out.insert(out.end(), data, data + 4);
  pushU32(out, dataSize);
  for (double s : samples) {
    double clamped = s < -1.0 ? -1.0 : (s > 1.0 ? 1.0 : s);
    double scaled = std::round(clamped * 32767.0); // ties away from zero
    if (scaled < -32768.0)
      scaled = -32768.0;
    if (scaled > 32767.0)
      scaled = 32767.0;
    int16_t v = int16_t(scaled);
    pushU16(out, uint16_t(v));
  }
  return out;
}

void writeWav(const std::vector<double> &samples, uint32_t rate,
              const std::string &path) {
  std::vector<uint8_t> bytes = wavBytes(samples, rate);
  std::ofstream f(path, std::ios::binary);
  if (!f)
    raise(Err::IoError, "cannot open '" + path + "'");
  f.write(reinterpret_cast<const char *>(bytes.data()),
          std::streamsize(bytes.size()));
  if (!f)
    raise(Err::IoError, "write failed for '" + path + "'");
}

} // namespace dslkit::synth
