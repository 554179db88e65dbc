#include "dslkit/cli.hpp"

#include "dslkit/dsl/fsa.hpp"
#include "dslkit/dsl/synth.hpp"
#include "dslkit/programs.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <fstream>
#include <ostream>
#include <sstream>

namespace dslkit::cli {

namespace {

std::string slurp(const std::string &path) {
  std::ifstream f(path, std::ios::binary);
  if (!f)
    raise(Err::IoError, "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::string> wordSymbols(const std::string &word) {
  std::vector<std::string> out;
  for (char c : word)
    out.push_back(std::string(1, c));
  return out;
}

// Drops passes (and fusion) excluded by --no-* flags; an explicit exclusion
// or a --passes list turns the level pipeline into an explicit pass list.
struct Knobs {
  int opt = 3;
  bool noFuse = false;
  bool noLicm = false;
  bool noFold = false;
  std::string passesCsv;

  opt::PassConfig config() const {
    opt::PassConfig cfg;
    cfg.optLevel = opt;
    if (!passesCsv.empty()) {
      std::vector<std::string> passes;
      std::string cur;
      for (char c : passesCsv + ",") {
        if (c == ',') {
          if (!cur.empty())
            passes.push_back(cur);
          cur.clear();
        } else {
          cur += c;
        }
      }
      cfg.passList = std::move(passes);
      return cfg;
    }
    if (noLicm || noFold) {
      std::vector<std::string> passes;
      for (const std::string &p : opt::defaultPasses(opt)) {
        if (noLicm && p == "licm")
          continue;
        if (noFold && p == "const-fold")
          continue;
        passes.push_back(p);
      }
      cfg.passList = std::move(passes);
    }
    return cfg;
  }

  std::string describe(bool specialized = false) const {
    std::string s = "opt=" + std::to_string(opt);
    s += noFuse ? " fuse=0" : " fuse=1";
    s += noLicm ? " licm=0" : " licm=1";
    s += noFold ? " fold=0" : " fold=1";
    if (!passesCsv.empty())
      s += " passes=" + passesCsv;
    if (specialized)
      s += " specialize=1";
    return s;
  }
};

void printStats(std::ostream &out, const exec::ExecStats &s) {
  out << "instructions=" << s.instructions << "\n";
  out << "loads=" << s.loads << "\n";
  out << "stores=" << s.stores << "\n";
  out << "calls=" << s.calls << "\n";
  out << "back_edges=" << s.backEdges << "\n";
  out << "allocations=" << s.allocations << "\n";
}

void printPassStats(std::ostream &out, const std::vector<opt::PassStat> &stats) {
  for (const opt::PassStat &p : stats)
    out << "pass=" << p.pass << " before=" << p.before << " after=" << p.after
        << "\n";
}

int cmdFsa(const std::string &specPath, const std::string &word,
           const std::string &style, int optLevel, std::ostream &out) {
  fsa::FsaSpec spec = fsa::parseSpec(slurp(specPath));
  fsa::Style st = style == "blocks" ? fsa::Style::Blocks : fsa::Style::Functions;
  hir::Module m = fsa::compile(spec, st);
  exec::Engine engine;
  opt::PassConfig cfg;
  cfg.optLevel = optLevel;
  exec::CompiledModule cm = engine.compile(m, cfg);
  bool accept = fsa::match(cm, spec, wordSymbols(word));
  out << "accept=" << (accept ? "true" : "false") << "\n";
  return 0;
}

int cmdSynth(const std::string &scorePath, const std::string &outPath,
             int optLevel, bool stats, bool specialize, std::ostream &out) {
  synth::Score score = synth::parseScore(slurp(scorePath));
  synth::RenderResult r = synth::render(score, optLevel, specialize);
  synth::writeWav(r.samples, uint32_t(score.rate), outPath);
  out << "wrote=" << outPath << " samples=" << r.samples.size() << "\n";
  if (stats) {
    out << "compile_ms=" << r.compileMs << "\n";
    printPassStats(out, r.passStats);
    printStats(out, r.stats);
  }
  return 0;
}

int cmdMhk(const std::string &srcPath, const std::string &arraysPath,
           const Knobs &knobs, bool stats, std::ostream &out) {
  mhk::Program prog = mhk::parseProgram(slurp(srcPath));
  mhk::Arrays arrays;
  if (!arraysPath.empty())
    arrays = mhk::parseArrays(slurp(arraysPath), prog);
  mhk::LowerOptions opts;
  opts.fuse = !knobs.noFuse;
  mhk::RunResult r = mhk::run(prog, arrays, knobs.config(), opts);
  if (r.isArray) {
    out << "result=(";
    const size_t n = r.realValued ? r.realArray.size() : r.natArray.size();
    for (size_t i = 0; i < n; i++) {
      if (i)
        out << " ";
      if (r.realValued)
        out << formatDouble(r.realArray[i]);
      else
        out << r.natArray[i];
    }
    out << ")\n";
  } else if (r.realValued) {
    out << "result=" << formatDouble(r.real) << "\n";
  } else {
    out << "result=" << r.nat << "\n";
  }
  if (stats) {
    out << "compile_ms=" << r.compileMs << "\n";
    printPassStats(out, r.passStats);
    printStats(out, r.stats);
  }
  return 0;
}

int cmdDump(const std::string &srcPath, const std::string &dsl,
            const std::string &stage, const std::string &style,
            const Knobs &knobs, std::ostream &out) {
  hir::Module m;
  if (dsl == "fsa") {
    fsa::FsaSpec spec = fsa::parseSpec(slurp(srcPath));
    m = fsa::compile(spec, style == "blocks" ? fsa::Style::Blocks
                                             : fsa::Style::Functions);
  } else if (dsl == "mhk") {
    mhk::Program prog = mhk::parseProgram(slurp(srcPath));
    prog.expr = mhk::anf(mhk::indexRewrite(prog.expr));
    mhk::LowerOptions opts;
    opts.fuse = !knobs.noFuse;
    m = mhk::lower(prog, opts);
  } else {
    raise(Err::ShapeError, "--dsl must be fsa or mhk");
  }
  opt::PipelineResult pr = opt::runPipeline(m, knobs.config());
  if (stage == "hir")
    out << hir::dumpModule(pr.hmod);
  else if (stage == "lir")
    out << lir::dumpText(pr.lmod);
  else
    raise(Err::ShapeError, "--stage must be hir or lir");
  return 0;
}

int cmdBench(const std::string &suite, uint64_t n, bool json, const Knobs &knobs,
             bool specialize, std::ostream &out) {
  using Clock = std::chrono::steady_clock;
  exec::ExecStats stats;
  double compileMs = 0, runMs = 0;

  if (suite == "normalize") {
    mhk::Program prog = programs::normalizeProgram();
    mhk::Arrays arrays;
    std::vector<double> a(n);
    for (uint64_t i = 0; i < n; i++)
      a[i] = double(i % 17) + 1.0;
    arrays.real["a"] = std::move(a);
    mhk::LowerOptions opts;
    opts.fuse = !knobs.noFuse;
    auto t0 = Clock::now();
    mhk::RunResult r = mhk::run(prog, arrays, knobs.config(), opts);
    runMs = std::chrono::duration<double, std::milli>(Clock::now() - t0).count() -
            r.compileMs;
    stats = r.stats;
    compileMs = r.compileMs;
  } else if (suite == "fsa") {
    fsa::FsaSpec spec = fsa::cadrSpec();
    exec::Engine engine;
    opt::PassConfig cfg = knobs.config();
    exec::CompiledModule cm = engine.compile(fsa::compile(spec, fsa::Style::Functions), cfg);
    compileMs = cm.compileMs;
    const std::vector<std::string> alpha{"c", "a", "d", "r"};
    auto t1 = Clock::now();
    size_t maxLen = n ? size_t(n) : 6;
    std::vector<std::vector<std::string>> frontier{{}};
    for (size_t len = 0; len <= maxLen; len++) {
      for (const auto &w : frontier) {
        auto [res, s] = cm.apply(spec.name, {w});
        stats.instructions += s.instructions;
        stats.loads += s.loads;
        stats.stores += s.stores;
        stats.calls += s.calls;
        stats.backEdges += s.backEdges;
        stats.allocations += s.allocations;
      }
      if (len == maxLen)
        break;
      std::vector<std::vector<std::string>> next;
      for (const auto &w : frontier)
        for (const std::string &c : alpha) {
          auto w2 = w;
          w2.push_back(c);
          next.push_back(std::move(w2));
        }
      frontier = std::move(next);
    }
    runMs = std::chrono::duration<double, std::milli>(Clock::now() - t1).count();
  } else if (suite == "synth") {
    synth::Score score;
    score.rate = 8000;
    score.length = n ? n : 100000;
    score.voices = {{440.0, 0, score.length, 0.8}};
    auto t0 = Clock::now();
    synth::RenderResult r = synth::render(score, knobs.opt, specialize);
    runMs = std::chrono::duration<double, std::milli>(Clock::now() - t0).count() -
            r.compileMs;
    stats = r.stats;
    compileMs = r.compileMs;
  } else {
    raise(Err::ShapeError, "--suite must be normalize, fsa or synth");
  }

  if (json) {
    nlohmann::ordered_json j;
    j["suite"] = suite;
    j["config"] = knobs.describe(specialize);
    j["instructions"] = stats.instructions;
    j["back_edges"] = stats.backEdges;
    j["compile_ms"] = compileMs;
    j["run_ms"] = runMs;
    out << j.dump() << "\n";
  } else {
    out << "suite=" << suite << " config=\"" << knobs.describe(specialize)
        << "\"\n";
    out << "compile_ms=" << compileMs << "\n";
    out << "run_ms=" << runMs << "\n";
    printStats(out, stats);
  }
  return 0;
}

} // namespace

int run(const std::vector<std::string> &args, std::ostream &out,
        std::ostream &err) {
  CLI::App app{"dslkit: compile and run the bundled little languages"};
  app.require_subcommand(1);

  std::string specPath, word, style = "functions";
  Knobs knobs;
  auto *cFsa = app.add_subcommand("fsa", "run a finite automaton on a word");
  cFsa->add_option("--spec", specPath, "machine description file")->required();
  cFsa->add_option("--word", word, "input word, one symbol per character")
      ->required();
  cFsa->add_option("--style", style, "functions|blocks");
  cFsa->add_option("--opt", knobs.opt, "optimization level 0..3");

  std::string scorePath, outPath;
  bool stats = false, specialize = false;
  auto *cSynth = app.add_subcommand("synth", "render a score to a WAV file");
  cSynth->add_option("--score", scorePath, "score file")->required();
  cSynth->add_option("--out", outPath, "output .wav path")->required();
  cSynth->add_option("--opt", knobs.opt, "optimization level 0..3");
  cSynth->add_flag("--stats", stats, "print execution counters");
  cSynth->add_flag("--specialize", specialize,
                   "bind the rate and output buffer statically");

  std::string srcPath, arraysPath;
  auto *cMhk = app.add_subcommand("mhk", "evaluate an array-language program");
  cMhk->add_option("--src", srcPath, "program file")->required();
  cMhk->add_option("--arrays", arraysPath, "array inputs file");
  cMhk->add_option("--opt", knobs.opt, "optimization level 0..3");
  cMhk->add_option("--passes", knobs.passesCsv,
                   "comma-separated explicit pass list");
  cMhk->add_flag("--no-fuse", knobs.noFuse, "disable loop fusion");
  cMhk->add_flag("--no-licm", knobs.noLicm, "disable loop-invariant motion");
  cMhk->add_flag("--no-fold", knobs.noFold, "disable constant folding");
  cMhk->add_flag("--stats", stats, "print execution counters");

  std::string dsl, stage = "hir";
  auto *cDump = app.add_subcommand("dump", "print IR at a pipeline stage");
  cDump->add_option("--src", srcPath, "source file")->required();
  cDump->add_option("--dsl", dsl, "fsa|mhk")->required();
  cDump->add_option("--stage", stage, "hir|lir");
  cDump->add_option("--style", style, "fsa only: functions|blocks");
  cDump->add_option("--opt", knobs.opt, "optimization level 0..3");
  cDump->add_option("--passes", knobs.passesCsv,
                    "comma-separated explicit pass list");
  cDump->add_flag("--no-fuse", knobs.noFuse, "disable loop fusion");

  std::string suite;
  uint64_t benchN = 0;
  bool json = false;
  auto *cBench = app.add_subcommand("bench", "instruction-count benchmarks");
  cBench->add_option("--suite", suite, "normalize|fsa|synth")->required();
  cBench->add_option("--n", benchN, "problem size");
  cBench->add_flag("--json", json, "machine-readable output");
  cBench->add_option("--opt", knobs.opt, "optimization level 0..3");
  cBench->add_option("--passes", knobs.passesCsv,
                     "comma-separated explicit pass list");
  cBench->add_flag("--no-fuse", knobs.noFuse, "disable loop fusion");
  cBench->add_flag("--no-licm", knobs.noLicm, "disable loop-invariant motion");
  cBench->add_flag("--no-fold", knobs.noFold, "disable constant folding");
  cBench->add_flag("--specialize", specialize, "synth: bind rate and buffer");

  std::vector<const char *> argv;
  argv.push_back("dslkit");
  for (const std::string &a : args)
    argv.push_back(a.c_str());
  try {
    app.parse(int(argv.size()), argv.data());
  } catch (const CLI::ParseError &e) {
    if (e.get_exit_code() == 0) { // --help
      out << app.help();
      return 0;
    }
    err << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (cFsa->parsed())
      return cmdFsa(specPath, word, style, knobs.opt, out);
    if (cSynth->parsed())
      return cmdSynth(scorePath, outPath, knobs.opt, stats, specialize, out);
    if (cMhk->parsed())
      return cmdMhk(srcPath, arraysPath, knobs, stats, out);
    if (cDump->parsed())
      return cmdDump(srcPath, dsl, stage, style, knobs, out);
    if (cBench->parsed())
      return cmdBench(suite, benchN, json, knobs, specialize, out);
  } catch (const ParseError &e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const Trap &t) {
    err << "error: " << t.what() << "\n";
    return 1;
  } catch (const Error &e) {
    switch (e.code) {
    case Err::IoError:
    case Err::InvalidSpec:
    case Err::InvalidScore:
    case Err::UnsupportedConstruct:
    case Err::MarshalError:
    case Err::ShapeError:
      err << "error: " << e.what() << "\n";
      return 1;
    default:
      err << "internal error: " << e.what() << "\n";
      return 2;
    }
  } catch (const std::exception &e) {
    err << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

} // namespace dslkit::cli
