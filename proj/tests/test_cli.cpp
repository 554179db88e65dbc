#include "dslkit/cli.hpp"

#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace {

struct CliRun {
  int exitCode;
  std::string out;
  std::string err;
};

CliRun runCli(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = dslkit::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string dataPath(const char *name) {
  return std::string(DSLKIT_DATA_DIR) + "/" + name;
}

} // namespace

TEST_CASE("fsa subcommand") {
  CliRun r = runCli({"fsa", "--spec", dataPath("cadr.fsa"), "--word", "cadr"});
  CHECK(r.exitCode == 0);
  CHECK(r.out == "accept=true\n");
  r = runCli({"fsa", "--spec", dataPath("cadr.fsa"), "--word", "cad"});
  CHECK(r.exitCode == 0);
  CHECK(r.out == "accept=false\n");
  r = runCli({"fsa", "--spec", dataPath("cadr.fsa"), "--word", "car",
              "--style", "blocks", "--opt", "0"});
  CHECK(r.out == "accept=true\n");
}

TEST_CASE("fsa user errors exit 1") {
  CliRun r = runCli({"fsa", "--spec", "/nonexistent.fsa", "--word", "x"});
  CHECK(r.exitCode == 1);
  CHECK(r.err.find("error:") == 0);
  r = runCli({"fsa", "--spec", dataPath("cadr.fsa")});
  CHECK(r.exitCode == 1);
}

TEST_CASE("mhk subcommand with stats and ablation flags") {
  CliRun r = runCli({"mhk", "--src", dataPath("normalize.mhk"), "--arrays",
                     dataPath("abc.arrays"), "--stats"});
  CHECK(r.exitCode == 0);
  CHECK(r.out.find("result=(0.25 0.25 0.5)") != std::string::npos);
  CHECK(r.out.find("instructions=") != std::string::npos);
  CHECK(r.out.find("back_edges=") != std::string::npos);

  CliRun plain = runCli({"mhk", "--src", dataPath("normalize.mhk"), "--arrays",
                         dataPath("abc.arrays"), "--no-licm", "--stats"});
  CHECK(plain.exitCode == 0);
  CHECK(plain.out.find("result=(0.25 0.25 0.5)") != std::string::npos);

  auto instrCount = [](const std::string &s) {
    size_t at = s.find("instructions=");
    return std::stoull(s.substr(at + 13));
  };
  CHECK(instrCount(plain.out) > instrCount(r.out));
}

TEST_CASE("dump is byte-stable and distinguishes stages") {
  std::vector<std::string> hirArgs{"dump", "--src", dataPath("cadr.fsa"),
                                   "--dsl", "fsa", "--stage", "hir"};
  CliRun a = runCli(hirArgs);
  CliRun b = runCli(hirArgs);
  CHECK(a.exitCode == 0);
  CHECK(a.out == b.out);
  CHECK(a.out.find("(module") == 0);

  std::vector<std::string> lirArgs{"dump", "--src", dataPath("normalize.mhk"),
                                   "--dsl", "mhk", "--stage", "lir",
                                   "--opt", "3"};
  CliRun c = runCli(lirArgs);
  CliRun d = runCli(lirArgs);
  CHECK(c.exitCode == 0);
  CHECK(c.out == d.out);
  CHECK(c.out.find("(block entry") != std::string::npos);
}

TEST_CASE("synth writes a wav file") {
  std::string path = "test_cli_out.wav";
  CliRun r = runCli({"synth", "--score", dataPath("demo.score"), "--out", path,
                     "--opt", "2", "--stats"});
  CHECK(r.exitCode == 0);
  CHECK(r.out.find("instructions=") != std::string::npos);
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  char riff[4];
  f.read(riff, 4);
  CHECK(std::string(riff, 4) == "RIFF");
  f.close();
  std::remove(path.c_str());
}

TEST_CASE("bench emits one stable json line") {
  CliRun r = runCli({"bench", "--suite", "normalize", "--n", "32", "--json"});
  CHECK(r.exitCode == 0);
  CHECK(r.out.find("{\"suite\":\"normalize\",\"config\":") == 0);
  CHECK(r.out.find("\"instructions\":") != std::string::npos);
  CHECK(r.out.find("\"back_edges\":") != std::string::npos);
  CHECK(r.out.find("\"compile_ms\":") != std::string::npos);
  CHECK(r.out.find("\"run_ms\":") != std::string::npos);
}

TEST_CASE("unknown flags exit 1") {
  CliRun r = runCli({"fsa", "--bogus"});
  CHECK(r.exitCode == 1);
}
