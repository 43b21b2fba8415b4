#include <doctest.h>

#include <algorithm>

#include "pivotmt/io.hpp"
#include "pivotmt/subword.hpp"
#include "pivotmt/toy_tasks.hpp"
#include "support/cli_run.hpp"
#include "support/fixtures.hpp"

using namespace pivotmt;
using cli::run;

namespace {

std::size_t line_count(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST_CASE("bleu on identical files prints 100") {
  cli::TempDir dir("pivotmt_cli_bleu");
  io::write_lines_atomic(dir / "ref", fixture::bleu_ref);
  io::write_lines_atomic(dir / "hyp", fixture::bleu_hyp);
  auto r = run({"bleu", "--hyp", dir / "ref", "--ref", dir / "ref"});
  CHECK(r.status == 0);
  CHECK(r.out.starts_with("BLEU = 100.00"));

  r = run({"bleu", "--hyp", dir / "hyp", "--ref", dir / "ref", "--output", dir / "report"});
  CHECK(r.out.starts_with("BLEU = 38.22"));
  CHECK(KeyValues::load(dir / "report").get_int("ref_len") == 26);
}

TEST_CASE("case-insensitive scoring must be asked for and is announced") {
  cli::TempDir dir("pivotmt_cli_case");
  io::write_lines_atomic(dir / "hyp", {"The Cat"});
  io::write_lines_atomic(dir / "ref", {"the cat"});
  auto sensitive = run({"bleu", "--hyp", dir / "hyp", "--ref", dir / "ref", "--max-n", "2"});
  CHECK(sensitive.out.starts_with("BLEU = 0.00"));
  CHECK(sensitive.err.empty());
  auto folded = run({"bleu", "--hyp", dir / "hyp", "--ref", dir / "ref", "--max-n", "2",
                     "--case-sensitive", "false"});
  CHECK(folded.out.starts_with("BLEU = 100.00"));
  CHECK(folded.err.starts_with("warning:"));
}

TEST_CASE("stats prints the hand-counted table") {
  cli::TempDir dir("pivotmt_cli_stats");
  io::write_lines_atomic(dir / "c.en", fixture::stats_en);
  io::write_lines_atomic(dir / "c.es", fixture::stats_es);
  const auto r = run({"stats", "--src", dir / "c.en", "--tgt", dir / "c.es", "--src-lang", "en",
                      "--tgt-lang", "es", "--name", "fixture"});
  CHECK(r.status == 0);
  CHECK(r.out == fixture::stats_table);
}

TEST_CASE("preprocess applies rules, filters, and is idempotent") {
  cli::TempDir dir("pivotmt_cli_pre");
  io::write_lines_atomic(dir / "raw.en", {"He asked himself, why?", "", "Of the sea."});
  io::write_lines_atomic(dir / "raw.es", {"Preguntándose: ¿por qué?", "vacío", "Del mar."});
  io::write_file_atomic(dir / "rules", "version=1\ntgt.split_contractions=true\ntgt.split_clitics=true\n");
  auto r = run({"preprocess", "--src-in", dir / "raw.en", "--tgt-in", dir / "raw.es", "--src-lang",
                "en", "--tgt-lang", "es", "--src-out", dir / "a.en", "--tgt-out", dir / "a.es",
                "--rules", dir / "rules"});
  CHECK(r.status == 0);
  CHECK(r.out == "kept 2 of 3 pairs\n");
  CHECK(io::read_lines(dir / "a.es") ==
        std::vector<std::string>{"Preguntando se : ¿ por qué ?", "De el mar ."});
  r = run({"preprocess", "--src-in", dir / "a.en", "--tgt-in", dir / "a.es", "--src-lang", "en",
           "--tgt-lang", "es", "--src-out", dir / "b.en", "--tgt-out", dir / "b.es", "--rules",
           dir / "rules"});
  CHECK(r.status == 0);
  CHECK(io::read_file(dir / "a.en") == io::read_file(dir / "b.en"));
  CHECK(io::read_file(dir / "a.es") == io::read_file(dir / "b.es"));

  r = run({"preprocess", "--src-in", dir / "raw.en", "--tgt-in", dir / "raw.es", "--src-lang",
           "en", "--tgt-lang", "es", "--src-out", dir / "c.en", "--tgt-out", dir / "c.es",
           "--min-len", "1", "--max-len-filter", "3"});
  CHECK(r.out == "kept 0 of 3 pairs\n");
}

TEST_CASE("learn-vocab in both modes") {
  cli::TempDir dir("pivotmt_cli_vocab");
  io::write_lines_atomic(dir / "a", {"a b a b c", "a a b"});
  io::write_lines_atomic(dir / "b", {"x y z x", "y y"});
  auto r = run({"learn-vocab", "--input", dir / "a", "--input", dir / "b", "--output", dir / "va",
                "--output", dir / "vb", "--size", "20"});
  CHECK(r.status == 0);
  CHECK(SubwordVocab::load(dir / "va").contains("a</w>"));
  CHECK_FALSE(SubwordVocab::load(dir / "va").contains("x</w>"));
  r = run({"learn-vocab", "--vocab-mode", "shared", "--input", dir / "a", "--input", dir / "b",
           "--output", dir / "v", "--size", "20"});
  CHECK(r.status == 0);
  CHECK(SubwordVocab::load(dir / "v").contains("x</w>"));
  CHECK(SubwordVocab::load(dir / "v").mode() == VocabMode::shared);
  r = run({"learn-vocab", "--vocab-mode", "shared", "--input", dir / "a", "--output", dir / "v1",
           "--output", dir / "v2"});
  CHECK(r.status == 2);
  CHECK(r.err.starts_with("error: config:"));
  r = run({"learn-vocab", "--vocab-mode", "pooled", "--input", dir / "a", "--output", dir / "v1"});
  CHECK(r.status == 2);
}

TEST_CASE("errors are one machine-parsable line with a class-specific status") {
  cli::TempDir dir("pivotmt_cli_err");
  auto r = run({"bleu", "--hyp", dir / "missing", "--ref", dir / "missing"});
  CHECK(r.status == 3);
  CHECK(r.err.starts_with("error: io: "));
  CHECK(line_count(r.err) == 1);

  r = run({"frobnicate"});
  CHECK(r.status == 2);
  CHECK(r.err.starts_with("error: usage: "));

  r = run({});
  CHECK(r.status == 2);

  io::write_lines_atomic(dir / "h", {"a b"});
  io::write_lines_atomic(dir / "r", {"a b", "c"});
  r = run({"bleu", "--hyp", dir / "h", "--ref", dir / "r"});
  CHECK(r.status == 3);
  CHECK(r.err.starts_with("error: input: "));

  r = run({"bleu", "--hyp", dir / "h", "--ref", dir / "h", "--output", dir / "no/such/dir/x"});
  CHECK(r.status == 3);
  CHECK(r.out.empty());

  r = run({"--help"});
  CHECK(r.status == 0);
  CHECK(r.out.find("cascade") != std::string::npos);
}

TEST_CASE("config files are checked and flags override them") {
  cli::TempDir dir("pivotmt_cli_cfg");
  io::write_lines_atomic(dir / "h", {"a b c d e"});
  io::write_lines_atomic(dir / "r", {"a b c x e"});
  io::write_file_atomic(dir / "good.ini", "seed=3\n[bleu]\nmax-n=1\n");
  auto r = run({"--config", dir / "good.ini", "bleu", "--hyp", dir / "h", "--ref", dir / "r"});
  CHECK(r.status == 0);
  CHECK(r.out.starts_with("BLEU = 80.00, p1 = 80.0"));
  r = run({"--config", dir / "good.ini", "bleu", "--hyp", dir / "h", "--ref", dir / "r", "--max-n",
           "2"});
  CHECK(r.out.starts_with("BLEU = 63.25, p1/p2 = 80.0/50.0"));

  io::write_file_atomic(dir / "bad.ini", "[bleu]\nmax-gram=1\n");
  r = run({"--config", dir / "bad.ini", "bleu", "--hyp", dir / "h", "--ref", dir / "r"});
  CHECK(r.status == 2);
  r = run({"--config", dir / "absent.ini", "bleu", "--hyp", dir / "h", "--ref", dir / "r"});
  CHECK(r.status == 2);
}

TEST_CASE("train, translate and cascade end to end are reproducible") {
  cli::TempDir dir("pivotmt_cli_e2e");
  const auto task = make_toy_pivot_task(120, 4, ToyTaskOptions{4, 2, 4});
  io::write_lines_atomic(dir / "t.lo", task.source);
  io::write_lines_atomic(dir / "t.up", task.pivot);
  io::write_lines_atomic(dir / "t.rv", task.target);
  const std::vector<std::string> model = {"--layers", "1", "--d-model", "8", "--heads", "2",
                                          "--d-ff", "16", "--max-seq-len", "10", "--steps", "30",
                                          "--batch-size", "8", "--vocab-size", "12",
                                          "--log-every", "10", "--checkpoint-every", "15"};
  auto train = [&](const std::string& tag, const std::string& src, const std::string& tgt,
                   const std::string& sl, const std::string& tl) {
    std::vector<std::string> args = {"--seed", "7", "train", "--src", src, "--tgt", tgt,
                                     "--src-lang", sl, "--tgt-lang", tl, "--output",
                                     dir / (tag + ".sys"), "--log", dir / (tag + ".log")};
    args.insert(args.end(), model.begin(), model.end());
    return run(args);
  };
  for (const std::string round : {"a", "b"}) {
    auto r = train("s1" + round, dir / "t.lo", dir / "t.up", "lo", "up");
    REQUIRE(r.status == 0);
    CHECK(r.out.find("step=10 loss=") != std::string::npos);
    CHECK(r.out.find("elapsed_s=") != std::string::npos);
    CHECK(line_count(io::read_file(dir / ("s1" + round + ".log"))) == 3);
    REQUIRE(train("s2" + round, dir / "t.up", dir / "t.rv", "up", "rv").status == 0);
    r = run({"translate", "--system", dir / ("s1" + round + ".sys"), "--input", dir / "t.lo",
             "--output", dir / ("tr" + round), "--beam", "2"});
    REQUIRE(r.status == 0);
    r = run({"cascade", "--stage1", dir / ("s1" + round + ".sys"), "--stage2",
             dir / ("s2" + round + ".sys"), "--input", dir / "t.lo", "--output",
             dir / ("cas" + round), "--pivot-output", dir / ("piv" + round), "--beam", "2", "--save-pipeline",
             dir / ("pipe" + round + ".cfg")});
    REQUIRE(r.status == 0);
  }
  for (const std::string f : {"s1%.ckpt", "s1%.step15.ckpt", "s2%.ckpt", "tr%", "cas%", "piv%"}) {
    std::string a = f, b = f;
    a.replace(a.find('%'), 1, "a");
    b.replace(b.find('%'), 1, "b");
    INFO(f);
    CHECK(io::read_file(dir / a) == io::read_file(dir / b));
  }
  CHECK(io::read_file(dir / "piva") == io::read_file(dir / "tra"));
  CHECK(io::read_lines(dir / "casa").size() == 120);

  auto r = run({"cascade", "--pipeline", dir / "pipea.cfg", "--input", dir / "t.lo", "--output",
                dir / "cas_pipe"});
  REQUIRE(r.status == 0);
  CHECK(io::read_file(dir / "cas_pipe") == io::read_file(dir / "casa"));

  r = run({"cascade", "--stage1", dir / "s2a.sys", "--stage2", dir / "s1a.sys", "--input",
           dir / "t.lo"});
  CHECK(r.status == 2);
  CHECK(r.err.starts_with("error: config: pivot mismatch"));
  r = run({"cascade", "--stage1", dir / "s1a.sys", "--input", dir / "t.lo"});
  CHECK(r.status == 2);

  io::write_file_atomic(dir / "s2a.ckpt", "garbage");
  r = run({"cascade", "--stage1", dir / "s1a.sys", "--stage2", dir / "s2a.sys", "--input",
           dir / "t.lo"});
  CHECK(r.status == 3);
  CHECK(r.err.starts_with("error: stage:format: stage2: "));
}
