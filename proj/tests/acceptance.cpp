// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "pivotmt/io.hpp"
#include "pivotmt/keyvalue.hpp"
#include "pivotmt/metrics.hpp"
#include "pivotmt/rng.hpp"
#include "pivotmt/subword.hpp"
#include "pivotmt/text_pipeline.hpp"
#include "pivotmt/toy_tasks.hpp"
#include "support/attention_checks.hpp"
#include "support/bpe_checks.hpp"
#include "support/cli_run.hpp"
#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"

using namespace pivotmt;
namespace fs = std::filesystem;

namespace tol {
constexpr double gradient_relative_error = 1e-4;
constexpr double gradient_seconds = 60.0;
constexpr double softmax_row_sum = 1e-9;
constexpr std::size_t attention_instances = 100;
constexpr std::size_t bpe_sentences = 1000;
constexpr double bleu_golden = 0.01;
constexpr std::size_t bleu_shuffles = 50;
constexpr double stage_bleu = 95.0;
constexpr double cascade_bleu = 90.0;
constexpr double cascade_margin = 1.0;
constexpr double toy_seconds = 15.0 * 60.0;
}  // namespace tol

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& what) {
  if (!pass) ++failures;
  std::printf("%s [%d] %s\n", pass ? "PASS" : "FAIL", id, what.c_str());
  std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void criterion_gradients() {
  const auto start = std::chrono::steady_clock::now();
  const auto config = oracle::tiny_config();
  double worst = 0.0;
  std::string where;
  std::size_t entries = 0;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto r = oracle::gradient_check(init_parameters(config, seed), config, oracle::tiny_batch());
    entries += r.entries;
    if (r.max_relative_error >= worst) {
      worst = r.max_relative_error;
      where = r.worst_entry;
    }
  }
  const double elapsed = seconds_since(start);
  report(1, worst <= tol::gradient_relative_error && elapsed < tol::gradient_seconds,
         fmt::format("finite-difference gradients: {} entries x 3 seeds, max relative error {:.2e} "
                     "at {} (tol {:.0e}); {:.1f} s (limit {:.0f} s)",
                     entries / 3, worst, where, tol::gradient_relative_error, elapsed,
                     tol::gradient_seconds));
}

void criterion_attention() {
  const auto rows = oracle::check_softmax_rows(tol::attention_instances, 2024);
  const auto violations = oracle::causality_violations(tol::attention_instances, 2025);
  report(2,
         rows.worst_row_sum_error <= tol::softmax_row_sum && rows.masked_nonzero == 0 &&
             rows.masked_entries > 0 && violations == 0,
         fmt::format("attention: worst |row sum - 1| {:.1e} (tol {:.0e}), {} of {} masked weights "
                     "non-zero, {} of {} causality instances violated",
                     rows.worst_row_sum_error, tol::softmax_row_sum, rows.masked_nonzero,
                     rows.masked_entries, violations, tol::attention_instances));
}

void criterion_bpe() {
  const auto corpus = oracle::sample_corpus();
  const auto first = learn_vocab({corpus}, 160, VocabMode::separate);
  const auto second = learn_vocab({corpus}, 160, VocabMode::separate);
  auto merge_bytes = [](const SubwordVocab& v) {
    std::string s;
    for (const auto& m : v.merges()) s += m.left + " " + m.right + "\n";
    return s;
  };
  const auto sentences = oracle::random_sentences(first, tol::bpe_sentences, 77);
  const auto failures_rt = oracle::round_trip_failures(first, sentences);
  const bool identical = merge_bytes(first) == merge_bytes(second) &&
                         first.serialize() == second.serialize();
  report(3, failures_rt == 0 && identical && !first.merges().empty(),
         fmt::format("BPE: {} round-trip failures over {} random sentences; {} merges, merge list "
                     "{} across two runs",
                     failures_rt, tol::bpe_sentences, first.merges().size(),
                     identical ? "byte-identical" : "DIFFERENT"));
}

std::vector<Sentence> as_sentences(const std::vector<std::string>& lines) {
  std::vector<Sentence> out;
  for (const auto& l : lines) out.push_back(split_tokens(l, "en"));
  return out;
}

void criterion_bleu() {
  const auto hyps = as_sentences(fixture::bleu_hyp);
  const auto refs = as_sentences(fixture::bleu_ref);
  const double golden = bleu(hyps, refs).bleu;
  const double identity = bleu(refs, refs).bleu;
  const double disjoint =
      bleu(as_sentences({"a b c d", "e f g h"}), as_sentences({"w x y z", "s t u v"})).bleu;

  auto h = hyps, r = refs;
  h.push_back(split_tokens("a second try at the analysis", "en"));
  r.push_back(split_tokens("another try at the analysis", "en"));
  const auto base = bleu(h, r);
  Rng rng(50);
  std::size_t changed = 0;
  std::vector<std::size_t> order(h.size());
  for (std::size_t n = 0; n < tol::bleu_shuffles; ++n) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    std::vector<Sentence> hs, rs;
    for (auto i : order) {
      hs.push_back(h[i]);
      rs.push_back(r[i]);
    }
    if (!(bleu(hs, rs) == base)) ++changed;
  }
  report(4,
         std::abs(golden - fixture::bleu_golden) <= tol::bleu_golden && identity == 100.0 &&
             disjoint == 0.0 && changed == 0,
         fmt::format("BLEU: golden {:.4f} vs {:.4f} (tol {}), bleu(X,X) = {:.2f}, zero overlap = "
                     "{:.2f}, {} of {} shuffles changed the score",
                     golden, fixture::bleu_golden, tol::bleu_golden, identity, disjoint, changed,
                     tol::bleu_shuffles));
}

void criterion_preprocessing() {
  const auto split = RuleSet::spanish_splitting();
  using V = std::vector<std::string>;
  const bool del = tokenize("del", "es", split).tokens == V{"de", "el"};
  const bool al = tokenize("al", "es", split).tokens == V{"a", "el"};
  const bool clitic = tokenize("preguntándose", "es", split).tokens == V{"preguntando", "se"};

  const auto [src, tgt] = fixture::length_lines();
  ParallelCorpus corpus("en", "es");
  for (std::size_t i = 0; i < src.size(); ++i)
    corpus.add(tokenize(src[i], "en", RuleSet::none()), tokenize(tgt[i], "es", split));
  const auto kept = length_filter(corpus, 1, 50);
  std::vector<std::size_t> kept_ids;
  for (const auto& p : kept.pairs())
    for (std::size_t i = 0; i < corpus.size(); ++i)
      if (corpus.pairs()[i].src == p.src && corpus.pairs()[i].tgt == p.tgt) kept_ids.push_back(i);
  const bool filter = kept_ids == fixture::length_kept();
  report(5, del && al && clitic && filter,
         fmt::format("preprocessing: del {}, al {}, preguntándose {}, length filter kept {} of 10 "
                     "({})",
                     del ? "ok" : "WRONG", al ? "ok" : "WRONG", clitic ? "ok" : "WRONG",
                     kept.size(), filter ? "exactly the in-range pairs" : "WRONG SET"));
}

// ---- toy pivot pipeline --------------------------------------------------------

struct ToyRun {
  bool ok = true;
  std::string failure;
  double stage1 = 0, stage2 = 0, cascade = 0;
  double seconds = 0;
};

const char* kToyConfig =
    "# Toy pivot model: small enough to train in seconds on one core.\n"
    "seed=17\n"
    "[train]\n"
    "layers=1\n"
    "d-model=32\n"
    "heads=4\n"
    "d-ff=64\n"
    "max-seq-len=16\n"
    "steps=800\n"
    "batch-size=32\n"
    "lr=0.003\n"
    "warmup=100\n"
    "log-every=200\n"
    "checkpoint-every=400\n"
    "[translate]\n"
    "beam=4\n"
    "max-len=16\n"
    "[cascade]\n"
    "beam=4\n"
    "max-len=16\n";

double bleu_of(const cli::Result& r) {
  // "BLEU = xx.xx, ..." -> xx.xx
  return std::stod(r.out.substr(7));
}

ToyRun run_toy_pipeline(const fs::path& dir) {
  const auto start = std::chrono::steady_clock::now();
  ToyRun run;
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto p = [&](const std::string& f) { return (dir / f).string(); };
  auto step = [&](const std::string& name, std::vector<std::string> args) {
    if (!run.ok) return cli::Result{};
    args.insert(args.begin(), {"--config", p("toy.ini")});
    auto r = cli::run(args);
    io::write_file_atomic(p(name + ".out"), r.out);
    if (r.status != 0) {
      run.ok = false;
      run.failure = name + ": " + r.err;
    }
    return r;
  };
  io::write_file_atomic(p("toy.ini"), kToyConfig);

  // Two independently generated 2000-pair corpora, one per stage, and a
  // held-out test set with no source sentence seen in training.
  const auto first = make_toy_pivot_task(2000, 101);
  const auto second = make_toy_pivot_task(2000, 202);
  const auto pool = make_toy_pivot_task(1000, 303);
  std::set<std::string> seen(first.source.begin(), first.source.end());
  seen.insert(second.source.begin(), second.source.end());
  ToyPivotTask test;
  for (std::size_t i = 0; i < pool.source.size() && test.source.size() < 200; ++i) {
    if (seen.count(pool.source[i])) continue;
    test.source.push_back(pool.source[i]);
    test.pivot.push_back(pool.pivot[i]);
    test.target.push_back(pool.target[i]);
  }
  io::write_lines_atomic(p("s1.raw.lo"), first.source);
  io::write_lines_atomic(p("s1.raw.up"), first.pivot);
  io::write_lines_atomic(p("s2.raw.up"), second.pivot);
  io::write_lines_atomic(p("s2.raw.rv"), second.target);
  io::write_lines_atomic(p("test.lo"), test.source);
  io::write_lines_atomic(p("test.up"), test.pivot);
  io::write_lines_atomic(p("test.rv"), test.target);

  step("pre1", {"preprocess", "--src-in", p("s1.raw.lo"), "--tgt-in", p("s1.raw.up"), "--src-lang",
                "lo", "--tgt-lang", "up", "--src-out", p("s1.lo"), "--tgt-out", p("s1.up")});
  step("pre2", {"preprocess", "--src-in", p("s2.raw.up"), "--tgt-in", p("s2.raw.rv"), "--src-lang",
                "up", "--tgt-lang", "rv", "--src-out", p("s2.up"), "--tgt-out", p("s2.rv")});
  step("vocab1", {"learn-vocab", "--input", p("s1.lo"), "--input", p("s1.up"), "--output",
                  p("s1.lo.vocab"), "--output", p("s1.up.vocab"), "--size", "32"});
  step("vocab2", {"learn-vocab", "--input", p("s2.up"), "--input", p("s2.rv"), "--output",
                  p("s2.up.vocab"), "--output", p("s2.rv.vocab"), "--size", "32"});
  step("train1", {"train", "--src", p("s1.lo"), "--tgt", p("s1.up"), "--src-lang", "lo",
                  "--tgt-lang", "up", "--src-vocab", p("s1.lo.vocab"), "--tgt-vocab",
                  p("s1.up.vocab"), "--output", p("stage1.sys")});
  step("train2", {"train", "--src", p("s2.up"), "--tgt", p("s2.rv"), "--src-lang", "up",
                  "--tgt-lang", "rv", "--src-vocab", p("s2.up.vocab"), "--tgt-vocab",
                  p("s2.rv.vocab"), "--output", p("stage2.sys")});
  step("translate1", {"translate", "--system", p("stage1.sys"), "--input", p("test.lo"),
                      "--output", p("test.hyp.up")});
  step("translate2", {"translate", "--system", p("stage2.sys"), "--input", p("test.up"),
                      "--output", p("test.hyp.rv")});
  step("cascade", {"cascade", "--stage1", p("stage1.sys"), "--stage2", p("stage2.sys"), "--input",
                   p("test.lo"), "--output", p("test.cascade.rv"), "--pivot-output",
                   p("test.cascade.up")});
  const auto b1 = step("bleu1", {"bleu", "--hyp", p("test.hyp.up"), "--ref", p("test.up"),
                                 "--output", p("bleu.stage1")});
  const auto b2 = step("bleu2", {"bleu", "--hyp", p("test.hyp.rv"), "--ref", p("test.rv"),
                                 "--output", p("bleu.stage2")});
  const auto bc = step("bleuc", {"bleu", "--hyp", p("test.cascade.rv"), "--ref", p("test.rv"),
                                 "--output", p("bleu.cascade")});
  if (run.ok) {
    run.stage1 = bleu_of(b1);
    run.stage2 = bleu_of(b2);
    run.cascade = bleu_of(bc);
  }
  run.seconds = seconds_since(start);
  return run;
}

void criteria_toy(const fs::path& root) {
  const auto a = run_toy_pipeline(root / "run_a");
  if (!a.ok) {
    report(6, false, "toy pivot pipeline failed: " + a.failure);
  } else {
    const double floor = std::min(a.stage1, a.stage2);
    report(6,
           a.stage1 >= tol::stage_bleu && a.stage2 >= tol::stage_bleu &&
               a.cascade >= tol::cascade_bleu && a.seconds <= tol::toy_seconds &&
               a.cascade <= floor + tol::cascade_margin,
           fmt::format("toy pivot: stage1 BLEU {:.2f}, stage2 BLEU {:.2f} (need >= {}), cascade "
                       "{:.2f} (need >= {} and <= min stage + {}), {:.0f} s (limit {:.0f} s)",
                       a.stage1, a.stage2, tol::stage_bleu, a.cascade, tol::cascade_bleu,
                       tol::cascade_margin, a.seconds, tol::toy_seconds));
  }

  const auto b = run_toy_pipeline(root / "run_b");
  std::vector<std::string> differing;
  std::size_t compared = 0;
  for (const char* f : {"stage1.ckpt", "stage2.ckpt", "stage1.step400.ckpt", "stage2.step400.ckpt",
                        "stage1.src.vocab", "stage2.tgt.vocab", "s1.lo", "s2.rv", "test.hyp.up",
                        "test.hyp.rv", "test.cascade.up", "test.cascade.rv", "bleu.stage1",
                        "bleu.stage2", "bleu.cascade", "bleuc.out"}) {
    ++compared;
    const auto fa = root / "run_a" / f;
    const auto fb = root / "run_b" / f;
    if (!fs::exists(fa) || !fs::exists(fb) || io::read_file(fa) != io::read_file(fb))
      differing.push_back(f);
  }
  std::string list;
  for (const auto& d : differing) list += " " + d;
  report(7, a.ok && b.ok && differing.empty(),
         fmt::format("determinism: {} of {} checkpoint/translation/BLEU files differ between two "
                     "full runs{}",
                     differing.size(), compared, list.empty() ? "" : ":" + list));
}

void criterion_stats(const fs::path& root) {
  const auto dir = root / "stats";
  fs::create_directories(dir);
  io::write_lines_atomic(dir / "c.en", fixture::stats_en);
  io::write_lines_atomic(dir / "c.es", fixture::stats_es);
  const auto r = cli::run({"stats", "--src", (dir / "c.en").string(), "--tgt",
                           (dir / "c.es").string(), "--src-lang", "en", "--tgt-lang", "es",
                           "--name", "fixture"});
  const bool table = r.status == 0 && r.out == fixture::stats_table;

  ParallelCorpus c("en", "es");
  c.add(split_tokens("a b", "en"), split_tokens("c", "es"));
  c.add(split_tokens("a", "en"), split_tokens("c d", "es"));
  const bool counts = corpus_stats(c) == CorpusStats{2, 3, 3, 2, 2};
  report(8, table && counts,
         fmt::format("stats: table {}, hand-counted fixture counts {}",
                     table ? "matches the expected layout and counts" : "MISMATCH:\n" + r.out,
                     counts ? "match" : "MISMATCH"));
}

}  // namespace

int main() {
  const auto root = fs::temp_directory_path() / "pivotmt_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  criterion_gradients();
  criterion_attention();
  criterion_bpe();
  criterion_bleu();
  criterion_preprocessing();
  criteria_toy(root);
  criterion_stats(root);
  std::printf("%d of 8 criteria failed\n", failures);
  fs::remove_all(root);
  return failures;
}
