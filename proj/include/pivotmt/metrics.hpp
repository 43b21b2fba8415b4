#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "pivotmt/text_pipeline.hpp"

namespace pivotmt {

/// Corpus BLEU on a 0-100 scale. `precisions[n-1]` is the clipped n-gram
/// precision in [0, 1]; `matches` and `totals` are its numerator and
/// denominator summed over the corpus.
struct BleuReport {
  double bleu = 0.0;
  std::vector<double> precisions;
  std::vector<std::size_t> matches;
  std::vector<std::size_t> totals;
  double brevity_penalty = 1.0;
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;

  friend bool operator==(const BleuReport&, const BleuReport&) = default;
};

using Ngram = std::vector<std::string>;
using NgramCounts = std::map<Ngram, std::size_t>;

/// Every contiguous window of `n` tokens with its multiplicity.
NgramCounts ngram_counts(const Sentence& sentence, std::size_t n);

/// Single-reference corpus BLEU with per-segment clipping and no smoothing:
/// any zero precision gives 0. Tokens compare case-sensitively. The brevity
/// penalty is exp(1 - ref_len / hyp_len) when hyp_len < ref_len, else 1 (and
/// 0 in the degenerate case of an all-empty hypothesis set).
BleuReport bleu(const std::vector<Sentence>& hypotheses, const std::vector<Sentence>& references,
                std::size_t max_n = 4);

/// `BLEU = 38.22, p1/p2/p3/p4 = 90.5/61.1/40.0/25.0, BP = 0.788, hyp_len = 21, ref_len = 26`
std::string format_bleu_line(const BleuReport& report);

/// Full-precision `key=value` block: bleu, p1..pN, bp, hyp_len, ref_len.
std::string format_bleu_keyvalues(const BleuReport& report);

/// Lowercases Basic Latin and Latin-1 letters. Only used when case-insensitive
/// scoring is requested explicitly.
Sentence fold_case(const Sentence& sentence);

}  // namespace pivotmt
