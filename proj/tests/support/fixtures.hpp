#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pivotmt/text_pipeline.hpp"

namespace fixture {

/// Ten pairs given as (source tokens, target tokens) counts; the kept set for
/// bounds [1, 50] is read off the counts directly.
inline const std::vector<std::pair<std::size_t, std::size_t>>& length_counts() {
  static const std::vector<std::pair<std::size_t, std::size_t>> counts = {
      {0, 5}, {1, 1}, {50, 50}, {51, 10}, {10, 51}, {3, 4}, {50, 1}, {1, 50}, {49, 2}, {2, 0}};
  return counts;
}

inline const std::vector<std::size_t>& length_kept() {
  static const std::vector<std::size_t> kept = {1, 2, 5, 6, 7, 8};
  return kept;
}

inline std::string repeat_word(const std::string& stem, std::size_t n) {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) out += (i ? " " : "") + stem + std::to_string(i);
  return out;
}

/// Raw lines for the length fixture; no rule changes the token counts.
inline std::pair<std::vector<std::string>, std::vector<std::string>> length_lines() {
  std::vector<std::string> src, tgt;
  for (const auto& [s, t] : length_counts()) {
    src.push_back(repeat_word("w", s));
    tgt.push_back(repeat_word("p", t));
  }
  return {src, tgt};
}

/// Two-pair corpus for the statistics table. Counted by hand:
/// en tokens the cat sat . | the dog .         -> 7 words, 5 types
/// es tokens el gato se sentó . | el perro .   -> 8 words, 6 types
inline const std::vector<std::string> stats_en = {"the cat sat .", "the dog ."};
inline const std::vector<std::string> stats_es = {"el gato se sentó .", "el perro ."};

inline const std::string stats_table =
    "Language Pair Corpus        Language    Segments       Words     Vocab\n"
    "en-es         fixture       en                 2           7         5\n"
    "                            es                             8         6\n";

}  // namespace fixture

namespace fixture {

/// Three-segment BLEU fixture scored by sacrebleu 2.6.0 with tokenize='none'
/// and smooth_method='none': 38.217315136192916, counts 19/11/6/3 over
/// 21/18/15/12, BP 0.788127627745311, hyp_len 21, ref_len 26.
inline const std::vector<std::string> bleu_hyp = {
    "the patient was treated with antibiotics for two weeks .",
    "no complications were found after surgery",
    "the analysis results were normal"};
inline const std::vector<std::string> bleu_ref = {
    "the patient was treated with antibiotics during two weeks .",
    "no complications were observed after the surgery .",
    "the results of the analysis were normal ."};
inline constexpr double bleu_golden = 38.217315136192916;

}  // namespace fixture
