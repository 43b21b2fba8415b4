#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "pivotmt/rng.hpp"
#include "pivotmt/subword.hpp"
#include "pivotmt/utf8.hpp"

namespace oracle {

/// Reference BPE learner: recounts every adjacent pair from scratch on each
/// round, picks the most frequent (ties: smallest left, then right), stops
/// at `target_size` tokens or when the best pair occurs fewer than twice.
inline std::vector<pivotmt::MergeRule> reference_bpe(const std::vector<std::string>& words,
                                                     std::size_t target_size) {
  std::vector<std::vector<std::string>> segs;
  std::vector<std::string> alphabet;
  for (const auto& w : words) {
    std::vector<std::string> chars;
    for (auto c : pivotmt::utf8::split_chars(w)) chars.emplace_back(c);
    chars.back() += "</w>";
    for (const auto& c : chars)
      if (std::find(alphabet.begin(), alphabet.end(), c) == alphabet.end()) alphabet.push_back(c);
    segs.push_back(chars);
  }
  std::size_t size = 4 + alphabet.size();
  std::vector<pivotmt::MergeRule> merges;
  while (size < target_size) {
    std::map<std::pair<std::string, std::string>, int> counts;
    for (const auto& s : segs)
      for (std::size_t i = 0; i + 1 < s.size(); ++i) ++counts[{s[i], s[i + 1]}];
    std::pair<std::string, std::string> best;
    int best_count = 0;
    for (const auto& [pair, count] : counts)
      if (count > best_count || (count == best_count && pair < best)) {
        best = pair;
        best_count = count;
      }
    if (best_count < 2) break;
    for (auto& s : segs) {
      std::vector<std::string> merged;
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (i + 1 < s.size() && s[i] == best.first && s[i + 1] == best.second) {
          merged.push_back(s[i] + s[i + 1]);
          ++i;
        } else {
          merged.push_back(s[i]);
        }
      }
      s = merged;
    }
    merges.push_back({best.first, best.second});
    ++size;
  }
  return merges;
}

/// Random sentences whose words use only characters the vocabulary has
/// symbols for: interior characters from its bare single-character symbols,
/// final characters from its end-of-word symbols.
inline std::vector<pivotmt::Sentence> random_sentences(const pivotmt::SubwordVocab& vocab,
                                                       std::size_t count, std::uint64_t seed) {
  std::vector<std::string> inner;
  std::vector<std::string> final_chars;
  const std::string eow(pivotmt::SubwordVocab::end_of_word);
  for (std::size_t id = pivotmt::SpecialIds::count; id < vocab.size(); ++id) {
    const auto& t = vocab.tokens()[id];
    const bool marked = t.size() > eow.size() && t.ends_with(eow);
    const std::string bare = marked ? t.substr(0, t.size() - eow.size()) : t;
    if (pivotmt::utf8::split_chars(bare).size() != 1) continue;
    (marked ? final_chars : inner).push_back(bare);
  }
  pivotmt::Rng rng(seed);
  std::vector<pivotmt::Sentence> out;
  for (std::size_t n = 0; n < count; ++n) {
    pivotmt::Sentence s{{}, "xx"};
    const std::size_t words = 1 + rng.below(10);
    for (std::size_t w = 0; w < words; ++w) {
      std::string word;
      const std::size_t len = inner.empty() ? 0 : rng.below(8);
      for (std::size_t c = 0; c < len; ++c) word += inner[rng.below(inner.size())];
      word += final_chars[rng.below(final_chars.size())];
      s.tokens.push_back(word);
    }
    out.push_back(s);
  }
  return out;
}

inline std::size_t round_trip_failures(const pivotmt::SubwordVocab& vocab,
                                       const std::vector<pivotmt::Sentence>& sentences) {
  std::size_t failures = 0;
  for (const auto& s : sentences) {
    for (bool frame : {false, true})
      if (vocab.decode(vocab.encode(s, frame), s.lang) != s) ++failures;
  }
  return failures;
}

/// A small Spanish-flavoured training text for vocabulary tests.
inline std::vector<pivotmt::Sentence> sample_corpus() {
  const char* lines[] = {
      "el paciente presenta una lesión en la pierna derecha",
      "la paciente fue tratada con antibióticos durante dos semanas",
      "se observa una mejoría clínica tras el tratamiento",
      "los resultados del análisis fueron normales",
      "el médico recomienda reposo y seguimiento",
      "no se encontraron complicaciones después de la cirugía",
      "la lesión desapareció a los tres meses",
      "preguntando se por el diagnóstico , la paciente volvió al hospital",
  };
  std::vector<pivotmt::Sentence> out;
  for (const char* l : lines) {
    pivotmt::Sentence s{{}, "es"};
    std::string word;
    for (const char* c = l;; ++c) {
      if (*c == ' ' || *c == '\0') {
        if (!word.empty()) s.tokens.push_back(word);
        word.clear();
        if (*c == '\0') break;
      } else {
        word += *c;
      }
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace oracle
