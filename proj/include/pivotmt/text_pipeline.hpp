#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "pivotmt/keyvalue.hpp"

namespace pivotmt {

/// A tokenized segment. Tokens are non-empty and contain no whitespace; the
/// word count of a sentence is its token count.
struct Sentence {
  std::vector<std::string> tokens;
  std::string lang;

  std::size_t word_count() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }

  friend bool operator==(const Sentence&, const Sentence&) = default;
};

struct SentencePair {
  Sentence src;
  Sentence tgt;
};

/// Aligned segment pairs. Each pair's sentences carry the corpus' language
/// tags; `add` enforces this.
class ParallelCorpus {
 public:
  ParallelCorpus() = default;
  ParallelCorpus(std::string src_lang, std::string tgt_lang)
      : src_lang_(std::move(src_lang)), tgt_lang_(std::move(tgt_lang)) {}

  void add(Sentence src, Sentence tgt);

  const std::string& src_lang() const { return src_lang_; }
  const std::string& tgt_lang() const { return tgt_lang_; }
  const std::vector<SentencePair>& pairs() const { return pairs_; }
  std::size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }

  std::vector<Sentence> src_side() const;
  std::vector<Sentence> tgt_side() const;

 private:
  std::string src_lang_;
  std::string tgt_lang_;
  std::vector<SentencePair> pairs_;
};

struct CorpusStats {
  std::size_t segments = 0;
  std::size_t words_src = 0;
  std::size_t words_tgt = 0;
  std::size_t vocab_src = 0;
  std::size_t vocab_tgt = 0;

  friend bool operator==(const CorpusStats&, const CorpusStats&) = default;
};

/// Splitting rules for one side of a corpus. Punctuation detachment is always
/// on; the Spanish splits are opt-in per side.
struct RuleSet {
  /// del -> de el, al -> a el
  bool split_contractions = false;
  /// Enclitic pronouns after gerunds and infinitives: preguntándose -> preguntando se
  bool split_clitics = false;

  static RuleSet none() { return {}; }
  static RuleSet spanish_splitting() { return {true, true}; }

  friend bool operator==(const RuleSet&, const RuleSet&) = default;
};

/// Per-corpus rule configuration. File form (key=value):
///
///     version=1
///     src.split_contractions=false
///     src.split_clitics=false
///     tgt.split_contractions=true
///     tgt.split_clitics=true
///
/// Missing keys default to false; unknown keys are rejected.
struct CorpusRules {
  RuleSet src;
  RuleSet tgt;

  static CorpusRules from_keyvalues(const KeyValues& kv);
  static CorpusRules load(const std::filesystem::path& path);
  KeyValues to_keyvalues() const;

  friend bool operator==(const CorpusRules&, const CorpusRules&) = default;
};

/// Whitespace split, then punctuation detachment, then the active splitting
/// rules. Hyphens between word characters and '.' or ',' between digits stay
/// inside the token. Case is never changed.
Sentence tokenize(std::string_view raw, const std::string& lang, const RuleSet& rules);

/// Splits already-tokenized text on whitespace only.
Sentence split_tokens(std::string_view text, const std::string& lang);

/// Joins tokens with single spaces. Contraction and clitic splits are not
/// undone.
std::string detokenize(const Sentence& sentence);

/// Keeps the pairs whose two sides both have between `min_len` and `max_len`
/// tokens (inclusive), in their original order.
ParallelCorpus length_filter(const ParallelCorpus& corpus, std::size_t min_len = 1,
                             std::size_t max_len = 50);

CorpusStats corpus_stats(const ParallelCorpus& corpus);

/// Renders stats with the columns Language Pair / Corpus / Language /
/// Segments / Words / Vocab, one row per language.
std::string format_stats_table(const ParallelCorpus& corpus, const CorpusStats& stats,
                               const std::string& corpus_name);

/// Reads two line-aligned raw files and tokenizes each side with its rules.
ParallelCorpus read_raw_corpus(const std::filesystem::path& src_path,
                               const std::filesystem::path& tgt_path, const std::string& src_lang,
                               const std::string& tgt_lang, const CorpusRules& rules);

/// Reads two line-aligned files that are already tokenized.
ParallelCorpus read_tokenized_corpus(const std::filesystem::path& src_path,
                                     const std::filesystem::path& tgt_path,
                                     const std::string& src_lang, const std::string& tgt_lang);

void write_corpus(const ParallelCorpus& corpus, const std::filesystem::path& src_path,
                  const std::filesystem::path& tgt_path);

}  // namespace pivotmt
