#include "pivotmt/text_pipeline.hpp"

#include <array>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "pivotmt/error.hpp"
#include "pivotmt/io.hpp"
#include "pivotmt/utf8.hpp"

namespace pivotmt {

namespace {

constexpr std::size_t kMinInfinitiveChars = 5;
constexpr std::size_t kMinGerundChars = 4;

// Longest first so that "nos" wins over "os" and "les" over "le".
constexpr std::array<std::string_view, 11> kEncliticPronouns = {
    "les", "los", "las", "nos", "se", "me", "te", "le", "lo", "la", "os"};

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::size_t char_count(std::string_view s) { return utf8::split_chars(s).size(); }

bool is_hyphen(char32_t cp) { return cp == U'-' || cp == U'‐' || cp == U'‑'; }

// Splits one whitespace-free chunk into word runs and single punctuation marks.
void detach_punctuation(std::string_view chunk, std::vector<std::string>& out) {
  const auto chars = utf8::split_chars(chunk);
  std::vector<char32_t> cps;
  cps.reserve(chars.size());
  for (auto ch : chars) cps.push_back(utf8::code_point(ch));

  std::string word;
  for (std::size_t i = 0; i < chars.size(); ++i) {
    const char32_t cp = cps[i];
    if (utf8::is_word_char(cp)) {
      word += chars[i];
      continue;
    }
    const bool has_prev = i > 0;
    const bool has_next = i + 1 < chars.size();
    bool connector = false;
    if (has_prev && has_next) {
      if (is_hyphen(cp))
        connector = utf8::is_word_char(cps[i - 1]) && utf8::is_word_char(cps[i + 1]);
      else if (cp == U'.' || cp == U',')
        connector = utf8::is_digit(cps[i - 1]) && utf8::is_digit(cps[i + 1]);
    }
    if (connector) {
      word += chars[i];
      continue;
    }
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
    out.emplace_back(chars[i]);
  }
  if (!word.empty()) out.push_back(std::move(word));
}

bool split_contraction(const std::string& token, std::vector<std::string>& out) {
  if (token == "del" || token == "Del") {
    out.push_back(token.substr(0, 2));
    out.emplace_back("el");
    return true;
  }
  if (token == "al" || token == "Al") {
    out.push_back(token.substr(0, 1));
    out.emplace_back("el");
    return true;
  }
  return false;
}

bool split_clitic(const std::string& token, std::vector<std::string>& out) {
  for (auto pronoun : kEncliticPronouns) {
    if (!ends_with(token, pronoun) || token.size() == pronoun.size()) continue;
    const std::string stem = utf8::strip_acute_accents(
        std::string_view(token).substr(0, token.size() - pronoun.size()));
    const std::size_t n = char_count(stem);
    const bool gerund = ends_with(stem, "ndo") && n >= kMinGerundChars;
    const bool infinitive =
        (ends_with(stem, "ar") || ends_with(stem, "er") || ends_with(stem, "ir")) &&
        n >= kMinInfinitiveChars;
    if (gerund || infinitive) {
      out.push_back(stem);
      out.emplace_back(pronoun);
      return true;
    }
  }
  return false;
}

bool is_single_punctuation(const std::string& token) {
  const auto chars = utf8::split_chars(token);
  return chars.size() == 1 && utf8::is_punctuation(utf8::code_point(chars[0]));
}

void apply_rules(const std::string& token, const RuleSet& rules, std::vector<std::string>& out) {
  if (is_single_punctuation(token)) {
    out.push_back(token);
    return;
  }
  if (rules.split_contractions && split_contraction(token, out)) return;
  if (rules.split_clitics && split_clitic(token, out)) return;
  out.push_back(token);
}

std::vector<std::string_view> split_whitespace(std::string_view text) {
  std::vector<std::string_view> chunks;
  std::size_t start = 0;
  std::size_t pos = 0;
  bool in_chunk = false;
  for (auto ch : utf8::split_chars(text)) {
    const bool space = utf8::is_space(utf8::code_point(ch));
    if (space && in_chunk) {
      chunks.push_back(text.substr(start, pos - start));
      in_chunk = false;
    } else if (!space && !in_chunk) {
      start = pos;
      in_chunk = true;
    }
    pos += ch.size();
  }
  if (in_chunk) chunks.push_back(text.substr(start));
  return chunks;
}

RuleSet rules_from(const KeyValues& kv, const std::string& side) {
  RuleSet r;
  r.split_contractions = kv.get_bool(side + ".split_contractions", false);
  r.split_clitics = kv.get_bool(side + ".split_clitics", false);
  return r;
}

}  // namespace

void ParallelCorpus::add(Sentence src, Sentence tgt) {
  if (src.lang != src_lang_ || tgt.lang != tgt_lang_)
    throw InputError("sentence pair tagged " + src.lang + "-" + tgt.lang + " added to a " +
                     src_lang_ + "-" + tgt_lang_ + " corpus");
  pairs_.push_back({std::move(src), std::move(tgt)});
}

std::vector<Sentence> ParallelCorpus::src_side() const {
  std::vector<Sentence> out;
  out.reserve(pairs_.size());
  for (const auto& p : pairs_) out.push_back(p.src);
  return out;
}

std::vector<Sentence> ParallelCorpus::tgt_side() const {
  std::vector<Sentence> out;
  out.reserve(pairs_.size());
  for (const auto& p : pairs_) out.push_back(p.tgt);
  return out;
}

CorpusRules CorpusRules::from_keyvalues(const KeyValues& kv) {
  kv.reject_unknown({"version", "src.split_contractions", "src.split_clitics",
                     "tgt.split_contractions", "tgt.split_clitics"});
  if (kv.get_int("version", 1) != 1)
    throw ConfigError(kv.origin() + ": unsupported rules version " + kv.require("version"));
  return {rules_from(kv, "src"), rules_from(kv, "tgt")};
}

CorpusRules CorpusRules::load(const std::filesystem::path& path) {
  return from_keyvalues(KeyValues::load(path));
}

KeyValues CorpusRules::to_keyvalues() const {
  KeyValues kv;
  auto flag = [](bool b) { return std::string(b ? "true" : "false"); };
  kv.set("version", "1");
  kv.set("src.split_contractions", flag(src.split_contractions));
  kv.set("src.split_clitics", flag(src.split_clitics));
  kv.set("tgt.split_contractions", flag(tgt.split_contractions));
  kv.set("tgt.split_clitics", flag(tgt.split_clitics));
  return kv;
}

Sentence tokenize(std::string_view raw, const std::string& lang, const RuleSet& rules) {
  Sentence sentence{{}, lang};
  std::vector<std::string> pieces;
  for (auto chunk : split_whitespace(raw)) {
    pieces.clear();
    detach_punctuation(chunk, pieces);
    for (const auto& piece : pieces) apply_rules(piece, rules, sentence.tokens);
  }
  return sentence;
}

Sentence split_tokens(std::string_view text, const std::string& lang) {
  Sentence sentence{{}, lang};
  for (auto chunk : split_whitespace(text)) sentence.tokens.emplace_back(chunk);
  return sentence;
}

std::string detokenize(const Sentence& sentence) {
  std::string out;
  for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
    if (i) out += ' ';
    out += sentence.tokens[i];
  }
  return out;
}

ParallelCorpus length_filter(const ParallelCorpus& corpus, std::size_t min_len,
                             std::size_t max_len) {
  if (min_len < 1 || max_len < min_len)
    throw ConfigError(fmt::format("invalid length bounds [{}, {}]", min_len, max_len));
  ParallelCorpus out(corpus.src_lang(), corpus.tgt_lang());
  auto within = [&](const Sentence& s) {
    return s.word_count() >= min_len && s.word_count() <= max_len;
  };
  for (const auto& pair : corpus.pairs())
    if (within(pair.src) && within(pair.tgt)) out.add(pair.src, pair.tgt);
  return out;
}

CorpusStats corpus_stats(const ParallelCorpus& corpus) {
  CorpusStats stats;
  std::set<std::string> vocab_src;
  std::set<std::string> vocab_tgt;
  stats.segments = corpus.size();
  for (const auto& pair : corpus.pairs()) {
    stats.words_src += pair.src.word_count();
    stats.words_tgt += pair.tgt.word_count();
    vocab_src.insert(pair.src.tokens.begin(), pair.src.tokens.end());
    vocab_tgt.insert(pair.tgt.tokens.begin(), pair.tgt.tokens.end());
  }
  stats.vocab_src = vocab_src.size();
  stats.vocab_tgt = vocab_tgt.size();
  return stats;
}

std::string format_stats_table(const ParallelCorpus& corpus, const CorpusStats& stats,
                               const std::string& corpus_name) {
  const std::string pair = corpus.src_lang() + "-" + corpus.tgt_lang();
  const auto row = [](std::string_view a, std::string_view b, std::string_view c,
                      std::string_view d, std::string_view e, std::string_view f) {
    return fmt::format("{:<14}{:<14}{:<10}{:>10}{:>12}{:>10}\n", a, b, c, d, e, f);
  };
  std::string out = row("Language Pair", "Corpus", "Language", "Segments", "Words", "Vocab");
  out += row(pair, corpus_name, corpus.src_lang(), std::to_string(stats.segments),
             std::to_string(stats.words_src), std::to_string(stats.vocab_src));
  out += row("", "", corpus.tgt_lang(), "", std::to_string(stats.words_tgt),
             std::to_string(stats.vocab_tgt));
  return out;
}

namespace {

template <typename MakeSentence>
ParallelCorpus read_pairs(const std::filesystem::path& src_path,
                          const std::filesystem::path& tgt_path, const std::string& src_lang,
                          const std::string& tgt_lang, MakeSentence&& make) {
  const auto src_lines = io::read_lines(src_path);
  const auto tgt_lines = io::read_lines(tgt_path);
  if (src_lines.size() != tgt_lines.size())
    throw InputError(fmt::format("{} has {} lines but {} has {}", src_path.string(),
                                 src_lines.size(), tgt_path.string(), tgt_lines.size()));
  ParallelCorpus corpus(src_lang, tgt_lang);
  for (std::size_t i = 0; i < src_lines.size(); ++i)
    corpus.add(make(src_lines[i], src_lang, true), make(tgt_lines[i], tgt_lang, false));
  return corpus;
}

}  // namespace

ParallelCorpus read_raw_corpus(const std::filesystem::path& src_path,
                               const std::filesystem::path& tgt_path, const std::string& src_lang,
                               const std::string& tgt_lang, const CorpusRules& rules) {
  return read_pairs(src_path, tgt_path, src_lang, tgt_lang,
                    [&](const std::string& line, const std::string& lang, bool is_src) {
                      return tokenize(line, lang, is_src ? rules.src : rules.tgt);
                    });
}

ParallelCorpus read_tokenized_corpus(const std::filesystem::path& src_path,
                                     const std::filesystem::path& tgt_path,
                                     const std::string& src_lang, const std::string& tgt_lang) {
  return read_pairs(src_path, tgt_path, src_lang, tgt_lang,
                    [](const std::string& line, const std::string& lang, bool) {
                      return split_tokens(line, lang);
                    });
}

void write_corpus(const ParallelCorpus& corpus, const std::filesystem::path& src_path,
                  const std::filesystem::path& tgt_path) {
  std::vector<std::string> src;
  std::vector<std::string> tgt;
  for (const auto& pair : corpus.pairs()) {
    src.push_back(detokenize(pair.src));
    tgt.push_back(detokenize(pair.tgt));
  }
  io::write_lines_atomic(src_path, src);
  io::write_lines_atomic(tgt_path, tgt);
}

}  // namespace pivotmt
