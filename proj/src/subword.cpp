#include "pivotmt/subword.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include <fmt/format.h>

#include "pivotmt/error.hpp"
#include "pivotmt/io.hpp"
#include "pivotmt/utf8.hpp"

namespace pivotmt {

namespace {

constexpr std::string_view kMagic = "pivotmt-vocab";
constexpr int kFormatVersion = 1;

using Symbols = std::vector<std::string>;

Symbols initial_symbols(std::string_view word) {
  Symbols out;
  for (auto ch : utf8::split_chars(word)) out.emplace_back(ch);
  if (!out.empty()) out.back() += SubwordVocab::end_of_word;
  return out;
}

void apply_merge(Symbols& symbols, const std::string& left, const std::string& right) {
  if (symbols.size() < 2) return;
  Symbols merged;
  merged.reserve(symbols.size());
  std::size_t i = 0;
  while (i < symbols.size()) {
    if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
      merged.push_back(left + right);
      i += 2;
    } else {
      merged.push_back(std::move(symbols[i]));
      ++i;
    }
  }
  symbols = std::move(merged);
}

bool ends_with_marker(std::string_view symbol) {
  const auto m = SubwordVocab::end_of_word;
  return symbol.size() >= m.size() && symbol.substr(symbol.size() - m.size()) == m;
}

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::size_t parse_count(std::string_view text, std::string_view what) {
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw FormatError(fmt::format("vocab file: bad {} '{}'", what, text));
  return value;
}

}  // namespace

std::string to_string(VocabMode mode) { return mode == VocabMode::shared ? "shared" : "separate"; }

VocabMode parse_vocab_mode(std::string_view text) {
  if (text == "shared") return VocabMode::shared;
  if (text == "separate") return VocabMode::separate;
  throw ConfigError(fmt::format("vocab mode must be 'shared' or 'separate', got '{}'", text));
}

TokenId SubwordVocab::id_of(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? SpecialIds::unk : it->second;
}

bool SubwordVocab::contains(std::string_view token) const {
  return token_to_id_.count(std::string(token)) > 0;
}

const std::string& SubwordVocab::token_of(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size())
    throw DecodeError(fmt::format("token id {} outside vocabulary of size {}", id, size()));
  return id_to_token_[static_cast<std::size_t>(id)];
}

void SubwordVocab::add_token(const std::string& token) {
  if (token_to_id_.count(token)) return;
  token_to_id_.emplace(token, static_cast<TokenId>(id_to_token_.size()));
  id_to_token_.push_back(token);
}

void SubwordVocab::index_merges() {
  merge_rank_.clear();
  for (std::size_t i = 0; i < merges_.size(); ++i)
    merge_rank_.emplace(std::make_pair(merges_[i].left, merges_[i].right), i);
}

std::vector<std::string> SubwordVocab::segment(std::string_view word) const {
  Symbols symbols = initial_symbols(word);
  while (symbols.size() > 1) {
    std::size_t best_rank = merges_.size();
    std::size_t best_at = 0;
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      auto it = merge_rank_.find({symbols[i], symbols[i + 1]});
      if (it != merge_rank_.end() && it->second < best_rank) {
        best_rank = it->second;
        best_at = i;
      }
    }
    if (best_rank == merges_.size()) break;
    const std::string left = symbols[best_at];
    const std::string right = symbols[best_at + 1];
    apply_merge(symbols, left, right);
  }
  return symbols;
}

IdSequence SubwordVocab::encode(const Sentence& sentence, bool frame) const {
  IdSequence out;
  if (frame) out.ids.push_back(SpecialIds::bos);
  for (const auto& token : sentence.tokens)
    for (const auto& symbol : segment(token)) out.ids.push_back(id_of(symbol));
  if (frame) out.ids.push_back(SpecialIds::eos);
  return out;
}

Sentence SubwordVocab::decode(const IdSequence& ids, const std::string& lang) const {
  Sentence out{{}, lang};
  std::string word;
  for (TokenId id : ids.ids) {
    const std::string& symbol = token_of(id);
    if (id == SpecialIds::pad || id == SpecialIds::bos || id == SpecialIds::eos) continue;
    if (id == SpecialIds::unk) {
      word += unk_text;
      continue;
    }
    if (ends_with_marker(symbol)) {
      word.append(symbol, 0, symbol.size() - end_of_word.size());
      out.tokens.push_back(std::move(word));
      word.clear();
    } else {
      word += symbol;
    }
  }
  if (!word.empty()) out.tokens.push_back(std::move(word));
  return out;
}

std::string SubwordVocab::serialize() const {
  std::string out = fmt::format("{} {} mode={} target_size={} specials=", kMagic, kFormatVersion,
                                pivotmt::to_string(mode_), target_size_);
  for (std::size_t i = 0; i < special_tokens.size(); ++i) {
    if (i) out += ',';
    out += special_tokens[i];
  }
  out += '\n';
  out += fmt::format("merges {}\n", merges_.size());
  for (const auto& m : merges_) out += m.left + ' ' + m.right + '\n';
  out += fmt::format("tokens {}\n", id_to_token_.size());
  for (std::size_t i = 0; i < id_to_token_.size(); ++i)
    out += fmt::format("{}\t{}\n", i, id_to_token_[i]);
  return out;
}

SubwordVocab SubwordVocab::deserialize(std::string_view text) {
  std::vector<std::string_view> lines = split_fields(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  std::size_t at = 0;
  auto next = [&]() -> std::string_view {
    if (at >= lines.size()) throw FormatError("vocab file: unexpected end of file");
    return lines[at++];
  };

  SubwordVocab vocab;
  const auto header = split_fields(next(), ' ');
  if (header.size() != 5 || header[0] != kMagic)
    throw FormatError("vocab file: bad header");
  if (header[1] != std::to_string(kFormatVersion))
    throw FormatError(fmt::format("vocab file: unsupported version {}", header[1]));
  auto field = [&](std::string_view f, std::string_view key) {
    if (f.substr(0, key.size()) != key) throw FormatError("vocab file: expected " + std::string(key));
    return f.substr(key.size());
  };
  vocab.mode_ = parse_vocab_mode(field(header[2], "mode="));
  vocab.target_size_ = parse_count(field(header[3], "target_size="), "target_size");
  const auto specials = split_fields(field(header[4], "specials="), ',');
  if (!std::equal(specials.begin(), specials.end(), special_tokens.begin(), special_tokens.end()))
    throw FormatError("vocab file: unexpected special tokens");

  const auto merge_head = split_fields(next(), ' ');
  if (merge_head.size() != 2 || merge_head[0] != "merges")
    throw FormatError("vocab file: expected merge count");
  const std::size_t n_merges = parse_count(merge_head[1], "merge count");
  for (std::size_t i = 0; i < n_merges; ++i) {
    const auto parts = split_fields(next(), ' ');
    if (parts.size() != 2 || parts[0].empty() || parts[1].empty())
      throw FormatError(fmt::format("vocab file: bad merge rule on line {}", at));
    vocab.merges_.push_back({std::string(parts[0]), std::string(parts[1])});
  }

  const auto token_head = split_fields(next(), ' ');
  if (token_head.size() != 2 || token_head[0] != "tokens")
    throw FormatError("vocab file: expected token count");
  const std::size_t n_tokens = parse_count(token_head[1], "token count");
  for (std::size_t i = 0; i < n_tokens; ++i) {
    const auto parts = split_fields(next(), '\t');
    if (parts.size() != 2 || parts[1].empty() || parse_count(parts[0], "id") != i)
      throw FormatError(fmt::format("vocab file: bad token entry on line {}", at));
    const std::string token(parts[1]);
    if (vocab.token_to_id_.count(token))
      throw FormatError("vocab file: duplicate token " + token);
    vocab.add_token(token);
  }
  if (at != lines.size()) throw FormatError("vocab file: trailing content");
  for (std::size_t i = 0; i < special_tokens.size(); ++i)
    if (i >= vocab.size() || vocab.id_to_token_[i] != special_tokens[i])
      throw FormatError("vocab file: specials must occupy the lowest ids");
  for (const auto& m : vocab.merges_)
    if (!vocab.contains(m.merged()))
      throw FormatError("vocab file: merge output missing from token table: " + m.merged());
  vocab.index_merges();
  return vocab;
}

void SubwordVocab::save(const std::filesystem::path& path) const {
  io::write_file_atomic(path, serialize());
}

SubwordVocab SubwordVocab::load(const std::filesystem::path& path) {
  return deserialize(io::read_file(path));
}

SubwordVocab learn_vocab(const std::vector<std::vector<Sentence>>& corpora,
                         std::size_t target_size, VocabMode mode) {
  std::map<std::string, std::int64_t> word_freq;
  for (const auto& corpus : corpora)
    for (const auto& sentence : corpus)
      for (const auto& token : sentence.tokens)
        if (!token.empty()) ++word_freq[token];
  if (word_freq.empty()) throw LearnError("cannot learn a vocabulary from an empty corpus");

  std::vector<Symbols> words;
  std::vector<std::int64_t> freqs;
  std::set<std::string> alphabet;
  for (const auto& [word, freq] : word_freq) {
    words.push_back(initial_symbols(word));
    freqs.push_back(freq);
    alphabet.insert(words.back().begin(), words.back().end());
  }
  if (target_size <= alphabet.size() + SpecialIds::count)
    throw ConfigError(fmt::format(
        "vocabulary target size {} must exceed alphabet ({}) plus specials ({})", target_size,
        alphabet.size(), SpecialIds::count));

  SubwordVocab vocab;
  vocab.mode_ = mode;
  vocab.target_size_ = target_size;
  for (auto special : SubwordVocab::special_tokens) vocab.add_token(std::string(special));
  for (const auto& symbol : alphabet) vocab.add_token(symbol);

  std::map<std::pair<std::string, std::string>, std::int64_t> pair_counts;
  while (vocab.size() < target_size) {
    pair_counts.clear();
    for (std::size_t w = 0; w < words.size(); ++w)
      for (std::size_t i = 0; i + 1 < words[w].size(); ++i)
        pair_counts[{words[w][i], words[w][i + 1]}] += freqs[w];

    const std::pair<std::string, std::string>* best = nullptr;
    std::int64_t best_count = 1;
    for (const auto& [pair, count] : pair_counts) {
      if (count > best_count) {
        best = &pair;
        best_count = count;
      }
    }
    if (best == nullptr) break;

    const MergeRule rule{best->first, best->second};
    for (auto& symbols : words) apply_merge(symbols, rule.left, rule.right);
    vocab.merges_.push_back(rule);
    vocab.add_token(rule.merged());
  }
  vocab.index_merges();
  return vocab;
}

std::vector<SubwordVocab> learn(const std::vector<std::vector<Sentence>>& corpora,
                                std::size_t target_size, VocabMode mode) {
  if (corpora.empty()) throw LearnError("no corpora given");
  if (mode == VocabMode::shared) return {learn_vocab(corpora, target_size, mode)};
  std::vector<SubwordVocab> out;
  for (const auto& corpus : corpora) out.push_back(learn_vocab({corpus}, target_size, mode));
  return out;
}

}  // namespace pivotmt
