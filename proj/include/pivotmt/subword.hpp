#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pivotmt/text_pipeline.hpp"

namespace pivotmt {

enum class VocabMode { separate, shared };

std::string to_string(VocabMode mode);
VocabMode parse_vocab_mode(std::string_view text);

using TokenId = std::int32_t;

struct SpecialIds {
  static constexpr TokenId pad = 0;
  static constexpr TokenId bos = 1;
  static constexpr TokenId eos = 2;
  static constexpr TokenId unk = 3;
  static constexpr std::size_t count = 4;
};

struct IdSequence {
  std::vector<TokenId> ids;

  std::size_t size() const { return ids.size(); }
  friend bool operator==(const IdSequence&, const IdSequence&) = default;
};

struct MergeRule {
  std::string left;
  std::string right;

  std::string merged() const { return left + right; }
  friend auto operator<=>(const MergeRule&, const MergeRule&) = default;
};

/// Byte-pair-encoding vocabulary. Ids are contiguous from 0 with the four
/// specials first, then the initial character symbols in lexicographic order,
/// then each new merged symbol in the order it was learned. Word-final
/// characters carry the `end_of_word` marker.
class SubwordVocab {
 public:
  static constexpr std::string_view end_of_word = "</w>";
  static constexpr std::string_view unk_text = "<unk>";
  static constexpr std::array<std::string_view, SpecialIds::count> special_tokens = {
      "<pad>", "<s>", "</s>", "<unk>"};

  SubwordVocab() = default;

  VocabMode mode() const { return mode_; }
  std::size_t target_size() const { return target_size_; }
  std::size_t size() const { return id_to_token_.size(); }
  const std::vector<MergeRule>& merges() const { return merges_; }
  const std::vector<std::string>& tokens() const { return id_to_token_; }

  /// Id for `token`, or `SpecialIds::unk` when absent.
  TokenId id_of(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token_of(TokenId id) const;

  /// Splits one word into subword symbols by applying the merges in learned
  /// order. Symbols absent from the vocabulary are returned unchanged.
  std::vector<std::string> segment(std::string_view word) const;

  IdSequence encode(const Sentence& sentence, bool frame) const;

  /// Drops specials, joins symbols and ends a word at each end-of-word
  /// marker. UNK becomes the `unk_text` placeholder inside the current word.
  Sentence decode(const IdSequence& ids, const std::string& lang) const;

  /// Text form: a header line, the merge list in learned order, then the
  /// id table. `load(save())` reproduces the same bytes.
  std::string serialize() const;
  static SubwordVocab deserialize(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static SubwordVocab load(const std::filesystem::path& path);

  friend bool operator==(const SubwordVocab& a, const SubwordVocab& b) {
    return a.mode_ == b.mode_ && a.target_size_ == b.target_size_ && a.merges_ == b.merges_ &&
           a.id_to_token_ == b.id_to_token_;
  }

  friend SubwordVocab learn_vocab(const std::vector<std::vector<Sentence>>& corpora,
                                  std::size_t target_size, VocabMode mode);

 private:
  void add_token(const std::string& token);
  void index_merges();

  VocabMode mode_ = VocabMode::separate;
  std::size_t target_size_ = 0;
  std::vector<MergeRule> merges_;
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, TokenId> token_to_id_;
  std::map<std::pair<std::string, std::string>, std::size_t> merge_rank_;
};

/// Learns a single vocabulary from the pooled sentences of all `corpora`.
/// Merging stops when the vocabulary reaches `target_size` or when no
/// adjacent pair occurs at least twice. Ties between equally frequent pairs go
/// to the lexicographically smallest (left, right).
SubwordVocab learn_vocab(const std::vector<std::vector<Sentence>>& corpora,
                         std::size_t target_size, VocabMode mode);

/// Shared mode pools every corpus into one vocabulary (returned once);
/// separate mode learns one vocabulary per corpus, in order.
std::vector<SubwordVocab> learn(const std::vector<std::vector<Sentence>>& corpora,
                                std::size_t target_size, VocabMode mode);

inline constexpr std::size_t kDefaultVocabSize = 512;

}  // namespace pivotmt
