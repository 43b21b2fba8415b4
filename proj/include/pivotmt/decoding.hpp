#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "pivotmt/model.hpp"

namespace pivotmt {

/// Log-probabilities over the target vocabulary for the token that follows
/// `prefix` (the generated tokens so far, without BOS).
using StepScorer = std::function<std::vector<double>(const std::vector<TokenId>& prefix)>;

struct Hypothesis {
  std::vector<TokenId> tokens;  // generated tokens, EOS excluded
  double log_prob = 0.0;
  bool finished = false;        // ended with EOS rather than hitting max_len

  /// Decoding steps taken: the tokens plus the EOS step when finished.
  std::size_t steps() const { return tokens.size() + (finished ? 1 : 0); }
};

/// log_prob / steps^alpha.
double normalized_score(const Hypothesis& h, double alpha);

/// PAD, BOS and UNK are never generated.
bool can_generate(TokenId id);

/// Appends the highest-probability token (lowest id on ties) until EOS or
/// `max_len` steps.
Hypothesis greedy_search(const StepScorer& scorer, std::size_t max_len);

/// Beam search over cumulative log-probabilities. Each step keeps the
/// `beam_size` best expansions; expansions ending in EOS are set aside as
/// finished, and live hypotheses are closed at `max_len`. The result is the
/// finished hypothesis with the best normalized score (ties go to the
/// lexicographically lower token sequence). The greedy hypothesis is entered
/// into the finished pool, so the result never scores below it.
Hypothesis beam_search(const StepScorer& scorer, std::size_t beam_size, std::size_t max_len,
                       double length_norm_alpha);

/// Scorer backed by the transformer for one framed source sentence.
StepScorer transformer_scorer(const IdSequence& src, const Parameters& params,
                              const ModelConfig& config);

/// `max_len` is capped so that BOS plus the generated prefix fits in
/// `config.max_seq_len`. The returned ids exclude BOS and EOS.
IdSequence greedy_decode(const IdSequence& src, const Parameters& params,
                         const ModelConfig& config, std::size_t max_len);

IdSequence beam_decode(const IdSequence& src, const Parameters& params, const ModelConfig& config,
                       std::size_t beam_size, std::size_t max_len, double length_norm_alpha);

}  // namespace pivotmt
