#include "pivotmt/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "pivotmt/error.hpp"

namespace pivotmt {

namespace {

// Orders candidates best-first: higher score, then lower token sequence.
bool better(double score_a, const std::vector<TokenId>& a, double score_b,
            const std::vector<TokenId>& b) {
  if (score_a != score_b) return score_a > score_b;
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

std::size_t effective_max_len(std::size_t max_len, const ModelConfig& config) {
  return std::min(max_len, config.max_seq_len - 1);
}

}  // namespace

double normalized_score(const Hypothesis& h, double alpha) {
  const std::size_t n = h.steps();
  if (n == 0 || alpha == 0.0) return h.log_prob;
  return h.log_prob / std::pow(static_cast<double>(n), alpha);
}

bool can_generate(TokenId id) {
  return id != SpecialIds::pad && id != SpecialIds::bos && id != SpecialIds::unk;
}

Hypothesis greedy_search(const StepScorer& scorer, std::size_t max_len) {
  Hypothesis h;
  while (h.tokens.size() < max_len) {
    const auto log_p = scorer(h.tokens);
    TokenId best = -1;
    for (std::size_t id = 0; id < log_p.size(); ++id) {
      const auto tok = static_cast<TokenId>(id);
      if (can_generate(tok) && (best < 0 || log_p[id] > log_p[static_cast<std::size_t>(best)]))
        best = tok;
    }
    if (best < 0) throw InputError("scorer offers no generatable token");
    h.log_prob += log_p[static_cast<std::size_t>(best)];
    if (best == SpecialIds::eos) {
      h.finished = true;
      break;
    }
    h.tokens.push_back(best);
  }
  return h;
}

Hypothesis beam_search(const StepScorer& scorer, std::size_t beam_size, std::size_t max_len,
                       double length_norm_alpha) {
  if (beam_size == 0) throw ConfigError("beam size must be at least 1");

  std::vector<Hypothesis> finished{greedy_search(scorer, max_len)};
  if (max_len == 0 || beam_size == 1) return finished.front();

  struct Candidate {
    std::size_t parent;
    TokenId token;
    double log_prob;
    std::vector<TokenId> sequence;  // parent tokens + token, for tie-breaking
  };

  std::vector<Hypothesis> live{Hypothesis{}};
  std::vector<Candidate> candidates;
  for (std::size_t step = 1; step <= max_len && !live.empty(); ++step) {
    candidates.clear();
    for (std::size_t p = 0; p < live.size(); ++p) {
      const auto log_p = scorer(live[p].tokens);
      for (std::size_t id = 0; id < log_p.size(); ++id) {
        const auto tok = static_cast<TokenId>(id);
        if (!can_generate(tok)) continue;
        auto seq = live[p].tokens;
        seq.push_back(tok);
        candidates.push_back({p, tok, live[p].log_prob + log_p[id], std::move(seq)});
      }
    }
    // Every candidate at this step has the same length, so ranking by raw
    // log-probability equals ranking by normalized score.
    const std::size_t keep = std::min(beam_size, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                      candidates.end(), [](const Candidate& a, const Candidate& b) {
                        return better(a.log_prob, a.sequence, b.log_prob, b.sequence);
                      });
    std::vector<Hypothesis> next;
    for (std::size_t i = 0; i < keep; ++i) {
      auto& c = candidates[i];
      Hypothesis h;
      h.tokens = live[c.parent].tokens;
      h.log_prob = c.log_prob;
      if (c.token == SpecialIds::eos) {
        h.finished = true;
        finished.push_back(std::move(h));
        continue;
      }
      h.tokens.push_back(c.token);
      if (step == max_len)
        finished.push_back(std::move(h));
      else
        next.push_back(std::move(h));
    }
    live = std::move(next);
  }

  const Hypothesis* best = &finished.front();
  double best_score = normalized_score(*best, length_norm_alpha);
  for (const auto& h : finished) {
    const double s = normalized_score(h, length_norm_alpha);
    if (better(s, h.tokens, best_score, best->tokens)) {
      best = &h;
      best_score = s;
    }
  }
  return *best;
}

StepScorer transformer_scorer(const IdSequence& src, const Parameters& params,
                              const ModelConfig& config) {
  auto source = std::make_shared<EncodedSource>(encode_source(src, params, config));
  return [source, &params, &config](const std::vector<TokenId>& prefix) {
    std::vector<TokenId> input;
    input.reserve(prefix.size() + 1);
    input.push_back(SpecialIds::bos);
    input.insert(input.end(), prefix.begin(), prefix.end());
    return next_token_log_probs(*source, input, params, config);
  };
}

IdSequence greedy_decode(const IdSequence& src, const Parameters& params,
                         const ModelConfig& config, std::size_t max_len) {
  const auto h = greedy_search(transformer_scorer(src, params, config),
                               effective_max_len(max_len, config));
  return {h.tokens};
}

IdSequence beam_decode(const IdSequence& src, const Parameters& params, const ModelConfig& config,
                       std::size_t beam_size, std::size_t max_len, double length_norm_alpha) {
  const auto h = beam_search(transformer_scorer(src, params, config), beam_size,
                             effective_max_len(max_len, config), length_norm_alpha);
  return {h.tokens};
}

}  // namespace pivotmt
