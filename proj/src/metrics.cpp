#include "pivotmt/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "pivotmt/error.hpp"
#include "pivotmt/keyvalue.hpp"
#include "pivotmt/utf8.hpp"

namespace pivotmt {

NgramCounts ngram_counts(const Sentence& sentence, std::size_t n) {
  NgramCounts counts;
  if (n == 0 || sentence.tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= sentence.tokens.size(); ++i)
    ++counts[Ngram(sentence.tokens.begin() + static_cast<std::ptrdiff_t>(i),
                   sentence.tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return counts;
}

BleuReport bleu(const std::vector<Sentence>& hypotheses, const std::vector<Sentence>& references,
                std::size_t max_n) {
  if (hypotheses.size() != references.size())
    throw InputError(fmt::format("{} hypotheses but {} references", hypotheses.size(),
                                 references.size()));
  if (hypotheses.empty()) throw InputError("cannot score an empty hypothesis set");
  if (max_n < 1) throw InputError("max_n must be at least 1");

  BleuReport r;
  r.matches.assign(max_n, 0);
  r.totals.assign(max_n, 0);
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    const auto& hyp = hypotheses[s];
    const auto& ref = references[s];
    r.hyp_len += hyp.word_count();
    r.ref_len += ref.word_count();
    for (std::size_t n = 1; n <= max_n; ++n) {
      const auto hyp_counts = ngram_counts(hyp, n);
      const auto ref_counts = ngram_counts(ref, n);
      for (const auto& [gram, count] : hyp_counts) {
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) r.matches[n - 1] += std::min(count, it->second);
        r.totals[n - 1] += count;
      }
    }
  }

  r.precisions.resize(max_n);
  double log_sum = 0.0;
  bool any_zero = false;
  for (std::size_t n = 0; n < max_n; ++n) {
    r.precisions[n] =
        r.totals[n] ? static_cast<double>(r.matches[n]) / static_cast<double>(r.totals[n]) : 0.0;
    if (r.matches[n] == 0)
      any_zero = true;
    else
      log_sum += std::log(r.precisions[n]);
  }
  if (r.hyp_len == 0)
    r.brevity_penalty = 0.0;
  else if (r.hyp_len < r.ref_len)
    r.brevity_penalty =
        std::exp(1.0 - static_cast<double>(r.ref_len) / static_cast<double>(r.hyp_len));
  r.bleu = any_zero ? 0.0
                    : 100.0 * r.brevity_penalty * std::exp(log_sum / static_cast<double>(max_n));
  return r;
}

std::string format_bleu_line(const BleuReport& report) {
  std::string names;
  std::string values;
  for (std::size_t n = 0; n < report.precisions.size(); ++n) {
    if (n) {
      names += '/';
      values += '/';
    }
    names += fmt::format("p{}", n + 1);
    values += fmt::format("{:.1f}", 100.0 * report.precisions[n]);
  }
  return fmt::format("BLEU = {:.2f}, {} = {}, BP = {:.3f}, hyp_len = {}, ref_len = {}",
                     report.bleu, names, values, report.brevity_penalty, report.hyp_len,
                     report.ref_len);
}

std::string format_bleu_keyvalues(const BleuReport& report) {
  KeyValues kv;
  kv.set("bleu", format_double(report.bleu));
  for (std::size_t n = 0; n < report.precisions.size(); ++n)
    kv.set(fmt::format("p{}", n + 1), format_double(report.precisions[n]));
  kv.set("bp", format_double(report.brevity_penalty));
  kv.set("hyp_len", std::to_string(report.hyp_len));
  kv.set("ref_len", std::to_string(report.ref_len));
  return kv.to_string();
}

Sentence fold_case(const Sentence& sentence) {
  Sentence out{{}, sentence.lang};
  for (const auto& token : sentence.tokens) {
    std::string lowered;
    for (auto ch : utf8::split_chars(token)) {
      char32_t cp = utf8::code_point(ch);
      if ((cp >= U'A' && cp <= U'Z') || (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7))
        lowered += utf8::encode(cp + 32);
      else
        lowered += ch;
    }
    out.tokens.push_back(std::move(lowered));
  }
  return out;
}

}  // namespace pivotmt
