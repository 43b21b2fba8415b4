#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace pivotmt {

/// Synthetic three-language pivot task. Sentences are space-separated
/// letters: the source language writes them in lowercase, the pivot language
/// in uppercase, and the target language in uppercase with the token order
/// reversed. "a b c" -> "A B C" -> "C B A".
struct ToyPivotTask {
  std::vector<std::string> source;
  std::vector<std::string> pivot;
  std::vector<std::string> target;
};

struct ToyTaskOptions {
  std::size_t alphabet_size = 10;
  std::size_t min_len = 3;
  std::size_t max_len = 7;
};

inline constexpr const char* kToySourceLang = "lo";
inline constexpr const char* kToyPivotLang = "up";
inline constexpr const char* kToyTargetLang = "rv";

ToyPivotTask make_toy_pivot_task(std::size_t pairs, std::uint64_t seed,
                                 const ToyTaskOptions& options = {});

}  // namespace pivotmt
