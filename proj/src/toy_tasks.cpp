#include "pivotmt/toy_tasks.hpp"

#include <algorithm>

#include "pivotmt/error.hpp"
#include "pivotmt/rng.hpp"

namespace pivotmt {

namespace {

std::string join(const std::vector<char>& letters) {
  std::string out;
  for (std::size_t i = 0; i < letters.size(); ++i) {
    if (i) out += ' ';
    out += letters[i];
  }
  return out;
}

}  // namespace

ToyPivotTask make_toy_pivot_task(std::size_t pairs, std::uint64_t seed,
                                 const ToyTaskOptions& options) {
  if (options.alphabet_size < 1 || options.alphabet_size > 26)
    throw ConfigError("toy alphabet size must be between 1 and 26");
  if (options.min_len < 1 || options.max_len < options.min_len)
    throw ConfigError("invalid toy sentence length range");
  Rng rng(seed);
  ToyPivotTask task;
  std::vector<char> letters;
  for (std::size_t i = 0; i < pairs; ++i) {
    const std::size_t len =
        options.min_len + rng.below(options.max_len - options.min_len + 1);
    letters.clear();
    for (std::size_t k = 0; k < len; ++k)
      letters.push_back(static_cast<char>('a' + rng.below(options.alphabet_size)));
    task.source.push_back(join(letters));
    for (auto& c : letters) c = static_cast<char>(c - 'a' + 'A');
    task.pivot.push_back(join(letters));
    std::reverse(letters.begin(), letters.end());
    task.target.push_back(join(letters));
  }
  return task;
}

}  // namespace pivotmt
