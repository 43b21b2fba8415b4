#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "pivotmt/error.hpp"
#include "pivotmt/io.hpp"
#include "pivotmt/toy_tasks.hpp"

/// Writes <prefix>.lo, <prefix>.up and <prefix>.rv: the same random letter
/// sequences in lowercase, uppercase, and reversed uppercase.
int main(int argc, char** argv) {
  CLI::App app{"Generate the synthetic lowercase/uppercase/reversed pivot task", "pivotmt-toydata"};
  std::size_t pairs = 2000;
  std::uint64_t seed = 1;
  std::string prefix;
  pivotmt::ToyTaskOptions options;
  app.add_option("--pairs", pairs, "Number of sentences")->capture_default_str();
  app.add_option("--seed", seed)->capture_default_str();
  app.add_option("--prefix", prefix, "Output path prefix")->required();
  app.add_option("--alphabet", options.alphabet_size, "Letters used")->capture_default_str();
  app.add_option("--min-len", options.min_len)->capture_default_str();
  app.add_option("--max-len", options.max_len)->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  try {
    const auto task = pivotmt::make_toy_pivot_task(pairs, seed, options);
    pivotmt::io::write_lines_atomic(prefix + "." + pivotmt::kToySourceLang, task.source);
    pivotmt::io::write_lines_atomic(prefix + "." + pivotmt::kToyPivotLang, task.pivot);
    pivotmt::io::write_lines_atomic(prefix + "." + pivotmt::kToyTargetLang, task.target);
  } catch (const pivotmt::Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << '\n';
    return e.kind() == "config" ? 2 : 3;
  }
  return 0;
}
