#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "pivotmt/model.hpp"
#include "support/oracles.hpp"

namespace oracle {

/// 1 layer, d_model 8, 2 heads, small vocabularies.
inline pivotmt::ModelConfig tiny_config() {
  pivotmt::ModelConfig config;
  config.num_layers = 1;
  config.d_model = 8;
  config.num_heads = 2;
  config.d_ff = 16;
  config.max_seq_len = 16;
  config.src_vocab_size = 9;
  config.tgt_vocab_size = 7;
  return config;
}

/// Two examples of different lengths so that padding is exercised on both
/// sides.
inline pivotmt::Batch tiny_batch() {
  pivotmt::Example a{{{1, 4, 5, 6, 8, 2}}, {{1, 4, 6, 5, 2}}};
  pivotmt::Example b{{{1, 7, 4, 2}}, {{1, 5, 6, 4, 6, 4, 2}}};
  return pivotmt::Batch::from_examples({a, b});
}

struct GradCheck {
  double max_relative_error = 0.0;  // worst over all entries
  std::string worst_entry;
  std::size_t entries = 0;
};

/// Compares analytic gradients with central differences entry by entry using
/// |a - n| / max(|a| + |n|, floor). The floor keeps entries whose true
/// gradient is ~0 from dividing finite-difference noise by ~0.
inline GradCheck gradient_check(const pivotmt::Parameters& params,
                                const pivotmt::ModelConfig& config, const pivotmt::Batch& batch,
                                double h = 1e-5, double floor = 1e-6) {
  const auto analytic = pivotmt::backward(batch, params, config).grads;
  const auto numeric = finite_difference(
      [&](const pivotmt::Parameters& p) {
        auto logits = pivotmt::forward(batch, p, config);
        return cross_entropy(logits, batch.tgt_out_ids, batch.tgt_mask);
      },
      params, h);
  GradCheck out;
  for (const auto& [name, a] : analytic) {
    const auto& n = numeric.at(name);
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double err = std::abs(a[i] - n[i]) / std::max(std::abs(a[i]) + std::abs(n[i]), floor);
      ++out.entries;
      if (err > out.max_relative_error) {
        out.max_relative_error = err;
        out.worst_entry = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return out;
}

}  // namespace oracle
