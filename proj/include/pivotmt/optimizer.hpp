#pragma once

#include <cstdint>

#include "pivotmt/model.hpp"

namespace pivotmt {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
};

/// First and second moment estimates plus the step counter used for bias
/// correction.
struct AdamState {
  Parameters first_moment;
  Parameters second_moment;
  std::int64_t step = 0;

  static AdamState for_parameters(const Parameters& params);
};

/// Applies one bias-corrected adaptive-moment update to `params` from `grads`.
void adam_update(Parameters& params, const Parameters& grads, AdamState& state,
                 const AdamHyper& hyper);

/// Computes gradients on `batch` and applies one update. Returns the batch
/// loss before the update. A non-finite loss or gradient throws
/// TrainingError and leaves `params` and `state` untouched.
double train_step(const Batch& batch, Parameters& params, AdamState& state,
                  const AdamHyper& hyper, const ModelConfig& config, Rng* dropout_rng = nullptr);

}  // namespace pivotmt
