#include "pivotmt/optimizer.hpp"

#include <cmath>

#include <fmt/format.h>

#include "pivotmt/error.hpp"

namespace pivotmt {

AdamState AdamState::for_parameters(const Parameters& params) {
  return {zeros_like(params), zeros_like(params), 0};
}

void adam_update(Parameters& params, const Parameters& grads, AdamState& state,
                 const AdamHyper& hyper) {
  if (state.first_moment.size() != params.size() || grads.size() != params.size())
    throw ShapeError("optimizer state does not match the parameters");
  ++state.step;
  const double correction1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
  for (auto& [name, p] : params) {
    const auto& g = grads.at(name).values();
    auto& m = state.first_moment.at(name).values();
    auto& v = state.second_moment.at(name).values();
    if (g.size() != p.size() || m.size() != p.size() || v.size() != p.size())
      throw ShapeError("optimizer state shape mismatch for " + name);
    auto& w = p.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g[i];
      v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      w[i] -= hyper.lr * m_hat / (std::sqrt(v_hat) + hyper.eps);
    }
  }
}

double train_step(const Batch& batch, Parameters& params, AdamState& state,
                  const AdamHyper& hyper, const ModelConfig& config, Rng* dropout_rng) {
  Gradients g = backward(batch, params, config, 1.0, true, dropout_rng);
  if (!std::isfinite(g.loss))
    throw TrainingError(fmt::format("non-finite loss {} at step {} ({} target tokens)", g.loss,
                                    state.step + 1, g.tokens));
  for (const auto& [name, t] : g.grads)
    if (!t.all_finite())
      throw TrainingError(fmt::format("non-finite gradient for {} at step {} (loss {})", name,
                                      state.step + 1, g.loss));
  adam_update(params, g.grads, state, hyper);
  return g.loss;
}

}  // namespace pivotmt
