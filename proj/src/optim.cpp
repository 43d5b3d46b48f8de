#include "imdn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace imdn {

void TrainConfig::validate(int scale) const {
  if (!(learning_rate > 0.0) || !(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0) ||
      !(epsilon > 0.0))
    fail(ErrorCode::invalid_config, "train config: optimizer constants out of range");
  if (halve_every <= 0 || batch_size <= 0 || hr_patch <= 0)
    fail(ErrorCode::invalid_config, "train config: halve_every, batch and patch must be positive");
  if (scale <= 0 || hr_patch % scale != 0)
    fail(ErrorCode::invalid_config, "train config: patch size " + std::to_string(hr_patch) +
                                        " is not divisible by scale " + std::to_string(scale));
}

double lr_schedule(std::int64_t iteration, const TrainConfig& config) {
  if (iteration < 0) iteration = 0;
  const std::int64_t halvings = iteration / config.halve_every;
  return std::ldexp(config.learning_rate, -static_cast<int>(std::min<std::int64_t>(halvings, 2000)));
}

void adam_step(std::span<const ag::Var> params, AdamState& state, const TrainConfig& config,
               std::int64_t iteration) {
  if (iteration < 1) fail(ErrorCode::invalid_argument, "adam_step: iteration counts from 1");
  if (state.first_moment.size() != params.size()) {
    state.first_moment.clear();
    state.second_moment.clear();
    for (const ag::Var& p : params) {
      state.first_moment.emplace_back(p.shape());
      state.second_moment.emplace_back(p.shape());
    }
  }
  const double lr = lr_schedule(iteration - 1, config);
  const double t = static_cast<double>(iteration);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    ag::Var p = params[i];
    if (!p.has_grad()) continue;
    const Tensor& g = p.node()->grad;
    Tensor& m = state.first_moment[i];
    Tensor& v = state.second_moment[i];
    if (m.shape() != g.shape())
      fail(ErrorCode::shape_mismatch, "adam_step: optimizer state does not match parameter");
    Tensor& w = p.mutable_value();
    for (std::size_t j = 0; j < w.numel(); ++j) {
      m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * g[j];
      v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      w[j] -= lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

}  // namespace imdn
