#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "imdn/autograd.hpp"

namespace imdn {

struct Augment {
  bool horizontal_flip = true;
  bool rotate90 = true;
};

struct TrainConfig {
  double learning_rate = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t halve_every = 200000;
  int batch_size = 16;
  int hr_patch = 192;
  Augment augment;

  // Throws invalid_config unless every field is positive and hr_patch % scale == 0.
  void validate(int scale) const;
};

// initial_lr * 2^-floor(iteration / halve_every)
double lr_schedule(std::int64_t iteration, const TrainConfig& config);

struct AdamState {
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
};

// One bias-corrected Adam update of every parameter from its accumulated gradient.
// `iteration` counts from 1; the step size is lr_schedule(iteration - 1).
void adam_step(std::span<const ag::Var> params, AdamState& state, const TrainConfig& config,
               std::int64_t iteration);

}  // namespace imdn
