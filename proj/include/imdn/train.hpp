#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "imdn/dataset.hpp"
#include "imdn/model.hpp"
#include "imdn/optim.hpp"

namespace imdn {

struct LossRecord {
  std::int64_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

struct TrainOptions {
  std::int64_t steps = 0;
  std::uint64_t seed = 0;
  // Called after every step; return false to stop early.
  std::function<bool(const LossRecord&)> on_step;
};

// sample -> forward -> l1 -> backward -> adam, `steps` times. The recorded
// loss of a step is measured before that step's update.
std::vector<LossRecord> train_loop(Model& model, std::span<const TrainingImage> dataset,
                                   const TrainConfig& config, const TrainOptions& options);

void write_loss_csv(std::ostream& os, std::span<const LossRecord> history);

}  // namespace imdn
