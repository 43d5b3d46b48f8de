#include "imdn/train.hpp"

#include <iomanip>
#include <ostream>

namespace imdn {

std::vector<LossRecord> train_loop(Model& model, std::span<const TrainingImage> dataset,
                                   const TrainConfig& config, const TrainOptions& options) {
  if (dataset.empty()) fail(ErrorCode::invalid_argument, "train_loop: empty dataset");
  const int ratio = dataset.front().ratio;
  for (const TrainingImage& img : dataset)
    if (img.ratio != ratio)
      fail(ErrorCode::invalid_argument, "train_loop: dataset mixes scale factors");
  const int expected_ratio =
      model.config().topology == Topology::any_scale ? 1 : model.config().scale;
  if (ratio != expected_ratio)
    fail(ErrorCode::invalid_argument, "train_loop: dataset scale " + std::to_string(ratio) +
                                          " does not match model scale " +
                                          std::to_string(expected_ratio));
  config.validate(ratio);
  model.check_input({1, 3, config.hr_patch / ratio, config.hr_patch / ratio});

  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);
  const std::vector<ag::Var> params = model.parameters();
  AdamState state;
  PatchOptions patch_options;
  patch_options.augment = config.augment;

  std::vector<LossRecord> history;
  history.reserve(static_cast<std::size_t>(std::max<std::int64_t>(options.steps, 0)));
  for (std::int64_t step = 1; step <= options.steps; ++step) {
    std::vector<Tensor> inputs;
    std::vector<Tensor> targets;
    for (int b = 0; b < config.batch_size; ++b) {
      const TrainingImage& img = dataset[pick(rng)];
      PatchPair pair = sample_patch_pair(img, config.hr_patch, rng, patch_options);
      inputs.push_back(std::move(pair.input));
      targets.push_back(std::move(pair.target));
    }
    const Tensor input = stack_batch(inputs);
    const Tensor target = stack_batch(targets);

    model.zero_grad();
    ag::Var loss = ag::l1_loss(model.forward(ag::Var(input)), target);
    ag::backward(loss);
    adam_step(params, state, config, step);

    LossRecord rec{step, lr_schedule(step - 1, config), loss.value()[0]};
    history.push_back(rec);
    if (options.on_step && !options.on_step(rec)) break;
  }
  return history;
}

void write_loss_csv(std::ostream& os, std::span<const LossRecord> history) {
  os << "step,lr,loss\n";
  const auto precision = os.precision(17);
  for (const LossRecord& r : history) os << r.step << ',' << r.lr << ',' << r.loss << '\n';
  os.precision(precision);
}

}  // namespace imdn
