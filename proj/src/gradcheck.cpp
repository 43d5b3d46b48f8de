#include "imdn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "imdn/model.hpp"

namespace imdn {

namespace {

using ag::Var;

double eval_scalar(const ScalarFn& fn, std::vector<bool>& signs) {
  ag::NoGradGuard no_grad;
  ag::debug::SignLog log;
  const double v = fn().value()[0];
  signs = log.signs();
  return v;
}

// Uniform in [-1, 1] but at least `margin` away from zero.
Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double margin = 0.0) {
  std::uniform_real_distribution<double> mag(margin, 1.0);
  std::bernoulli_distribution sign(0.5);
  Tensor t(shape);
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = sign(rng) ? mag(rng) : -mag(rng);
  return t;
}

Var param(const Shape& shape, std::mt19937_64& rng, double margin = 0.0) {
  return Var::parameter(random_tensor(shape, rng, margin));
}

// Random linear functional of x so every output element gets a distinct weight.
ScalarFn probe_loss(std::function<Var()> f, const Shape& out_shape, std::mt19937_64& rng) {
  Tensor w = random_tensor(out_shape, rng);
  return [f = std::move(f), w = std::move(w)] { return ag::dot(f(), w); };
}

// L1 target kept between 1e-3 and 1 away from the current prediction.
Tensor kink_free_target(const Tensor& pred, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> gap(1e-3, 1.0);
  std::bernoulli_distribution sign(0.5);
  Tensor t(pred.shape());
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = pred[i] + (sign(rng) ? gap(rng) : -gap(rng));
  return t;
}

void randomize_biases(Model& model, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 0.1);
  for (LayerSlot& l : model.layers())
    for (double& v : l.bias.mutable_value().data()) v = n(rng);
}

}  // namespace

double GradCheckReport::max_rel_error() const {
  double m = 0.0;
  for (const GradCheckCase& c : cases) m = std::max(m, c.max_rel_error);
  return m;
}

GradCheckCase check_gradients(const std::string& name, const ScalarFn& fn,
                              std::vector<Var> inputs, std::mt19937_64& rng,
                              const GradCheckOptions& options) {
  GradCheckCase result;
  result.name = name;
  for (Var& v : inputs) v.zero_grad();
  std::vector<bool> baseline;
  {
    ag::debug::SignLog log;
    ag::backward(fn());
    baseline = log.signs();
  }
  std::vector<Tensor> analytic;
  analytic.reserve(inputs.size());
  for (const Var& v : inputs) analytic.push_back(v.grad());

  std::vector<bool> plus_signs;
  std::vector<bool> minus_signs;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    Tensor& value = inputs[t].mutable_value();
    std::uniform_int_distribution<std::size_t> pick(0, value.numel() - 1);
    for (int p = 0; p < options.probes; ++p) {
      for (int attempt = 0;; ++attempt) {
        const std::size_t i = pick(rng);
        const double saved = value[i];
        value[i] = saved + options.step;
        const double up = eval_scalar(fn, plus_signs);
        value[i] = saved - options.step;
        const double down = eval_scalar(fn, minus_signs);
        value[i] = saved;
        if ((plus_signs != baseline || minus_signs != baseline) && attempt < options.max_redraws) {
          ++result.rejected;
          continue;
        }
        const double numeric = (up - down) / (2.0 * options.step);
        const double a = analytic[t][i];
        const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
        const double rel = std::abs(a - numeric) / denom;
        if (rel >= result.max_rel_error) {
          result.max_rel_error = rel;
          result.worst_analytic = a;
          result.worst_numeric = numeric;
        }
        ++result.probes;
        break;
      }
    }
  }
  for (Var& v : inputs) v.zero_grad();
  return result;
}

GradCheckReport run_gradcheck_suite(const GradCheckOptions& options) {
  std::mt19937_64 rng(options.seed);
  GradCheckReport report;
  auto run = [&](const std::string& name, const ScalarFn& fn, std::vector<Var> inputs) {
    report.cases.push_back(check_gradients(name, fn, std::move(inputs), rng, options));
  };
  constexpr double kMargin = 1e-3;

  for (const auto& [label, k, stride, pad] :
       std::vector<std::tuple<std::string, int, int, int>>{
           {"conv2d 3x3", 3, 1, 1}, {"conv2d 3x3 s2", 3, 2, 1}, {"conv2d 1x1", 1, 1, 0}}) {
    Var x = param({2, 3, 7, 6}, rng);
    Var w = param({4, 3, k, k}, rng);
    Var b = param({1, 4, 1, 1}, rng);
    const ConvGeometry g{stride, pad};
    const Shape out{2, 4, conv_output_extent(7, k, g), conv_output_extent(6, k, g)};
    run(label, probe_loss([=] { return ag::conv2d(x, w, b, g); }, out, rng), {x, w, b});
  }
  {
    Var x = param({1, 3, 4, 5}, rng, kMargin);
    run("leaky_relu", probe_loss([=] { return ag::leaky_relu(x, 0.05); }, x.shape(), rng), {x});
  }
  {
    Var x = param({1, 3, 4, 5}, rng, kMargin);
    run("relu", probe_loss([=] { return ag::relu(x); }, x.shape(), rng), {x});
  }
  {
    Var x = param({1, 3, 4, 5}, rng);
    Tensor scaled = x.value();
    for (double& v : scaled.data()) v *= 4.0;
    x.mutable_value() = scaled;
    run("sigmoid", probe_loss([=] { return ag::sigmoid(x); }, x.shape(), rng), {x});
  }
  {
    Var x = param({2, 6, 3, 3}, rng);
    run("slice_channels", probe_loss([=] { return ag::slice_channels(x, 1, 4); }, {2, 3, 3, 3}, rng),
        {x});
  }
  {
    Var x = param({2, 6, 3, 3}, rng);
    Tensor wa = random_tensor({2, 2, 3, 3}, rng);
    Tensor wb = random_tensor({2, 4, 3, 3}, rng);
    run("channel_split",
        [=] {
          auto [a, b] = ag::channel_split(x, 2);
          return ag::add(ag::dot(a, wa), ag::dot(b, wb));
        },
        {x});
  }
  {
    Var a = param({2, 2, 3, 4}, rng);
    Var b = param({2, 3, 3, 4}, rng);
    Var c = param({2, 1, 3, 4}, rng);
    run("concat_channels",
        probe_loss([=] { return ag::concat_channels({a, b, c}); }, {2, 6, 3, 4}, rng), {a, b, c});
  }
  {
    Var x = param({1, 12, 3, 2}, rng);
    run("pixel_shuffle", probe_loss([=] { return ag::pixel_shuffle(x, 2); }, {1, 3, 6, 4}, rng),
        {x});
  }
  {
    Var x = param({2, 3, 4, 5}, rng);
    run("global_contrast_pool",
        probe_loss([=] { return ag::global_contrast_pool(x); }, {2, 3, 1, 1}, rng), {x});
  }
  {
    Var x = param({2, 3, 4, 5}, rng);
    Var gates = param({2, 3, 1, 1}, rng);
    run("channel_scale",
        probe_loss([=] { return ag::channel_scale(x, gates); }, x.shape(), rng), {x, gates});
  }
  {
    Var x = param({1, 3, 4, 5}, rng);
    Var y = param({1, 3, 4, 5}, rng);
    run("add", probe_loss([=] { return ag::add(x, y); }, x.shape(), rng), {x, y});
  }
  {
    Var x = param({1, 3, 4, 5}, rng);
    run("sum", [=] { return ag::sum(x); }, {x});
  }
  {
    Var x = param({1, 3, 4, 5}, rng);
    Tensor w = random_tensor(x.shape(), rng);
    run("dot", [=] { return ag::dot(x, w); }, {x});
  }
  {
    Var x = param({2, 3, 4, 5}, rng);
    Tensor target = kink_free_target(x.value(), rng);
    run("l1_loss", [=] { return ag::l1_loss(x, target); }, {x});
  }

  // Composite modules, 8 channels wide so the distilled split is 2 / 6.
  Model model = build_imdn(ImdnConfig::narrow(8, 1, 2));
  init_weights(model, options.seed + 1);
  randomize_biases(model, rng);
  const ImdnConfig& cfg = model.config();
  const ImdbLayers block = model.block(0);
  auto block_params = [&](bool with_prm, bool with_cca, bool with_c5) {
    std::vector<Var> ps;
    for (const LayerSlot* l : {block.c1, block.c2, block.c3, block.c4})
      if (with_prm) ps.insert(ps.end(), {l->weight, l->bias});
    if (with_cca)
      for (const LayerSlot* l : {block.cca_down, block.cca_up}) ps.insert(ps.end(), {l->weight, l->bias});
    if (with_c5) ps.insert(ps.end(), {block.c5->weight, block.c5->bias});
    return ps;
  };
  {
    Var f = param({1, cfg.channels, 5, 6}, rng);
    std::vector<Var> ps = block_params(true, false, false);
    ps.insert(ps.begin(), f);
    run("prm", probe_loss([=] { return forward_prm(f, block, cfg); }, f.shape(), rng), ps);
  }
  {
    Var f = param({1, cfg.channels, 5, 6}, rng);
    std::vector<Var> ps = block_params(false, true, false);
    ps.insert(ps.begin(), f);
    run("cca", probe_loss([=] { return forward_cca(f, block); }, f.shape(), rng), ps);
  }
  {
    Var f = param({1, cfg.channels, 5, 6}, rng);
    std::vector<Var> ps = block_params(true, true, true);
    ps.insert(ps.begin(), f);
    run("imdb", probe_loss([=] { return forward_imdb(f, block, cfg); }, f.shape(), rng), ps);
  }
  {
    Var x = param({1, 3, 6, 6}, rng);
    const Tensor pred0 = model.forward(x.value());
    const Tensor target = kink_free_target(pred0, rng);
    std::vector<Var> ps = model.parameters();
    ps.insert(ps.begin(), x);
    const Model* m = &model;
    run("imdn x2 (1 block, 8 ch)", [=] { return ag::l1_loss(m->forward(x), target); }, ps);
  }
  return report;
}

}  // namespace imdn
