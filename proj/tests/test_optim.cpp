#include "doctest.h"
#include "imdn/optim.hpp"
#include "support.hpp"

using namespace imdn;

TEST_SUITE("optim") {

TEST_CASE("learning-rate schedule") {
  const TrainConfig c;
  CHECK(lr_schedule(0, c) == 2e-4);
  CHECK(lr_schedule(199999, c) == 2e-4);
  CHECK(lr_schedule(200000, c) == 1e-4);
  CHECK(lr_schedule(600000, c) == 2.5e-5);
  double prev = lr_schedule(0, c);
  for (std::int64_t it = 0; it <= 2000000; it += 50000) {
    const double lr = lr_schedule(it, c);
    CHECK(lr <= prev);
    if (it > 0 && it % c.halve_every == 0) CHECK(lr == lr_schedule(it - 1, c) / 2.0);
    prev = lr;
  }
}

namespace {

ag::Var scalar_param(double v) { return ag::Var::parameter(Tensor({1, 1, 1, 1}, v)); }

void set_grad(ag::Var& p, double g) {
  p.zero_grad();
  ag::backward(ag::dot(p, Tensor({1, 1, 1, 1}, g)));
}

}  // namespace

TEST_CASE("zero gradients leave parameters unchanged") {
  TrainConfig c;
  ag::Var p = scalar_param(0.75);
  AdamState s;
  const std::vector<ag::Var> params{p};
  for (int it = 1; it <= 10; ++it) {
    set_grad(p, 0.0);
    adam_step(params, s, c, it);
  }
  CHECK(p.value()[0] == 0.75);
}

TEST_CASE("first step moves by about the learning rate") {
  TrainConfig c;
  ag::Var p = scalar_param(1.0);
  AdamState s;
  set_grad(p, 1.0);
  adam_step(std::vector<ag::Var>{p}, s, c, 1);
  const double moved = 1.0 - p.value()[0];
  CHECK(moved >= 0.9 * c.learning_rate);
  CHECK(moved <= 1.0 * c.learning_rate);
}

TEST_CASE("opposite gradients give symmetric updates") {
  TrainConfig c;
  ag::Var a = scalar_param(0.0);
  ag::Var b = scalar_param(0.0);
  AdamState s;
  const std::vector<ag::Var> params{a, b};
  for (int it = 1; it <= 5; ++it) {
    set_grad(a, 1.0);
    set_grad(b, -1.0);
    adam_step(params, s, c, it);
  }
  CHECK(a.value()[0] < 0.0);
  CHECK(a.value()[0] == -b.value()[0]);
}

TEST_CASE("config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate(4));
  c.hr_patch = 191;
  CHECK_ERROR(c.validate(2), ErrorCode::invalid_config);
  c = {};
  c.batch_size = 0;
  CHECK_ERROR(c.validate(2), ErrorCode::invalid_config);
}

}
