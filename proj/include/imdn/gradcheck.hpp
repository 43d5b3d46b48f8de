#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "imdn/autograd.hpp"

namespace imdn {

struct GradCheckOptions {
  std::uint64_t seed = 0;
  int probes = 5;       // per input tensor
  double step = 1e-5;   // central-difference half width
  // Denominator floor of the relative error. Central differences at this step
  // carry ~1e-10 of rounding noise on an O(1) loss, so relative error is only
  // meaningful for gradients well above that.
  double floor = 1e-5;
  int max_redraws = 64;  // per probe, when a perturbation crosses a kink
};

struct GradCheckCase {
  std::string name;
  double max_rel_error = 0.0;
  int probes = 0;
  int rejected = 0;  // probes redrawn because they straddled a kink
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckCase> cases;

  double max_rel_error() const;
  bool passed(double tolerance) const { return max_rel_error() < tolerance; }
};

using ScalarFn = std::function<ag::Var()>;

// Compares backward() of `fn` with central differences on random elements of
// every tensor in `inputs`. `fn` must read the inputs by reference.
GradCheckCase check_gradients(const std::string& name, const ScalarFn& fn,
                              std::vector<ag::Var> inputs, std::mt19937_64& rng,
                              const GradCheckOptions& options);

// Every differentiable primitive, PRM, CCA, IMDB and a 1-block 8-channel x2 network.
GradCheckReport run_gradcheck_suite(const GradCheckOptions& options);

}  // namespace imdn
