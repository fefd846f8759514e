#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ffgt/model.hpp"
#include "ffgt/tape.hpp"

namespace ffgt {

constexpr double kGradCheckEps = 1e-5;
constexpr double kGradCheckTol = 1e-4;

// Builds the loss for one configuration of the differentiable inputs; leaves
// arrive in the same order as the input tensors.
using TapeLossFn = std::function<Var(Tape&, const std::vector<Var>&)>;

// Max relative error between reverse-mode and central-difference gradients
// over every entry of every input. rel = |a - f| / max(|a|, |f|, 1e-4).
double gradcheck_max_rel_error(const TapeLossFn& build, std::vector<Tensor> inputs,
                               double eps = kGradCheckEps);

// Same check for a whole model: perturbs every parameter entry.
double model_gradcheck_max_rel_error(Model model, const GraphContext& ctx,
                                     const std::vector<double>& class_weights,
                                     double eps = kGradCheckEps);

struct GradCheckResult {
  std::string name;
  double max_rel_error = 0.0;
  bool pass = false;
};

// One entry per primitive plus a 2-layer FFGT model. `corrupt` injects an
// error into the first check's reverse-mode gradient (negative control for
// the CLI exit-code contract).
std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed,
                                                 bool corrupt = false);

// Small seeded tensor helpers shared by the suite and the tests.
Tensor random_tensor(Rng& rng, std::vector<std::size_t> shape, double lo = -1.0,
                     double hi = 1.0);

}  // namespace ffgt
