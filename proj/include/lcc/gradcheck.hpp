#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "lcc/graph.hpp"

namespace lcc {

/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)
double relative_error(double analytic, double numeric);

/// Builds a scalar loss from parameter nodes (one per input tensor, same order).
using LossBuilder = std::function<NodeId(Graph&, const std::vector<NodeId>&)>;

/// Compares reverse-mode gradients of `build` against central differences
/// (f(x+h) - f(x-h)) / 2h over every element of every parameter. Each
/// evaluation uses a fresh graph seeded with `seed`, so stochastic ops replay
/// identically. Returns the maximum relative error.
double grad_check_composite(const LossBuilder& build, const std::vector<Tensor>& params, double step,
                            std::uint64_t seed = 0);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t param = 0;  // location of the worst element
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

GradCheckResult grad_check_detailed(const LossBuilder& build, const std::vector<Tensor>& params, double step,
                                    std::uint64_t seed = 0);

/// Gradient check of a single catalog op. Non-scalar outputs are reduced with
/// fixed pseudo-random weights so every output element contributes.
double grad_check(OpKind kind, const std::vector<Tensor>& inputs, const OpAttrs& attrs, double step);

}  // namespace lcc
