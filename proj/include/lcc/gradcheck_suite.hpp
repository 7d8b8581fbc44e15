#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lcc/graph.hpp"

namespace lcc {

struct OpCase {
  OpKind kind = OpKind::add;
  std::vector<Tensor> inputs;
  OpAttrs attrs;
};

/// Random conforming inputs for `kind`. Values are kept away from kinks
/// (relu at 0, ties under max, clamp bounds) by more than `margin`, so central
/// differences with step < margin never straddle one.
OpCase random_op_case(OpKind kind, std::mt19937_64& rng, double margin = 0.01);

struct CheckRecord {
  std::string name;
  std::size_t instances = 0;
  double max_relative_error = 0.0;
  double tolerance = 0.0;
  std::string worst;  // where the maximum occurred
  bool passed() const { return max_relative_error <= tolerance; }
};

/// Every catalog op over `instances` random cases each.
std::vector<CheckRecord> run_op_gradchecks(std::size_t instances, double step, double tolerance,
                                           std::uint64_t seed);

/// Composite head: similarity -> temperature softmax -> existence vector -> BCE,
/// plus the concept path, with and without drop masking.
std::vector<CheckRecord> run_head_gradchecks(std::size_t instances, double step, double tolerance,
                                             std::uint64_t seed);

/// Backbone + fusion + global head on a tiny multi-channel configuration.
std::vector<CheckRecord> run_end2end_gradchecks(std::size_t instances, double step, double tolerance,
                                                std::uint64_t seed);

}  // namespace lcc
