#pragma once

#include <optional>
#include <string_view>
#include <map>
#include <string>
#include <vector>

#include "lcc/checkpoint.hpp"

namespace lcc {

using GradientSet = std::map<std::string, Tensor>;

struct OptimizerState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t step = 0;
  std::map<std::string, Tensor> m, v;
};

/// Embedding tables (names ending in ".E") are not decayed.
bool decays(const std::string& param_name);

/// Adam with bias correction; weight decay is decoupled: p -= lr * wd * p.
/// Parameters without a gradient entry are treated as having zero gradient.
void adam_step(ParameterSet& params, const GradientSet& grads, OptimizerState& state, double lr,
               double weight_decay);

enum class ScheduleKind { warmup_cosine, multistep };
std::string_view schedule_name(ScheduleKind k);
std::optional<ScheduleKind> parse_schedule(std::string_view name);

struct LrSchedule {
  ScheduleKind kind = ScheduleKind::warmup_cosine;
  double base_lr = 0.0012;
  std::size_t epochs = 100;
  std::size_t warmup_epochs = 10;
  std::vector<std::size_t> milestones = {10, 20};
  double factor = 0.1;

  void validate() const;
};

/// warmup_cosine: base*epoch/warmup for epoch < warmup, then
/// base*0.5*(1+cos(pi*(epoch-warmup)/(epochs-warmup))). multistep:
/// base*factor^(number of milestones <= epoch).
double lr_at(const LrSchedule& s, std::size_t epoch);

}  // namespace lcc
