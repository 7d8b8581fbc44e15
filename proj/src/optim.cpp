#include "lcc/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lcc/errors.hpp"

namespace lcc {

bool decays(const std::string& name) { return !name.ends_with(".E"); }

void adam_step(ParameterSet& params, const GradientSet& grads, OptimizerState& st, double lr,
               double weight_decay) {
  for (const auto& [name, g] : grads) {
    const auto it = params.find(name);
    if (it == params.end()) throw ContractViolation("adam_step: gradient for unknown parameter " + name);
    if (g.shape() != it->second.shape())
      throw ContractViolation("adam_step: gradient of " + name + " is " + shape_str(g.shape()) +
                              ", parameter is " + shape_str(it->second.shape()));
  }
  ++st.step;
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  for (auto& [name, p] : params) {
    auto& m = st.m.try_emplace(name, p.shape(), 0.0).first->second;
    auto& v = st.v.try_emplace(name, p.shape(), 0.0).first->second;
    const auto git = grads.find(name);
    const double wd = decays(name) ? weight_decay : 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = git == grads.end() ? 0.0 : git->second[i];
      m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * g;
      v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * g * g;
      const double mh = m[i] / c1, vh = v[i] / c2;
      p[i] -= lr * (mh / (std::sqrt(vh) + st.epsilon) + wd * p[i]);
    }
  }
}

std::string_view schedule_name(ScheduleKind k) {
  return k == ScheduleKind::warmup_cosine ? "warmup_cosine" : "multistep";
}

std::optional<ScheduleKind> parse_schedule(std::string_view name) {
  if (name == "warmup_cosine") return ScheduleKind::warmup_cosine;
  if (name == "multistep") return ScheduleKind::multistep;
  return std::nullopt;
}

void LrSchedule::validate() const {
  if (!(base_lr > 0.0) || !std::isfinite(base_lr)) throw ConfigError("schedule: base_lr must be positive");
  if (epochs == 0) throw ConfigError("schedule: epochs must be positive");
  if (kind == ScheduleKind::warmup_cosine && warmup_epochs >= epochs && warmup_epochs > 0)
    throw ConfigError("schedule: warmup_epochs (" + std::to_string(warmup_epochs) + ") must be below epochs (" +
                      std::to_string(epochs) + ")");
  if (kind == ScheduleKind::multistep) {
    if (!(factor > 0.0)) throw ConfigError("schedule: factor must be positive");
    if (!std::is_sorted(milestones.begin(), milestones.end()))
      throw ConfigError("schedule: milestones must be ascending");
  }
}

double lr_at(const LrSchedule& s, std::size_t epoch) {
  if (epoch >= s.epochs)
    throw ContractViolation("lr_at: epoch " + std::to_string(epoch) + " outside [0," + std::to_string(s.epochs) +
                            ")");
  if (s.kind == ScheduleKind::multistep) {
    const auto n = std::upper_bound(s.milestones.begin(), s.milestones.end(), epoch) - s.milestones.begin();
    return s.base_lr * std::pow(s.factor, static_cast<double>(n));
  }
  if (epoch < s.warmup_epochs)
    return s.base_lr * static_cast<double>(epoch) / static_cast<double>(s.warmup_epochs);
  const double progress =
      static_cast<double>(epoch - s.warmup_epochs) / static_cast<double>(s.epochs - s.warmup_epochs);
  return s.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace lcc
