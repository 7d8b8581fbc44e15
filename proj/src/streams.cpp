#include "lcc/streams.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lcc/errors.hpp"

namespace lcc {

namespace {

KeypointArray bones(const KeypointArray& x, const SkeletonGraph& g) {
  if (g.node_count != x.nodes)
    throw ContractViolation("derive_stream: graph has " + std::to_string(g.node_count) + " nodes, channel has " +
                            std::to_string(x.nodes));
  KeypointArray out(x.frames, x.dims, x.nodes);
  for (std::size_t t = 0; t < x.frames; ++t)
    for (std::size_t d = 0; d < x.dims; ++d)
      for (std::size_t n = 0; n < x.nodes; ++n) {
        const auto& p = g.bone_parent[n];
        out.at(t, d, n) = p ? x.at(t, d, n) - x.at(t, d, *p) : 0.0;
      }
  return out;
}

KeypointArray motion(const KeypointArray& x) {
  KeypointArray out(x.frames, x.dims, x.nodes);
  for (std::size_t t = 0; t + 1 < x.frames; ++t)
    for (std::size_t d = 0; d < x.dims; ++d)
      for (std::size_t n = 0; n < x.nodes; ++n) out.at(t, d, n) = x.at(t + 1, d, n) - x.at(t, d, n);
  return out;
}

}  // namespace

KeypointSample derive_stream(const KeypointSample& sample, StreamKind kind, const SkeletonSet& graphs) {
  KeypointSample out = sample;
  if (kind == StreamKind::joint) return out;
  for (Channel c : kChannels) {
    auto& a = out.channel(c);
    if (kind == StreamKind::bone || kind == StreamKind::bone_motion) a = bones(a, graphs[c]);
    if (kind == StreamKind::joint_motion || kind == StreamKind::bone_motion) a = motion(a);
  }
  return out;
}

KeypointSample apply_similarity(const KeypointSample& sample, double angle, double scale, double sx, double sy) {
  KeypointSample out = sample;
  const double c = std::cos(angle), s = std::sin(angle);
  for (auto& a : out.channels) {
    const std::size_t sd = spatial_dims(a.dims);
    for (std::size_t t = 0; t < a.frames; ++t)
      for (std::size_t n = 0; n < a.nodes; ++n) {
        if (sd == 2) {
          const double x = a.at(t, 0, n), y = a.at(t, 1, n);
          a.at(t, 0, n) = scale * (c * x - s * y) + sx;
          a.at(t, 1, n) = scale * (s * x + c * y) + sy;
        } else if (sd == 1) {
          a.at(t, 0, n) = scale * a.at(t, 0, n) + sx;
        }
      }
  }
  return out;
}

KeypointSample augment(const KeypointSample& sample, const AugmentParams& p, std::mt19937_64& rng) {
  auto draw = [&](double lo, double hi) {
    if (lo > hi) throw ContractViolation("augment: range min exceeds max");
    if (lo == hi) return lo;
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  const double angle = draw(p.rotation_min_deg, p.rotation_max_deg) * std::numbers::pi / 180.0;
  const double scale = draw(p.scale_min, p.scale_max);
  const double sx = draw(p.shift_min, p.shift_max);
  const double sy = draw(p.shift_min, p.shift_max);
  if (angle != 0.0 && sample.dims() < 2) throw ContractViolation("augment: rotation needs at least 2 coordinate dims");
  return apply_similarity(sample, angle, scale, sx, sy);
}

KeypointSample resample_length(const KeypointSample& sample, std::size_t target) {
  const std::size_t t_in = sample.frames();
  if (t_in == 0 || target == 0) throw ContractViolation("resample_length: frame counts must be positive");
  if (target == t_in) return sample;
  std::vector<std::size_t> idx(target);
  for (std::size_t i = 0; i < target; ++i) {
    const double pos = std::nearbyint(static_cast<double>(i) * static_cast<double>(t_in) / static_cast<double>(target));
    idx[i] = std::min(static_cast<std::size_t>(std::max(pos, 0.0)), t_in - 1);
  }
  KeypointSample out = sample;
  for (auto& a : out.channels) {
    KeypointArray r(target, a.dims, a.nodes);
    const std::size_t frame = a.dims * a.nodes;
    for (std::size_t i = 0; i < target; ++i)
      std::copy_n(a.values.begin() + static_cast<std::ptrdiff_t>(idx[i] * frame), frame,
                  r.values.begin() + static_cast<std::ptrdiff_t>(i * frame));
    a = std::move(r);
  }
  return out;
}

KeypointSample center_on_root(const KeypointSample& sample, std::size_t root) {
  KeypointSample out = sample;
  const auto& body = sample.channel(Channel::body);
  if (root >= body.nodes) throw ContractViolation("center_on_root: root index out of range");
  for (auto& a : out.channels) {
    const std::size_t sd = spatial_dims(a.dims);
    for (std::size_t t = 0; t < a.frames; ++t)
      for (std::size_t d = 0; d < sd; ++d) {
        const double r = body.at(t, d, root);
        for (std::size_t n = 0; n < a.nodes; ++n) a.at(t, d, n) -= r;
      }
  }
  return out;
}

}  // namespace lcc
