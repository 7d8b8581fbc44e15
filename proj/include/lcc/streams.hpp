#pragma once

#include <cstddef>
#include <random>

#include "lcc/keypoints.hpp"
#include "lcc/skeleton.hpp"

namespace lcc {

KeypointSample derive_stream(const KeypointSample& sample, StreamKind kind, const SkeletonSet& graphs);

struct AugmentParams {
  double rotation_min_deg = 0.0, rotation_max_deg = 0.0;
  double scale_min = 1.0, scale_max = 1.0;
  double shift_min = 0.0, shift_max = 0.0;

  bool is_identity() const {
    return rotation_min_deg == 0.0 && rotation_max_deg == 0.0 && scale_min == 1.0 && scale_max == 1.0 &&
           shift_min == 0.0 && shift_max == 0.0;
  }
};

/// Number of leading coordinate dims treated as spatial: min(D, 2).
/// A third dim, when present, is a detector confidence and is left alone.
inline std::size_t spatial_dims(std::size_t dims) { return dims < 2 ? dims : 2; }

/// x <- scale * R(angle) * x + shift on the spatial dims, one draw per call.
KeypointSample augment(const KeypointSample& sample, const AugmentParams& params, std::mt19937_64& rng);

/// Applies a fixed transform; `augment` draws its arguments and calls this.
KeypointSample apply_similarity(const KeypointSample& sample, double angle_rad, double scale, double shift_x,
                                double shift_y);

/// Frame i of the result is frame nearbyint(i*T/T_target), clamped to [0, T-1].
KeypointSample resample_length(const KeypointSample& sample, std::size_t target_frames);

/// Subtracts the body root keypoint of each frame from every channel's spatial dims.
KeypointSample center_on_root(const KeypointSample& sample, std::size_t body_root);

}  // namespace lcc
