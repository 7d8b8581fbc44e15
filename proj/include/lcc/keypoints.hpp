#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lcc {

enum class Channel { body = 0, left_hand = 1, right_hand = 2, mouth = 3 };

inline constexpr std::array<Channel, 4> kChannels = {Channel::body, Channel::left_hand,
                                                     Channel::right_hand, Channel::mouth};

std::string_view channel_name(Channel c);
std::optional<Channel> parse_channel(std::string_view name);

/// Fixed keypoint layout: body 17, each hand 21, mouth 40.
std::size_t channel_nodes(Channel c);

/// One channel's keypoint sequence, row-major [frames][dims][nodes].
struct KeypointArray {
  std::size_t frames = 0;
  std::size_t dims = 0;
  std::size_t nodes = 0;
  std::vector<double> values;

  KeypointArray() = default;
  KeypointArray(std::size_t t, std::size_t d, std::size_t n, double fill = 0.0)
      : frames(t), dims(d), nodes(n), values(t * d * n, fill) {}

  double& at(std::size_t t, std::size_t d, std::size_t n) { return values[(t * dims + d) * nodes + n]; }
  double at(std::size_t t, std::size_t d, std::size_t n) const { return values[(t * dims + d) * nodes + n]; }

  bool operator==(const KeypointArray&) const = default;
};

enum class StreamKind { joint, bone, joint_motion, bone_motion };

inline constexpr std::array<StreamKind, 4> kStreamKinds = {StreamKind::joint, StreamKind::bone,
                                                           StreamKind::joint_motion, StreamKind::bone_motion};

std::string_view stream_name(StreamKind k);
std::optional<StreamKind> parse_stream(std::string_view name);

/// One labelled sign clip.
struct KeypointSample {
  std::string sample_id;
  std::optional<std::size_t> label;
  std::array<KeypointArray, 4> channels;
  double fps = 25.0;

  KeypointArray& channel(Channel c) { return channels[static_cast<std::size_t>(c)]; }
  const KeypointArray& channel(Channel c) const { return channels[static_cast<std::size_t>(c)]; }
  std::size_t frames() const { return channels[0].frames; }
  std::size_t dims() const { return channels[0].dims; }

  bool operator==(const KeypointSample&) const = default;
};

/// Throws DataError naming the sample when channels disagree on T or D, or a
/// channel's node count differs from the fixed layout.
void validate_sample(const KeypointSample& s);

}  // namespace lcc
