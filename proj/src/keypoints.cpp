#include "lcc/keypoints.hpp"

#include "lcc/errors.hpp"

namespace lcc {

std::string_view channel_name(Channel c) {
  switch (c) {
    case Channel::body: return "body";
    case Channel::left_hand: return "left_hand";
    case Channel::right_hand: return "right_hand";
    case Channel::mouth: return "mouth";
  }
  return "unknown";
}

std::optional<Channel> parse_channel(std::string_view name) {
  for (Channel c : kChannels)
    if (channel_name(c) == name) return c;
  return std::nullopt;
}

std::size_t channel_nodes(Channel c) {
  switch (c) {
    case Channel::body: return 17;
    case Channel::left_hand:
    case Channel::right_hand: return 21;
    case Channel::mouth: return 40;
  }
  return 0;
}

std::string_view stream_name(StreamKind k) {
  switch (k) {
    case StreamKind::joint: return "joint";
    case StreamKind::bone: return "bone";
    case StreamKind::joint_motion: return "joint_motion";
    case StreamKind::bone_motion: return "bone_motion";
  }
  return "unknown";
}

std::optional<StreamKind> parse_stream(std::string_view name) {
  for (StreamKind k : kStreamKinds)
    if (stream_name(k) == name) return k;
  return std::nullopt;
}

void validate_sample(const KeypointSample& s) {
  const std::string who = "sample '" + s.sample_id + "': ";
  const auto& first = s.channels[0];
  for (Channel c : kChannels) {
    const auto& a = s.channel(c);
    const std::string name(channel_name(c));
    if (a.nodes != channel_nodes(c))
      throw DataError(who + name + " expects " + std::to_string(channel_nodes(c)) + " nodes, got " +
                      std::to_string(a.nodes));
    if (a.frames == 0 || a.dims == 0) throw DataError(who + name + " is empty");
    if (a.frames != first.frames)
      throw DataError(who + name + " has " + std::to_string(a.frames) + " frames, body has " +
                      std::to_string(first.frames));
    if (a.dims != first.dims)
      throw DataError(who + name + " has " + std::to_string(a.dims) + " coordinate dims, body has " +
                      std::to_string(first.dims));
    if (a.values.size() != a.frames * a.dims * a.nodes)
      throw DataError(who + name + " value count does not match its shape");
  }
}

}  // namespace lcc
