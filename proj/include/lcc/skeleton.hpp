#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lcc/keypoints.hpp"
#include "lcc/tensor.hpp"

namespace lcc {

using Edge = std::pair<std::size_t, std::size_t>;

/// Undirected keypoint graph for one channel.
struct SkeletonGraph {
  std::size_t node_count = 0;
  std::size_t root = 0;
  std::vector<Edge> base_edges;   // anatomical links, define bone parents
  std::vector<Edge> extra_links;  // additional links used only for aggregation
  std::vector<std::optional<std::size_t>> bone_parent;  // empty for roots
  Tensor normalized_adjacency;                          // D^-1/2 (A + I) D^-1/2

  /// All edges used for aggregation (base followed by extra).
  std::vector<Edge> edges() const;

  /// Validates indices, derives bone parents by breadth-first search over the
  /// base edges from `root` (unreached nodes become roots of their own trees)
  /// and builds the normalized adjacency.
  static SkeletonGraph build(std::size_t node_count, std::vector<Edge> base_edges,
                             std::vector<Edge> extra_links = {}, std::size_t root = 0);
};

Tensor normalized_adjacency(std::size_t node_count, const std::vector<Edge>& edges);

/// One graph per channel, indexed by Channel.
struct SkeletonSet {
  std::array<SkeletonGraph, 4> graphs;
  const SkeletonGraph& operator[](Channel c) const { return graphs[static_cast<std::size_t>(c)]; }
  SkeletonGraph& operator[](Channel c) { return graphs[static_cast<std::size_t>(c)]; }
};

/// Body uses the 17-point COCO order (0 nose .. 16 right ankle) with extra
/// wrist-to-opposite-elbow and wrist-to-nose links; hands use the 21-point
/// wrist/finger order; the mouth is an outer and inner lip ring of 20 points
/// each joined by spokes every fifth point.
SkeletonSet default_skeletons();

/// Graph config text:
///   [body]
///   nodes 17
///   root 0
///   edges 0-1 0-2 ...
///   extra 9-8 10-7
/// Channels absent from the file keep their defaults.
SkeletonSet parse_graph_config(const std::string& text);
SkeletonSet load_graph_config(const std::filesystem::path& path);
std::string format_graph_config(const SkeletonSet& set);

}  // namespace lcc
