#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "lcc/checkpoint.hpp"
#include "lcc/graph.hpp"
#include "lcc/skeleton.hpp"

namespace lcc {

/// Stack of (graph convolution -> ReLU -> strided temporal convolution) blocks
/// followed by a mean over nodes. A ReLU also follows the temporal
/// convolution of every block except the last.
struct BackboneConfig {
  std::vector<std::size_t> channels = {16, 32, 64};
  std::vector<std::size_t> strides = {1, 2, 2};
  std::size_t window = 5;
  std::size_t dilation = 1;
  std::size_t in_dims = 3;

  void validate() const;
  std::size_t out_channels() const { return channels.back(); }
  /// ceil division through every block.
  std::size_t out_frames(std::size_t frames) const;
  /// Product of strides.
  std::size_t total_stride() const;
};

/// Parameters of one backbone live under `<prefix>.block<k>.{gcn.W, gcn.b, tcn.W, tcn.b}`.
void init_backbone_params(ParameterSet& params, const std::string& prefix, const BackboneConfig& cfg,
                          std::mt19937_64& rng);

/// x is [N, T, D] with N matching the graph. Returns z_hat [T', C].
NodeId backbone_forward(Graph& g, NodeId x, const BackboneConfig& cfg, const SkeletonGraph& graph,
                        const std::map<std::string, NodeId>& params, const std::string& prefix);

/// Tensor-level form; x is [T, D, N] as stored in keypoint files.
Tensor backbone_forward(const Tensor& x, const BackboneConfig& cfg, const SkeletonGraph& graph,
                        const ParameterSet& params, const std::string& prefix);

/// [T, D, N] keypoint layout to the [N, T, D] backbone layout.
Tensor to_backbone_layout(const Tensor& x_tdn);

struct FusedFeatures {
  NodeId hands;
  NodeId global;
};

/// hands = (left + right) / 2; global = concat(hands, mouth, pose) W + b with
/// W [3C, C] and b [C] stored as fusion.W and fusion.b.
FusedFeatures fuse_channels(Graph& g, NodeId left, NodeId right, NodeId mouth, NodeId pose,
                            const std::map<std::string, NodeId>& params);

void init_fusion_params(ParameterSet& params, std::size_t channels, std::mt19937_64& rng);

/// Mean over T' then z W + b with W [C, V] and b [V] under `<prefix>.W` / `<prefix>.b`.
NodeId baseline_forward(Graph& g, NodeId z_hat, const std::map<std::string, NodeId>& params,
                        const std::string& prefix);

void init_baseline_params(ParameterSet& params, const std::string& prefix, std::size_t channels,
                          std::size_t vocab, std::mt19937_64& rng);

/// Adds every tensor of `params` as a parameter leaf and returns name -> node.
std::map<std::string, NodeId> bind_parameters(Graph& g, const ParameterSet& params);

}  // namespace lcc
