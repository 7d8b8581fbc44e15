#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "lcc/backbone.hpp"
#include "lcc/keypoints.hpp"
#include "lcc/lcc_head.hpp"

namespace lcc {

enum class HeadSlot { hands = 0, mouth = 1, pose = 2, global = 3 };
inline constexpr std::array<HeadSlot, 4> kHeadSlots = {HeadSlot::hands, HeadSlot::mouth, HeadSlot::pose,
                                                       HeadSlot::global};
std::string_view head_name(HeadSlot h);
std::optional<HeadSlot> parse_head(std::string_view name);

enum class LossKind { lcc, ce };
std::string_view loss_name(LossKind k);
std::optional<LossKind> parse_loss(std::string_view name);

struct ModelConfig {
  BackboneConfig backbone;
  std::size_t vocab = 0;
  std::size_t extra_slots = 10;  // V' = V + extra_slots
  std::size_t variations = 3;
  LossKind loss = LossKind::lcc;
  LossWeights weights;
  DropMaskSpec drop;
  /// Heads whose loss enters the overall objective.
  std::array<bool, 4> heads_enabled = {true, true, true, true};

  void validate() const;
  std::size_t extended() const { return vocab + extra_slots; }
};

struct Model {
  ModelConfig config;
  SkeletonSet graphs;
  ParameterSet params;
  /// Word-vector similarity matrix [V, V]; required for the concept loss.
  std::optional<Tensor> S_F;

  static Model create(const ModelConfig& config, const SkeletonSet& graphs, std::uint64_t seed,
                      std::optional<Tensor> S_F = std::nullopt);
  /// Embedding table of one head (LCC models only).
  LccEmbeddingTable table(HeadSlot h) const;
};

std::string embedding_name(HeadSlot h);  // head.<name>.E
std::string baseline_prefix(HeadSlot h); // baseline.<name>

/// Backbone-layout input tensors [N, T, D], indexed by Channel.
using ChannelInputs = std::array<Tensor, 4>;
ChannelInputs channel_inputs(const KeypointSample& s);

struct HeadResult {
  std::optional<HeadNodes> lcc;
  std::optional<NodeId> logits;  // ce
  std::optional<NodeId> l_rec, l_concept, loss;
};

struct ModelOutputs {
  std::array<NodeId, 4> features{};  // z_hat per head slot
  std::array<HeadResult, 4> heads;
  /// Global-head class scores: q_hat (lcc) or softmax of the logits (ce).
  NodeId scores = 0;
  std::optional<NodeId> loss;  // sum over enabled heads when a label is given
};

/// With `training`, drop masks are drawn from g.rng().
ModelOutputs model_forward(Graph& g, const Model& model, const std::map<std::string, NodeId>& params,
                           const ChannelInputs& x, std::optional<std::size_t> label, bool training);

/// Global-head class scores of a prepared sample.
std::vector<double> class_scores(const Model& model, const KeypointSample& s);
std::size_t predict(const Model& model, const KeypointSample& s);

/// Unweighted sum; disabled heads are left out by the caller.
double overall_loss(const std::vector<double>& head_losses);

}  // namespace lcc
