#pragma once

#include <optional>
#include <random>
#include <vector>

#include "lcc/graph.hpp"
#include "lcc/synthetic.hpp"

namespace lcc {

/// E is [C, V', M]: channels x (targets then extended slots) x variations.
struct LccEmbeddingTable {
  std::size_t channels = 0;
  std::size_t vocab = 0;
  std::size_t extended = 0;  // V'
  std::size_t variations = 0;
  Tensor E;

  /// Seeded normal draws with std 1/sqrt(C); zero-norm variation vectors are redrawn.
  static LccEmbeddingTable init(std::size_t channels, std::size_t vocab, std::size_t extended,
                                std::size_t variations, std::mt19937_64& rng);
  /// Wraps an existing [C, V', M] tensor.
  static LccEmbeddingTable from_tensor(Tensor E, std::size_t vocab);
};

struct HeadOutputs {
  Tensor c_hat;  // [T', V']
  Tensor q;      // [T', V']
  Tensor q_hat;  // [V]
};

struct LossWeights {
  double alpha = 5.0;
  double beta = 10.0;
  double tau = 0.1;
  void validate() const;
};

struct DropMaskSpec {
  double p_channel = 0.1;
  double p_temporal = 0.1;
  bool enabled = true;
  void validate() const;
  bool active() const { return enabled && (p_channel > 0.0 || p_temporal > 0.0); }
};

/// Feature channels and timesteps chosen for zeroing.
struct DropMask {
  std::vector<std::size_t> channels;
  std::vector<std::size_t> timesteps;
};

/// Independent Bernoulli draws per channel, then per timestep.
DropMask sample_drop_mask(std::size_t channels, std::size_t timesteps, const DropMaskSpec& spec,
                          std::mt19937_64& rng);

// Graph-level building blocks. z_hat is [T', C], E is [C, V', M].

NodeId similarity_scores(Graph& g, NodeId z_hat, NodeId E);
NodeId temporal_distribution(Graph& g, NodeId c_hat, double tau);
/// Sum over time of the in-vocabulary columns, normalized by their total.
/// A total of exactly zero is replaced by 1e-12.
NodeId recognition_head(Graph& g, NodeId q, std::size_t vocab);
NodeId recognition_loss(Graph& g, NodeId q_hat, std::size_t label);
/// Cosine gram of the per-class mean over variations of E[:, :V, :].
NodeId concept_similarity_matrix(Graph& g, NodeId E, std::size_t vocab);
NodeId concept_loss(Graph& g, NodeId S_E, NodeId S_F);
/// alpha * l_concept + beta * l_rec; the concept term is omitted when alpha is 0
/// or l_concept is absent.
NodeId combined_loss(Graph& g, NodeId l_rec, std::optional<NodeId> l_concept, const LossWeights& w);
/// Returns the masked (z_hat, E) pair. Channel zeroing hits the same indices on both.
std::pair<NodeId, NodeId> apply_drop_mask(Graph& g, NodeId z_hat, NodeId E, const DropMask& mask);

struct HeadNodes {
  NodeId c_hat, q, q_hat;
  std::optional<NodeId> l_rec, l_concept;
  std::optional<NodeId> loss;
};

/// similarity -> temperature softmax -> existence vector, plus losses when a
/// label is given. The concept term uses the unmasked E and is skipped when
/// S_F is null or alpha is 0. A drop mask, when given, is drawn from g.rng().
HeadNodes lcc_head(Graph& g, NodeId z_hat, NodeId E, std::size_t vocab, const LossWeights& w,
                   std::optional<std::size_t> label, std::optional<NodeId> S_F,
                   const DropMaskSpec* drop = nullptr);

// Tensor-level forms.

Tensor similarity_scores(const Tensor& z_hat, const LccEmbeddingTable& table);
Tensor temporal_distribution(const Tensor& c_hat, double tau);
Tensor recognition_head(const Tensor& q, std::size_t vocab);
double recognition_loss(const Tensor& q_hat, std::size_t label);
/// Row cosine matrix of a [V, d] table; diagonal exactly 1. Zero rows are a
/// ContractViolation naming the row.
Tensor concept_similarity_matrix(const Tensor& vectors);
/// S_E of an LCC table.
Tensor concept_similarity_matrix(const LccEmbeddingTable& table);
double concept_loss(const Tensor& S_E, const Tensor& S_F);
double combined_loss(double l_rec, double l_concept, const LossWeights& w);
HeadOutputs head_outputs(const Tensor& z_hat, const LccEmbeddingTable& table, double tau);

struct MaskedFeatures {
  Tensor z_hat;
  Tensor E;
  DropMask mask;
};
MaskedFeatures drop_feature_mask(const Tensor& z_hat, const LccEmbeddingTable& table, const DropMaskSpec& spec,
                                 std::mt19937_64& rng);

struct Localisation {
  std::size_t target = 0;
  Tensor background;  // [T'] mass on extended slots
  Tensor per_class;   // [T', V]
  std::vector<std::size_t> argmax;  // per timestep over all V' slots, ties to lowest
  std::vector<Window> segments;     // maximal runs where argmax == target, in T' units
};

/// Without a target, the class with the largest existence score is used.
Localisation localise(const Tensor& q, std::size_t vocab, std::optional<std::size_t> target);

/// Temporal IoU between the union of segments (scaled to frames by
/// `frames_per_step`, clipped to `frames`) and a ground-truth window.
double segment_iou(const std::vector<Window>& segments, std::size_t frames_per_step, std::size_t frames,
                   const Window& truth);

/// Index of the largest entry, ties to the lowest index.
std::size_t argmax(std::span<const double> v);

}  // namespace lcc
