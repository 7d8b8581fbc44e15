#include "lcc/lcc_head.hpp"

#include <algorithm>
#include <cmath>

#include "lcc/errors.hpp"

namespace lcc {

LccEmbeddingTable LccEmbeddingTable::init(std::size_t channels, std::size_t vocab, std::size_t extended,
                                          std::size_t variations, std::mt19937_64& rng) {
  if (channels == 0 || vocab == 0 || variations == 0) throw ContractViolation("embedding table: empty dimension");
  if (extended <= vocab) throw ContractViolation("embedding table: V' must exceed V");
  LccEmbeddingTable t;
  t.channels = channels;
  t.vocab = vocab;
  t.extended = extended;
  t.variations = variations;
  t.E = Tensor({channels, extended, variations});
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(channels)));
  for (auto& v : t.E.values()) v = normal(rng);
  for (std::size_t v = 0; v < extended; ++v)
    for (std::size_t m = 0; m < variations; ++m) {
      auto norm = [&] {
        double s = 0.0;
        for (std::size_t c = 0; c < channels; ++c) s += t.E.at({c, v, m}) * t.E.at({c, v, m});
        return s;
      };
      while (norm() == 0.0)
        for (std::size_t c = 0; c < channels; ++c) t.E.at({c, v, m}) = normal(rng);
    }
  return t;
}

LccEmbeddingTable LccEmbeddingTable::from_tensor(Tensor E, std::size_t vocab) {
  if (E.rank() != 3) throw ContractViolation("embedding table: E must be [C,V',M], got " + shape_str(E.shape()));
  if (E.dim(1) <= vocab) throw ContractViolation("embedding table: V' must exceed V");
  LccEmbeddingTable t;
  t.channels = E.dim(0);
  t.vocab = vocab;
  t.extended = E.dim(1);
  t.variations = E.dim(2);
  t.E = std::move(E);
  return t;
}

void LossWeights::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("tau must be positive");
  if (!std::isfinite(alpha) || !std::isfinite(beta)) throw ConfigError("loss weights must be finite");
}

void DropMaskSpec::validate() const {
  auto ok = [](double p) { return p >= 0.0 && p < 1.0; };
  if (!ok(p_channel) || !ok(p_temporal)) throw ConfigError("drop mask probabilities must lie in [0,1)");
}

DropMask sample_drop_mask(std::size_t channels, std::size_t timesteps, const DropMaskSpec& spec,
                          std::mt19937_64& rng) {
  DropMask mask;
  if (!spec.active()) return mask;
  std::bernoulli_distribution drop_c(spec.p_channel), drop_t(spec.p_temporal);
  for (std::size_t c = 0; c < channels; ++c)
    if (drop_c(rng)) mask.channels.push_back(c);
  for (std::size_t t = 0; t < timesteps; ++t)
    if (drop_t(rng)) mask.timesteps.push_back(t);
  return mask;
}

NodeId similarity_scores(Graph& g, NodeId z_hat, NodeId E) {
  const Shape& zs = g.value(z_hat).shape();
  const Shape& es = g.value(E).shape();
  if (zs.size() != 2 || es.size() != 3)
    throw ContractViolation("similarity_scores: expected z_hat [T',C] and E [C,V',M], got " + shape_str(zs) +
                            " and " + shape_str(es));
  if (zs[1] != es[0])
    throw ContractViolation("similarity_scores: channel mismatch, z_hat has C=" + std::to_string(zs[1]) +
                            ", E has C=" + std::to_string(es[0]));
  const std::size_t t = zs[0], vp = es[1], m = es[2];
  const NodeId rows = g.transpose(g.reshape(E, {es[0], vp * m}), {1, 0});  // [V'M, C]
  const NodeId cos = g.reshape(g.apply(OpKind::cosine_matrix, {z_hat, rows}), {t, vp, m});
  return g.add(g.mean(cos, 2), g.max(cos, 2));
}

NodeId temporal_distribution(Graph& g, NodeId c_hat, double tau) {
  if (!(tau > 0.0)) throw ContractViolation("temporal_distribution: tau must be positive");
  return g.apply(OpKind::softmax, {c_hat}, OpAttrs::softmax(1, tau));
}

NodeId recognition_head(Graph& g, NodeId q, std::size_t vocab) {
  const Shape& s = g.value(q).shape();
  if (s.size() != 2 || vocab == 0 || vocab >= s[1])
    throw ContractViolation("recognition_head: need q [T',V'] with 0 < V < V', got " + shape_str(s) +
                            " and V=" + std::to_string(vocab));
  const NodeId in_vocab = g.slice(q, 1, 0, vocab);
  const NodeId num = g.sum(in_vocab, 0);
  NodeId den = g.sum(in_vocab);
  if (g.value(den).item() == 0.0) den = g.add(den, g.constant(Tensor::scalar(1e-12)));
  return g.div(num, den);
}

NodeId recognition_loss(Graph& g, NodeId q_hat, std::size_t label) {
  const std::size_t v = g.value(q_hat).size();
  if (label >= v) throw ContractViolation("recognition_loss: label " + std::to_string(label) + " outside [0," +
                                          std::to_string(v) + ")");
  Tensor target({v}, 0.0);
  target[label] = 1.0;
  return g.apply(OpKind::bce_mean, {q_hat, g.constant(std::move(target))});
}

NodeId concept_similarity_matrix(Graph& g, NodeId E, std::size_t vocab) {
  const NodeId per_class = g.mean(g.slice(E, 1, 0, vocab), 2);  // [C, V]
  return g.apply(OpKind::cosine_gram, {g.transpose(per_class, {1, 0})});
}

NodeId concept_loss(Graph& g, NodeId S_E, NodeId S_F) { return g.apply(OpKind::mse_mean, {S_E, S_F}); }

NodeId combined_loss(Graph& g, NodeId l_rec, std::optional<NodeId> l_concept, const LossWeights& w) {
  const NodeId rec = g.scale(l_rec, w.beta);
  if (!l_concept || w.alpha == 0.0) return rec;
  return g.add(g.scale(*l_concept, w.alpha), rec);
}

std::pair<NodeId, NodeId> apply_drop_mask(Graph& g, NodeId z_hat, NodeId E, const DropMask& mask) {
  if (!mask.channels.empty()) {
    z_hat = g.apply(OpKind::mask_zero, {z_hat}, OpAttrs::masking(1, mask.channels));
    E = g.apply(OpKind::mask_zero, {E}, OpAttrs::masking(0, mask.channels));
  }
  if (!mask.timesteps.empty()) z_hat = g.apply(OpKind::mask_zero, {z_hat}, OpAttrs::masking(0, mask.timesteps));
  return {z_hat, E};
}

HeadNodes lcc_head(Graph& g, NodeId z_hat, NodeId E, std::size_t vocab, const LossWeights& w,
                   std::optional<std::size_t> label, std::optional<NodeId> S_F, const DropMaskSpec* drop) {
  NodeId z = z_hat, e = E;
  if (drop && drop->active()) {
    const Shape& zs = g.value(z_hat).shape();
    std::tie(z, e) = apply_drop_mask(g, z_hat, E, sample_drop_mask(zs[1], zs[0], *drop, g.rng()));
  }
  HeadNodes h{};
  h.c_hat = similarity_scores(g, z, e);
  h.q = temporal_distribution(g, h.c_hat, w.tau);
  h.q_hat = recognition_head(g, h.q, vocab);
  if (label) {
    h.l_rec = recognition_loss(g, h.q_hat, *label);
    if (S_F && w.alpha != 0.0) h.l_concept = concept_loss(g, concept_similarity_matrix(g, E, vocab), *S_F);
    h.loss = combined_loss(g, *h.l_rec, h.l_concept, w);
  }
  return h;
}

Tensor similarity_scores(const Tensor& z_hat, const LccEmbeddingTable& table) {
  Graph g;
  return g.value(similarity_scores(g, g.constant(z_hat), g.constant(table.E)));
}

Tensor temporal_distribution(const Tensor& c_hat, double tau) {
  Graph g;
  return g.value(temporal_distribution(g, g.constant(c_hat), tau));
}

Tensor recognition_head(const Tensor& q, std::size_t vocab) {
  Graph g;
  return g.value(recognition_head(g, g.constant(q), vocab));
}

double recognition_loss(const Tensor& q_hat, std::size_t label) {
  Graph g;
  return g.value(recognition_loss(g, g.constant(q_hat), label)).item();
}

Tensor concept_similarity_matrix(const Tensor& vectors) {
  if (vectors.rank() != 2) throw ContractViolation("concept_similarity_matrix: expected [V,d], got " +
                                                   shape_str(vectors.shape()));
  for (std::size_t i = 0; i < vectors.dim(0); ++i) {
    double n = 0.0;
    for (std::size_t k = 0; k < vectors.dim(1); ++k) n += vectors.at({i, k}) * vectors.at({i, k});
    if (n == 0.0) throw ContractViolation("concept_similarity_matrix: row " + std::to_string(i) + " has zero norm");
  }
  Graph g;
  return g.value(g.apply(OpKind::cosine_gram, {g.constant(vectors)}));
}

Tensor concept_similarity_matrix(const LccEmbeddingTable& table) {
  Graph g;
  const NodeId per_class = g.transpose(g.mean(g.slice(g.constant(table.E), 1, 0, table.vocab), 2), {1, 0});
  return concept_similarity_matrix(g.value(per_class));
}

double concept_loss(const Tensor& S_E, const Tensor& S_F) {
  if (S_E.shape() != S_F.shape())
    throw ContractViolation("concept_loss: shape mismatch " + shape_str(S_E.shape()) + " vs " +
                            shape_str(S_F.shape()));
  Graph g;
  return g.value(concept_loss(g, g.constant(S_E), g.constant(S_F))).item();
}

double combined_loss(double l_rec, double l_concept, const LossWeights& w) {
  if (w.alpha == 0.0) return w.beta * l_rec;
  return w.alpha * l_concept + w.beta * l_rec;
}

HeadOutputs head_outputs(const Tensor& z_hat, const LccEmbeddingTable& table, double tau) {
  Graph g;
  const NodeId c = similarity_scores(g, g.constant(z_hat), g.constant(table.E));
  const NodeId q = temporal_distribution(g, c, tau);
  const NodeId qh = recognition_head(g, q, table.vocab);
  return {g.value(c), g.value(q), g.value(qh)};
}

MaskedFeatures drop_feature_mask(const Tensor& z_hat, const LccEmbeddingTable& table, const DropMaskSpec& spec,
                                 std::mt19937_64& rng) {
  if (z_hat.rank() != 2 || z_hat.dim(1) != table.channels)
    throw ContractViolation("drop_feature_mask: z_hat must be [T'," + std::to_string(table.channels) + "], got " +
                            shape_str(z_hat.shape()));
  MaskedFeatures out;
  out.mask = sample_drop_mask(z_hat.dim(1), z_hat.dim(0), spec, rng);
  Graph g;
  const auto [z, e] = apply_drop_mask(g, g.constant(z_hat), g.constant(table.E), out.mask);
  out.z_hat = g.value(z);
  out.E = g.value(e);
  return out;
}

std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

Localisation localise(const Tensor& q, std::size_t vocab, std::optional<std::size_t> target) {
  if (q.rank() != 2 || vocab == 0 || vocab >= q.dim(1))
    throw ContractViolation("localise: need q [T',V'] with 0 < V < V'");
  const std::size_t t_count = q.dim(0), vp = q.dim(1);
  Localisation loc;
  if (target) {
    if (*target >= vocab) throw ContractViolation("localise: target " + std::to_string(*target) + " outside [0," +
                                                  std::to_string(vocab) + ")");
    loc.target = *target;
  } else {
    loc.target = argmax(recognition_head(q, vocab).values());
  }
  loc.background = Tensor({t_count}, 0.0);
  loc.per_class = Tensor({t_count, vocab}, 0.0);
  std::optional<std::size_t> run_start;
  for (std::size_t t = 0; t < t_count; ++t) {
    const auto row = q.values().subspan(t * vp, vp);
    for (std::size_t k = 0; k < vp; ++k) {
      if (k < vocab)
        loc.per_class.at({t, k}) = row[k];
      else
        loc.background[t] += row[k];
    }
    loc.argmax.push_back(argmax(row));
    const bool hit = loc.argmax.back() == loc.target;
    if (hit && !run_start) run_start = t;
    if (!hit && run_start) {
      loc.segments.push_back({*run_start, t});
      run_start.reset();
    }
  }
  if (run_start) loc.segments.push_back({*run_start, t_count});
  return loc;
}

double segment_iou(const std::vector<Window>& segments, std::size_t frames_per_step, std::size_t frames,
                   const Window& truth) {
  std::vector<bool> pred(frames, false);
  for (auto [a, b] : segments)
    for (std::size_t f = a * frames_per_step; f < std::min(b * frames_per_step, frames); ++f) pred[f] = true;
  std::size_t inter = 0, uni = 0;
  for (std::size_t f = 0; f < frames; ++f) {
    const bool gt = f >= truth.first && f < truth.second;
    inter += pred[f] && gt;
    uni += pred[f] || gt;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace lcc
