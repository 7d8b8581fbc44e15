#include "lcc/model.hpp"

#include "lcc/errors.hpp"

namespace lcc {

namespace {

constexpr std::array<const char*, 4> kHeadNames = {"hands", "mouth", "pose", "global"};

std::size_t idx(HeadSlot h) { return static_cast<std::size_t>(h); }

}  // namespace

std::string_view head_name(HeadSlot h) { return kHeadNames[idx(h)]; }

std::optional<HeadSlot> parse_head(std::string_view name) {
  for (HeadSlot h : kHeadSlots)
    if (head_name(h) == name) return h;
  return std::nullopt;
}

std::string_view loss_name(LossKind k) { return k == LossKind::lcc ? "lcc" : "ce"; }

std::optional<LossKind> parse_loss(std::string_view name) {
  if (name == "lcc") return LossKind::lcc;
  if (name == "ce") return LossKind::ce;
  return std::nullopt;
}

std::string embedding_name(HeadSlot h) { return "head." + std::string(head_name(h)) + ".E"; }
std::string baseline_prefix(HeadSlot h) { return "baseline." + std::string(head_name(h)); }

void ModelConfig::validate() const {
  backbone.validate();
  if (vocab < 1) throw ConfigError("model: vocabulary must not be empty");
  if (extra_slots < 1) throw ConfigError("model: at least one extended slot is required");
  if (variations < 1) throw ConfigError("model: variations must be positive");
  weights.validate();
  drop.validate();
}

Model Model::create(const ModelConfig& config, const SkeletonSet& graphs, std::uint64_t seed,
                    std::optional<Tensor> S_F) {
  config.validate();
  if (S_F && S_F->shape() != Shape{config.vocab, config.vocab})
    throw ContractViolation("model: S_F must be [" + std::to_string(config.vocab) + "," +
                            std::to_string(config.vocab) + "], got " + shape_str(S_F->shape()));
  Model m;
  m.config = config;
  m.graphs = graphs;
  m.S_F = std::move(S_F);
  std::mt19937_64 rng(seed);
  init_backbone_params(m.params, "backbone.pose", config.backbone, rng);
  init_backbone_params(m.params, "backbone.hands", config.backbone, rng);
  init_backbone_params(m.params, "backbone.mouth", config.backbone, rng);
  const std::size_t c = config.backbone.out_channels();
  init_fusion_params(m.params, c, rng);
  for (HeadSlot h : kHeadSlots) {
    if (config.loss == LossKind::lcc)
      m.params[embedding_name(h)] =
          LccEmbeddingTable::init(c, config.vocab, config.extended(), config.variations, rng).E;
    else
      init_baseline_params(m.params, baseline_prefix(h), c, config.vocab, rng);
  }
  return m;
}

LccEmbeddingTable Model::table(HeadSlot h) const {
  const auto it = params.find(embedding_name(h));
  if (it == params.end()) throw ContractViolation("model has no embedding table " + embedding_name(h));
  return LccEmbeddingTable::from_tensor(it->second, config.vocab);
}

ChannelInputs channel_inputs(const KeypointSample& s) {
  ChannelInputs out;
  for (Channel c : kChannels) {
    const auto& a = s.channel(c);
    out[static_cast<std::size_t>(c)] = to_backbone_layout(Tensor({a.frames, a.dims, a.nodes}, a.values));
  }
  return out;
}

ModelOutputs model_forward(Graph& g, const Model& model, const std::map<std::string, NodeId>& params,
                           const ChannelInputs& x, std::optional<std::size_t> label, bool training) {
  const auto& cfg = model.config;
  auto input = [&](Channel c) { return g.constant(x[static_cast<std::size_t>(c)]); };
  const NodeId pose = backbone_forward(g, input(Channel::body), cfg.backbone, model.graphs[Channel::body], params,
                                       "backbone.pose");
  const NodeId left = backbone_forward(g, input(Channel::left_hand), cfg.backbone,
                                       model.graphs[Channel::left_hand], params, "backbone.hands");
  const NodeId right = backbone_forward(g, input(Channel::right_hand), cfg.backbone,
                                        model.graphs[Channel::right_hand], params, "backbone.hands");
  const NodeId mouth = backbone_forward(g, input(Channel::mouth), cfg.backbone, model.graphs[Channel::mouth],
                                        params, "backbone.mouth");
  const auto fused = fuse_channels(g, left, right, mouth, pose, params);

  ModelOutputs out;
  out.features = {fused.hands, mouth, pose, fused.global};
  std::optional<NodeId> S_F;
  if (label && cfg.loss == LossKind::lcc && cfg.weights.alpha != 0.0) {
    if (!model.S_F) throw ContractViolation("model: concept loss needs word-vector similarities (S_F)");
    S_F = g.constant(*model.S_F);
  }
  std::vector<NodeId> losses;
  for (HeadSlot h : kHeadSlots) {
    auto& r = out.heads[idx(h)];
    const NodeId z = out.features[idx(h)];
    if (cfg.loss == LossKind::lcc) {
      r.lcc = lcc_head(g, z, params.at(embedding_name(h)), cfg.vocab, cfg.weights, label, S_F,
                       training ? &cfg.drop : nullptr);
      r.l_rec = r.lcc->l_rec;
      r.l_concept = r.lcc->l_concept;
      r.loss = r.lcc->loss;
    } else {
      r.logits = baseline_forward(g, z, params, baseline_prefix(h));
      if (label) {
        r.l_rec = g.apply(OpKind::cross_entropy, {*r.logits}, OpAttrs::class_label(*label));
        r.loss = r.l_rec;
      }
    }
    if (r.loss && cfg.heads_enabled[idx(h)]) losses.push_back(*r.loss);
  }
  const auto& global = out.heads[idx(HeadSlot::global)];
  out.scores = cfg.loss == LossKind::lcc ? global.lcc->q_hat
                                         : g.apply(OpKind::softmax, {*global.logits}, OpAttrs::softmax(0, 1.0));
  if (label) {
    if (losses.empty()) throw ConfigError("model: every head is disabled");
    NodeId total = losses[0];
    for (std::size_t i = 1; i < losses.size(); ++i) total = g.add(total, losses[i]);
    out.loss = total;
  }
  return out;
}

std::vector<double> class_scores(const Model& model, const KeypointSample& s) {
  Graph g;
  const auto params = bind_parameters(g, model.params);
  const auto out = model_forward(g, model, params, channel_inputs(s), std::nullopt, false);
  return g.value(out.scores).data();
}

std::size_t predict(const Model& model, const KeypointSample& s) { return argmax(class_scores(model, s)); }

double overall_loss(const std::vector<double>& head_losses) {
  double s = 0.0;
  for (double l : head_losses) s += l;
  return s;
}

}  // namespace lcc
