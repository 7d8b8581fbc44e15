#include "lcc/backbone.hpp"

#include <cmath>

#include "lcc/errors.hpp"

namespace lcc {

namespace {

NodeId param(const std::map<std::string, NodeId>& params, const std::string& name) {
  const auto it = params.find(name);
  if (it == params.end()) throw ContractViolation("missing parameter " + name);
  return it->second;
}

Tensor he_normal(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = n(rng);
  return t;
}

std::string block_prefix(const std::string& prefix, std::size_t k) {
  return prefix + ".block" + std::to_string(k);
}

}  // namespace

void BackboneConfig::validate() const {
  if (channels.empty()) throw ConfigError("backbone: at least one block is required");
  if (strides.size() != channels.size())
    throw ConfigError("backbone: " + std::to_string(channels.size()) + " channel entries but " +
                      std::to_string(strides.size()) + " strides");
  for (auto c : channels)
    if (c == 0) throw ConfigError("backbone: channel counts must be positive");
  for (auto s : strides)
    if (s == 0) throw ConfigError("backbone: strides must be positive");
  if (window == 0 || window % 2 == 0) throw ConfigError("backbone: temporal window must be odd");
  if (dilation == 0) throw ConfigError("backbone: dilation must be positive");
  if (in_dims == 0) throw ConfigError("backbone: input dims must be positive");
}

std::size_t BackboneConfig::out_frames(std::size_t frames) const {
  for (auto s : strides) frames = (frames + s - 1) / s;
  return frames;
}

std::size_t BackboneConfig::total_stride() const {
  std::size_t p = 1;
  for (auto s : strides) p *= s;
  return p;
}

void init_backbone_params(ParameterSet& params, const std::string& prefix, const BackboneConfig& cfg,
                          std::mt19937_64& rng) {
  cfg.validate();
  std::size_t cin = cfg.in_dims;
  for (std::size_t k = 0; k < cfg.channels.size(); ++k) {
    const std::size_t cout = cfg.channels[k];
    const std::string p = block_prefix(prefix, k);
    params[p + ".gcn.W"] = he_normal({cin, cout}, cin, rng);
    params[p + ".gcn.b"] = Tensor({cout}, 0.0);
    params[p + ".tcn.W"] = he_normal({cfg.window, cout, cout}, cfg.window * cout, rng);
    params[p + ".tcn.b"] = Tensor({cout}, 0.0);
    cin = cout;
  }
}

NodeId backbone_forward(Graph& g, NodeId x, const BackboneConfig& cfg, const SkeletonGraph& graph,
                        const std::map<std::string, NodeId>& params, const std::string& prefix) {
  const Shape& xs = g.value(x).shape();
  if (xs.size() != 3 || xs[0] != graph.node_count || xs[2] != cfg.in_dims)
    throw ContractViolation("backbone_forward(" + prefix + "): expected [" + std::to_string(graph.node_count) +
                            ",T," + std::to_string(cfg.in_dims) + "], got " + shape_str(xs));
  const std::size_t n = xs[0];
  std::size_t t = xs[1];
  std::size_t cin = cfg.in_dims;
  const NodeId adj = g.constant(graph.normalized_adjacency);

  auto aggregate = [&](NodeId h, std::size_t c) {
    return g.reshape(g.matmul(adj, g.reshape(h, {n, t * c})), {n, t, c});
  };
  auto project = [&](NodeId h, NodeId w, std::size_t c_in, std::size_t c_out) {
    return g.reshape(g.matmul(g.reshape(h, {n * t, c_in}), w), {n, t, c_out});
  };

  NodeId h = x;
  for (std::size_t k = 0; k < cfg.channels.size(); ++k) {
    const std::size_t cout = cfg.channels[k];
    const std::string p = block_prefix(prefix, k);
    const NodeId w = param(params, p + ".gcn.W");
    // A X W: aggregate over nodes on whichever side has fewer channels
    if (cin <= cout)
      h = project(aggregate(h, cin), w, cin, cout);
    else
      h = aggregate(project(h, w, cin, cout), cout);
    h = g.relu(g.add(h, param(params, p + ".gcn.b")));

    h = g.apply(OpKind::conv1d_temporal, {h, param(params, p + ".tcn.W")},
                OpAttrs::conv(cfg.window, cfg.strides[k], cfg.dilation));
    h = g.add(h, param(params, p + ".tcn.b"));
    t = g.value(h).dim(1);
    if (k + 1 < cfg.channels.size()) h = g.relu(h);
    cin = cout;
  }
  return g.mean(h, 0);
}

Tensor to_backbone_layout(const Tensor& x) {
  if (x.rank() != 3) throw ContractViolation("expected keypoints [T,D,N], got " + shape_str(x.shape()));
  const std::size_t t = x.dim(0), d = x.dim(1), n = x.dim(2);
  Tensor out({n, t, d});
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = 0; k < n; ++k) out[(k * t + i) * d + j] = x[(i * d + j) * n + k];
  return out;
}

Tensor backbone_forward(const Tensor& x, const BackboneConfig& cfg, const SkeletonGraph& graph,
                        const ParameterSet& params, const std::string& prefix) {
  Graph g;
  const auto nodes = bind_parameters(g, params);
  return g.value(backbone_forward(g, g.constant(to_backbone_layout(x)), cfg, graph, nodes, prefix));
}

FusedFeatures fuse_channels(Graph& g, NodeId left, NodeId right, NodeId mouth, NodeId pose,
                            const std::map<std::string, NodeId>& params) {
  const Shape& s = g.value(left).shape();
  for (NodeId other : {right, mouth, pose})
    if (g.value(other).shape() != s)
      throw ContractViolation("fuse_channels: feature shapes differ, " + shape_str(s) + " vs " +
                              shape_str(g.value(other).shape()));
  FusedFeatures f{};
  f.hands = g.scale(g.add(left, right), 0.5);
  const NodeId cat = g.concat({f.hands, mouth, pose}, 1);
  f.global = g.add(g.matmul(cat, param(params, "fusion.W")), param(params, "fusion.b"));
  return f;
}

void init_fusion_params(ParameterSet& params, std::size_t channels, std::mt19937_64& rng) {
  params["fusion.W"] = he_normal({3 * channels, channels}, 3 * channels, rng);
  params["fusion.b"] = Tensor({channels}, 0.0);
}

NodeId baseline_forward(Graph& g, NodeId z_hat, const std::map<std::string, NodeId>& params,
                        const std::string& prefix) {
  const std::size_t c = g.value(z_hat).dim(1);
  const NodeId pooled = g.reshape(g.mean(z_hat, 0), {1, c});
  const NodeId logits = g.add(g.matmul(pooled, param(params, prefix + ".W")), param(params, prefix + ".b"));
  return g.reshape(logits, {g.value(logits).dim(1)});
}

void init_baseline_params(ParameterSet& params, const std::string& prefix, std::size_t channels,
                          std::size_t vocab, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0 / std::sqrt(static_cast<double>(channels)));
  Tensor w({channels, vocab});
  for (auto& v : w.values()) v = n(rng);
  params[prefix + ".W"] = std::move(w);
  params[prefix + ".b"] = Tensor({vocab}, 0.0);
}

std::map<std::string, NodeId> bind_parameters(Graph& g, const ParameterSet& params) {
  std::map<std::string, NodeId> out;
  for (const auto& [name, t] : params) out.emplace(name, g.parameter(t));
  return out;
}

}  // namespace lcc
