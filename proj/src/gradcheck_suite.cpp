#include "lcc/gradcheck_suite.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "lcc/backbone.hpp"
#include "lcc/gradcheck.hpp"
#include "lcc/lcc_head.hpp"

namespace lcc {

namespace {

using Rng = std::mt19937_64;

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

Shape random_shape(Rng& rng, std::size_t min_rank, std::size_t max_rank, std::size_t max_dim = 4) {
  Shape s(pick(rng, min_rank, max_rank));
  for (auto& d : s) d = pick(rng, 1, max_dim);
  return s;
}

Tensor uniform(Rng& rng, const Shape& s, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(s);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

// Magnitudes in [lo, hi] with random sign.
Tensor away_from_zero(Rng& rng, const Shape& s, double lo, double hi = 1.0) {
  Tensor t = uniform(rng, s, lo, hi);
  std::bernoulli_distribution flip(0.5);
  for (auto& v : t.values())
    if (flip(rng)) v = -v;
  return t;
}

// Entries along `axis` are a shuffled ladder with spacing >= 8 * margin.
Tensor distinct_along(Rng& rng, const Shape& s, std::size_t axis, double margin) {
  Tensor t(s);
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t n = s[axis];
  std::vector<std::size_t> order(n);
  std::uniform_real_distribution<double> jitter(0.0, 2.0 * margin);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t j = 0; j < inner; ++j) {
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t k = 0; k < n; ++k)
        t[(o * n + k) * inner + j] = 10.0 * margin * static_cast<double>(order[k]) - 0.3 + jitter(rng);
    }
  return t;
}

}  // namespace

OpCase random_op_case(OpKind kind, Rng& rng, double margin) {
  OpCase c;
  c.kind = kind;
  switch (kind) {
    case OpKind::leaf:
      break;
    case OpKind::matmul: {
      const auto m = pick(rng, 1, 4), k = pick(rng, 1, 4), n = pick(rng, 1, 4);
      c.inputs = {uniform(rng, {m, k}, -1, 1), uniform(rng, {k, n}, -1, 1)};
      break;
    }
    case OpKind::add:
    case OpKind::sub:
    case OpKind::mul_elementwise:
    case OpKind::div: {
      const Shape a = random_shape(rng, 1, 3);
      Shape b = a;
      switch (pick(rng, 0, 2)) {
        case 0: break;
        case 1: b.erase(b.begin(), b.begin() + static_cast<long>(pick(rng, 0, a.size() - 1))); break;
        default: b = {1}; break;
      }
      c.inputs = {uniform(rng, a, -1, 1),
                  kind == OpKind::div ? away_from_zero(rng, b, 0.5) : uniform(rng, b, -1, 1)};
      break;
    }
    case OpKind::scale: {
      c.inputs = {uniform(rng, random_shape(rng, 1, 3), -1, 1)};
      c.attrs.factor = pick(rng, 0, 4) == 0 ? 0.0 : std::normal_distribution<double>(0, 2)(rng);
      break;
    }
    case OpKind::concat: {
      Shape s = random_shape(rng, 1, 3);
      const std::size_t axis = pick(rng, 0, s.size() - 1);
      const std::size_t parts = pick(rng, 1, 3);
      for (std::size_t p = 0; p < parts; ++p) {
        s[axis] = pick(rng, 1, 3);
        c.inputs.push_back(uniform(rng, s, -1, 1));
      }
      c.attrs = OpAttrs::along(axis);
      break;
    }
    case OpKind::slice: {
      const Shape s = random_shape(rng, 1, 3, 5);
      const std::size_t axis = pick(rng, 0, s.size() - 1);
      const std::size_t b = pick(rng, 0, s[axis] - 1);
      const std::size_t e = pick(rng, b + 1, s[axis]);
      c.inputs = {uniform(rng, s, -1, 1)};
      c.attrs = OpAttrs::slicing(axis, b, e);
      break;
    }
    case OpKind::mean:
    case OpKind::sum: {
      const Shape s = random_shape(rng, 1, 3);
      c.inputs = {uniform(rng, s, -1, 1)};
      if (pick(rng, 0, 3) != 0) c.attrs = OpAttrs::along(pick(rng, 0, s.size() - 1));
      break;
    }
    case OpKind::max: {
      const Shape s = random_shape(rng, 1, 3, 5);
      const std::size_t axis = pick(rng, 0, s.size() - 1);
      c.inputs = {distinct_along(rng, s, axis, margin)};
      c.attrs = OpAttrs::along(axis);
      break;
    }
    case OpKind::relu:
      c.inputs = {away_from_zero(rng, random_shape(rng, 1, 3), 5.0 * margin)};
      break;
    case OpKind::conv1d_temporal: {
      const std::size_t window = 2 * pick(rng, 0, 2) + 1;
      const std::size_t cin = pick(rng, 1, 3), cout = pick(rng, 1, 3);
      const std::size_t t = pick(rng, 1, 9);
      Shape x = pick(rng, 0, 1) ? Shape{t, cin} : Shape{pick(rng, 1, 3), t, cin};
      c.inputs = {uniform(rng, x, -1, 1), uniform(rng, {window, cin, cout}, -1, 1)};
      c.attrs = OpAttrs::conv(window, pick(rng, 1, 3), pick(rng, 1, 2));
      break;
    }
    case OpKind::softmax: {
      const Shape s = random_shape(rng, 1, 3, 8);
      const double temps[] = {0.1, 0.5, 1.0};
      c.inputs = {uniform(rng, s, -0.5, 0.5)};
      c.attrs = OpAttrs::softmax(pick(rng, 0, s.size() - 1), temps[pick(rng, 0, 2)]);
      break;
    }
    case OpKind::cosine_similarity: {
      // Cosine is scale-free: larger norms shrink finite-difference truncation
      // error relative to the gradient.
      const Shape s = random_shape(rng, 1, 3);
      c.inputs = {away_from_zero(rng, s, 10.0, 40.0), away_from_zero(rng, s, 10.0, 40.0)};
      c.attrs = OpAttrs::along(pick(rng, 0, s.size() - 1));
      break;
    }
    case OpKind::cosine_matrix: {
      const auto p = pick(rng, 1, 4), q = pick(rng, 1, 4), d = pick(rng, 1, 5);
      c.inputs = {away_from_zero(rng, {p, d}, 10.0, 40.0), away_from_zero(rng, {q, d}, 10.0, 40.0)};
      break;
    }
    case OpKind::cosine_gram: {
      const auto p = pick(rng, 1, 5), d = pick(rng, 1, 5);
      c.inputs = {away_from_zero(rng, {p, d}, 10.0, 40.0)};
      break;
    }
    case OpKind::bce_mean: {
      const Shape s = random_shape(rng, 1, 2, 6);
      // Binary targets as in training; soft targets put near-zero gradients
      // next to large third derivatives.
      Tensor target(s);
      for (auto& v : target.values()) v = static_cast<double>(pick(rng, 0, 1));
      c.inputs = {uniform(rng, s, 0.1, 0.9), target};
      break;
    }
    case OpKind::mse_mean: {
      const Shape s = random_shape(rng, 1, 3);
      c.inputs = {uniform(rng, s, -1, 1), uniform(rng, s, -1, 1)};
      break;
    }
    case OpKind::cross_entropy: {
      const std::size_t v = pick(rng, 1, 8);
      c.inputs = {uniform(rng, {v}, -2, 2)};
      c.attrs = OpAttrs::class_label(pick(rng, 0, v - 1));
      break;
    }
    case OpKind::clamp: {
      Tensor t = uniform(rng, random_shape(rng, 1, 3), -1, 1);
      for (auto& v : t.values())
        while (std::abs(v - 0.5) < 5 * margin || std::abs(v + 0.5) < 5 * margin)
          v = std::uniform_real_distribution<double>(-1, 1)(rng);
      c.inputs = {t};
      c.attrs = OpAttrs::clamping(-0.5, 0.5);
      break;
    }
    case OpKind::mask_zero: {
      const Shape s = random_shape(rng, 1, 3);
      const std::size_t axis = pick(rng, 0, s.size() - 1);
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < s[axis]; ++i)
        if (pick(rng, 0, 2) == 0) idx.push_back(i);
      c.inputs = {uniform(rng, s, -1, 1)};
      c.attrs = OpAttrs::masking(axis, idx);
      break;
    }
    case OpKind::reshape: {
      const Shape s = random_shape(rng, 1, 3);
      Shape target = s;
      std::shuffle(target.begin(), target.end(), rng);
      if (pick(rng, 0, 1)) target = {numel(s)};
      c.inputs = {uniform(rng, s, -1, 1)};
      c.attrs = OpAttrs::reshaping(target);
      break;
    }
    case OpKind::transpose: {
      const Shape s = random_shape(rng, 1, 4, 3);
      std::vector<std::size_t> perm(s.size());
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      c.inputs = {uniform(rng, s, -1, 1)};
      c.attrs = OpAttrs::permuting(perm);
      break;
    }
  }
  return c;
}

std::vector<CheckRecord> run_op_gradchecks(std::size_t instances, double step, double tolerance,
                                           std::uint64_t seed) {
  Rng rng(seed);
  std::vector<CheckRecord> out;
  for (OpKind kind : differentiable_ops()) {
    CheckRecord rec{std::string(op_name(kind)), instances, 0.0, tolerance, {}};
    for (std::size_t i = 0; i < instances; ++i) {
      const OpCase c = random_op_case(kind, rng, 2.0 * step);
      rec.max_relative_error = std::max(rec.max_relative_error, grad_check(c.kind, c.inputs, c.attrs, step));
    }
    out.push_back(rec);
  }
  return out;
}

namespace {

// Cosines of every (t, v, m) triple; used to reject near-ties under max over M.
double min_variation_gap(const Tensor& z, const Tensor& E) {
  const std::size_t t_count = z.dim(0), c = z.dim(1), vp = E.dim(1), m = E.dim(2);
  double gap = 1e9;
  for (std::size_t t = 0; t < t_count; ++t)
    for (std::size_t v = 0; v < vp; ++v) {
      std::vector<double> cos(m);
      for (std::size_t k = 0; k < m; ++k) {
        double dot = 0, nz = 0, ne = 0;
        for (std::size_t i = 0; i < c; ++i) {
          dot += z.at({t, i}) * E.at({i, v, k});
          nz += z.at({t, i}) * z.at({t, i});
          ne += E.at({i, v, k}) * E.at({i, v, k});
        }
        // zeroed rows tie exactly and stay tied under perturbation
        cos[k] = nz * ne == 0.0 ? 0.0 : dot / std::sqrt(nz * ne);
      }
      std::sort(cos.begin(), cos.end());
      if (m > 1) gap = std::min(gap, cos[m - 1] - cos[m - 2]);
    }
  return gap;
}

double min_row_norm(const Tensor& z, const Tensor& E) {
  const std::size_t c = z.dim(1), vm = E.dim(1) * E.dim(2);
  double lo = 1e300;
  for (std::size_t t = 0; t < z.dim(0); ++t) {
    double n = 0;
    for (std::size_t i = 0; i < c; ++i) n += z.at({t, i}) * z.at({t, i});
    lo = std::min(lo, std::sqrt(n));
  }
  for (std::size_t j = 0; j < vm; ++j) {
    double n = 0;
    for (std::size_t i = 0; i < c; ++i) n += E[i * vm + j] * E[i * vm + j];
    lo = std::min(lo, std::sqrt(n));
  }
  return lo;
}

// Central differences lose accuracy in two places: BCE near its clamp (and
// with third derivatives growing like 1/p^3), and softmax entries so small
// that their gradients sink below the finite-difference roundoff. Cases are
// drawn away from both.
bool well_conditioned(const HeadOutputs& out) {
  const auto q = out.q.values();
  const auto qh = out.q_hat.values();
  const bool q_ok = std::all_of(q.begin(), q.end(), [](double p) { return p >= 1e-5; });
  const bool qh_ok = qh.size() == 1 || std::all_of(qh.begin(), qh.end(), [](double p) {
                       return p >= 1e-3 && p <= 1.0 - 1e-3;
                     });
  return q_ok && qh_ok;
}

struct HeadCase {
  Tensor z, E, S_F, weights;
  std::size_t vocab = 0, label = 0;
  LossWeights w;
};

HeadCase random_head_case(Rng& rng) {
  HeadCase h;
  // With a single timestep the extended slots cancel out of q_hat exactly, so
  // their true gradient is zero and central differences return pure roundoff.
  const std::size_t t = pick(rng, 2, 5), c = pick(rng, 2, 6), m = pick(rng, 1, 3);
  h.vocab = pick(rng, 1, 5);
  const std::size_t vp = h.vocab + pick(rng, 1, 3);
  const double taus[] = {0.1, 0.5, 1.0};
  h.w = {uniform(rng, {1}, 0.5, 5.0)[0], uniform(rng, {1}, 0.5, 10.0)[0], taus[pick(rng, 0, 2)]};

  // Features and embeddings scatter around a shared direction; shrinking the
  // scatter narrows the cosine spread until the softmax is well conditioned.
  double spread = 1.0;
  while (true) {
    const Tensor base = away_from_zero(rng, {c}, 10.0, 40.0);
    h.z = away_from_zero(rng, {t, c}, 10.0, 40.0);
    h.E = away_from_zero(rng, {c, vp, m}, 10.0, 40.0);
    for (std::size_t i = 0; i < h.z.size(); ++i) h.z[i] = base[i % c] + spread * h.z[i];
    for (std::size_t i = 0; i < h.E.size(); ++i) h.E[i] = base[i / (vp * m)] + spread * h.E[i];
    if (min_row_norm(h.z, h.E) < 10.0 || min_variation_gap(h.z, h.E) < 1e-3) continue;
    if (well_conditioned(head_outputs(h.z, LccEmbeddingTable::from_tensor(h.E, h.vocab), h.w.tau))) break;
    spread = spread < 1e-2 ? 1.0 : 0.8 * spread;
  }
  const Tensor words = away_from_zero(rng, {h.vocab, pick(rng, 2, 5)}, 0.2, 1.0);
  h.S_F = concept_similarity_matrix(words);
  h.weights = uniform(rng, {t, vp}, 0.5, 1.5);
  h.label = pick(rng, 0, h.vocab - 1);
  return h;
}

void note(CheckRecord& r, const GradCheckResult& res, std::size_t instance) {
  if (res.max_relative_error <= r.max_relative_error && !r.worst.empty()) return;
  r.max_relative_error = res.max_relative_error;
  std::ostringstream os;
  os.precision(6);
  os << "instance " << instance << ", input " << res.param << "[" << res.index << "]: analytic " << res.analytic
     << ", numeric " << res.numeric;
  r.worst = os.str();
}

}  // namespace

std::vector<CheckRecord> run_head_gradchecks(std::size_t instances, double step, double tolerance,
                                             std::uint64_t seed) {
  Rng rng(seed);
  CheckRecord sim{"head.similarity_scores", instances, 0.0, tolerance, {}};
  CheckRecord concept_rec{"head.concept_path", instances, 0.0, tolerance, {}};
  CheckRecord full{"head.combined_loss", instances, 0.0, tolerance, {}};
  CheckRecord masked{"head.combined_loss_drop_mask", instances, 0.0, tolerance, {}};
  DropMaskSpec drop{0.3, 0.3, true};

  for (std::size_t i = 0; i < instances; ++i) {
    const HeadCase h = random_head_case(rng);
    auto upd = [&](CheckRecord& r, const GradCheckResult& res) { note(r, res, i); };

    upd(sim, grad_check_detailed(
                 [&](Graph& g, const std::vector<NodeId>& p) {
                   return g.sum(g.mul(similarity_scores(g, p[0], p[1]), g.constant(h.weights)));
                 },
                 {h.z, h.E}, step));

    upd(concept_rec, grad_check_detailed(
                     [&](Graph& g, const std::vector<NodeId>& p) {
                       return concept_loss(g, concept_similarity_matrix(g, p[0], h.vocab), g.constant(h.S_F));
                     },
                     {h.E}, step));

    auto head_loss = [&](const DropMaskSpec* spec) {
      return [&, spec](Graph& g, const std::vector<NodeId>& p) {
        return *lcc_head(g, p[0], p[1], h.vocab, h.w, h.label, g.constant(h.S_F), spec).loss;
      };
    };
    upd(full, grad_check_detailed(head_loss(nullptr), {h.z, h.E}, step));
    // The mask is replayed from the graph seed; pick one that leaves the case well conditioned.
    std::uint64_t mask_seed = seed * 1000003 + i;
    while (true) {
      std::mt19937_64 mask_rng(mask_seed);
      const DropMask mask = sample_drop_mask(h.z.dim(1), h.z.dim(0), drop, mask_rng);
      Graph g;
      const auto [mz, me] = apply_drop_mask(g, g.constant(h.z), g.constant(h.E), mask);
      if (min_variation_gap(g.value(mz), g.value(me)) >= 1e-3 &&
          well_conditioned(head_outputs(g.value(mz), LccEmbeddingTable::from_tensor(g.value(me), h.vocab), h.w.tau)))
        break;
      ++mask_seed;
    }
    upd(masked, grad_check_detailed(head_loss(&drop), {h.z, h.E}, step, mask_seed));
  }
  return {sim, concept_rec, full, masked};
}

namespace {

// Four chain-shaped channels (N = 3 or 4) feeding two blocks, T = 8 -> T' = 4, C = 6.
struct TinyNetwork {
  BackboneConfig cfg;
  std::array<SkeletonGraph, 4> graphs;  // pose, left, right, mouth
  std::array<Tensor, 4> inputs;
};

const std::array<std::string, 3> kBackbones = {"bb.pose", "bb.hands", "bb.mouth"};

TinyNetwork random_network(Rng& rng) {
  TinyNetwork net;
  net.cfg.channels = {4, 6};
  net.cfg.strides = {1, 2};
  net.cfg.window = 3;
  net.cfg.in_dims = 3;
  for (std::size_t c = 0; c < 4; ++c) {
    // both hands share weights, so they share a layout
    const std::size_t n = c == 2 ? net.graphs[1].node_count : pick(rng, 3, 4);
    std::vector<Edge> edges;
    for (std::size_t i = 1; i < n; ++i) edges.push_back({pick(rng, 0, i - 1), i});
    net.graphs[c] = SkeletonGraph::build(n, edges);
    net.inputs[c] = uniform(rng, {n, 8, 3}, -1, 1);
  }
  return net;
}

NodeId tiny_global(Graph& g, const TinyNetwork& net, const std::map<std::string, NodeId>& p) {
  auto run = [&](std::size_t c, const std::string& prefix) {
    return backbone_forward(g, g.constant(net.inputs[c]), net.cfg, net.graphs[c], p, prefix);
  };
  const NodeId pose = run(0, kBackbones[0]);
  const NodeId left = run(1, kBackbones[1]);
  const NodeId right = run(2, kBackbones[1]);
  const NodeId mouth = run(3, kBackbones[2]);
  return fuse_channels(g, left, right, mouth, pose, p).global;
}

// Smallest |input| over every relu in the graph.
double relu_margin(const Graph& g) {
  double lo = 1e300;
  for (NodeId id = 0; id < g.size(); ++id) {
    if (g.kind(id) != OpKind::relu) continue;
    for (double v : g.value(g.inputs(id)[0]).values()) lo = std::min(lo, std::abs(v));
  }
  return lo;
}

std::map<std::string, NodeId> bind_named(const std::vector<std::string>& names, const std::vector<NodeId>& ids) {
  std::map<std::string, NodeId> m;
  for (std::size_t i = 0; i < names.size(); ++i) m.emplace(names[i], ids[i]);
  return m;
}

// Hundreds of relu inputs sit in one network, so a plain draw nearly always
// puts one within a step of its kink. Small backbone weights against biases of
// magnitude 2..3 keep every relu input clear of zero, with some channels dead.
ParameterSet tiny_params(Rng& rng, const TinyNetwork& net) {
  ParameterSet ps;
  for (const auto& b : kBackbones) init_backbone_params(ps, b, net.cfg, rng);
  init_fusion_params(ps, net.cfg.out_channels(), rng);
  for (auto& [name, t] : ps) {
    if (!name.starts_with("bb.")) continue;
    if (name.ends_with(".b"))
      t = away_from_zero(rng, t.shape(), 2.0, 3.0);
    else
      for (auto& v : t.values()) v *= 0.1;
  }
  return ps;
}

}  // namespace

std::vector<CheckRecord> run_end2end_gradchecks(std::size_t instances, double step, double tolerance,
                                                std::uint64_t seed) {
  Rng rng(seed);
  CheckRecord lcc_rec{"end2end.lcc_global", instances, 0.0, tolerance, {}};
  CheckRecord ce_rec{"end2end.ce_global", instances, 0.0, tolerance, {}};
  const double relu_floor = 50.0 * step;

  for (std::size_t i = 0; i < instances; ++i) {
    TinyNetwork net;
    ParameterSet ps;
    Tensor z;
    while (true) {
      net = random_network(rng);
      ps = tiny_params(rng, net);
      Graph g;
      const auto p = bind_parameters(g, ps);
      const NodeId zg = tiny_global(g, net, p);
      if (relu_margin(g) < relu_floor) continue;
      z = g.value(zg);
      break;
    }
    const std::size_t c = z.dim(1), t = z.dim(0);
    const std::size_t vocab = pick(rng, 1, 4), vp = vocab + pick(rng, 1, 3), m = pick(rng, 1, 3);
    const double taus[] = {0.1, 0.5, 1.0};
    const LossWeights w{uniform(rng, {1}, 0.5, 5.0)[0], uniform(rng, {1}, 0.5, 10.0)[0], taus[pick(rng, 0, 2)]};
    const std::size_t label = pick(rng, 0, vocab - 1);
    const Tensor S_F = concept_similarity_matrix(away_from_zero(rng, {vocab, pick(rng, 2, 5)}, 0.2, 1.0));

    // Embeddings scatter around the mean feature direction, as in the head checks.
    Tensor base({c}, 0.0);
    for (std::size_t k = 0; k < t; ++k)
      for (std::size_t j = 0; j < c; ++j) base[j] += z.at({k, j});
    double spread = 1.0;
    Tensor E;
    while (true) {
      E = away_from_zero(rng, {c, vp, m}, 0.5, 2.0);
      for (std::size_t j = 0; j < E.size(); ++j) E[j] = base[j / (vp * m)] + spread * E[j];
      if (min_variation_gap(z, E) >= 1e-3 &&
          well_conditioned(head_outputs(z, LccEmbeddingTable::from_tensor(E, vocab), w.tau)))
        break;
      spread = spread < 1e-2 ? 1.0 : 0.8 * spread;
    }

    std::vector<std::string> names;
    std::vector<Tensor> values;
    for (const auto& [name, tensor] : ps) {
      names.push_back(name);
      values.push_back(tensor);
    }
    names.push_back("head.E");
    values.push_back(E);
    note(lcc_rec,
         grad_check_detailed(
             [&](Graph& g, const std::vector<NodeId>& ids) {
               const auto p = bind_named(names, ids);
               const NodeId zg = tiny_global(g, net, p);
               return *lcc_head(g, zg, p.at("head.E"), vocab, w, label, g.constant(S_F), nullptr).loss;
             },
             values, step),
         i);

    names.back() = "head.W";
    values.back() = away_from_zero(rng, {c, vocab}, 0.1, 1.0);
    names.push_back("head.b");
    values.push_back(uniform(rng, {vocab}, -0.5, 0.5));
    note(ce_rec,
         grad_check_detailed(
             [&](Graph& g, const std::vector<NodeId>& ids) {
               const auto p = bind_named(names, ids);
               const NodeId logits = baseline_forward(g, tiny_global(g, net, p), p, "head");
               return g.apply(OpKind::cross_entropy, {logits}, OpAttrs::class_label(label));
             },
             values, step),
         i);
  }
  return {lcc_rec, ce_rec};
}

}  // namespace lcc
