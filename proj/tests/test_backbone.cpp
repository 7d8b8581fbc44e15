#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "lcc/backbone.hpp"
#include "lcc/errors.hpp"
#include "lcc/gradcheck_suite.hpp"
#include "lcc/model.hpp"

using namespace lcc;

namespace {

Tensor random_tensor(std::mt19937_64& rng, Shape s) {
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor t(std::move(s));
  for (auto& v : t.values()) v = n(rng);
  return t;
}

BackboneConfig small_config() {
  BackboneConfig cfg;
  cfg.channels = {8, 16};
  cfg.strides = {2, 2};
  return cfg;
}

KeypointSample random_sample(std::mt19937_64& rng, std::size_t frames) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  KeypointSample s;
  s.sample_id = "x";
  for (Channel c : kChannels) {
    KeypointArray a(frames, 3, channel_nodes(c));
    for (auto& v : a.values) v = u(rng);
    s.channel(c) = a;
  }
  return s;
}

ModelConfig model_config(LossKind loss = LossKind::lcc) {
  ModelConfig cfg;
  cfg.backbone = small_config();
  cfg.vocab = 4;
  cfg.extra_slots = 3;
  cfg.loss = loss;
  return cfg;
}

Tensor word_similarities(std::size_t v) {
  Tensor s({v, v}, 0.0);
  for (std::size_t i = 0; i < v; ++i) s.at({i, i}) = 1.0;
  return s;
}

// Features of one forward pass, indexed by head slot.
std::array<Tensor, 4> features(const Model& m, const ChannelInputs& x) {
  Graph g;
  const auto p = bind_parameters(g, m.params);
  const auto out = model_forward(g, m, p, x, std::nullopt, false);
  std::array<Tensor, 4> f;
  for (std::size_t i = 0; i < 4; ++i) f[i] = g.value(out.features[i]);
  return f;
}

}  // namespace

TEST_CASE("identity weights on constant input give constant rows") {
  BackboneConfig cfg;
  cfg.channels = {3};
  cfg.strides = {1};
  const auto graph = SkeletonGraph::build(4, {{0, 1}, {1, 2}, {1, 3}});
  ParameterSet ps;
  Tensor w({3, 3}, 0.0), tw({5, 3, 3}, 0.0);
  for (std::size_t i = 0; i < 3; ++i) {
    w.at({i, i}) = 1.0;
    tw.at({2, i, i}) = 1.0;
  }
  ps["b.block0.gcn.W"] = w;
  ps["b.block0.gcn.b"] = Tensor({3}, 0.0);
  ps["b.block0.tcn.W"] = tw;
  ps["b.block0.tcn.b"] = Tensor({3}, 0.0);
  Tensor x({7, 3, 4});
  for (std::size_t t = 0; t < 7; ++t)
    for (std::size_t n = 0; n < 4; ++n) {
      x.at({t, 0, n}) = 0.5;
      x.at({t, 1, n}) = 2.0;
      x.at({t, 2, n}) = -1.0;
    }
  const Tensor z = backbone_forward(x, cfg, graph, ps, "b");
  REQUIRE(z.shape() == Shape{7, 3});
  for (std::size_t t = 1; t < 7; ++t)
    for (std::size_t c = 0; c < 3; ++c) CHECK(z.at({t, c}) == doctest::Approx(z.at({0, c})).epsilon(1e-14));
  CHECK(z.at({0, 2}) == 0.0);  // negative dim is clipped
}

TEST_CASE("two-node graph adjacency is all one half") {
  const auto g = SkeletonGraph::build(2, {{0, 1}});
  for (double v : g.normalized_adjacency.values()) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("strided blocks shorten time by ceil division") {
  const BackboneConfig cfg = small_config();
  CHECK(cfg.out_frames(16) == 4);
  CHECK(cfg.out_frames(15) == 4);
  CHECK(cfg.out_frames(17) == 5);
  CHECK(cfg.total_stride() == 4);

  std::mt19937_64 rng(3);
  ParameterSet ps;
  init_backbone_params(ps, "b", cfg, rng);
  const auto graph = SkeletonGraph::build(3, {{0, 1}, {1, 2}});
  for (std::size_t t : {16u, 15u, 1u}) {
    const Tensor z = backbone_forward(random_tensor(rng, {t, 3, 3}), cfg, graph, ps, "b");
    CHECK(z.shape() == Shape{cfg.out_frames(t), 16});
  }
  CHECK_THROWS_AS(backbone_forward(random_tensor(rng, {16, 3, 4}), cfg, graph, ps, "b"), ContractViolation);
  CHECK_THROWS_AS(backbone_forward(random_tensor(rng, {16, 2, 3}), cfg, graph, ps, "b"), ContractViolation);
}

TEST_CASE("backbone config validation") {
  BackboneConfig cfg;
  cfg.window = 4;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = BackboneConfig{};
  cfg.strides = {1, 2};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = BackboneConfig{};
  cfg.channels = {16, 0, 64};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("fuse_channels examples") {
  std::mt19937_64 rng(5);
  ParameterSet ps;
  init_fusion_params(ps, 4, rng);
  CHECK(ps.at("fusion.W").shape() == Shape{12, 4});

  const Tensor l = random_tensor(rng, {3, 4}), m = random_tensor(rng, {3, 4}), p = random_tensor(rng, {3, 4});
  {
    Graph g;
    const auto params = bind_parameters(g, ps);
    const auto f = fuse_channels(g, g.constant(l), g.constant(l), g.constant(m), g.constant(p), params);
    CHECK(bitwise_equal(g.value(f.hands), l));
    CHECK(g.value(f.global).shape() == Shape{3, 4});
  }
  {
    ps["fusion.W"] = Tensor({12, 4}, 0.0);
    Graph g;
    const auto params = bind_parameters(g, ps);
    const auto f = fuse_channels(g, g.constant(l), g.constant(p), g.constant(m), g.constant(p), params);
    for (double v : g.value(f.global).values()) CHECK(v == 0.0);
  }
  Graph g;
  const auto params = bind_parameters(g, ps);
  CHECK_THROWS_AS(
      fuse_channels(g, g.constant(l), g.constant(random_tensor(rng, {2, 4})), g.constant(m), g.constant(p), params),
      ContractViolation);
}

TEST_CASE("baseline_forward examples") {
  std::mt19937_64 rng(7);
  for (std::size_t c : {1u, 5u, 9u}) {
    ParameterSet ps;
    init_baseline_params(ps, "h", c, 3, rng);
    Graph g;
    const auto p = bind_parameters(g, ps);
    const NodeId logits = baseline_forward(g, g.constant(random_tensor(rng, {4, c})), p, "h");
    CHECK(g.value(logits).shape() == Shape{3});
  }

  ParameterSet ps;
  ps["h.W"] = Tensor({2, 3}, 0.0);
  ps["h.b"] = Tensor({3}, std::vector<double>{0.25, -1.0, 3.0});
  Graph g;
  auto p = bind_parameters(g, ps);
  CHECK(bitwise_equal(g.value(baseline_forward(g, g.constant(random_tensor(rng, {5, 2})), p, "h")), ps["h.b"]));

  // constant rows pool to that row
  ps["h.W"] = Tensor({2, 3}, std::vector<double>{1, 0, 2, 0, 1, -1});
  ps["h.b"] = Tensor({3}, 0.0);
  Graph g2;
  p = bind_parameters(g2, ps);
  const Tensor z({4, 2}, std::vector<double>{0.5, -2, 0.5, -2, 0.5, -2, 0.5, -2});
  const Tensor logits = g2.value(baseline_forward(g2, g2.constant(z), p, "h"));
  CHECK(logits[0] == doctest::Approx(0.5));
  CHECK(logits[1] == doctest::Approx(-2.0));
  CHECK(logits[2] == doctest::Approx(3.0));
}

TEST_CASE("overall_loss examples") {
  CHECK(overall_loss({0, 0, 0, 0}) == 0.0);
  CHECK(overall_loss({1, 2, 3, 4}) == 10.0);
}

TEST_CASE("disabling a head removes exactly its term") {
  std::mt19937_64 rng(11);
  const auto x = channel_inputs(random_sample(rng, 16));
  for (LossKind kind : {LossKind::lcc, LossKind::ce}) {
    auto cfg = model_config(kind);
    auto m = Model::create(cfg, default_skeletons(), 1, word_similarities(4));
    auto run = [&](const Model& model) {
      Graph g;
      const auto p = bind_parameters(g, model.params);
      const auto out = model_forward(g, model, p, x, 2, false);
      std::array<double, 4> per;
      for (std::size_t i = 0; i < 4; ++i) per[i] = g.value(*out.heads[i].loss).item();
      return std::make_pair(g.value(*out.loss).item(), per);
    };
    const auto [total, per] = run(m);
    CHECK(total == doctest::Approx(overall_loss({per.begin(), per.end()})).epsilon(1e-14));
    for (std::size_t h = 0; h < 4; ++h) {
      m.config.heads_enabled = {true, true, true, true};
      m.config.heads_enabled[h] = false;
      CHECK(run(m).first == doctest::Approx(total - per[h]).epsilon(1e-12));
    }
    m.config.heads_enabled = {false, false, false, false};
    CHECK_THROWS_AS(run(m), ConfigError);
  }
}

TEST_CASE("predict examples") {
  const std::vector<double> a{0.1, 0.7, 0.2}, b{0.5, 0.5};
  CHECK(argmax(a) == 1);
  CHECK(argmax(b) == 0);

  std::mt19937_64 rng(13);
  const Tensor z = random_tensor(rng, {4, 6});
  const auto table = LccEmbeddingTable::from_tensor(random_tensor(rng, {6, 8, 3}), 5);
  const auto base = head_outputs(z, table, 0.1).q_hat;
  for (double k : {1e-3, 0.5, 7.0, 1e4}) {
    Tensor zk = z;
    for (auto& v : zk.values()) v *= k;
    const auto qk = head_outputs(zk, table, 0.1).q_hat;
    CHECK(argmax(qk.values()) == argmax(base.values()));
    for (std::size_t i = 0; i < qk.size(); ++i) CHECK(qk[i] == doctest::Approx(base[i]).epsilon(1e-12));
  }
}

TEST_CASE("model predicts from the global head") {
  std::mt19937_64 rng(17);
  const auto s = random_sample(rng, 16);
  for (LossKind kind : {LossKind::lcc, LossKind::ce}) {
    const auto m = Model::create(model_config(kind), default_skeletons(), 2);
    const auto scores = class_scores(m, s);
    REQUIRE(scores.size() == 4);
    CHECK(predict(m, s) == argmax(scores));
    if (kind == LossKind::lcc) {
      Graph g;
      const auto p = bind_parameters(g, m.params);
      const auto out = model_forward(g, m, p, channel_inputs(s), std::nullopt, false);
      const auto want = head_outputs(g.value(out.features[3]), m.table(HeadSlot::global), 0.1).q_hat;
      for (std::size_t i = 0; i < 4; ++i) CHECK(scores[i] == doctest::Approx(want[i]).epsilon(1e-14));
    } else {
      double total = 0;
      for (double v : scores) total += v;
      CHECK(total == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("model creation contracts") {
  auto cfg = model_config();
  CHECK_THROWS_AS(Model::create(cfg, default_skeletons(), 0, Tensor({3, 3})), ContractViolation);
  cfg.vocab = 0;
  CHECK_THROWS_AS(Model::create(cfg, default_skeletons(), 0), ConfigError);
  cfg = model_config();
  cfg.extra_slots = 0;
  CHECK_THROWS_AS(Model::create(cfg, default_skeletons(), 0), ConfigError);

  const auto m = Model::create(model_config(), default_skeletons(), 0);
  CHECK(m.params.at("head.global.E").shape() == Shape{16, 7, 3});
  CHECK(m.params.count("backbone.hands.block1.tcn.W") == 1);
  CHECK(m.params.count("backbone.left_hand.block0.gcn.W") == 0);

  // a concept loss without word similarities is a contract violation
  std::mt19937_64 rng(1);
  Graph g;
  const auto p = bind_parameters(g, m.params);
  CHECK_THROWS_AS(model_forward(g, m, p, channel_inputs(random_sample(rng, 8)), 0, false), ContractViolation);
}

TEST_CASE("LCC and CE models share backbone initialisation") {
  const auto a = Model::create(model_config(LossKind::lcc), default_skeletons(), 9);
  const auto b = Model::create(model_config(LossKind::ce), default_skeletons(), 9);
  for (const auto& [name, t] : a.params)
    if (name.starts_with("backbone.") || name.starts_with("fusion.")) CHECK(bitwise_equal(b.params.at(name), t));
  CHECK(b.params.count("baseline.global.W") == 1);
  CHECK(b.params.count("head.global.E") == 0);
}

TEST_CASE("perturbing the mouth leaves hands and pose bitwise unchanged") {
  std::mt19937_64 rng(19);
  const auto m = Model::create(model_config(), default_skeletons(), 3);
  for (int i = 0; i < 20; ++i) {
    auto s = random_sample(rng, 12);
    const auto before = features(m, channel_inputs(s));
    for (auto& v : s.channel(Channel::mouth).values) v += 0.25;
    const auto after = features(m, channel_inputs(s));
    CHECK(bitwise_equal(after[0], before[0]));
    CHECK(bitwise_equal(after[2], before[2]));
    CHECK_FALSE(bitwise_equal(after[1], before[1]));
    CHECK_FALSE(bitwise_equal(after[3], before[3]));
  }
}

TEST_CASE("swapping hands leaves hand features unchanged over 1000 instances") {
  std::mt19937_64 rng(23);
  auto cfg = model_config();
  cfg.backbone.channels = {4, 6};
  const auto m = Model::create(cfg, default_skeletons(), 4);
  int mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    auto s = random_sample(rng, 4);
    const auto before = features(m, channel_inputs(s));
    std::swap(s.channel(Channel::left_hand), s.channel(Channel::right_hand));
    const auto after = features(m, channel_inputs(s));
    mismatches += !bitwise_equal(after[0], before[0]) || !bitwise_equal(after[3], before[3]);
  }
  CHECK(mismatches == 0);
}

TEST_CASE("end-to-end gradient check through backbone, fusion and global head") {
  for (const auto& r : run_end2end_gradchecks(8, 1e-3, 1e-3, 2024)) {
    INFO(r.name << ": " << r.max_relative_error << " at " << r.worst);
    CHECK(r.passed());
  }
}
