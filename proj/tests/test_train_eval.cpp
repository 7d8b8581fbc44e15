#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "lcc/errors.hpp"
#include "lcc/synthetic.hpp"
#include "lcc/trainer.hpp"

using namespace lcc;

namespace {

// Straight-line Adam with decoupled decay, one scalar at a time.
struct ScalarAdam {
  double m = 0, v = 0;
  int t = 0;
  double step(double p, double g, double lr, double wd) {
    ++t;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
    return p - lr * mh / (std::sqrt(vh) + 1e-8) - lr * wd * p;
  }
};

SyntheticSpec small_synthetic() {
  SyntheticSpec sp;
  sp.frames = 32;
  sp.window_min = 8;
  sp.window_max = 16;
  sp.train = 100;
  sp.val = 20;
  sp.test = 20;
  sp.concept_groups = 5;
  sp.seed = 4;
  return sp;
}

ModelConfig tiny_model(std::size_t vocab) {
  ModelConfig mc;
  mc.backbone.channels = {4, 8};
  mc.backbone.strides = {2, 2};
  mc.vocab = vocab;
  return mc;
}

TrainConfig quick_train(std::size_t epochs) {
  TrainConfig tc;
  tc.schedule.epochs = epochs;
  tc.schedule.warmup_epochs = 0;
  tc.schedule.base_lr = 0.003;
  tc.batch_size = 8;
  tc.sequence_length = 0;
  return tc;
}

}  // namespace

TEST_CASE("adam_step examples") {
  ParameterSet p{{"w", Tensor({1}, 2.0)}, {"head.global.E", Tensor({1}, 2.0)}};
  OptimizerState st;
  adam_step(p, {}, st, 0.01, 0.1);
  CHECK(p["w"][0] == doctest::Approx(2.0 - 0.01 * 0.1 * 2.0).epsilon(1e-15));
  CHECK(p["head.global.E"][0] == 2.0);
  CHECK(st.step == 1);
  adam_step(p, {}, st, 0.01, 0.1);
  CHECK(st.step == 2);

  ParameterSet q{{"x", Tensor({1}, 0.0)}};
  OptimizerState s2;
  adam_step(q, {{"x", Tensor({1}, 0.5)}}, s2, 0.001, 0.0);
  CHECK(q["x"][0] == doctest::Approx(-0.001).epsilon(1e-6));

  CHECK_THROWS_AS(adam_step(q, {{"x", Tensor({2}, 0.5)}}, s2, 0.001, 0.0), ContractViolation);
  CHECK_THROWS_AS(adam_step(q, {{"y", Tensor({1}, 0.5)}}, s2, 0.001, 0.0), ContractViolation);
  CHECK(!decays("head.mouth.E"));
  CHECK(decays("fusion.W"));
}

TEST_CASE("adam_step matches a scalar reference over random trajectories") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    ParameterSet p{{"a", Tensor({3})}};
    for (auto& v : p["a"].values()) v = n(rng);
    std::vector<ScalarAdam> ref(3);
    std::vector<double> want(p["a"].values().begin(), p["a"].values().end());
    OptimizerState st;
    for (int s = 0; s < 20; ++s) {
      Tensor g({3});
      for (auto& v : g.values()) v = n(rng);
      const double lr = 0.01 * (1 + s % 3), wd = 0.01;
      adam_step(p, {{"a", g}}, st, lr, wd);
      for (int i = 0; i < 3; ++i) want[i] = ref[i].step(want[i], g[i], lr, wd);
    }
    for (int i = 0; i < 3; ++i) CHECK(p["a"][i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
}

TEST_CASE("lr_at examples") {
  LrSchedule s;
  s.base_lr = 0.0012;
  s.warmup_epochs = 10;
  s.epochs = 100;
  CHECK(lr_at(s, 5) == doctest::Approx(0.0006).epsilon(1e-15));
  CHECK(lr_at(s, 0) == 0.0);
  CHECK(lr_at(s, 10) == doctest::Approx(0.0012).epsilon(1e-15));
  CHECK(lr_at(s, 99) < 0.0012 * 0.001);
  CHECK(lr_at(s, 99) > 0.0);
  for (std::size_t e = 11; e < 100; ++e) CHECK(lr_at(s, e) <= lr_at(s, e - 1));
  CHECK_THROWS_AS(lr_at(s, 100), ContractViolation);

  LrSchedule m;
  m.kind = ScheduleKind::multistep;
  m.base_lr = 0.0012;
  m.epochs = 25;
  CHECK(lr_at(m, 15) == doctest::Approx(0.00012).epsilon(1e-15));
  CHECK(lr_at(m, 9) == 0.0012);
  CHECK(lr_at(m, 10) == doctest::Approx(0.00012).epsilon(1e-15));
  CHECK(lr_at(m, 20) == doctest::Approx(0.000012).epsilon(1e-15));

  s.warmup_epochs = 100;
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("train config presets") {
  const auto iso = TrainConfig::isolated();
  CHECK(iso.batch_size == 64);
  CHECK(iso.schedule.base_lr == 0.0012);
  CHECK(iso.weight_decay == 1e-4);
  CHECK(iso.schedule.kind == ScheduleKind::warmup_cosine);
  CHECK(iso.schedule.warmup_epochs == 10);
  CHECK(iso.schedule.epochs == 100);
  CHECK(iso.sequence_length == 64);
  const auto con = TrainConfig::continuous();
  CHECK(con.schedule.kind == ScheduleKind::multistep);
  CHECK(con.schedule.milestones == std::vector<std::size_t>{10, 20});
  CHECK(con.schedule.factor == 0.1);
  CHECK(con.schedule.epochs == 25);
  CHECK(con.sequence_length == 16);
}

TEST_CASE("evaluate examples") {
  const std::vector<std::vector<double>> pred{{0.9, 0.1}, {0.2, 0.8}, {0.3, 0.7}};
  const auto m = evaluate_scores(pred, {0, 1, 0}, {1, 2});
  CHECK(m.at(1).instance == doctest::Approx(2.0 / 3.0));
  CHECK(m.at(1).per_class == doctest::Approx(0.75));
  CHECK(m.at(2).instance == 1.0);
  CHECK(m.at(2).per_class == 1.0);
  CHECK(m.class_counts == std::vector<std::size_t>{2, 1});

  const auto perfect = evaluate_scores({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, {0, 1, 2}, {1, 5});
  for (const auto& t : perfect.topk) {
    CHECK(t.instance == 1.0);
    CHECK(t.per_class == 1.0);
  }
  CHECK_THROWS_AS(evaluate_scores({}, {}, {1}), ContractViolation);
  CHECK_THROWS_AS(m.at(3), ContractViolation);
  // classes without samples are left out of the per-class mean
  const auto absent = evaluate_scores({{0.9, 0.1, 0.0}, {0.9, 0.1, 0.0}}, {0, 1}, {1});
  CHECK(absent.at(1).per_class == doctest::Approx(0.5));
}

TEST_CASE("rank_of breaks ties toward the lower index") {
  CHECK(rank_of({0.5, 0.5}, 0) == 0);
  CHECK(rank_of({0.5, 0.5}, 1) == 1);
  CHECK(rank_of({0.1, 0.7, 0.2}, 1) == 0);
  CHECK(rank_of({0.1, 0.7, 0.2}, 0) == 2);
}

TEST_CASE("metric ordering and range over 1000 random evaluations") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t v = 1 + rng() % 12, n = 1 + rng() % 30;
    std::vector<std::vector<double>> scores(n, std::vector<double>(v));
    std::vector<std::size_t> labels(n);
    for (std::size_t s = 0; s < n; ++s) {
      for (auto& x : scores[s]) x = std::round(u(rng) * 4) / 4;  // frequent ties
      labels[s] = rng() % v;
    }
    const auto m = evaluate_scores(scores, labels, {1, 5, v});
    CHECK(m.at(1).instance <= m.at(5).instance);
    CHECK(m.at(1).per_class <= m.at(5).per_class);
    CHECK(m.at(v).instance == 1.0);
    CHECK(m.at(v).per_class == doctest::Approx(1.0));
    for (const auto& t : m.topk) {
      CHECK(t.instance >= 0.0);
      CHECK(t.instance <= 1.0);
      CHECK(t.per_class >= 0.0);
      CHECK(t.per_class <= 1.0 + 1e-15);
    }
  }
}

TEST_CASE("ensemble_streams examples") {
  const std::vector<double> a{0.6, 0.4}, b{0.2, 0.8};
  CHECK(ensemble_streams({a, a}) == a);
  CHECK(ensemble_streams({a}) == a);
  const auto e = ensemble_streams({a, b});
  CHECK(e[0] == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(e[1] == doctest::Approx(0.6).epsilon(1e-15));
  const auto w = ensemble_streams({a, b}, std::vector<double>{3.0, 1.0});
  CHECK(w[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(ensemble_streams({a, {0.1, 0.2, 0.7}}), ContractViolation);
  CHECK_THROWS_AS(ensemble_streams({a, b}, std::vector<double>{1.0}), ContractViolation);
  CHECK_THROWS_AS(ensemble_streams({}), ContractViolation);
}

TEST_CASE("metrics csv layout") {
  const auto m = evaluate_scores({{0.9, 0.1}, {0.2, 0.8}, {0.3, 0.7}}, {0, 1, 0}, {1, 5});
  CHECK(metrics_csv_header({1, 5}) == "split,stream,samples,top1_instance,top5_instance,top1_class,top5_class");
  CHECK(metrics_csv_row("test", "joint", m) == "test,joint,3,0.666666667,1,0.75,1");
}

TEST_CASE("prepare_sample without augmentation is deterministic and resamples") {
  auto sp = small_synthetic();
  sp.train = 2;
  const auto ds = generate_synthetic(sp);
  TrainConfig tc;
  tc.sequence_length = 16;
  const auto graphs = default_skeletons();
  const auto a = prepare_sample(ds.train[0], tc, graphs, nullptr);
  CHECK(a.frames() == 16);
  CHECK(a == prepare_sample(ds.train[0], tc, graphs, nullptr));
  for (std::size_t t = 0; t < 16; ++t) CHECK(a.channel(Channel::body).at(t, 0, 0) == 0.0);
  std::mt19937_64 rng(1);
  CHECK(!(prepare_sample(ds.train[0], tc, graphs, &rng) == a));
}

TEST_CASE("fit step count, determinism and best-checkpoint policy") {
  auto sp = small_synthetic();
  sp.classes = 4;
  sp.concept_groups = 2;
  sp.train = 4;
  sp.val = 4;
  sp.frames = 16;
  const auto ds = generate_synthetic(sp);
  const auto mc = tiny_model(4);
  const auto model = Model::create(mc, default_skeletons(), 1, concept_similarity_matrix(ds.words.vectors));
  auto tc = quick_train(4);
  tc.batch_size = 2;
  const auto r1 = fit(ds.train, ds.val, model, tc);
  const auto r2 = fit(ds.train, ds.val, model, tc);
  REQUIRE(r1.log.size() == 4);
  for (const auto& e : r1.log) CHECK(e.steps == 2);
  CHECK(format_log(r1.log) == format_log(r2.log));
  for (const auto& [name, t] : r1.last.params) CHECK(bitwise_equal(t, r2.last.params.at(name)));

  double best = 0;
  for (const auto& e : r1.log) best = std::max(best, e.val_top1);
  CHECK(r1.best_val_top1 == best);
  CHECK(r1.log[r1.best_epoch].val_top1 == best);
  for (std::size_t e = 0; e < r1.best_epoch; ++e) CHECK(r1.log[e].val_top1 < best);
  CHECK(evaluate(ds.val, r1.best, tc).at(1).instance == best);

  auto tc3 = tc;
  tc3.batch_size = 3;
  for (const auto& e : fit(ds.train, ds.val, model, tc3).log) CHECK(e.steps == 2);

  CHECK_THROWS_AS(fit({}, ds.val, model, tc), ContractViolation);
  CHECK_THROWS_AS(fit(ds.train, {}, model, tc), ContractViolation);
}

TEST_CASE("log records carry every field") {
  EpochRecord r;
  r.epoch = 3;
  r.lr = 0.5;
  r.loss_concept = std::array<double, 4>{1, 2, 3, 4};
  const auto j = epoch_record_json(r);
  for (const char* k : {"epoch", "lr", "loss_total", "loss_rec", "loss_concept", "val_top1", "val_top5"})
    CHECK(j.contains(k));
  CHECK(j["loss_concept"]["pose"] == 3.0);
  CHECK(j["loss_rec"].contains("global"));
  r.loss_concept.reset();
  CHECK(epoch_record_json(r)["loss_concept"]["hands"].is_null());
  CHECK(format_log({r, r}).find('\n') == format_log({r, r}).size() / 2 - 1);
}

TEST_CASE("non-finite loss names the first offending op") {
  auto sp = small_synthetic();
  sp.classes = 2;
  sp.concept_groups = 0;
  sp.train = 2;
  sp.val = 2;
  sp.frames = 16;
  const auto ds = generate_synthetic(sp);
  auto model = Model::create(tiny_model(2), default_skeletons(), 1, concept_similarity_matrix(ds.words.vectors));
  for (auto& v : model.params["fusion.W"].values()) v = 1.5e308;
  try {
    fit(ds.train, ds.val, model, quick_train(1));
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    const std::string msg = e.what();
    INFO(msg);
    CHECK(msg.find("first produced by") != std::string::npos);
    CHECK(msg.find("op '") != std::string::npos);
    CHECK(msg.find("epoch 0") != std::string::npos);
  }
}

TEST_CASE("training loss halves by epoch 20 and concept alignment improves") {
  SyntheticSpec sp;
  sp.concept_groups = 5;
  const auto ds = generate_synthetic(sp);
  const Tensor S_F = concept_similarity_matrix(ds.words.vectors);
  auto mc = tiny_model(10);
  mc.backbone.channels = {8, 16};
  const auto model = Model::create(mc, default_skeletons(), 2, S_F);
  const double init_mse = concept_loss(concept_similarity_matrix(model.table(HeadSlot::global)), S_F);
  auto tc = quick_train(20);
  tc.batch_size = 16;
  const auto r = fit(ds.train, ds.val, model, tc);
  INFO("epoch 1 loss " << r.log.front().loss_total << ", epoch 20 loss " << r.log.back().loss_total);
  CHECK(r.log.back().loss_total < 0.5 * r.log.front().loss_total);
  CHECK(concept_loss(concept_similarity_matrix(r.best.table(HeadSlot::global)), S_F) < init_mse);
}
