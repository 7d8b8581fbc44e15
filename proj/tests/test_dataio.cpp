#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "lcc/dataset.hpp"
#include "lcc/errors.hpp"
#include "lcc/skeleton.hpp"
#include "lcc/streams.hpp"
#include "lcc/synthetic.hpp"
#include "lcc/word_vectors.hpp"

using namespace lcc;
namespace fs = std::filesystem;

namespace {

KeypointSample random_sample(std::mt19937_64& rng, std::size_t frames, std::size_t dims) {
  std::normal_distribution<double> normal(0.0, 1.0);
  KeypointSample s;
  s.sample_id = "s";
  s.label = 0;
  for (Channel c : kChannels) {
    KeypointArray a(frames, dims, channel_nodes(c));
    for (auto& v : a.values) v = normal(rng);
    s.channel(c) = std::move(a);
  }
  return s;
}

// Every channel a single chain of `nodes` nodes rooted at 0.
SkeletonSet chain_skeletons(std::size_t nodes) {
  SkeletonSet set;
  std::vector<Edge> chain;
  for (std::size_t i = 1; i < nodes; ++i) chain.emplace_back(i - 1, i);
  for (Channel c : kChannels) set[c] = SkeletonGraph::build(nodes, chain);
  return set;
}

KeypointSample tiny_sample(std::size_t frames, std::size_t dims, std::size_t nodes, std::vector<double> body) {
  KeypointSample s;
  s.sample_id = "tiny";
  for (Channel c : kChannels) s.channel(c) = KeypointArray(frames, dims, nodes);
  s.channel(Channel::body).values = std::move(body);
  return s;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("lcc_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

double cosine(const Tensor& m, std::size_t i, std::size_t j) {
  double dot = 0, ni = 0, nj = 0;
  for (std::size_t k = 0; k < m.dim(1); ++k) {
    dot += m.at({i, k}) * m.at({j, k});
    ni += m.at({i, k}) * m.at({i, k});
    nj += m.at({j, k}) * m.at({j, k});
  }
  return dot / std::sqrt(ni * nj);
}

}  // namespace

TEST_CASE("normalized adjacency of a single edge") {
  const Tensor a = normalized_adjacency(2, {{0, 1}});
  for (double v : a.values()) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("default skeletons: layout sizes, symmetric adjacency, bone forest") {
  const auto set = default_skeletons();
  for (Channel c : kChannels) {
    const auto& g = set[c];
    CHECK(g.node_count == channel_nodes(c));
    const auto& a = g.normalized_adjacency;
    for (std::size_t i = 0; i < g.node_count; ++i) {
      for (std::size_t j = 0; j < g.node_count; ++j) {
        CHECK(std::isfinite(a.at({i, j})));
        CHECK(a.at({i, j}) == a.at({j, i}));
      }
      // walking up parents must reach a root within N steps
      std::size_t n = i, steps = 0;
      while (g.bone_parent[n] && steps <= g.node_count) {
        n = *g.bone_parent[n];
        ++steps;
      }
      CHECK(steps <= g.node_count);
      CHECK_FALSE(g.bone_parent[n].has_value());
    }
  }
  // extra links take part in aggregation but not in bone parents
  const auto& body = set[Channel::body];
  CHECK(body.normalized_adjacency.at({9, 8}) > 0.0);
  CHECK(*body.bone_parent[9] == 7);
}

TEST_CASE("graph config round-trips and reports bad lines") {
  const auto set = default_skeletons();
  const auto again = parse_graph_config(format_graph_config(set));
  for (Channel c : kChannels) {
    CHECK(again[c].base_edges == set[c].base_edges);
    CHECK(again[c].extra_links == set[c].extra_links);
  }
  const auto custom = parse_graph_config("# override body links\n[body]\nedges 0-1 1-2\nextra 0-2\n");
  CHECK(custom[Channel::body].node_count == 17);
  CHECK(custom[Channel::body].extra_links == std::vector<Edge>{{0, 2}});
  CHECK(custom[Channel::mouth].base_edges == set[Channel::mouth].base_edges);

  try {
    parse_graph_config("[body]\nedges 0-1\nedges 3x4\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_graph_config("[body]\nedges 0-17\n"), ConfigError);
  CHECK_THROWS_AS(parse_graph_config("[tail]\n"), ConfigError);
}

TEST_CASE("derive_stream examples") {
  const auto graphs1 = chain_skeletons(1);
  SUBCASE("joint motion of a 1-node series") {
    const auto s = tiny_sample(3, 1, 1, {0, 1, 3});
    const auto m = derive_stream(s, StreamKind::joint_motion, graphs1);
    CHECK(m.channel(Channel::body).values == std::vector<double>{1, 2, 0});
  }
  SUBCASE("bone on a two-node chain") {
    // layout [t][d][n]: a=(0,0), b=(1,1)
    const auto s = tiny_sample(1, 2, 2, {0, 1, 0, 1});
    const auto b = derive_stream(s, StreamKind::bone, chain_skeletons(2));
    const auto& a = b.channel(Channel::body);
    CHECK(a.at(0, 0, 1) == 1.0);
    CHECK(a.at(0, 1, 1) == 1.0);
    CHECK(a.at(0, 0, 0) == 0.0);
    CHECK(a.at(0, 1, 0) == 0.0);
  }
  SUBCASE("joint is the identity") {
    std::mt19937_64 rng(3);
    const auto s = random_sample(rng, 5, 3);
    CHECK(derive_stream(s, StreamKind::joint, default_skeletons()) == s);
  }
}

TEST_CASE("bone motion equals joint motion of the bone stream") {
  std::mt19937_64 rng(11);
  const auto graphs = default_skeletons();
  for (int i = 0; i < 20; ++i) {
    const auto s = random_sample(rng, 2 + static_cast<std::size_t>(i % 5), 3);
    const auto composed =
        derive_stream(derive_stream(s, StreamKind::bone, graphs), StreamKind::joint_motion, graphs);
    CHECK(derive_stream(s, StreamKind::bone_motion, graphs) == composed);
  }
}

TEST_CASE("augment examples") {
  auto point = [](double x, double y) { return tiny_sample(1, 2, 1, {x, y}); };
  std::mt19937_64 rng(1);
  SUBCASE("identity ranges") {
    std::mt19937_64 r2(5);
    const auto s = random_sample(r2, 4, 3);
    CHECK(augment(s, AugmentParams{}, rng) == s);
  }
  SUBCASE("rotation by 90 degrees") {
    AugmentParams p;
    p.rotation_min_deg = p.rotation_max_deg = 90.0;
    const auto out = augment(point(1, 0), p, rng);
    const auto& a = out.channel(Channel::body);
    CHECK(a.at(0, 0, 0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(a.at(0, 1, 0) == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("scale by two") {
    AugmentParams p;
    p.scale_min = p.scale_max = 2.0;
    const auto out = augment(point(0.3, -0.5), p, rng);
    const auto& a = out.channel(Channel::body);
    CHECK(a.at(0, 0, 0) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(a.at(0, 1, 0) == doctest::Approx(-1.0).epsilon(1e-15));
  }
}

TEST_CASE("augment preserves shapes, keeps confidence, and applies one transform to all channels") {
  std::mt19937_64 rng(21);
  AugmentParams p{-15, 15, 0.9, 1.1, -0.1, 0.1};
  for (int i = 0; i < 50; ++i) {
    const auto s = random_sample(rng, 3, 3);
    const auto a = augment(s, p, rng);
    for (Channel c : kChannels) {
      const auto &x = s.channel(c), &y = a.channel(c);
      CHECK(y.frames == x.frames);
      CHECK(y.dims == x.dims);
      CHECK(y.nodes == x.nodes);
      for (std::size_t t = 0; t < x.frames; ++t)
        for (std::size_t n = 0; n < x.nodes; ++n) CHECK(y.at(t, 2, n) == x.at(t, 2, n));
    }
    // distances between any two points scale by the same factor everywhere
    auto dist = [](const KeypointArray& k, std::size_t t, std::size_t n0, std::size_t n1) {
      return std::hypot(k.at(t, 0, n0) - k.at(t, 0, n1), k.at(t, 1, n0) - k.at(t, 1, n1));
    };
    const double r_body = dist(a.channel(Channel::body), 0, 0, 1) / dist(s.channel(Channel::body), 0, 0, 1);
    const double r_mouth = dist(a.channel(Channel::mouth), 2, 3, 7) / dist(s.channel(Channel::mouth), 2, 3, 7);
    CHECK(r_body == doctest::Approx(r_mouth).epsilon(1e-9));
  }
}

TEST_CASE("resample_length examples and identity") {
  auto series = [](std::size_t t) {
    std::vector<double> v(t);
    for (std::size_t i = 0; i < t; ++i) v[i] = static_cast<double>(i);
    return tiny_sample(t, 1, 1, v);
  };
  CHECK(resample_length(series(4), 2).channel(Channel::body).values == std::vector<double>{0, 2});
  CHECK(resample_length(series(2), 4).channel(Channel::body).values == std::vector<double>{0, 0, 1, 1});
  CHECK(resample_length(series(7), 7) == series(7));

  std::mt19937_64 rng(4);
  for (std::size_t t = 1; t < 30; ++t) {
    const auto s = random_sample(rng, t, 2);
    const std::size_t target = 1 + (t * 7) % 40;
    const auto r = resample_length(s, target);
    CHECK(r.frames() == target);
    CHECK(resample_length(r, target) == r);
  }
}

TEST_CASE("center_on_root zeroes the body root's spatial coordinates") {
  std::mt19937_64 rng(8);
  const auto s = random_sample(rng, 4, 3);
  const auto c = center_on_root(s, 0);
  const auto& body = c.channel(Channel::body);
  for (std::size_t t = 0; t < 4; ++t) {
    CHECK(body.at(t, 0, 0) == 0.0);
    CHECK(body.at(t, 1, 0) == 0.0);
    CHECK(body.at(t, 2, 0) == s.channel(Channel::body).at(t, 2, 0));
    const double dx = s.channel(Channel::mouth).at(t, 0, 5) - s.channel(Channel::body).at(t, 0, 0);
    CHECK(c.channel(Channel::mouth).at(t, 0, 5) == dx);
  }
}

TEST_CASE("dataset files round-trip and loading validates samples") {
  TempDir dir("dataio");
  std::mt19937_64 rng(2);
  auto a = random_sample(rng, 3, 3);
  a.sample_id = "a";
  a.label = 2;
  auto b = random_sample(rng, 5, 2);
  b.sample_id = "b";
  b.label = 0;
  write_dataset(dir.path, {"x", "y", "z"}, {{"train", {a, b}}, {"val", {}}});

  const auto train = load_dataset(dir.path, "train");
  REQUIRE(train.size() == 2);
  CHECK(train[0] == a);
  CHECK(train[1] == b);
  CHECK(load_dataset(dir.path, "val").empty());
  CHECK_THROWS_AS(load_dataset(dir.path, "test"), DataError);
  CHECK(load_manifest(dir.path).glosses == std::vector<std::string>{"x", "y", "z"});

  auto expect_error = [&](nlohmann::json j, const std::string& fragment) {
    try {
      sample_from_json(j, 3, "bad.json");
      FAIL("expected DataError");
    } catch (const DataError& e) {
      INFO(e.what());
      CHECK(std::string(e.what()).find(fragment) != std::string::npos);
      CHECK(std::string(e.what()).find("'a'") != std::string::npos);
    }
  };
  const auto good = sample_to_json(a);
  {
    auto j = good;
    for (auto& frame : j["channels"]["mouth"])
      for (auto& row : frame) row.erase(row.size() - 1);
    expect_error(j, "mouth expects 40 nodes");
  }
  {
    auto j = good;
    j["channels"].erase("left_hand");
    expect_error(j, "missing channel left_hand");
  }
  {
    auto j = good;
    j["channels"]["body"][1][0][4] = "oops";
    expect_error(j, "non-numeric");
  }
  {
    auto j = good;
    j["label"] = 3;
    expect_error(j, "outside [0,3)");
  }
  {
    auto j = good;
    j["channels"]["mouth"].erase(0);
    expect_error(j, "frames");
  }
}

TEST_CASE("word vectors: examples and errors") {
  const std::string text = "2 3\nhello 1 0 0\nworld 0 1 0\n";
  const auto t = parse_word_embeddings(text, {"world", "hello"}, false, 0);
  CHECK(t.vectors.data() == std::vector<double>{0, 1, 0, 1, 0, 0});

  try {
    parse_word_embeddings(text, {"hello", "book", "pen"}, false, 0);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("'book'") != std::string::npos);
    CHECK(std::string(e.what()).find("'pen'") != std::string::npos);
  }

  const auto ic = parse_word_embeddings("2 2\nice 1 0\ncream 0 3\n", {"ice cream"}, false, 0);
  CHECK(ic.vectors.data() == std::vector<double>{0.5, 1.5});

  try {
    parse_word_embeddings("2 2\nice 1 0\ncream 0 x\n", {"ice"}, false, 0);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_word_embeddings("2 2\nice 1 0 4\n", {"ice"}, false, 0), DataError);
  CHECK_THROWS_AS(parse_word_embeddings("1 2\nnil 0 0\n", {"nil"}, false, 0), DataError);

  const auto filled = parse_word_embeddings(text, {"hello", "book"}, true, 9);
  double norm = 0;
  for (std::size_t k = 0; k < 3; ++k) norm += filled.vectors.at({1, k}) * filled.vectors.at({1, k});
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(bitwise_equal(filled.vectors, parse_word_embeddings(text, {"hello", "book"}, true, 9).vectors));
}

TEST_CASE("word vector rows follow vocab order regardless of file order") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 8, dim = 4;
    std::vector<std::string> vocab;
    std::vector<std::vector<double>> vecs;
    for (std::size_t i = 0; i < n; ++i) {
      vocab.push_back("w" + std::to_string(i));
      std::vector<double> v(dim);
      for (auto& x : v) x = std::round(normal(rng) * 1000) / 1000;
      vecs.push_back(v);
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::string text = std::to_string(n) + " " + std::to_string(dim) + "\n";
    for (auto i : order) {
      text += vocab[i];
      for (double x : vecs[i]) text += " " + std::to_string(x);
      text += "\n";
    }
    auto query = vocab;
    std::shuffle(query.begin(), query.end(), rng);
    const auto t = parse_word_embeddings(text, query, false, 0);
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t src = static_cast<std::size_t>(std::stoi(query[r].substr(1)));
      for (std::size_t k = 0; k < dim; ++k) CHECK(t.vectors.at({r, k}) == doctest::Approx(vecs[src][k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("synthetic generation is seed-deterministic and honours windows") {
  SyntheticSpec spec;
  spec.classes = 4;
  spec.frames = 24;
  spec.window_min = 6;
  spec.window_max = 10;
  spec.train = 12;
  spec.val = 4;
  spec.test = 4;
  spec.seed = 99;
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  CHECK(a.windows == b.windows);
  CHECK(bitwise_equal(a.words.vectors, b.words.vectors));
  CHECK(a.windows.size() == 20);
  for (const auto& [id, w] : a.windows) {
    CHECK(w.second - w.first >= spec.window_min);
    CHECK(w.second - w.first <= spec.window_max);
    CHECK(w.second <= spec.frames);
  }
  for (const auto& s : a.train) validate_sample(s);
  spec.seed = 100;
  CHECK_FALSE(generate_synthetic(spec).train == a.train);
}

TEST_CASE("synthetic word vectors: within-group cosine >= 0.9, cross-group near zero") {
  SyntheticSpec spec;
  spec.classes = 4;
  spec.concept_groups = 2;
  spec.train = spec.val = spec.test = 0;
  const auto ds = generate_synthetic(spec);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      if (i == j) continue;
      const double c = cosine(ds.words.vectors, i, j);
      if (i / 2 == j / 2)
        CHECK(c >= 0.9);
      else
        CHECK(std::abs(c) <= 0.2);
    }
}

TEST_CASE("synthetic class patterns appear only in samples of their class") {
  SyntheticSpec spec;
  spec.classes = 5;
  spec.frames = 20;
  spec.window_min = 5;
  spec.window_max = 12;
  spec.noise_scale = 0.0;
  spec.train = 25;
  spec.val = spec.test = 0;
  const auto ds = generate_synthetic(spec);
  // with no noise the background is a constant pose; pick it from a frame outside the window
  for (const auto& s : ds.train) {
    const auto [start, end] = ds.windows.at(s.sample_id);
    const std::size_t bg = start > 0 ? 0 : spec.frames - 1;
    for (std::size_t k = 0; k < spec.classes; ++k) {
      const auto pattern = class_pattern(spec, k, end - start);
      double err = 0.0;
      for (Channel c : kChannels) {
        const auto& x = s.channel(c);
        for (std::size_t t = start; t < end; ++t)
          for (std::size_t d = 0; d < 2; ++d)
            for (std::size_t n = 0; n < x.nodes; ++n)
              err = std::max(err, std::abs(x.at(t, d, n) - x.at(bg, d, n) -
                                           pattern[static_cast<std::size_t>(c)].at(t - start, d, n)));
      }
      if (k == *s.label)
        CHECK(err <= 2e-4);
      else
        CHECK(err > 0.05);
    }
  }
}

TEST_CASE("synthetic dataset writes loadable files") {
  TempDir dir("synth");
  SyntheticSpec spec;
  spec.classes = 3;
  spec.frames = 16;
  spec.window_min = 4;
  spec.window_max = 8;
  spec.train = 6;
  spec.val = 3;
  spec.test = 3;
  const auto ds = generate_synthetic(spec);
  write_synthetic(dir.path, ds);
  CHECK(load_dataset(dir.path, "train") == ds.train);
  CHECK(load_windows(dir.path / "windows.json") == ds.windows);
  const auto words = load_word_embeddings(dir.path / "words.txt", ds.glosses, false, 0);
  CHECK(bitwise_equal(words.vectors, ds.words.vectors));
}

TEST_CASE("synthetic spec validation") {
  SyntheticSpec spec;
  spec.classes = 1;
  CHECK_THROWS_AS(generate_synthetic(spec), ConfigError);
  spec = SyntheticSpec{};
  spec.window_max = spec.frames + 1;
  CHECK_THROWS_AS(generate_synthetic(spec), ConfigError);
}
