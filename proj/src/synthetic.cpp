#include "lcc/synthetic.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include <json.hpp>

#include "lcc/dataset.hpp"
#include "lcc/errors.hpp"
#include "lcc/streams.hpp"

namespace lcc {

namespace {

constexpr double kQuantum = 1e-4;

double quantize(double x) { return std::nearbyint(x / kQuantum) * kQuantum; }

struct Wave {
  double amplitude, frequency, phase;
};

// Patterns, templates and samples draw from separate generators so that,
// e.g., changing the split sizes leaves the class patterns untouched.
std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

std::vector<std::array<std::vector<Wave>, 4>> draw_waves(const SyntheticSpec& spec) {
  auto rng = stream_rng(spec.seed, 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::bernoulli_distribution coin(0.5);
  const std::size_t sd = spatial_dims(spec.dims);
  std::vector<std::array<std::vector<Wave>, 4>> waves(spec.classes);
  for (auto& per_class : waves)
    for (Channel c : kChannels) {
      auto& w = per_class[static_cast<std::size_t>(c)];
      w.resize(channel_nodes(c) * sd);
      for (auto& x : w) x = {spec.pattern_scale * normal(rng), coin(rng) ? 2.0 : 1.0, phase(rng)};
    }
  return waves;
}

std::array<KeypointArray, 4> render(const SyntheticSpec& spec, const std::array<std::vector<Wave>, 4>& waves,
                                    std::size_t length) {
  const std::size_t sd = spatial_dims(spec.dims);
  std::array<KeypointArray, 4> out;
  for (Channel c : kChannels) {
    const auto ci = static_cast<std::size_t>(c);
    const std::size_t n_count = channel_nodes(c);
    KeypointArray a(length, spec.dims, n_count);
    for (std::size_t t = 0; t < length; ++t) {
      const double u = static_cast<double>(t) / static_cast<double>(length);
      for (std::size_t d = 0; d < sd; ++d)
        for (std::size_t n = 0; n < n_count; ++n) {
          const Wave& w = waves[ci][n * sd + d];
          a.at(t, d, n) = w.amplitude * std::sin(2.0 * std::numbers::pi * w.frequency * u + w.phase);
        }
    }
    out[ci] = std::move(a);
  }
  return out;
}

WordEmbeddingTable make_words(const SyntheticSpec& spec, const std::vector<std::string>& glosses) {
  const std::size_t groups = spec.group_count();
  const std::size_t basis = groups + spec.classes;
  const std::size_t dim = spec.word_dim == 0 ? basis : spec.word_dim;

  // Orthonormal rows from Gram-Schmidt on Gaussian draws.
  auto rng = stream_rng(spec.seed, 2);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> q;
  while (q.size() < basis) {
    std::vector<double> v(dim);
    for (auto& x : v) x = normal(rng);
    for (const auto& b : q) {
      double dot = 0.0;
      for (std::size_t k = 0; k < dim; ++k) dot += v[k] * b[k];
      for (std::size_t k = 0; k < dim; ++k) v[k] -= dot * b[k];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-6) continue;
    for (auto& x : v) x /= norm;
    q.push_back(std::move(v));
  }

  // v_j = cos(theta) b_group + sin(theta) r_j, so same-group pairs have
  // cosine cos^2(theta) and other pairs are orthogonal.
  const double cos_t = std::sqrt(kSyntheticGroupCosine);
  const double sin_t = std::sqrt(1.0 - kSyntheticGroupCosine);
  WordEmbeddingTable table;
  table.vocab = glosses;
  table.dim = dim;
  table.vectors = Tensor({spec.classes, dim}, 0.0);
  for (std::size_t j = 0; j < spec.classes; ++j) {
    const auto& b = q[spec.group_of(j)];
    const auto& r = q[groups + j];
    for (std::size_t k = 0; k < dim; ++k) table.vectors.at({j, k}) = cos_t * b[k] + sin_t * r[k];
  }
  return table;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (classes < 2) throw ConfigError("synthetic: need at least 2 classes");
  if (frames < 1) throw ConfigError("synthetic: frames must be positive");
  if (window_min < 1 || window_min > window_max)
    throw ConfigError("synthetic: window bounds must satisfy 1 <= min <= max");
  if (window_max > frames) throw ConfigError("synthetic: window max exceeds frames");
  if (concept_groups > classes) throw ConfigError("synthetic: more concept groups than classes");
  if (dims < 1) throw ConfigError("synthetic: dims must be positive");
  if (word_dim != 0 && word_dim < group_count() + classes)
    throw ConfigError("synthetic: word_dim must be at least groups + classes = " +
                      std::to_string(group_count() + classes));
  if (noise_scale < 0.0 || !std::isfinite(noise_scale) || !std::isfinite(pattern_scale))
    throw ConfigError("synthetic: scales must be finite and noise non-negative");
}

std::array<KeypointArray, 4> class_pattern(const SyntheticSpec& spec, std::size_t label, std::size_t length) {
  spec.validate();
  if (label >= spec.classes) throw ContractViolation("class_pattern: label out of range");
  return render(spec, draw_waves(spec)[label], length);
}

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticDataset ds;
  const int width = spec.classes > 1 ? static_cast<int>(std::to_string(spec.classes - 1).size()) : 1;
  for (std::size_t j = 0; j < spec.classes; ++j) {
    std::string num = std::to_string(j);
    ds.glosses.push_back("sign" + std::string(static_cast<std::size_t>(width) - num.size(), '0') + num);
  }
  ds.words = make_words(spec, ds.glosses);

  const auto waves = draw_waves(spec);
  const std::size_t sd = spatial_dims(spec.dims);

  auto tpl_rng = stream_rng(spec.seed, 3);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::array<std::vector<double>, 4> templates;
  for (Channel c : kChannels) {
    auto& tp = templates[static_cast<std::size_t>(c)];
    tp.resize(channel_nodes(c) * sd);
    for (auto& x : tp) x = uni(tpl_rng);
  }

  auto rng = stream_rng(spec.seed, 4);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto make_split = [&](const std::string& split, std::size_t count) {
    std::vector<KeypointSample> out;
    const int w = static_cast<int>(std::to_string(count > 0 ? count - 1 : 0).size());
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t label = i % spec.classes;
      const std::size_t len =
          std::uniform_int_distribution<std::size_t>(spec.window_min, spec.window_max)(rng);
      const std::size_t start = std::uniform_int_distribution<std::size_t>(0, spec.frames - len)(rng);
      const auto pattern = render(spec, waves[label], len);

      KeypointSample s;
      std::string num = std::to_string(i);
      s.sample_id = split + "_" + std::string(static_cast<std::size_t>(w) - num.size(), '0') + num;
      s.label = label;
      s.fps = 25.0;
      for (Channel c : kChannels) {
        const auto ci = static_cast<std::size_t>(c);
        const std::size_t n_count = channel_nodes(c);
        KeypointArray a(spec.frames, spec.dims, n_count);
        for (std::size_t t = 0; t < spec.frames; ++t)
          for (std::size_t d = 0; d < spec.dims; ++d)
            for (std::size_t n = 0; n < n_count; ++n) {
              if (d >= sd) {
                a.at(t, d, n) = 1.0;
                continue;
              }
              double v = templates[ci][n * sd + d] + spec.noise_scale * normal(rng);
              if (t >= start && t < start + len) v += pattern[ci].at(t - start, d, n);
              a.at(t, d, n) = quantize(v);
            }
        s.channel(c) = std::move(a);
      }
      ds.windows[s.sample_id] = {start, start + len};
      out.push_back(std::move(s));
    }
    return out;
  };
  ds.train = make_split("train", spec.train);
  ds.val = make_split("val", spec.val);
  ds.test = make_split("test", spec.test);
  return ds;
}

void save_windows(const std::filesystem::path& path, const std::map<std::string, Window>& windows) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [id, w] : windows) j[id] = {w.first, w.second};
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  os << j.dump() << '\n';
}

std::map<std::string, Window> load_windows(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("windows: cannot open " + path.string());
  std::map<std::string, Window> out;
  try {
    const auto j = nlohmann::json::parse(is);
    for (const auto& [id, w] : j.items()) {
      const auto a = w.at(0).get<std::size_t>(), b = w.at(1).get<std::size_t>();
      if (a >= b) throw DataError("windows: empty window for " + id);
      out[id] = {a, b};
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("windows " + path.string() + ": " + e.what());
  }
  return out;
}

void write_synthetic(const std::filesystem::path& dir, const SyntheticDataset& ds) {
  write_dataset(dir, ds.glosses, {{"train", ds.train}, {"val", ds.val}, {"test", ds.test}});
  save_word_embeddings(dir / "words.txt", ds.words);
  save_windows(dir / "windows.json", ds.windows);
}

}  // namespace lcc
