#include "lcc/export.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "lcc/backbone.hpp"
#include "lcc/errors.hpp"
#include "lcc/metrics.hpp"

namespace lcc {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  return os;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

unsigned char byte(double x) { return static_cast<unsigned char>(std::lround(255.0 * std::clamp(x, 0.0, 1.0))); }

}  // namespace

std::array<unsigned char, 3> heat_color(double v, double vmin, double vmax) {
  double x = vmax > vmin ? (v - vmin) / (vmax - vmin) : 0.0;
  if (!std::isfinite(x)) x = 0.0;
  x = std::clamp(x, 0.0, 1.0);
  return {byte(3.0 * x), byte(3.0 * x - 1.0), byte(3.0 * x - 2.0)};
}

void write_ppm(const std::filesystem::path& path, const HeatmapExport& h, std::size_t cell) {
  if (h.values.rank() != 2) throw ContractViolation("write_ppm: heatmap must be 2-D");
  if (cell == 0) throw ContractViolation("write_ppm: cell size must be positive");
  const std::size_t rows = h.values.dim(0), cols = h.values.dim(1);
  auto os = open_out(path);
  os << "P6\n" << cols * cell << ' ' << rows * cell << "\n255\n";
  std::vector<char> line(cols * cell * 3);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = h.values[r * cols + c];
      const auto rgb = std::isnan(v) ? std::array<unsigned char, 3>{64, 64, 64} : heat_color(v, h.vmin, h.vmax);
      for (std::size_t k = 0; k < cell; ++k)
        std::copy(rgb.begin(), rgb.end(), line.begin() + static_cast<long>((c * cell + k) * 3));
    }
    for (std::size_t k = 0; k < cell; ++k) os.write(line.data(), static_cast<std::streamsize>(line.size()));
  }
}

void write_heatmap_csv(const std::filesystem::path& path, const HeatmapExport& h) {
  const std::size_t rows = h.values.dim(0), cols = h.values.dim(1);
  auto os = open_out(path);
  os << "row";
  for (std::size_t c = 0; c < cols; ++c) os << ',' << c;
  os << '\n';
  for (std::size_t r = 0; r < rows; ++r) {
    os << csv_field(r < h.row_labels.size() ? h.row_labels[r] : std::to_string(r));
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = h.values[r * cols + c];
      os << ',' << (std::isnan(v) ? std::string() : format_csv_number(v));
    }
    os << '\n';
  }
}

std::string format_matrix_csv(const Tensor& m, const std::vector<std::string>& glosses) {
  const std::size_t n = glosses.size();
  if (m.shape() != Shape{n, n}) throw ContractViolation("matrix csv: shape does not match the gloss list");
  std::string out = "gloss";
  for (const auto& g : glosses) out += "," + csv_field(g);
  out += '\n';
  for (std::size_t i = 0; i < n; ++i) {
    out += csv_field(glosses[i]);
    for (std::size_t j = 0; j < n; ++j) out += "," + format_csv_number(m[i * n + j]);
    out += '\n';
  }
  return out;
}

void write_matrix_csv(const std::filesystem::path& path, const Tensor& m, const std::vector<std::string>& glosses) {
  auto os = open_out(path);
  os << format_matrix_csv(m, glosses);
}

HeatmapExport side_by_side(const Tensor& left, const Tensor& right, const std::vector<std::string>& glosses) {
  const std::size_t n = glosses.size();
  if (left.shape() != Shape{n, n} || right.shape() != Shape{n, n})
    throw ContractViolation("side_by_side: both matrices must be V x V");
  const std::size_t cols = 2 * n + 1;
  std::vector<double> v(n * cols, std::nan(""));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      v[i * cols + j] = left[i * n + j];
      v[i * cols + n + 1 + j] = right[i * n + j];
    }
  return {Tensor(Shape{n, cols}, std::move(v)), glosses, -1.0, 1.0};
}

SampleLocalisation localise_sample(const Model& model, const TrainConfig& cfg, const KeypointSample& s,
                                   const std::optional<Window>& truth) {
  if (model.config.loss != LossKind::lcc) throw ConfigError("localisation needs an LCC head");
  const KeypointSample p = prepare_sample(s, cfg, model.graphs, nullptr);
  Graph g;
  const auto params = bind_parameters(g, model.params);
  const auto out = model_forward(g, model, params, channel_inputs(p), std::nullopt, false);
  const auto& head = out.heads[static_cast<std::size_t>(HeadSlot::global)];
  if (!head.lcc) throw ConfigError("localisation needs the global head enabled");
  const Tensor q = g.value(head.lcc->q);
  const std::size_t vocab = model.config.vocab;
  const std::size_t target = s.label ? *s.label : argmax(g.value(out.scores).values());

  SampleLocalisation r;
  r.sample_id = s.sample_id;
  r.loc = localise(q, vocab, target);
  r.frames = p.frames();
  r.frames_per_step = 1;
  for (std::size_t st : model.config.backbone.strides) r.frames_per_step *= st;
  if (truth) {
    const double scale = static_cast<double>(p.frames()) / static_cast<double>(s.frames());
    const auto conv = [&](std::size_t f) {
      return std::min(p.frames(), static_cast<std::size_t>(std::nearbyint(static_cast<double>(f) * scale)));
    };
    r.iou = segment_iou(r.loc.segments, r.frames_per_step, r.frames, {conv(truth->first), conv(truth->second)});
  }
  return r;
}

std::string format_localisation_csv(const SampleLocalisation& l, const std::vector<std::string>& glosses) {
  const std::size_t steps = l.loc.background.size();
  const std::size_t vocab = glosses.size();
  std::string out = "t,background,q_target,argmax,iou\n";
  const std::string iou = l.iou ? format_csv_number(*l.iou) : std::string();
  for (std::size_t t = 0; t < steps; ++t) {
    const std::size_t a = l.loc.argmax[t];
    const std::string label = a < vocab ? glosses[a] : "<extra" + std::to_string(a - vocab) + ">";
    out += std::to_string(t) + "," + format_csv_number(l.loc.background[t]) + "," +
           format_csv_number(l.loc.per_class[t * vocab + l.loc.target]) + "," + csv_field(label) + "," + iou + "\n";
  }
  return out;
}

HeatmapExport localisation_heatmap(const SampleLocalisation& l, const std::vector<std::string>& glosses) {
  const std::size_t steps = l.loc.background.size();
  const std::size_t vocab = glosses.size();
  if (l.loc.per_class.shape() != Shape{steps, vocab})
    throw ContractViolation("localisation_heatmap: gloss list does not match the vocabulary");
  std::vector<double> v((vocab + 1) * steps);
  for (std::size_t c = 0; c < vocab; ++c)
    for (std::size_t t = 0; t < steps; ++t) v[c * steps + t] = l.loc.per_class[t * vocab + c];
  for (std::size_t t = 0; t < steps; ++t) v[vocab * steps + t] = l.loc.background[t];
  auto labels = glosses;
  labels.push_back("background");
  return {Tensor(Shape{vocab + 1, steps}, std::move(v)), std::move(labels), 0.0, 1.0};
}

}  // namespace lcc
