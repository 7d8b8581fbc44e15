#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lcc/lcc_head.hpp"
#include "lcc/model.hpp"
#include "lcc/synthetic.hpp"
#include "lcc/trainer.hpp"

namespace lcc {

/// Rows x columns grid plus labels; rendered with brightness increasing in
/// value between vmin and vmax.
struct HeatmapExport {
  Tensor values;  // [rows, cols]
  std::vector<std::string> row_labels;
  double vmin = 0.0, vmax = 1.0;
};

/// Black -> red -> yellow -> white; each channel is non-decreasing in `v`.
std::array<unsigned char, 3> heat_color(double v, double vmin, double vmax);
/// Binary P6, `cell` pixels per grid entry.
void write_ppm(const std::filesystem::path& path, const HeatmapExport& h, std::size_t cell = 8);
void write_heatmap_csv(const std::filesystem::path& path, const HeatmapExport& h);

/// Square matrix with the glosses as header row and first column.
std::string format_matrix_csv(const Tensor& m, const std::vector<std::string>& glosses);
void write_matrix_csv(const std::filesystem::path& path, const Tensor& m, const std::vector<std::string>& glosses);

/// S_E | one blank column | S_F, on the [-1, 1] range.
HeatmapExport side_by_side(const Tensor& left, const Tensor& right, const std::vector<std::string>& glosses);

struct SampleLocalisation {
  std::string sample_id;
  Localisation loc;
  std::size_t frames_per_step = 1;
  std::size_t frames = 0;  // after resampling
  std::optional<double> iou;
};

/// Runs the global head on a prepared copy of `s`. The target is the label
/// when present, else the top-scoring class. `truth` is in the sample's own
/// frames and is rescaled to the resampled length.
SampleLocalisation localise_sample(const Model& model, const TrainConfig& cfg, const KeypointSample& s,
                                   const std::optional<Window>& truth);

/// Columns t, background, q_target, argmax, iou; one row per T' step.
std::string format_localisation_csv(const SampleLocalisation& l, const std::vector<std::string>& glosses);
/// V class rows then a background row, T' columns.
HeatmapExport localisation_heatmap(const SampleLocalisation& l, const std::vector<std::string>& glosses);

}  // namespace lcc
