#pragma once

#include <functional>
#include <optional>
#include <random>
#include <vector>

#include <json.hpp>

#include "lcc/metrics.hpp"
#include "lcc/model.hpp"
#include "lcc/optim.hpp"
#include "lcc/streams.hpp"

namespace lcc {

enum class CheckpointPolicy { best_val, last };

struct TrainConfig {
  std::size_t batch_size = 64;
  LrSchedule schedule;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
  /// Frames after resampling; 0 keeps each clip's own length.
  std::size_t sequence_length = 64;
  StreamKind stream = StreamKind::joint;
  bool augment_enabled = true;
  AugmentParams augment{-10.0, 10.0, 0.9, 1.1, -0.1, 0.1};
  bool center = true;
  CheckpointPolicy checkpoint = CheckpointPolicy::best_val;

  void validate() const;
  static TrainConfig isolated();
  static TrainConfig continuous();
};

/// Root-centering, stream derivation, optional augmentation, resampling.
KeypointSample prepare_sample(const KeypointSample& s, const TrainConfig& cfg, const SkeletonSet& graphs,
                              std::mt19937_64* augment_rng);

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  std::size_t steps = 0;
  double loss_total = 0.0;
  std::array<double, 4> loss_rec{};                     // by head slot
  std::optional<std::array<double, 4>> loss_concept;  // absent when no concept term is computed
  double val_top1 = 0.0;
  double val_top5 = 0.0;
};

nlohmann::ordered_json epoch_record_json(const EpochRecord& r);
/// One compact JSON object per line.
std::string format_log(const std::vector<EpochRecord>& log);

struct FitResult {
  Model best;
  Model last;
  std::vector<EpochRecord> log;
  std::size_t best_epoch = 0;
  double best_val_top1 = 0.0;

  const Model& selected(CheckpointPolicy p) const { return p == CheckpointPolicy::best_val ? best : last; }
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Per-sample graphs; the batch gradient is the mean of per-sample gradients
/// summed in batch order. Throws NumericalError naming the first op to
/// produce a non-finite value.
FitResult fit(const std::vector<KeypointSample>& train, const std::vector<KeypointSample>& val, Model model,
              const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Global-head class scores of every sample, prepared without augmentation.
std::vector<std::vector<double>> score_samples(const Model& model, const std::vector<KeypointSample>& data,
                                               const TrainConfig& cfg);

std::vector<std::size_t> labels_of(const std::vector<KeypointSample>& data);

Metrics evaluate(const std::vector<KeypointSample>& data, const Model& model, const TrainConfig& cfg,
                 const std::vector<std::size_t>& ks = {1, 5});

}  // namespace lcc
