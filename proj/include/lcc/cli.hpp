#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lcc/config.hpp"
#include "lcc/export.hpp"
#include "lcc/metrics.hpp"

namespace lcc {

/// Environment variable naming the default output directory.
inline constexpr const char* kOutputDirEnv = "LCC_OUTPUT_DIR";

/// Everything a run reads from disk or generates.
struct RunData {
  std::vector<std::string> glosses;
  std::map<std::string, std::vector<KeypointSample>> splits;
  std::optional<WordEmbeddingTable> words;
  std::map<std::string, Window> windows;  // empty unless known
  SkeletonSet graphs;
};

/// `need_words` turns a missing word-vector source into a DataError.
RunData load_run_data(const RunConfig& cfg, bool need_words);

struct GenSynthOptions {
  SyntheticSpec spec;
  std::filesystem::path out;
  bool force = false;
};
void cmd_gen_synth(const GenSynthOptions& opt, std::ostream& out);

/// Command-line values; set fields win over the config file.
struct TrainOverrides {
  std::optional<std::string> dataset, word_vectors, graph_config, output_dir;
  std::optional<bool> allow_missing_words;
  std::optional<std::uint64_t> seed;
  std::optional<LossKind> loss;
  std::optional<double> alpha, beta, tau;
  std::optional<std::vector<HeadSlot>> heads;
  std::optional<std::vector<StreamKind>> streams;
  std::optional<std::size_t> epochs, batch_size, warmup_epochs, sequence_length, extra_slots, variations;
  std::optional<double> base_lr, weight_decay;
  std::optional<ScheduleKind> schedule;
  std::optional<std::vector<std::size_t>> milestones, channels, strides;
  std::optional<bool> augment, drop_mask;
  std::optional<std::size_t> groups;
};
RunConfig apply_overrides(RunConfig cfg, const TrainOverrides& o);

struct StreamRun {
  StreamKind stream = StreamKind::joint;
  std::filesystem::path checkpoint, log;
  FitResult result;
  std::optional<double> concept_mse;  // selected model, when S_F is known
};

/// Trains one model per stream into <output_dir>/<stream>/{checkpoint.json,log.ndjson}.
/// Epoch progress goes to `progress` when given.
std::vector<StreamRun> cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream* progress = nullptr);

struct EvalOptions {
  std::vector<std::filesystem::path> checkpoints;
  std::optional<std::string> dataset;  // default: the data the first checkpoint was trained on
  std::string split = "test";
  std::vector<std::size_t> topk = {1, 5};
  std::optional<std::vector<double>> weights;
  std::optional<std::filesystem::path> csv;  // default: stdout
};
struct EvalResult {
  std::vector<std::pair<std::string, Metrics>> rows;  // streams, then "ensemble"
  std::string csv;
};
EvalResult cmd_eval(const EvalOptions& opt, std::ostream& out);

struct LocalizeOptions {
  std::filesystem::path checkpoint;
  std::optional<std::string> dataset;
  std::string split = "test";
  std::vector<std::string> samples;  // empty: the whole split
  std::filesystem::path out_dir;
  std::size_t cell = 8;
};
struct LocalizeResult {
  std::vector<SampleLocalisation> samples;
  std::optional<double> mean_iou;
  std::optional<double> fraction_iou_03;
};
LocalizeResult cmd_localize(const LocalizeOptions& opt, std::ostream& out);

struct ExportSimOptions {
  std::vector<std::filesystem::path> checkpoints;  // one or two
  std::optional<std::filesystem::path> word_vectors;
  std::filesystem::path out_dir;
  std::size_t cell = 16;
};
/// MSE(S_E, S_F) per checkpoint.
std::vector<double> cmd_export_sim(const ExportSimOptions& opt, std::ostream& out);

enum class GradcheckScope { ops, head, end2end, all };
std::optional<GradcheckScope> parse_gradcheck_scope(std::string_view s);
struct GradcheckOptions {
  GradcheckScope scope = GradcheckScope::all;
  std::optional<std::size_t> instances;  // per-scope defaults otherwise
  std::uint64_t seed = 2024;
};
/// True when every check passed.
bool cmd_gradcheck(const GradcheckOptions& opt, std::ostream& out);

/// 0 ok, 1 config/usage, 2 data, 3 numerical.
int exit_code_for(const std::exception& e);

}  // namespace lcc
