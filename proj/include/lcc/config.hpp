#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lcc/model.hpp"
#include "lcc/synthetic.hpp"
#include "lcc/trainer.hpp"

namespace lcc {

/// Everything one experiment needs. Serialized as nested JSON; see README for
/// the schema. Unknown fields are rejected.
struct RunConfig {
  /// Dataset directory with manifest.json; unset means generate from `synthetic`.
  std::optional<std::string> dataset;
  SyntheticSpec synthetic;
  /// Word-vector text file; unset means the dataset's words.txt when present,
  /// otherwise the synthetic generator's table.
  std::optional<std::string> word_vectors;
  bool allow_missing_words = false;
  std::optional<std::string> graph_config;

  ModelConfig model;  // vocab is taken from the dataset
  TrainConfig train;
  std::vector<StreamKind> streams = {StreamKind::joint};
  std::string output_dir;
  std::uint64_t seed = 0;

  /// Defaults with output_dir from $LCC_OUTPUT_DIR (else "lcc_runs").
  static RunConfig defaults();
  void validate() const;
};

std::string default_output_dir();

nlohmann::ordered_json run_config_to_json(const RunConfig& c);
/// Fields absent from `j` keep the values in `base`.
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = RunConfig::defaults());
RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const std::filesystem::path& path, const RunConfig& c);

nlohmann::ordered_json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = {});
nlohmann::ordered_json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});
nlohmann::ordered_json synthetic_spec_to_json(const SyntheticSpec& s);
SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j, SyntheticSpec base = {});

std::vector<StreamKind> parse_stream_list(const std::string& csv);
std::vector<std::size_t> parse_size_list(const std::string& csv);

/// A trained model with what is needed to use it on new data.
struct ModelCheckpoint {
  Model model;
  std::vector<std::string> glosses;
  StreamKind stream = StreamKind::joint;
  TrainConfig train;
  nlohmann::json meta;
};

void save_model_checkpoint(const std::filesystem::path& path, const Model& model,
                           const std::vector<std::string>& glosses, StreamKind stream, const TrainConfig& train,
                           const nlohmann::json& extra = nlohmann::json::object());
ModelCheckpoint load_model_checkpoint(const std::filesystem::path& path);

}  // namespace lcc
