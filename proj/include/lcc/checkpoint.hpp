#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

#include "lcc/tensor.hpp"

namespace lcc {

/// Named parameter tensors; ordered so serialization is deterministic.
using ParameterSet = std::map<std::string, Tensor>;

inline constexpr int kCheckpointVersion = 1;

/// Self-describing container: format tag, version, free-form metadata and
/// (name, shape, row-major float64 values) records.
struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  ParameterSet params;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

/// Copies `loaded` into `target`, requiring identical names and shapes.
/// Throws DataError listing every mismatch.
void restore_parameters(ParameterSet& target, const ParameterSet& loaded);

}  // namespace lcc
