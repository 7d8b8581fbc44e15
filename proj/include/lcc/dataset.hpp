#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "lcc/keypoints.hpp"

namespace lcc {

/// manifest.json: {"glosses": [...], "splits": {"train": ["a.json", ...], ...}}
/// File names are relative to the dataset directory.
struct Manifest {
  std::vector<std::string> glosses;
  std::map<std::string, std::vector<std::string>> splits;

  std::size_t vocab_size() const { return glosses.size(); }
};

Manifest load_manifest(const std::filesystem::path& dir);
void save_manifest(const std::filesystem::path& dir, const Manifest& m);

nlohmann::json sample_to_json(const KeypointSample& s);
/// `vocab_size` bounds the label; pass 0 to skip the check.
KeypointSample sample_from_json(const nlohmann::json& j, std::size_t vocab_size, const std::string& origin);

KeypointSample read_sample_file(const std::filesystem::path& path, std::size_t vocab_size);
void write_sample_file(const std::filesystem::path& path, const KeypointSample& s);

/// Loads and validates every sample of `split`. An empty split yields an
/// empty list; a split the manifest does not name is a DataError.
std::vector<KeypointSample> load_dataset(const std::filesystem::path& dir, const std::string& split);

/// Writes manifest.json plus one `<sample_id>.json` per sample.
void write_dataset(const std::filesystem::path& dir, const std::vector<std::string>& glosses,
                   const std::map<std::string, std::vector<KeypointSample>>& splits);

}  // namespace lcc
