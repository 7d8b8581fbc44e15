#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lcc/keypoints.hpp"
#include "lcc/word_vectors.hpp"

namespace lcc {

struct SyntheticSpec {
  std::size_t classes = 10;
  std::size_t frames = 64;
  std::size_t window_min = 16;
  std::size_t window_max = 32;
  double noise_scale = 0.3;
  double pattern_scale = 1.0;
  /// Classes j with equal j*groups/classes share a meaning group. 0 puts every
  /// class in its own group.
  std::size_t concept_groups = 0;
  /// Sample totals per split; labels are assigned round-robin.
  std::size_t train = 400, val = 100, test = 100;
  std::size_t dims = 3;
  /// 0 picks the smallest dimension that fits (groups + classes).
  std::size_t word_dim = 0;
  std::uint64_t seed = 1;

  /// Throws ConfigError on an invalid combination.
  void validate() const;
  std::size_t group_count() const { return concept_groups == 0 ? classes : concept_groups; }
  std::size_t group_of(std::size_t label) const { return label * group_count() / classes; }
};

/// Half-open frame range [start, end).
using Window = std::pair<std::size_t, std::size_t>;

struct SyntheticDataset {
  std::vector<std::string> glosses;
  std::vector<KeypointSample> train, val, test;
  WordEmbeddingTable words;
  std::map<std::string, Window> windows;
};

/// Within-group word-vector cosine of the generated table.
inline constexpr double kSyntheticGroupCosine = 0.92;

SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

/// The additive motion of `label` over a window of `length` frames, laid out
/// like a sample's channels (confidence dims stay zero).
std::array<KeypointArray, 4> class_pattern(const SyntheticSpec& spec, std::size_t label, std::size_t length);

/// Writes manifest.json, per-sample files, words.txt and windows.json.
void write_synthetic(const std::filesystem::path& dir, const SyntheticDataset& ds);

std::map<std::string, Window> load_windows(const std::filesystem::path& path);
void save_windows(const std::filesystem::path& path, const std::map<std::string, Window>& windows);

}  // namespace lcc
