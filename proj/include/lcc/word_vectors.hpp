#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lcc/tensor.hpp"

namespace lcc {

struct WordEmbeddingTable {
  std::vector<std::string> vocab;
  std::size_t dim = 0;
  Tensor vectors;  // [V, dim], row i belongs to vocab[i]
};

/// Text format: header "count dim", then "token v1 ... v_dim" per line.
/// Rows are reordered to vocab order. A gloss missing as a token falls back
/// to the mean of its space-separated words when all of them are present;
/// otherwise it is an error unless `allow_missing`, in which case it gets a
/// seeded random unit vector.
WordEmbeddingTable parse_word_embeddings(const std::string& text, const std::vector<std::string>& vocab,
                                         bool allow_missing, std::uint64_t seed);
WordEmbeddingTable load_word_embeddings(const std::filesystem::path& path, const std::vector<std::string>& vocab,
                                        bool allow_missing, std::uint64_t seed);

/// Writes the table in the same text format (tokens must not contain spaces
/// to be read back as exact tokens).
std::string format_word_embeddings(const WordEmbeddingTable& table);
void save_word_embeddings(const std::filesystem::path& path, const WordEmbeddingTable& table);

}  // namespace lcc
