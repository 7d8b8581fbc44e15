#include "lcc/word_vectors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include "lcc/errors.hpp"

namespace lcc {

namespace {

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

bool parse_double(const std::string& tok, double& out) {
  const char* end = tok.data() + tok.size();
  auto [p, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc() && p == end && std::isfinite(out);
}

}  // namespace

WordEmbeddingTable parse_word_embeddings(const std::string& text, const std::vector<std::string>& vocab,
                                         bool allow_missing, std::uint64_t seed) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;

  std::size_t count = 0, dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto toks = split_ws(line);
    if (toks.empty()) continue;
    double c = 0, d = 0;
    if (toks.size() != 2 || !parse_double(toks[0], c) || !parse_double(toks[1], d) || c < 0 || d < 1 ||
        c != std::floor(c) || d != std::floor(d))
      throw DataError("word vectors line " + std::to_string(line_no) + ": expected header \"count dim\"");
    count = static_cast<std::size_t>(c);
    dim = static_cast<std::size_t>(d);
    break;
  }
  if (dim == 0) throw DataError("word vectors: missing header");

  std::unordered_map<std::string, std::vector<double>> rows;
  std::size_t row_count = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (toks.size() != dim + 1)
      throw DataError("word vectors line " + std::to_string(line_no) + ": expected token plus " +
                      std::to_string(dim) + " values, got " + std::to_string(toks.size() - 1));
    std::vector<double> v(dim);
    for (std::size_t i = 0; i < dim; ++i)
      if (!parse_double(toks[i + 1], v[i]))
        throw DataError("word vectors line " + std::to_string(line_no) + ": non-numeric value '" + toks[i + 1] + "'");
    rows.emplace(toks[0], std::move(v));
    ++row_count;
  }
  if (row_count != count)
    throw DataError("word vectors: header declares " + std::to_string(count) + " rows, found " +
                    std::to_string(row_count));

  std::set<std::string> uniq;
  for (const auto& g : vocab)
    if (!uniq.insert(g).second) throw DataError("word vectors: duplicate gloss '" + g + "' in vocabulary");

  WordEmbeddingTable table;
  table.vocab = vocab;
  table.dim = dim;
  if (vocab.empty()) throw DataError("word vectors: empty vocabulary");
  table.vectors = Tensor({vocab.size(), dim}, 0.0);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::string> missing;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    std::vector<double> v;
    if (auto it = rows.find(vocab[i]); it != rows.end()) {
      v = it->second;
    } else {
      const auto words = split_ws(vocab[i]);
      bool all = words.size() > 1;
      for (const auto& w : words) all = all && rows.count(w);
      if (all) {
        v.assign(dim, 0.0);
        for (const auto& w : words)
          for (std::size_t k = 0; k < dim; ++k) v[k] += rows[w][k] / static_cast<double>(words.size());
      }
    }
    if (v.empty()) {
      if (!allow_missing) {
        missing.push_back(vocab[i]);
        continue;
      }
      double norm = 0.0;
      do {
        v.assign(dim, 0.0);
        norm = 0.0;
        for (auto& x : v) {
          x = normal(rng);
          norm += x * x;
        }
      } while (norm == 0.0);
      for (auto& x : v) x /= std::sqrt(norm);
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    if (norm == 0.0) throw DataError("word vectors: gloss '" + vocab[i] + "' has a zero vector");
    for (std::size_t k = 0; k < dim; ++k) table.vectors.at({i, k}) = v[k];
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& g : missing) list += (list.empty() ? "'" : ", '") + g + "'";
    throw DataError("word vectors: missing glosses " + list);
  }
  return table;
}

WordEmbeddingTable load_word_embeddings(const std::filesystem::path& path, const std::vector<std::string>& vocab,
                                        bool allow_missing, std::uint64_t seed) {
  std::ifstream is(path);
  if (!is) throw DataError("word vectors: cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_word_embeddings(ss.str(), vocab, allow_missing, seed);
}

std::string format_word_embeddings(const WordEmbeddingTable& t) {
  std::ostringstream os;
  os.precision(17);
  os << t.vocab.size() << ' ' << t.dim << '\n';
  for (std::size_t i = 0; i < t.vocab.size(); ++i) {
    os << t.vocab[i];
    for (std::size_t k = 0; k < t.dim; ++k) os << ' ' << t.vectors.at({i, k});
    os << '\n';
  }
  return os.str();
}

void save_word_embeddings(const std::filesystem::path& path, const WordEmbeddingTable& table) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  os << format_word_embeddings(table);
}

}  // namespace lcc
