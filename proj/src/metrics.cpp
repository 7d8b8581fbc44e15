#include "lcc/metrics.hpp"

#include <algorithm>
#include <cstdio>

#include "lcc/errors.hpp"

namespace lcc {

const TopKAccuracy& Metrics::at(std::size_t k) const {
  for (const auto& t : topk)
    if (t.k == k) return t;
  throw ContractViolation("metrics: top-" + std::to_string(k) + " was not evaluated");
}

std::size_t rank_of(const std::vector<double>& scores, std::size_t label) {
  if (label >= scores.size())
    throw ContractViolation("rank_of: label " + std::to_string(label) + " outside " +
                            std::to_string(scores.size()) + " scores");
  const double s = scores[label];
  std::size_t r = 0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (scores[i] > s || (scores[i] == s && i < label)) ++r;
  return r;
}

Metrics evaluate_scores(const std::vector<std::vector<double>>& scores, const std::vector<std::size_t>& labels,
                        const std::vector<std::size_t>& ks) {
  if (scores.empty()) throw ContractViolation("evaluate: empty dataset");
  if (scores.size() != labels.size())
    throw ContractViolation("evaluate: " + std::to_string(scores.size()) + " score vectors for " +
                            std::to_string(labels.size()) + " labels");
  const std::size_t v = scores[0].size();
  for (const auto& s : scores)
    if (s.size() != v) throw ContractViolation("evaluate: score vectors differ in length");
  for (std::size_t k : ks)
    if (k == 0) throw ContractViolation("evaluate: k must be positive");

  Metrics m;
  m.samples = scores.size();
  m.class_counts.assign(v, 0);
  m.class_top1.assign(v, 0);
  std::vector<std::size_t> ranks(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    ranks[i] = rank_of(scores[i], labels[i]);
    ++m.class_counts[labels[i]];
    if (ranks[i] == 0) ++m.class_top1[labels[i]];
  }
  for (std::size_t k : ks) {
    TopKAccuracy acc{k, 0.0, 0.0};
    std::vector<std::size_t> hits(v, 0);
    std::size_t total = 0;
    for (std::size_t i = 0; i < scores.size(); ++i)
      if (ranks[i] < k) {
        ++total;
        ++hits[labels[i]];
      }
    acc.instance = static_cast<double>(total) / static_cast<double>(scores.size());
    std::size_t present = 0;
    for (std::size_t c = 0; c < v; ++c) {
      if (m.class_counts[c] == 0) continue;
      ++present;
      acc.per_class += static_cast<double>(hits[c]) / static_cast<double>(m.class_counts[c]);
    }
    acc.per_class /= static_cast<double>(present);
    m.topk.push_back(acc);
  }
  return m;
}

std::vector<double> ensemble_streams(const std::vector<std::vector<double>>& streams,
                                     const std::optional<std::vector<double>>& weights) {
  if (streams.empty()) throw ContractViolation("ensemble_streams: no streams");
  const std::size_t v = streams[0].size();
  for (const auto& s : streams)
    if (s.size() != v)
      throw ContractViolation("ensemble_streams: stream lengths differ (" + std::to_string(v) + " vs " +
                              std::to_string(s.size()) + ")");
  std::vector<double> w(streams.size(), 1.0);
  if (weights) {
    if (weights->size() != streams.size())
      throw ContractViolation("ensemble_streams: " + std::to_string(weights->size()) + " weights for " +
                              std::to_string(streams.size()) + " streams");
    w = *weights;
  }
  double total = 0.0;
  for (double x : w) {
    if (!(x >= 0.0)) throw ContractViolation("ensemble_streams: weights must be non-negative");
    total += x;
  }
  if (!(total > 0.0)) throw ContractViolation("ensemble_streams: weights sum to zero");
  std::vector<double> out(v, 0.0);
  for (std::size_t s = 0; s < streams.size(); ++s)
    for (std::size_t i = 0; i < v; ++i) out[i] += w[s] / total * streams[s][i];
  return out;
}

std::string format_csv_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string metrics_csv_header(const std::vector<std::size_t>& ks) {
  std::string h = "split,stream,samples";
  for (std::size_t k : ks) h += ",top" + std::to_string(k) + "_instance";
  for (std::size_t k : ks) h += ",top" + std::to_string(k) + "_class";
  return h;
}

std::string metrics_csv_row(const std::string& split, const std::string& stream, const Metrics& m) {
  std::string r = split + "," + stream + "," + std::to_string(m.samples);
  for (const auto& t : m.topk) r += "," + format_csv_number(t.instance);
  for (const auto& t : m.topk) r += "," + format_csv_number(t.per_class);
  return r;
}

}  // namespace lcc
