#include "lcc/dataset.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "lcc/errors.hpp"

namespace lcc {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json read_json(const fs::path& path, const std::string& what) {
  std::ifstream is(path);
  if (!is) throw DataError(what + ": cannot open " + path.string());
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw DataError(what + " " + path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  os << j.dump() << '\n';
}

}  // namespace

Manifest load_manifest(const fs::path& dir) {
  const json j = read_json(dir / "manifest.json", "manifest");
  Manifest m;
  try {
    m.glosses = j.at("glosses").get<std::vector<std::string>>();
    for (const auto& [name, files] : j.at("splits").items()) m.splits[name] = files.get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw DataError("manifest " + (dir / "manifest.json").string() + ": " + e.what());
  }
  std::set<std::string> seen;
  for (const auto& g : m.glosses)
    if (!seen.insert(g).second) throw DataError("manifest: duplicate gloss '" + g + "'");
  return m;
}

void save_manifest(const fs::path& dir, const Manifest& m) {
  json splits = json::object();
  for (const auto& [name, files] : m.splits) splits[name] = files;
  write_json(dir / "manifest.json", json{{"glosses", m.glosses}, {"splits", splits}});
}

json sample_to_json(const KeypointSample& s) {
  json channels = json::object();
  for (Channel c : kChannels) {
    const auto& a = s.channel(c);
    json frames = json::array();
    for (std::size_t t = 0; t < a.frames; ++t) {
      json dims = json::array();
      for (std::size_t d = 0; d < a.dims; ++d) {
        const auto begin = a.values.begin() + static_cast<std::ptrdiff_t>((t * a.dims + d) * a.nodes);
        dims.push_back(std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(a.nodes)));
      }
      frames.push_back(std::move(dims));
    }
    channels[std::string(channel_name(c))] = std::move(frames);
  }
  return json{{"sample_id", s.sample_id},
              {"fps", s.fps},
              {"label", s.label ? json(*s.label) : json(nullptr)},
              {"channels", std::move(channels)}};
}

KeypointSample sample_from_json(const json& j, std::size_t vocab_size, const std::string& origin) {
  KeypointSample s;
  std::string who = "sample " + origin;
  auto fail = [&](const std::string& msg) -> DataError { return DataError(who + ": " + msg); };

  if (!j.is_object()) throw fail("expected a JSON object");
  if (!j.contains("sample_id") || !j["sample_id"].is_string()) throw fail("missing string field sample_id");
  s.sample_id = j["sample_id"].get<std::string>();
  who = "sample '" + s.sample_id + "'";
  if (j.contains("fps")) {
    if (!j["fps"].is_number()) throw fail("fps is not numeric");
    s.fps = j["fps"].get<double>();
  }
  if (j.contains("label") && !j["label"].is_null()) {
    const auto& l = j["label"];
    if (!l.is_number_integer()) throw fail("label is not an integer");
    const auto v = l.get<long long>();
    if (v < 0 || (vocab_size > 0 && static_cast<std::size_t>(v) >= vocab_size))
      throw fail("label " + std::to_string(v) + " outside [0," + std::to_string(vocab_size) + ")");
    s.label = static_cast<std::size_t>(v);
  }
  if (!j.contains("channels") || !j["channels"].is_object()) throw fail("missing channels object");
  const auto& chans = j["channels"];
  for (Channel c : kChannels) {
    const std::string name(channel_name(c));
    if (!chans.contains(name)) throw fail("missing channel " + name);
    const auto& frames = chans[name];
    if (!frames.is_array() || frames.empty()) throw fail(name + " must be a non-empty T x D x N array");
    const std::size_t t_count = frames.size();
    if (!frames[0].is_array() || frames[0].empty()) throw fail(name + " frame 0 must be a D x N array");
    const std::size_t d_count = frames[0].size();
    if (!frames[0][0].is_array()) throw fail(name + " frame 0 dim 0 must be an array of nodes");
    const std::size_t n_count = frames[0][0].size();
    if (n_count != channel_nodes(c))
      throw fail(name + " expects " + std::to_string(channel_nodes(c)) + " nodes, got " + std::to_string(n_count));
    KeypointArray a(t_count, d_count, n_count);
    for (std::size_t t = 0; t < t_count; ++t) {
      const auto& fr = frames[t];
      if (!fr.is_array() || fr.size() != d_count)
        throw fail(name + " frame " + std::to_string(t) + " does not have " + std::to_string(d_count) + " dims");
      for (std::size_t d = 0; d < d_count; ++d) {
        const auto& row = fr[d];
        if (!row.is_array() || row.size() != n_count)
          throw fail(name + " expects " + std::to_string(n_count) + " nodes, got " +
                     (row.is_array() ? std::to_string(row.size()) : std::string("a non-array")) + " at frame " +
                     std::to_string(t));
        for (std::size_t n = 0; n < n_count; ++n) {
          if (!row[n].is_number())
            throw fail(name + " non-numeric value at frame " + std::to_string(t) + ", dim " + std::to_string(d) +
                       ", node " + std::to_string(n));
          a.at(t, d, n) = row[n].get<double>();
        }
      }
    }
    s.channel(c) = std::move(a);
  }
  validate_sample(s);
  return s;
}

KeypointSample read_sample_file(const fs::path& path, std::size_t vocab_size) {
  return sample_from_json(read_json(path, "sample"), vocab_size, path.filename().string());
}

void write_sample_file(const fs::path& path, const KeypointSample& s) { write_json(path, sample_to_json(s)); }

std::vector<KeypointSample> load_dataset(const fs::path& dir, const std::string& split) {
  const Manifest m = load_manifest(dir);
  const auto it = m.splits.find(split);
  if (it == m.splits.end()) throw DataError("manifest has no split '" + split + "'");
  std::vector<KeypointSample> out;
  out.reserve(it->second.size());
  for (const auto& file : it->second) out.push_back(read_sample_file(dir / file, m.vocab_size()));
  return out;
}

void write_dataset(const fs::path& dir, const std::vector<std::string>& glosses,
                   const std::map<std::string, std::vector<KeypointSample>>& splits) {
  fs::create_directories(dir);
  Manifest m;
  m.glosses = glosses;
  for (const auto& [name, samples] : splits) {
    auto& files = m.splits[name];
    for (const auto& s : samples) {
      const std::string file = s.sample_id + ".json";
      write_sample_file(dir / file, s);
      files.push_back(file);
    }
  }
  save_manifest(dir, m);
}

}  // namespace lcc
