#include "lcc/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "lcc/errors.hpp"

namespace lcc {

using nlohmann::json;

json checkpoint_to_json(const Checkpoint& ckpt) {
  json tensors = json::array();
  for (const auto& [name, t] : ckpt.params)
    tensors.push_back({{"name", name}, {"shape", t.shape()}, {"values", t.data()}});
  return {{"format", "lcc-checkpoint"}, {"version", kCheckpointVersion}, {"meta", ckpt.meta},
          {"tensors", std::move(tensors)}};
}

Checkpoint checkpoint_from_json(const json& j) {
  if (!j.is_object() || j.value("format", "") != "lcc-checkpoint")
    throw DataError("checkpoint: missing 'lcc-checkpoint' format tag");
  const int version = j.value("version", -1);
  if (version != kCheckpointVersion)
    throw DataError("checkpoint: unsupported format version " + std::to_string(version));
  Checkpoint ckpt;
  ckpt.meta = j.value("meta", json::object());
  try {
    for (const auto& rec : j.at("tensors")) {
      auto name = rec.at("name").get<std::string>();
      ckpt.params.emplace(name, Tensor(rec.at("shape").get<Shape>(), rec.at("values").get<std::vector<double>>()));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint: malformed tensor record: ") + e.what());
  } catch (const ContractViolation& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("checkpoint: cannot write " + path.string());
  os << checkpoint_to_json(ckpt).dump() << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("checkpoint: cannot open " + path.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw DataError("checkpoint: " + path.string() + " is not valid JSON: " + e.what());
  }
  return checkpoint_from_json(j);
}

void restore_parameters(ParameterSet& target, const ParameterSet& loaded) {
  std::ostringstream problems;
  std::size_t count = 0;
  for (const auto& [name, t] : target) {
    auto it = loaded.find(name);
    if (it == loaded.end()) {
      problems << "\n  missing " << name;
      ++count;
    } else if (it->second.shape() != t.shape()) {
      problems << "\n  " << name << ": expected " << shape_str(t.shape()) << ", found "
               << shape_str(it->second.shape());
      ++count;
    }
  }
  for (const auto& [name, t] : loaded)
    if (!target.count(name)) {
      problems << "\n  unexpected " << name;
      ++count;
    }
  if (count)
    throw DataError("checkpoint: " + std::to_string(count) + " parameter mismatch(es):" + problems.str());
  for (auto& [name, t] : target) t = loaded.at(name);
}

}  // namespace lcc
