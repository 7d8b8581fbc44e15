#include "lcc/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "lcc/errors.hpp"

namespace lcc {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Reads the fields of one JSON object, remembering which were seen so that
// leftovers can be reported as unknown.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config: '" + where() + "' must be an object");
  }

  const json* get(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <class T>
  void read(const std::string& key, T& out) {
    const json* v = get(key);
    if (!v) return;
    try {
      if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
        if (!v->is_number_unsigned()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, double>) {
        if (!v->is_number()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v->is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v->is_string()) throw ConfigError("");
      }
      out = v->get<T>();
    } catch (const std::exception&) {
      throw ConfigError("config: field '" + field(key) + "' has the wrong type (" + v->dump() + ")");
    }
  }

  void read_optional(const std::string& key, std::optional<std::string>& out) {
    const json* v = get(key);
    if (!v) return;
    if (v->is_null()) {
      out.reset();
    } else if (v->is_string()) {
      out = v->get<std::string>();
    } else {
      throw ConfigError("config: field '" + field(key) + "' must be a string or null");
    }
  }

  void read_sizes(const std::string& key, std::vector<std::size_t>& out) {
    const json* v = get(key);
    if (!v) return;
    if (!v->is_array()) throw ConfigError("config: field '" + field(key) + "' must be an array");
    std::vector<std::size_t> r;
    for (const auto& e : *v) {
      if (!e.is_number_unsigned()) throw ConfigError("config: field '" + field(key) + "' must hold unsigned integers");
      r.push_back(e.get<std::size_t>());
    }
    out = r;
  }

  void read_range(const std::string& key, double& lo, double& hi) {
    const json* v = get(key);
    if (!v) return;
    if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() || !(*v)[1].is_number())
      throw ConfigError("config: field '" + field(key) + "' must be a [min, max] pair");
    lo = (*v)[0].get<double>();
    hi = (*v)[1].get<double>();
  }

  template <class E, class Parse>
  void read_enum(const std::string& key, E& out, Parse parse) {
    std::string s;
    if (!get(key)) return;
    read(key, s);
    const auto e = parse(s);
    if (!e) throw ConfigError("config: field '" + field(key) + "' has unknown value '" + s + "'");
    out = *e;
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "<root>" : path_; }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError("config: unknown field '" + field(k) + "'");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

ordered_json range(double lo, double hi) { return ordered_json::array({lo, hi}); }

}  // namespace

std::string default_output_dir() {
  const char* env = std::getenv("LCC_OUTPUT_DIR");
  return env && *env ? env : "lcc_runs";
}

RunConfig RunConfig::defaults() {
  RunConfig c;
  c.output_dir = default_output_dir();
  return c;
}

void RunConfig::validate() const {
  if (!dataset) synthetic.validate();
  model.backbone.validate();
  if (model.extra_slots < 1) throw ConfigError("config: head.extra_slots must be positive");
  if (model.variations < 1) throw ConfigError("config: head.variations must be positive");
  model.weights.validate();
  model.drop.validate();
  train.validate();
  if (streams.empty()) throw ConfigError("config: at least one stream is required");
  if (output_dir.empty()) throw ConfigError("config: output_dir must not be empty");
}

ordered_json synthetic_spec_to_json(const SyntheticSpec& s) {
  ordered_json j;
  j["classes"] = s.classes;
  j["frames"] = s.frames;
  j["window_min"] = s.window_min;
  j["window_max"] = s.window_max;
  j["noise_scale"] = s.noise_scale;
  j["pattern_scale"] = s.pattern_scale;
  j["concept_groups"] = s.concept_groups;
  j["train"] = s.train;
  j["val"] = s.val;
  j["test"] = s.test;
  j["dims"] = s.dims;
  j["word_dim"] = s.word_dim;
  j["seed"] = s.seed;
  return j;
}

namespace {

SyntheticSpec read_synthetic(Fields f, SyntheticSpec s) {
  f.read("classes", s.classes);
  f.read("frames", s.frames);
  f.read("window_min", s.window_min);
  f.read("window_max", s.window_max);
  f.read("noise_scale", s.noise_scale);
  f.read("pattern_scale", s.pattern_scale);
  f.read("concept_groups", s.concept_groups);
  f.read("train", s.train);
  f.read("val", s.val);
  f.read("test", s.test);
  f.read("dims", s.dims);
  f.read("word_dim", s.word_dim);
  f.read("seed", s.seed);
  f.finish();
  return s;
}

void read_backbone(Fields f, BackboneConfig& b) {
  f.read_sizes("channels", b.channels);
  f.read_sizes("strides", b.strides);
  f.read("window", b.window);
  f.read("dilation", b.dilation);
  f.read("in_dims", b.in_dims);
  f.finish();
}

ordered_json backbone_json(const BackboneConfig& b) {
  ordered_json j;
  j["channels"] = b.channels;
  j["strides"] = b.strides;
  j["window"] = b.window;
  j["dilation"] = b.dilation;
  j["in_dims"] = b.in_dims;
  return j;
}

ordered_json head_json(const ModelConfig& c) {
  ordered_json j;
  j["loss"] = loss_name(c.loss);
  j["extra_slots"] = c.extra_slots;
  j["variations"] = c.variations;
  j["alpha"] = c.weights.alpha;
  j["beta"] = c.weights.beta;
  j["tau"] = c.weights.tau;
  ordered_json heads = ordered_json::array();
  for (HeadSlot h : kHeadSlots)
    if (c.heads_enabled[static_cast<std::size_t>(h)]) heads.push_back(head_name(h));
  j["heads"] = heads;
  return j;
}

void read_head(Fields f, ModelConfig& c) {
  f.read_enum("loss", c.loss, parse_loss);
  f.read("extra_slots", c.extra_slots);
  f.read("variations", c.variations);
  f.read("alpha", c.weights.alpha);
  f.read("beta", c.weights.beta);
  f.read("tau", c.weights.tau);
  if (const json* h = f.get("heads")) {
    if (!h->is_array()) throw ConfigError("config: field '" + f.field("heads") + "' must be an array");
    c.heads_enabled = {false, false, false, false};
    for (const auto& e : *h) {
      const auto slot = e.is_string() ? parse_head(e.get<std::string>()) : std::nullopt;
      if (!slot) throw ConfigError("config: field '" + f.field("heads") + "' has unknown head " + e.dump());
      c.heads_enabled[static_cast<std::size_t>(*slot)] = true;
    }
  }
  f.finish();
}

ordered_json drop_json(const DropMaskSpec& d) {
  ordered_json j;
  j["enabled"] = d.enabled;
  j["p_channel"] = d.p_channel;
  j["p_temporal"] = d.p_temporal;
  return j;
}

void read_drop(Fields f, DropMaskSpec& d) {
  f.read("enabled", d.enabled);
  f.read("p_channel", d.p_channel);
  f.read("p_temporal", d.p_temporal);
  f.finish();
}

void read_train(Fields f, TrainConfig& t) {
  f.read("batch_size", t.batch_size);
  f.read("epochs", t.schedule.epochs);
  f.read("base_lr", t.schedule.base_lr);
  f.read("weight_decay", t.weight_decay);
  f.read_enum("schedule", t.schedule.kind, parse_schedule);
  f.read("warmup_epochs", t.schedule.warmup_epochs);
  f.read_sizes("milestones", t.schedule.milestones);
  f.read("factor", t.schedule.factor);
  f.read("sequence_length", t.sequence_length);
  f.read_enum("stream", t.stream, parse_stream);
  f.read("center", t.center);
  f.read_enum("checkpoint", t.checkpoint, [](std::string_view s) -> std::optional<CheckpointPolicy> {
    if (s == "best_val") return CheckpointPolicy::best_val;
    if (s == "last") return CheckpointPolicy::last;
    return std::nullopt;
  });
  f.read("seed", t.seed);
  if (const json* a = f.get("augment")) {
    Fields g(*a, f.field("augment"));
    g.read("enabled", t.augment_enabled);
    g.read_range("rotation_deg", t.augment.rotation_min_deg, t.augment.rotation_max_deg);
    g.read_range("scale", t.augment.scale_min, t.augment.scale_max);
    g.read_range("shift", t.augment.shift_min, t.augment.shift_max);
    g.finish();
  }
  f.finish();
}

}  // namespace

SyntheticSpec synthetic_spec_from_json(const json& j, SyntheticSpec base) {
  return read_synthetic(Fields(j, "synthetic"), base);
}

ordered_json model_config_to_json(const ModelConfig& c) {
  ordered_json j;
  j["vocab"] = c.vocab;
  j["backbone"] = backbone_json(c.backbone);
  j["head"] = head_json(c);
  j["drop_mask"] = drop_json(c.drop);
  return j;
}

ModelConfig model_config_from_json(const json& j, ModelConfig c) {
  Fields f(j, "model");
  f.read("vocab", c.vocab);
  if (const json* b = f.get("backbone")) read_backbone(Fields(*b, "model.backbone"), c.backbone);
  if (const json* h = f.get("head")) read_head(Fields(*h, "model.head"), c);
  if (const json* d = f.get("drop_mask")) read_drop(Fields(*d, "model.drop_mask"), c.drop);
  f.finish();
  return c;
}

ordered_json train_config_to_json(const TrainConfig& t) {
  ordered_json j;
  j["batch_size"] = t.batch_size;
  j["epochs"] = t.schedule.epochs;
  j["base_lr"] = t.schedule.base_lr;
  j["weight_decay"] = t.weight_decay;
  j["schedule"] = schedule_name(t.schedule.kind);
  j["warmup_epochs"] = t.schedule.warmup_epochs;
  j["milestones"] = t.schedule.milestones;
  j["factor"] = t.schedule.factor;
  j["sequence_length"] = t.sequence_length;
  j["stream"] = stream_name(t.stream);
  j["center"] = t.center;
  j["checkpoint"] = t.checkpoint == CheckpointPolicy::best_val ? "best_val" : "last";
  j["seed"] = t.seed;
  ordered_json a;
  a["enabled"] = t.augment_enabled;
  a["rotation_deg"] = range(t.augment.rotation_min_deg, t.augment.rotation_max_deg);
  a["scale"] = range(t.augment.scale_min, t.augment.scale_max);
  a["shift"] = range(t.augment.shift_min, t.augment.shift_max);
  j["augment"] = a;
  return j;
}

TrainConfig train_config_from_json(const json& j, TrainConfig t) {
  read_train(Fields(j, "train"), t);
  return t;
}

ordered_json run_config_to_json(const RunConfig& c) {
  ordered_json j;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  ordered_json data;
  data["dataset"] = c.dataset ? ordered_json(*c.dataset) : ordered_json(nullptr);
  data["word_vectors"] = c.word_vectors ? ordered_json(*c.word_vectors) : ordered_json(nullptr);
  data["allow_missing_words"] = c.allow_missing_words;
  data["graph_config"] = c.graph_config ? ordered_json(*c.graph_config) : ordered_json(nullptr);
  data["synthetic"] = synthetic_spec_to_json(c.synthetic);
  j["data"] = data;
  j["backbone"] = backbone_json(c.model.backbone);
  j["head"] = head_json(c.model);
  j["drop_mask"] = drop_json(c.model.drop);
  auto train = train_config_to_json(c.train);
  train.erase("stream");
  train.erase("seed");
  j["train"] = train;
  ordered_json streams = ordered_json::array();
  for (StreamKind s : c.streams) streams.push_back(stream_name(s));
  j["streams"] = streams;
  return j;
}

RunConfig run_config_from_json(const json& j, RunConfig c) {
  Fields f(j, "");
  f.read("seed", c.seed);
  f.read("output_dir", c.output_dir);
  if (const json* d = f.get("data")) {
    Fields g(*d, "data");
    g.read_optional("dataset", c.dataset);
    g.read_optional("word_vectors", c.word_vectors);
    g.read("allow_missing_words", c.allow_missing_words);
    g.read_optional("graph_config", c.graph_config);
    if (const json* s = g.get("synthetic")) c.synthetic = read_synthetic(Fields(*s, "data.synthetic"), c.synthetic);
    g.finish();
  }
  if (const json* b = f.get("backbone")) read_backbone(Fields(*b, "backbone"), c.model.backbone);
  if (const json* h = f.get("head")) read_head(Fields(*h, "head"), c.model);
  if (const json* d = f.get("drop_mask")) read_drop(Fields(*d, "drop_mask"), c.model.drop);
  if (const json* t = f.get("train")) {
    if (t->is_object() && (t->contains("stream") || t->contains("seed")))
      throw ConfigError("config: use the top-level 'streams' and 'seed' fields instead of train.stream/train.seed");
    read_train(Fields(*t, "train"), c.train);
  }
  if (const json* s = f.get("streams")) {
    if (!s->is_array()) throw ConfigError("config: field 'streams' must be an array");
    c.streams.clear();
    for (const auto& e : *s) {
      const auto k = e.is_string() ? parse_stream(e.get<std::string>()) : std::nullopt;
      if (!k) throw ConfigError("config: field 'streams' has unknown stream " + e.dump());
      c.streams.push_back(*k);
    }
  }
  f.finish();
  c.train.seed = c.seed;
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  const std::string text = ss.str();
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<long>(upto), '\n');
    throw ConfigError("config: " + path.string() + " line " + std::to_string(line) + ": " + e.what());
  }
  try {
    return run_config_from_json(j);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void save_run_config(const std::filesystem::path& path, const RunConfig& c) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("config: cannot write " + path.string());
  os << run_config_to_json(c).dump(2) << '\n';
}

void save_model_checkpoint(const std::filesystem::path& path, const Model& model,
                           const std::vector<std::string>& glosses, StreamKind stream, const TrainConfig& train,
                           const json& extra) {
  Checkpoint ck;
  ck.params = model.params;
  ordered_json meta;
  meta["model"] = model_config_to_json(model.config);
  meta["glosses"] = glosses;
  meta["stream"] = stream_name(stream);
  meta["train"] = train_config_to_json(train);
  meta["graphs"] = format_graph_config(model.graphs);
  for (const auto& [k, v] : extra.items()) meta[k] = v;
  ck.meta = json::parse(meta.dump());
  save_checkpoint(path, ck);
}

ModelCheckpoint load_model_checkpoint(const std::filesystem::path& path) {
  const Checkpoint ck = load_checkpoint(path);
  ModelCheckpoint out;
  try {
    const auto& meta = ck.meta;
    const auto cfg = model_config_from_json(meta.at("model"));
    const auto graphs = parse_graph_config(meta.at("graphs").get<std::string>());
    out.model = Model::create(cfg, graphs, 0);
    out.glosses = meta.at("glosses").get<std::vector<std::string>>();
    const auto stream = parse_stream(meta.at("stream").get<std::string>());
    if (!stream) throw DataError("unknown stream " + meta.at("stream").dump());
    out.stream = *stream;
    out.train = train_config_from_json(meta.at("train"));
    out.meta = meta;
  } catch (const json::exception& e) {
    throw DataError("checkpoint " + path.string() + ": incomplete metadata: " + e.what());
  } catch (const ConfigError& e) {
    throw DataError("checkpoint " + path.string() + ": " + e.what());
  }
  if (out.glosses.size() != out.model.config.vocab)
    throw DataError("checkpoint " + path.string() + ": " + std::to_string(out.glosses.size()) +
                    " glosses for vocabulary " + std::to_string(out.model.config.vocab));
  restore_parameters(out.model.params, ck.params);
  return out;
}

std::vector<StreamKind> parse_stream_list(const std::string& csv) {
  std::vector<StreamKind> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto k = parse_stream(item);
    if (!k) throw ConfigError("unknown stream '" + item + "' (expected joint, bone, joint_motion, bone_motion)");
    out.push_back(*k);
  }
  if (out.empty()) throw ConfigError("empty stream list");
  return out;
}

std::vector<std::size_t> parse_size_list(const std::string& csv) {
  std::vector<std::size_t> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t v = 0;
    const auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || p != item.data() + item.size() || item.empty())
      throw ConfigError("expected a comma-separated list of positive integers, got '" + csv + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

}  // namespace lcc
