#include "lcc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "lcc/errors.hpp"

namespace lcc {

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("train: batch_size must be positive");
  schedule.validate();
  if (!(weight_decay >= 0.0)) throw ConfigError("train: weight_decay must be non-negative");
  if (augment.rotation_min_deg > augment.rotation_max_deg || augment.scale_min > augment.scale_max ||
      augment.shift_min > augment.shift_max)
    throw ConfigError("train: augmentation ranges must have min <= max");
  if (!(augment.scale_min > 0.0)) throw ConfigError("train: augmentation scale must be positive");
}

TrainConfig TrainConfig::isolated() { return TrainConfig{}; }

TrainConfig TrainConfig::continuous() {
  TrainConfig c;
  c.schedule.kind = ScheduleKind::multistep;
  c.schedule.epochs = 25;
  c.schedule.milestones = {10, 20};
  c.schedule.factor = 0.1;
  c.sequence_length = 16;
  return c;
}

KeypointSample prepare_sample(const KeypointSample& s, const TrainConfig& cfg, const SkeletonSet& graphs,
                              std::mt19937_64* augment_rng) {
  KeypointSample out = cfg.center ? center_on_root(s, graphs[Channel::body].root) : s;
  out = derive_stream(out, cfg.stream, graphs);
  if (augment_rng && cfg.augment_enabled && !cfg.augment.is_identity())
    out = augment(out, cfg.augment, *augment_rng);
  if (cfg.sequence_length != 0 && cfg.sequence_length != out.frames())
    out = resample_length(out, cfg.sequence_length);
  return out;
}

nlohmann::ordered_json epoch_record_json(const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["lr"] = r.lr;
  j["steps"] = r.steps;
  j["loss_total"] = r.loss_total;
  nlohmann::ordered_json rec, con;
  for (HeadSlot h : kHeadSlots) {
    const auto i = static_cast<std::size_t>(h);
    rec[std::string(head_name(h))] = r.loss_rec[i];
    con[std::string(head_name(h))] = r.loss_concept ? nlohmann::ordered_json((*r.loss_concept)[i]) : nullptr;
  }
  j["loss_rec"] = rec;
  j["loss_concept"] = con;
  j["val_top1"] = r.val_top1;
  j["val_top5"] = r.val_top5;
  return j;
}

std::string format_log(const std::vector<EpochRecord>& log) {
  std::string out;
  for (const auto& r : log) out += epoch_record_json(r).dump() + "\n";
  return out;
}

std::vector<std::size_t> labels_of(const std::vector<KeypointSample>& data) {
  std::vector<std::size_t> labels;
  for (const auto& s : data) {
    if (!s.label) throw DataError("sample '" + s.sample_id + "' has no label");
    labels.push_back(*s.label);
  }
  return labels;
}

std::vector<std::vector<double>> score_samples(const Model& model, const std::vector<KeypointSample>& data,
                                               const TrainConfig& cfg) {
  std::vector<std::vector<double>> scores;
  scores.reserve(data.size());
  for (const auto& s : data) scores.push_back(class_scores(model, prepare_sample(s, cfg, model.graphs, nullptr)));
  return scores;
}

Metrics evaluate(const std::vector<KeypointSample>& data, const Model& model, const TrainConfig& cfg,
                 const std::vector<std::size_t>& ks) {
  if (data.empty()) throw ContractViolation("evaluate: empty dataset");
  return evaluate_scores(score_samples(model, data, cfg), labels_of(data), ks);
}

namespace {

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

std::string describe_non_finite(const Graph& g, std::size_t epoch, const std::string& sample_id) {
  std::ostringstream os;
  os << "non-finite loss at epoch " << epoch << ", sample '" << sample_id << "'";
  if (const auto id = g.first_non_finite())
    os << ": first produced by op '" << op_name(g.kind(*id)) << "' (node " << *id << ")";
  return os.str();
}

}  // namespace

FitResult fit(const std::vector<KeypointSample>& train, const std::vector<KeypointSample>& val, Model model,
              const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train.empty()) throw ContractViolation("fit: empty training split");
  if (val.empty()) throw ContractViolation("fit: empty validation split");
  labels_of(train);
  labels_of(val);

  auto shuffle_rng = stream_rng(cfg.seed, 1);
  auto augment_rng = stream_rng(cfg.seed, 2);
  auto mask_rng = stream_rng(cfg.seed, 3);
  OptimizerState opt;
  FitResult result;
  double best = -1.0;
  std::vector<std::size_t> order(train.size());
  const bool concept_term = model.config.loss == LossKind::lcc && model.config.weights.alpha != 0.0;

  for (std::size_t epoch = 0; epoch < cfg.schedule.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr_at(cfg.schedule, epoch);
    std::array<double, 4> concept_sum{};
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      GradientSet batch_grad;
      for (std::size_t b = start; b < end; ++b) {
        const auto& raw = train[order[b]];
        const auto s = prepare_sample(raw, cfg, model.graphs, &augment_rng);
        Graph g(mask_rng());
        const auto params = bind_parameters(g, model.params);
        const auto out = model_forward(g, model, params, channel_inputs(s), *s.label, true);
        const double loss = g.value(*out.loss).item();
        if (!std::isfinite(loss)) throw NumericalError(describe_non_finite(g, epoch, raw.sample_id));
        rec.loss_total += loss;
        for (std::size_t h = 0; h < 4; ++h) {
          rec.loss_rec[h] += g.value(*out.heads[h].l_rec).item();
          if (out.heads[h].l_concept) concept_sum[h] += g.value(*out.heads[h].l_concept).item();
        }
        const auto grads = g.backward(*out.loss);
        if (grads.first_non_finite) {
          const NodeId id = *grads.first_non_finite;
          throw NumericalError("non-finite gradient at epoch " + std::to_string(epoch) + ", sample '" +
                               raw.sample_id + "': first produced by the backward of op '" +
                               std::string(op_name(g.kind(id))) + "' (node " + std::to_string(id) + ")");
        }
        for (const auto& [name, id] : params) {
          const Tensor& gr = grads.at(id);
          auto [it, fresh] = batch_grad.try_emplace(name, gr);
          if (!fresh)
            for (std::size_t i = 0; i < gr.size(); ++i) it->second[i] += gr[i];
        }
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (auto& [name, t] : batch_grad) {
        for (auto& v : t.values()) v *= inv;
        if (!t.all_finite()) throw NumericalError("non-finite gradient for " + name + " at epoch " + std::to_string(epoch));
      }
      adam_step(model.params, batch_grad, opt, rec.lr, cfg.weight_decay);
      ++rec.steps;
    }
    const double n = static_cast<double>(train.size());
    rec.loss_total /= n;
    for (auto& v : rec.loss_rec) v /= n;
    if (concept_term) {
      for (auto& v : concept_sum) v /= n;
      rec.loss_concept = concept_sum;
    }
    const auto m = evaluate(val, model, cfg, {1, 5});
    rec.val_top1 = m.at(1).instance;
    rec.val_top5 = m.at(5).instance;
    if (rec.val_top1 > best) {
      best = rec.val_top1;
      result.best = model;
      result.best_epoch = epoch;
      result.best_val_top1 = rec.val_top1;
    }
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  result.last = std::move(model);
  return result;
}

}  // namespace lcc
