#include "lcc/cli.hpp"

#include <fstream>
#include <iostream>
#include <numeric>

#include "lcc/dataset.hpp"
#include "lcc/errors.hpp"
#include "lcc/gradcheck_suite.hpp"

namespace lcc {

namespace fs = std::filesystem;

namespace {

bool non_empty_dir(const fs::path& p) { return fs::exists(p) && (!fs::is_directory(p) || !fs::is_empty(p)); }

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw DataError("cannot create directory " + p.string() + ": " + ec.message());
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw DataError("cannot write " + p.string());
  os << text;
}

std::string fmt(double v) { return format_csv_number(v); }

const std::vector<KeypointSample>& split_of(const RunData& d, const std::string& split) {
  const auto it = d.splits.find(split);
  if (it == d.splits.end()) throw DataError("dataset has no split '" + split + "'");
  return it->second;
}

// The data a checkpoint was trained on, or `dataset` when given.
RunData data_for_checkpoint(const ModelCheckpoint& ck, const std::optional<std::string>& dataset, bool need_words) {
  RunConfig cfg = RunConfig::defaults();
  if (ck.meta.contains("data")) cfg = run_config_from_json(nlohmann::json{{"data", ck.meta.at("data")}}, cfg);
  if (dataset) {
    cfg.dataset = *dataset;
    cfg.word_vectors.reset();
  }
  if (ck.meta.contains("seed")) cfg.seed = ck.meta.at("seed").get<std::uint64_t>();
  return load_run_data(cfg, need_words);
}

void check_vocab(const ModelCheckpoint& ck, const std::vector<std::string>& glosses, const fs::path& path) {
  if (ck.glosses.size() != glosses.size())
    throw DataError("vocabulary mismatch: checkpoint " + path.string() + " has " + std::to_string(ck.glosses.size()) +
                    " glosses, the manifest has " + std::to_string(glosses.size()));
  if (ck.glosses != glosses)
    throw DataError("gloss order of checkpoint " + path.string() + " differs from the manifest");
}

}  // namespace

RunData load_run_data(const RunConfig& cfg, bool need_words) {
  RunData d;
  if (cfg.dataset) {
    const fs::path dir = *cfg.dataset;
    const Manifest m = load_manifest(dir);
    d.glosses = m.glosses;
    for (const auto& [name, files] : m.splits) d.splits[name] = load_dataset(dir, name);
    if (fs::exists(dir / "windows.json")) d.windows = load_windows(dir / "windows.json");
    std::optional<fs::path> wv;
    if (cfg.word_vectors) {
      wv = *cfg.word_vectors;
    } else if (fs::exists(dir / "words.txt")) {
      wv = dir / "words.txt";
    }
    if (wv) d.words = load_word_embeddings(*wv, d.glosses, cfg.allow_missing_words, cfg.seed);
  } else {
    cfg.synthetic.validate();
    auto ds = generate_synthetic(cfg.synthetic);
    d.glosses = ds.glosses;
    d.splits = {{"train", std::move(ds.train)}, {"val", std::move(ds.val)}, {"test", std::move(ds.test)}};
    d.windows = std::move(ds.windows);
    if (cfg.word_vectors) {
      d.words = load_word_embeddings(*cfg.word_vectors, d.glosses, cfg.allow_missing_words, cfg.seed);
    } else {
      d.words = std::move(ds.words);
    }
  }
  if (need_words && !d.words) throw DataError("word vectors are required but none were given or found");
  d.graphs = cfg.graph_config ? load_graph_config(*cfg.graph_config) : default_skeletons();
  return d;
}

void cmd_gen_synth(const GenSynthOptions& opt, std::ostream& out) {
  opt.spec.validate();
  if (non_empty_dir(opt.out) && !opt.force)
    throw ConfigError("output directory " + opt.out.string() + " is not empty (use --force to overwrite)");
  ensure_dir(opt.out);
  const auto ds = generate_synthetic(opt.spec);
  write_synthetic(opt.out, ds);
  out << "wrote " << opt.out.string() << ": V=" << ds.glosses.size() << " train=" << ds.train.size()
      << " val=" << ds.val.size() << " test=" << ds.test.size() << " T=" << opt.spec.frames
      << " groups=" << opt.spec.group_count() << '\n';
}

RunConfig apply_overrides(RunConfig c, const TrainOverrides& o) {
  if (o.dataset) c.dataset = *o.dataset;
  if (o.word_vectors) c.word_vectors = *o.word_vectors;
  if (o.graph_config) c.graph_config = *o.graph_config;
  if (o.output_dir) c.output_dir = *o.output_dir;
  if (o.allow_missing_words) c.allow_missing_words = *o.allow_missing_words;
  if (o.seed) c.seed = *o.seed;
  if (o.loss) c.model.loss = *o.loss;
  if (o.alpha) c.model.weights.alpha = *o.alpha;
  if (o.beta) c.model.weights.beta = *o.beta;
  if (o.tau) c.model.weights.tau = *o.tau;
  if (o.heads) {
    c.model.heads_enabled = {false, false, false, false};
    for (HeadSlot h : *o.heads) c.model.heads_enabled[static_cast<std::size_t>(h)] = true;
  }
  if (o.streams) c.streams = *o.streams;
  if (o.epochs) c.train.schedule.epochs = *o.epochs;
  if (o.batch_size) c.train.batch_size = *o.batch_size;
  if (o.warmup_epochs) c.train.schedule.warmup_epochs = *o.warmup_epochs;
  if (o.sequence_length) c.train.sequence_length = *o.sequence_length;
  if (o.extra_slots) c.model.extra_slots = *o.extra_slots;
  if (o.variations) c.model.variations = *o.variations;
  if (o.base_lr) c.train.schedule.base_lr = *o.base_lr;
  if (o.weight_decay) c.train.weight_decay = *o.weight_decay;
  if (o.schedule) c.train.schedule.kind = *o.schedule;
  if (o.milestones) c.train.schedule.milestones = *o.milestones;
  if (o.channels) c.model.backbone.channels = *o.channels;
  if (o.strides) c.model.backbone.strides = *o.strides;
  if (o.augment) c.train.augment_enabled = *o.augment;
  if (o.drop_mask) c.model.drop.enabled = *o.drop_mask;
  if (o.groups) c.synthetic.concept_groups = *o.groups;
  c.train.seed = c.seed;
  return c;
}

std::vector<StreamRun> cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream* progress) {
  cfg.validate();
  const bool lcc = cfg.model.loss == LossKind::lcc;
  const bool needs_words = lcc && cfg.model.weights.alpha != 0.0;
  const RunData data = load_run_data(cfg, needs_words);
  const auto& train = split_of(data, "train");
  const auto& val = split_of(data, "val");
  std::optional<Tensor> S_F;
  if (lcc && data.words) S_F = concept_similarity_matrix(data.words->vectors);

  ModelConfig mc = cfg.model;
  mc.vocab = data.glosses.size();
  mc.backbone.in_dims = train.empty() ? mc.backbone.in_dims : train.front().dims();

  const fs::path root = cfg.output_dir;
  ensure_dir(root);
  save_run_config(root / "run_config.json", cfg);
  const auto full = run_config_to_json(cfg);
  nlohmann::json extra;
  extra["data"] = nlohmann::json::parse(full.at("data").dump());
  extra["seed"] = cfg.seed;

  std::vector<StreamRun> runs;
  for (StreamKind stream : cfg.streams) {
    TrainConfig tc = cfg.train;
    tc.stream = stream;
    tc.seed = cfg.seed;
    const std::string name(stream_name(stream));
    const Model model = Model::create(mc, data.graphs, cfg.seed, S_F);
    EpochCallback cb;
    if (progress)
      cb = [&](const EpochRecord& r) {
        *progress << '[' << name << "] epoch " << r.epoch << " lr " << fmt(r.lr) << " loss " << fmt(r.loss_total)
                  << " val_top1 " << fmt(r.val_top1) << std::endl;
      };
    StreamRun run;
    run.stream = stream;
    run.result = fit(train, val, model, tc, cb);
    const Model& chosen = run.result.selected(tc.checkpoint);

    const fs::path dir = root / name;
    ensure_dir(dir);
    run.checkpoint = dir / "checkpoint.json";
    run.log = dir / "log.ndjson";
    const std::size_t epoch = tc.checkpoint == CheckpointPolicy::best_val ? run.result.best_epoch
                                                                          : run.result.log.back().epoch;
    nlohmann::json meta = extra;
    meta["epoch"] = epoch;
    meta["val_top1"] = tc.checkpoint == CheckpointPolicy::best_val ? run.result.best_val_top1
                                                                   : run.result.log.back().val_top1;
    save_model_checkpoint(run.checkpoint, chosen, data.glosses, stream, tc, meta);
    write_text(run.log, format_log(run.result.log));

    out << name << ": epoch " << epoch << " val_top1 " << fmt(meta["val_top1"].get<double>());
    if (const auto it = data.splits.find("test"); it != data.splits.end() && !it->second.empty())
      out << " test_top1 " << fmt(evaluate(it->second, chosen, tc, {1}).at(1).instance);
    if (S_F && lcc) {
      run.concept_mse = concept_loss(concept_similarity_matrix(chosen.table(HeadSlot::global)), *S_F);
      out << " concept_mse " << fmt(*run.concept_mse);
    }
    out << " -> " << run.checkpoint.string() << '\n';
    runs.push_back(std::move(run));
  }
  return runs;
}

EvalResult cmd_eval(const EvalOptions& opt, std::ostream& out) {
  if (opt.checkpoints.empty()) throw ConfigError("eval needs at least one checkpoint");
  if (opt.topk.empty()) throw ConfigError("--topk must list at least one k");
  std::vector<ModelCheckpoint> cks;
  for (const auto& p : opt.checkpoints) cks.push_back(load_model_checkpoint(p));
  const RunData data = data_for_checkpoint(cks.front(), opt.dataset, false);
  for (std::size_t i = 0; i < cks.size(); ++i) check_vocab(cks[i], data.glosses, opt.checkpoints[i]);
  const auto& samples = split_of(data, opt.split);
  const auto labels = labels_of(samples);

  EvalResult r;
  std::vector<std::vector<std::vector<double>>> streams;
  for (const auto& ck : cks) {
    TrainConfig tc = ck.train;
    tc.stream = ck.stream;
    streams.push_back(score_samples(ck.model, samples, tc));
    r.rows.emplace_back(std::string(stream_name(ck.stream)), evaluate_scores(streams.back(), labels, opt.topk));
  }
  std::vector<std::vector<double>> fused(samples.size());
  for (std::size_t n = 0; n < samples.size(); ++n) {
    std::vector<std::vector<double>> per;
    for (const auto& st : streams) per.push_back(st[n]);
    fused[n] = ensemble_streams(per, opt.weights);
  }
  r.rows.emplace_back("ensemble", evaluate_scores(fused, labels, opt.topk));
  r.csv = metrics_csv_header(opt.topk) + "\n";
  for (const auto& [name, m] : r.rows) r.csv += metrics_csv_row(opt.split, name, m) + "\n";
  if (opt.csv) {
    write_text(*opt.csv, r.csv);
    out << "wrote " << opt.csv->string() << '\n';
  } else {
    out << r.csv;
  }
  return r;
}

LocalizeResult cmd_localize(const LocalizeOptions& opt, std::ostream& out) {
  const ModelCheckpoint ck = load_model_checkpoint(opt.checkpoint);
  const RunData data = data_for_checkpoint(ck, opt.dataset, false);
  check_vocab(ck, data.glosses, opt.checkpoint);
  const auto& split = split_of(data, opt.split);

  std::vector<const KeypointSample*> chosen;
  if (opt.samples.empty()) {
    for (const auto& s : split) chosen.push_back(&s);
  } else {
    for (const auto& id : opt.samples) {
      const auto it = std::find_if(split.begin(), split.end(), [&](const auto& s) { return s.sample_id == id; });
      if (it == split.end()) throw DataError("unknown sample id '" + id + "' in split '" + opt.split + "'");
      chosen.push_back(&*it);
    }
  }

  ensure_dir(opt.out_dir);
  TrainConfig tc = ck.train;
  tc.stream = ck.stream;
  LocalizeResult r;
  std::string summary = "sample_id,target,segments,iou\n";
  double iou_sum = 0.0;
  std::size_t iou_n = 0, iou_hits = 0;
  for (const KeypointSample* s : chosen) {
    std::optional<Window> truth;
    if (const auto it = data.windows.find(s->sample_id); it != data.windows.end()) truth = it->second;
    auto l = localise_sample(ck.model, tc, *s, truth);
    write_text(opt.out_dir / (s->sample_id + ".csv"), format_localisation_csv(l, data.glosses));
    write_ppm(opt.out_dir / (s->sample_id + ".ppm"), localisation_heatmap(l, data.glosses), opt.cell);
    std::string segs;
    for (const auto& [a, b] : l.loc.segments) segs += (segs.empty() ? "" : " ") + std::to_string(a) + "-" + std::to_string(b);
    summary += s->sample_id + "," + data.glosses[l.loc.target] + "," + segs + "," + (l.iou ? fmt(*l.iou) : "") + "\n";
    if (l.iou) {
      iou_sum += *l.iou;
      iou_hits += *l.iou >= 0.3;
      ++iou_n;
    }
    r.samples.push_back(std::move(l));
  }
  write_text(opt.out_dir / "summary.csv", summary);
  out << "localised " << r.samples.size() << " samples into " << opt.out_dir.string() << '\n';
  if (iou_n > 0) {
    r.mean_iou = iou_sum / static_cast<double>(iou_n);
    r.fraction_iou_03 = static_cast<double>(iou_hits) / static_cast<double>(iou_n);
    out << "mean_iou " << fmt(*r.mean_iou) << " iou>=0.3 " << fmt(*r.fraction_iou_03) << '\n';
  }
  return r;
}

std::vector<double> cmd_export_sim(const ExportSimOptions& opt, std::ostream& out) {
  if (opt.checkpoints.empty() || opt.checkpoints.size() > 2) throw ConfigError("export-sim takes one or two checkpoints");
  std::vector<ModelCheckpoint> cks;
  for (const auto& p : opt.checkpoints) cks.push_back(load_model_checkpoint(p));
  for (std::size_t i = 1; i < cks.size(); ++i)
    if (cks[i].glosses != cks[0].glosses) throw DataError("the two checkpoints have different vocabularies");
  const auto& glosses = cks[0].glosses;

  WordEmbeddingTable words;
  if (opt.word_vectors) {
    if (!fs::exists(*opt.word_vectors)) throw DataError("word-vector file " + opt.word_vectors->string() + " not found");
    words = load_word_embeddings(*opt.word_vectors, glosses, false, 0);
  } else {
    RunData d = data_for_checkpoint(cks[0], std::nullopt, true);
    check_vocab(cks[0], d.glosses, opt.checkpoints[0]);
    words = std::move(*d.words);
  }
  const Tensor S_F = concept_similarity_matrix(words.vectors);

  ensure_dir(opt.out_dir);
  write_matrix_csv(opt.out_dir / "S_F.csv", S_F, glosses);
  std::vector<double> mse;
  for (std::size_t i = 0; i < cks.size(); ++i) {
    if (cks[i].model.config.loss != LossKind::lcc || !cks[i].model.config.heads_enabled[3])
      throw ConfigError("checkpoint " + opt.checkpoints[i].string() + " has no LCC global head");
    const Tensor S_E = concept_similarity_matrix(cks[i].model.table(HeadSlot::global));
    const std::string suffix = cks.size() == 1 ? "" : "_" + std::to_string(i + 1);
    write_matrix_csv(opt.out_dir / ("S_E" + suffix + ".csv"), S_E, glosses);
    const auto h = side_by_side(S_E, S_F, glosses);
    write_ppm(opt.out_dir / ("similarity" + suffix + ".ppm"), h, opt.cell);
    mse.push_back(concept_loss(S_E, S_F));
    out << "mse(S_E" << suffix << ", S_F) " << fmt(mse.back()) << "  [" << opt.checkpoints[i].string() << "]\n";
  }
  return mse;
}

std::optional<GradcheckScope> parse_gradcheck_scope(std::string_view s) {
  if (s == "ops") return GradcheckScope::ops;
  if (s == "head") return GradcheckScope::head;
  if (s == "end2end") return GradcheckScope::end2end;
  if (s == "all") return GradcheckScope::all;
  return std::nullopt;
}

bool cmd_gradcheck(const GradcheckOptions& opt, std::ostream& out) {
  constexpr double step = 1e-3;
  std::vector<CheckRecord> recs;
  const auto add = [&](std::vector<CheckRecord> r) { recs.insert(recs.end(), r.begin(), r.end()); };
  const bool all = opt.scope == GradcheckScope::all;
  if (all || opt.scope == GradcheckScope::ops) add(run_op_gradchecks(opt.instances.value_or(100), step, 1e-4, opt.seed));
  if (all || opt.scope == GradcheckScope::head) add(run_head_gradchecks(opt.instances.value_or(50), step, 1e-4, opt.seed));
  if (all || opt.scope == GradcheckScope::end2end)
    add(run_end2end_gradchecks(opt.instances.value_or(8), step, 1e-3, opt.seed));
  bool ok = true;
  char buf[256];
  for (const auto& r : recs) {
    std::snprintf(buf, sizeof buf, "%-32s %4zu  max_rel %.3e  tol %.0e  %s", r.name.c_str(), r.instances,
                  r.max_relative_error, r.tolerance, r.passed() ? "PASS" : "FAIL");
    out << buf;
    if (!r.passed() && !r.worst.empty()) out << "  (" << r.worst << ")";
    out << '\n';
    ok = ok && r.passed();
  }
  out << (ok ? "all checks passed" : "gradient check FAILED") << '\n';
  return ok;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const DataError*>(&e)) return 2;
  if (dynamic_cast<const NumericalError*>(&e)) return 3;
  return 1;
}

}  // namespace lcc
