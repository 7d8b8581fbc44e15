#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "lcc/cli.hpp"
#include "lcc/errors.hpp"

using namespace lcc;

namespace {

template <class T, class Parse>
T parse_or_throw(const std::string& flag, const std::string& v, Parse parse) {
  const auto r = parse(v);
  if (!r) throw ConfigError("unknown value '" + v + "' for " + flag);
  return *r;
}

std::vector<HeadSlot> parse_heads(const std::string& csv) {
  std::vector<HeadSlot> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_or_throw<HeadSlot>("--heads", item, parse_head));
  return out;
}

std::vector<double> parse_doubles(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("expected a comma-separated list of numbers, got '" + csv + "'");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sign recognition with learnable contrastive class embeddings"};
  app.require_subcommand(1);

  // gen-synth
  GenSynthOptions gs;
  gs.out = default_output_dir() + "/synthetic";
  std::string gs_out;
  auto* gen = app.add_subcommand("gen-synth", "Write a synthetic keypoint dataset with word vectors and true windows");
  gen->add_option("--out", gs_out, "Output directory (default $LCC_OUTPUT_DIR/synthetic)");
  gen->add_option("--classes", gs.spec.classes)->capture_default_str();
  gen->add_option("--train", gs.spec.train, "Training samples in total")->capture_default_str();
  gen->add_option("--val", gs.spec.val)->capture_default_str();
  gen->add_option("--test", gs.spec.test)->capture_default_str();
  gen->add_option("--frames", gs.spec.frames)->capture_default_str();
  gen->add_option("--window-min", gs.spec.window_min)->capture_default_str();
  gen->add_option("--window-max", gs.spec.window_max)->capture_default_str();
  gen->add_option("--noise", gs.spec.noise_scale)->capture_default_str();
  gen->add_option("--groups", gs.spec.concept_groups, "Concept groups (0: one per class)")->capture_default_str();
  gen->add_option("--seed", gs.spec.seed)->capture_default_str();
  gen->add_flag("--force", gs.force, "Write into a non-empty directory");

  // train
  std::string config_path, streams_s, heads_s, loss_s, schedule_s, milestones_s, channels_s, strides_s;
  TrainOverrides ov;
  auto opt = [](CLI::App* a, const std::string& name, auto& target, const std::string& help = "") {
    a->add_option_function<typename std::decay_t<decltype(target)>::value_type>(
        name, [&target](const auto& v) { target = v; }, help);
  };
  auto* train = app.add_subcommand("train", "Train one model per stream");
  train->add_option("--config", config_path, "JSON run configuration");
  opt(train, "--dataset", ov.dataset, "Dataset directory (default: synthetic)");
  opt(train, "--word-vectors", ov.word_vectors);
  opt(train, "--graph-config", ov.graph_config);
  opt(train, "--output", ov.output_dir, "Output directory (default $LCC_OUTPUT_DIR)");
  opt(train, "--seed", ov.seed);
  opt(train, "--alpha", ov.alpha, "Concept loss weight");
  opt(train, "--beta", ov.beta, "Recognition loss weight");
  opt(train, "--tau", ov.tau, "Softmax temperature");
  opt(train, "--epochs", ov.epochs);
  opt(train, "--batch-size", ov.batch_size);
  opt(train, "--lr", ov.base_lr);
  opt(train, "--weight-decay", ov.weight_decay);
  opt(train, "--warmup", ov.warmup_epochs);
  opt(train, "--sequence-length", ov.sequence_length);
  opt(train, "--extra-slots", ov.extra_slots);
  opt(train, "--variations", ov.variations);
  opt(train, "--groups", ov.groups, "Synthetic concept groups");
  train->add_option("--loss", loss_s, "lcc or ce");
  train->add_option("--streams", streams_s, "e.g. joint,bone");
  train->add_option("--heads", heads_s, "e.g. hands,mouth,pose,global");
  train->add_option("--schedule", schedule_s, "warmup_cosine or multistep");
  train->add_option("--milestones", milestones_s);
  train->add_option("--channels", channels_s, "Backbone block widths, e.g. 8,16");
  train->add_option("--strides", strides_s);
  train->add_flag_function("--augment,!--no-augment", [&](std::int64_t n) { ov.augment = n > 0; });
  train->add_flag_function("--drop-mask,!--no-drop-mask", [&](std::int64_t n) { ov.drop_mask = n > 0; });
  train->add_flag_function("--allow-missing-words", [&](std::int64_t n) { ov.allow_missing_words = n > 0; });
  bool quiet = false;
  train->add_flag("--quiet", quiet, "No per-epoch progress on stderr");

  // eval
  EvalOptions ev;
  std::vector<std::string> ev_ckpts;
  std::string topk_s = "1,5", weights_s, ev_csv, ev_dataset;
  auto* eval = app.add_subcommand("eval", "Per-stream and ensemble metrics as CSV");
  eval->add_option("--checkpoint", ev_ckpts, "One or more checkpoints")->required();
  eval->add_option("--dataset", ev_dataset, "Dataset directory (default: the training data)");
  eval->add_option("--split", ev.split)->capture_default_str();
  eval->add_option("--topk", topk_s)->capture_default_str();
  eval->add_option("--weights", weights_s, "Ensemble weights, one per checkpoint");
  eval->add_option("--csv", ev_csv, "Write CSV here instead of stdout");

  // localize
  LocalizeOptions lo;
  std::string lo_ckpt, lo_dataset, lo_out;
  auto* loc = app.add_subcommand("localize", "Per-sample localisation CSV and heatmap");
  loc->add_option("--checkpoint", lo_ckpt)->required();
  loc->add_option("--dataset", lo_dataset);
  loc->add_option("--split", lo.split)->capture_default_str();
  loc->add_option("--sample", lo.samples, "Sample ids (default: the whole split)");
  loc->add_option("--out", lo_out, "Output directory (default $LCC_OUTPUT_DIR/localize)");
  loc->add_option("--cell", lo.cell, "Pixels per heatmap cell")->capture_default_str();

  // export-sim
  ExportSimOptions ex;
  std::vector<std::string> ex_ckpts;
  std::string ex_words, ex_out;
  auto* exs = app.add_subcommand("export-sim", "Write S_E and S_F matrices and a side-by-side heatmap");
  exs->add_option("--checkpoint", ex_ckpts, "One or two checkpoints")->required();
  exs->add_option("--word-vectors", ex_words, "Word-vector file (default: the training data's)");
  exs->add_option("--out", ex_out, "Output directory (default $LCC_OUTPUT_DIR/similarity)");
  exs->add_option("--cell", ex.cell)->capture_default_str();

  // gradcheck
  GradcheckOptions gc;
  std::string scope_s = "all";
  std::size_t gc_instances = 0;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  grad->add_option("--scope", scope_s, "ops, head, end2end or all")->capture_default_str();
  grad->add_option("--instances", gc_instances, "Random cases per check (default per scope)");
  grad->add_option("--seed", gc.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*gen) {
      if (!gs_out.empty()) gs.out = gs_out;
      cmd_gen_synth(gs, std::cout);
    } else if (*train) {
      if (!loss_s.empty()) ov.loss = parse_or_throw<LossKind>("--loss", loss_s, parse_loss);
      if (!schedule_s.empty()) ov.schedule = parse_or_throw<ScheduleKind>("--schedule", schedule_s, parse_schedule);
      if (!streams_s.empty()) ov.streams = parse_stream_list(streams_s);
      if (!heads_s.empty()) ov.heads = parse_heads(heads_s);
      if (!milestones_s.empty()) ov.milestones = parse_size_list(milestones_s);
      if (!channels_s.empty()) ov.channels = parse_size_list(channels_s);
      if (!strides_s.empty()) ov.strides = parse_size_list(strides_s);
      const RunConfig base = config_path.empty() ? RunConfig::defaults() : load_run_config(config_path);
      cmd_train(apply_overrides(base, ov), std::cout, quiet ? nullptr : &std::cerr);
    } else if (*eval) {
      ev.checkpoints.assign(ev_ckpts.begin(), ev_ckpts.end());
      if (!ev_dataset.empty()) ev.dataset = ev_dataset;
      ev.topk = parse_size_list(topk_s);
      if (!weights_s.empty()) ev.weights = parse_doubles(weights_s);
      if (!ev_csv.empty()) ev.csv = ev_csv;
      cmd_eval(ev, std::cout);
    } else if (*loc) {
      lo.checkpoint = lo_ckpt;
      if (!lo_dataset.empty()) lo.dataset = lo_dataset;
      lo.out_dir = lo_out.empty() ? default_output_dir() + "/localize" : lo_out;
      cmd_localize(lo, std::cout);
    } else if (*exs) {
      ex.checkpoints.assign(ex_ckpts.begin(), ex_ckpts.end());
      if (!ex_words.empty()) ex.word_vectors = ex_words;
      ex.out_dir = ex_out.empty() ? default_output_dir() + "/similarity" : ex_out;
      cmd_export_sim(ex, std::cout);
    } else if (*grad) {
      const auto scope = parse_gradcheck_scope(scope_s);
      if (!scope) throw ConfigError("unknown --scope '" + scope_s + "'");
      gc.scope = *scope;
      if (gc_instances > 0) gc.instances = gc_instances;
      return cmd_gradcheck(gc, std::cout) ? 0 : 3;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return 0;
}
