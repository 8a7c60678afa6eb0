#include "memnet/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "memnet/corpus.hpp"
#include "memnet/evaluation.hpp"
#include "memnet/models.hpp"
#include "memnet/serialize.hpp"
#include "memnet/synth.hpp"
#include "memnet/training.hpp"
#include "memnet/util.hpp"

namespace memnet::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  return j;
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

fs::path prepare_out_dir(const std::string& dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

void write_predictions_file(const fs::path& path, const corpus::Dataset& data,
                            const std::map<std::string, std::string>& predictions) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (const auto& inst : data) {
    json line = {{"id", inst.id}, {"prediction", predictions.at(inst.id)}};
    out << line.dump() << "\n";
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

// answers mapped back through each instance's anonymization record, so
// scoring happens in original-string space
corpus::Dataset deanonymized_copy(const corpus::Dataset& data) {
  corpus::Dataset out = data;
  for (auto& inst : out)
    if (!inst.entity_map.empty()) inst.answer = corpus::deanonymize_prediction(inst, inst.answer);
  return out;
}

struct PredictionRun {
  std::map<std::string, std::string> predictions;
  std::vector<double> attention_maxima;
  long pointer_disagreements = 0;
};

PredictionRun predict_dataset(const models::ModelParams& params, const models::MemNetConfig& mcfg,
                              const corpus::Vocabulary& vocab, const corpus::Dataset& data,
                              std::vector<std::vector<ad::Vector>>* alpha_log = nullptr) {
  PredictionRun run;
  ad::Tape tape;
  for (const auto& inst : data) {
    tape.clear();
    const corpus::WindowSet ws =
        corpus::extract_windows(inst, mcfg.radius, mcfg.memory_size, vocab);
    models::Forward fwd = models::forward(tape, params, mcfg, ws, vocab, inst.candidates);
    std::string pred = fwd.trace.predicted;
    if (!inst.entity_map.empty()) pred = corpus::deanonymize_prediction(inst, pred);
    run.predictions[inst.id] = pred;
    if (!fwd.trace.alpha.empty()) run.attention_maxima.push_back(fwd.trace.max_alpha);
    if (fwd.trace.pointer_argmax_mismatch) ++run.pointer_disagreements;
    if (alpha_log) alpha_log->push_back(fwd.trace.alpha);
  }
  return run;
}

json eval_report_json(const eval::EvalReport& report) {
  json j = report;
  return j;
}

eval::EvalReport eval_report_from_json(const json& j) {
  eval::EvalReport r;
  auto subset = [](const json& m) {
    eval::SubsetMetrics s;
    s.em = m.at("em").get<double>();
    s.f1 = m.at("f1").get<double>();
    s.accuracy = m.at("accuracy").get<double>();
    s.count = m.at("count").get<int>();
    return s;
  };
  r.overall = subset(j.at("overall"));
  if (j.contains("seen")) r.seen = subset(j.at("seen"));
  if (j.contains("unseen")) r.unseen = subset(j.at("unseen"));
  for (const auto& e : j.at("instances")) {
    eval::InstanceScore s;
    s.id = e.at("id").get<std::string>();
    s.prediction = e.at("prediction").get<std::string>();
    s.gold = e.at("gold").get<std::string>();
    s.em = e.at("em").get<int>();
    s.f1 = e.at("f1").get<double>();
    r.instances.push_back(std::move(s));
  }
  return r;
}

// ---------------------------------------------------------------- synth ----

int cmd_synth(CLI::App* cmd, const std::string& config_path, const std::string& out_dir,
              std::uint64_t seed, corpus::SyntheticConfig flags) {
  const json file = load_config_file(config_path);
  corpus::SyntheticConfig cfg;
  if (!file.empty()) corpus::from_json(file, cfg);
  auto picked = [&](const char* name) { return cmd->count(name) > 0; };
  if (picked("--vocab-size")) cfg.vocab_size = flags.vocab_size;
  if (picked("--entity-pool")) cfg.entity_pool = flags.entity_pool;
  if (picked("--entities-per-passage")) cfg.entities_per_passage = flags.entities_per_passage;
  if (picked("--radius")) cfg.radius = flags.radius;
  if (picked("--distractors")) cfg.distractor_windows = flags.distractor_windows;
  if (picked("--overlap")) cfg.overlap = flags.overlap;
  if (picked("--unseen-rate")) cfg.unseen_rate = flags.unseen_rate;
  if (picked("--noise-rate")) cfg.noise_rate = flags.noise_rate;
  if (picked("--cue-rate")) cfg.query_cue_rate = flags.query_cue_rate;
  if (picked("--train-size")) cfg.train_size = flags.train_size;
  if (picked("--dev-size")) cfg.dev_size = flags.dev_size;
  if (picked("--test-size")) cfg.test_size = flags.test_size;
  if (picked("--seed") || !file.contains("seed")) cfg.seed = seed;

  const fs::path out = prepare_out_dir(out_dir);
  corpus::SynthOutput result = corpus::generate_synthetic(cfg);
  corpus::write_canonical(result.train, (out / "train.jsonl").string());
  corpus::write_canonical(result.dev, (out / "dev.jsonl").string());
  corpus::write_canonical(result.test, (out / "test.jsonl").string());

  json meta;
  meta["unseen_answers"] = result.unseen_answers;
  int unseen_instances = 0;
  json instances = json::array();
  for (const auto& m : result.meta) {
    instances.push_back({{"id", m.id},
                         {"evidence_entity_index", m.evidence_entity_index},
                         {"unseen", m.unseen_answer}});
    if (m.unseen_answer) ++unseen_instances;
  }
  meta["unseen_test_instances"] = unseen_instances;
  meta["instances"] = std::move(instances);
  write_json_file(out / "synth_meta.json", meta);

  json resolved = cfg;
  resolved["command"] = "synth";
  resolved["out_dir"] = out_dir;
  write_json_file(out / "config.json", resolved);
  return 0;
}

// -------------------------------------------------------------- prepare ----

int cmd_prepare(const std::string& config_path, const std::string& out_dir, std::uint64_t seed,
                std::string input, std::string input_format, std::string adapter_path,
                std::vector<std::string> transforms, std::string train_path,
                const CLI::App* cmd) {
  const json file = load_config_file(config_path);
  auto absent = [&](const char* name) { return cmd->count(name) == 0; };
  if (absent("--input") && file.contains("input")) input = file.at("input").get<std::string>();
  if (absent("--input-format") && file.contains("input_format"))
    input_format = file.at("input_format").get<std::string>();
  if (absent("--adapter") && file.contains("adapter"))
    adapter_path = file.at("adapter").get<std::string>();
  if (absent("--transforms") && file.contains("transforms"))
    transforms = file.at("transforms").get<std::vector<std::string>>();
  if (absent("--train") && file.contains("train"))
    train_path = file.at("train").get<std::string>();
  if (absent("--seed") && file.contains("seed")) seed = file.at("seed").get<std::uint64_t>();
  if (input.empty()) throw UsageError("prepare: --input is required");

  corpus::Dataset data;
  if (input_format == "jsonl") {
    data = corpus::read_canonical(input);
  } else if (input_format == "cbt") {
    data = corpus::read_cbt(input);
  } else if (input_format == "json-adapter") {
    const corpus::AdapterConfig adapter = adapter_path.empty()
                                              ? corpus::AdapterConfig{}
                                              : corpus::AdapterConfig::from_file(adapter_path);
    data = corpus::read_json_adapted(input, adapter);
  } else {
    throw UsageError("prepare: unknown input format '" + input_format + "'");
  }
  json log = json::array();
  for (const std::string& t : transforms) {
    if (t == "anonymize") {
      for (auto& inst : data) inst = corpus::anonymize(inst);
      log.push_back({{"transform", "anonymize"}, {"instances", data.size()}});
    } else if (t.rfind("cap:", 0) == 0) {
      int k = 0;
      try {
        k = std::stoi(t.substr(4));
      } catch (const std::exception&) {
        throw UsageError("prepare: bad cap transform '" + t + "'");
      }
      if (k < 1) throw UsageError("prepare: cap size must be >= 1");
      for (auto& inst : data) inst = corpus::cap_candidates(inst, k, seed);
      log.push_back({{"transform", "cap"}, {"k", k}, {"instances", data.size()}});
    } else if (t == "seen-filter") {
      if (train_path.empty()) throw UsageError("prepare: seen-filter requires --train");
      const corpus::Dataset train_data = corpus::read_canonical(train_path);
      const std::size_t before = data.size();
      data = corpus::filter_seen(data, train_data);
      log.push_back({{"transform", "seen-filter"},
                     {"kept", data.size()},
                     {"removed", before - data.size()}});
    } else {
      throw UsageError("prepare: unknown transform '" + t + "'");
    }
  }

  const fs::path out = prepare_out_dir(out_dir);
  corpus::write_canonical(data, (out / "prepared.jsonl").string());
  write_json_file(out / "transform_log.json", log);

  json resolved = {{"command", "prepare"},     {"input", input},
                   {"input_format", input_format}, {"adapter", adapter_path},
                   {"transforms", transforms},  {"train", train_path},
                   {"out_dir", out_dir},        {"seed", seed}};
  write_json_file(out / "config.json", resolved);
  return 0;
}

// ---------------------------------------------------------------- train ----

struct TrainOpts {
  std::string train_path, dev_path, embeddings;
  bool init_eprime = false;
  bool trace = false;
  std::string variant = "vanilla";
  std::string metric = "accuracy";
};

int cmd_train(const CLI::App* cmd, const std::string& config_path, const std::string& out_dir,
              std::uint64_t seed, TrainOpts opts, models::MemNetConfig mflags,
              train::TrainConfig tflags) {
  const json file = load_config_file(config_path);
  models::MemNetConfig mcfg;
  train::TrainConfig tcfg;
  if (file.contains("model")) models::from_json(file.at("model"), mcfg);
  if (file.contains("training")) train::from_json(file.at("training"), tcfg);

  auto picked = [&](const char* name) { return cmd->count(name) > 0; };
  if (picked("--variant")) mcfg.variant = models::variant_from_name(opts.variant);
  if (picked("--hops")) mcfg.hops = mflags.hops;
  if (picked("--dim")) mcfg.dim = mflags.dim;
  if (picked("--radius")) mcfg.radius = mflags.radius;
  if (picked("--memory")) mcfg.memory_size = mflags.memory_size;
  if (picked("--key-value")) mcfg.key_value = mflags.key_value;
  if (picked("--anonymized")) mcfg.anonymized = mflags.anonymized;
  if (picked("--lr")) tcfg.lr = tflags.lr;
  if (picked("--epochs")) tcfg.epochs = tflags.epochs;
  if (picked("--batch-size")) tcfg.batch_size = tflags.batch_size;
  if (picked("--min-count")) tcfg.min_count = tflags.min_count;
  if (picked("--metric")) tcfg.selection = train::metric_from_name(opts.metric);
  if (picked("--seed") || !file.contains("seed")) {
    mcfg.seed = seed;
    tcfg.seed = seed;
  } else {
    const auto s = file.at("seed").get<std::uint64_t>();
    mcfg.seed = s;
    tcfg.seed = s;
  }
  auto pick_path = [&](const char* flag, const char* key, std::string& value) {
    if (!picked(flag) && file.contains(key)) value = file.at(key).get<std::string>();
  };
  pick_path("--train", "train_path", opts.train_path);
  pick_path("--dev", "dev_path", opts.dev_path);
  pick_path("--embeddings", "embeddings", opts.embeddings);
  if (!picked("--init-eprime-pretrained") && file.contains("init_eprime_pretrained"))
    opts.init_eprime = file.at("init_eprime_pretrained").get<bool>();
  if (opts.train_path.empty()) throw UsageError("train: --train is required");
  if (opts.dev_path.empty()) throw UsageError("train: --dev is required");

  const corpus::Dataset train_set = corpus::read_canonical(opts.train_path);
  const corpus::Dataset dev_set = corpus::read_canonical(opts.dev_path);

  std::optional<corpus::EmbeddingLoad> emb;
  if (!opts.embeddings.empty()) {
    const corpus::Vocabulary vocab = corpus::build_vocab(train_set, tcfg.min_count);
    emb = corpus::load_embeddings(opts.embeddings, vocab);
    std::cerr << "loaded embeddings, vocabulary coverage " << emb->coverage << "\n";
  }

  train::TrainResult result = train::train(mcfg, tcfg, train_set, dev_set,
                                           emb ? &emb->table : nullptr, opts.init_eprime);

  const fs::path out = prepare_out_dir(out_dir);
  train::save_checkpoint(result.best, (out / "model.ckpt").string());

  json epochs = json::array();
  for (const auto& e : result.epochs)
    epochs.push_back(
        {{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"dev_score", e.dev_score}});
  json train_log = {{"epochs", std::move(epochs)},
                    {"best_epoch", result.best.best_epoch},
                    {"dev_score", result.best.dev_score},
                    {"pointer_disagreements", result.pointer_disagreements}};
  if (emb) train_log["embedding_coverage"] = emb->coverage;
  write_json_file(out / "epochs.json", train_log);

  if (opts.trace) {
    std::vector<std::vector<ad::Vector>> alphas;
    predict_dataset(result.best.params, mcfg, result.best.vocab, dev_set, &alphas);
    std::ofstream trace_out(out / "trace.jsonl");
    for (std::size_t i = 0; i < dev_set.size(); ++i) {
      json hops = json::array();
      for (const auto& alpha : alphas[i]) {
        json row = json::array();
        for (Eigen::Index j = 0; j < alpha.size(); ++j) row.push_back(alpha(j));
        hops.push_back(std::move(row));
      }
      trace_out << json{{"id", dev_set[i].id}, {"alpha", std::move(hops)}}.dump() << "\n";
    }
  }

  json resolved = {{"command", "train"},
                   {"train_path", opts.train_path},
                   {"dev_path", opts.dev_path},
                   {"embeddings", opts.embeddings},
                   {"init_eprime_pretrained", opts.init_eprime},
                   {"trace", opts.trace},
                   {"out_dir", out_dir},
                   {"seed", tcfg.seed},
                   {"model", mcfg},
                   {"training", tcfg}};
  write_json_file(out / "config.json", resolved);
  return 0;
}

// ----------------------------------------------------------------- eval ----

int cmd_eval(const CLI::App* cmd, const std::string& config_path, const std::string& out_dir,
             std::uint64_t seed, std::string checkpoint, std::string test_path,
             std::string train_path, bool stats, std::string compare_path) {
  const json file = load_config_file(config_path);
  auto picked = [&](const char* name) { return cmd->count(name) > 0; };
  auto pick_path = [&](const char* flag, const char* key, std::string& value) {
    if (!picked(flag) && file.contains(key)) value = file.at(key).get<std::string>();
  };
  pick_path("--checkpoint", "checkpoint", checkpoint);
  pick_path("--test", "test_path", test_path);
  pick_path("--train", "train_path", train_path);
  pick_path("--compare", "compare", compare_path);
  if (!picked("--stats") && file.contains("stats")) stats = file.at("stats").get<bool>();
  if (checkpoint.empty()) throw UsageError("eval: --checkpoint is required");
  if (test_path.empty()) throw UsageError("eval: --test is required");

  const train::Checkpoint ckpt = train::load_checkpoint(checkpoint);
  const corpus::Dataset test = corpus::read_canonical(test_path);
  std::optional<corpus::Dataset> train_set;
  if (!train_path.empty()) train_set = corpus::read_canonical(train_path);

  PredictionRun run = predict_dataset(ckpt.params, ckpt.model, ckpt.vocab, test);
  const corpus::Dataset scored = deanonymized_copy(test);
  eval::EvalReport report =
      eval::evaluate(run.predictions, scored, train_set ? &*train_set : nullptr);
  if (ckpt.model.variant == models::Variant::kPointer)
    report.pointer_disagreements = run.pointer_disagreements;
  if (stats) {
    if (run.attention_maxima.empty())
      std::cerr << "eval: no attention traces (query-only model), skipping --stats\n";
    else
      report.attention = eval::attention_stats_from_maxima(run.attention_maxima);
  }

  const fs::path out = prepare_out_dir(out_dir);
  write_predictions_file(out / "predictions.jsonl", scored, run.predictions);

  json report_json = eval_report_json(report);
  if (!compare_path.empty()) {
    const eval::EvalReport other = eval_report_from_json(load_config_file(compare_path));
    report_json["compare"] = eval::compare_runs(other, report);
  }
  write_json_file(out / "report.json", report_json);

  json resolved = {{"command", "eval"},     {"checkpoint", checkpoint},
                   {"test_path", test_path}, {"train_path", train_path},
                   {"stats", stats},         {"compare", compare_path},
                   {"out_dir", out_dir},     {"seed", seed}};
  write_json_file(out / "config.json", resolved);
  return 0;
}

// ------------------------------------------------------------- baseline ----

struct BaselineOpts {
  std::string kind, test_path, train_path, dev_path, embeddings;
  int radius = 2;
  int dim = 50;
};

int cmd_baseline(const CLI::App* cmd, const std::string& config_path, const std::string& out_dir,
                 std::uint64_t seed, BaselineOpts opts, train::TrainConfig tflags) {
  const json file = load_config_file(config_path);
  auto picked = [&](const char* name) { return cmd->count(name) > 0; };
  auto pick_path = [&](const char* flag, const char* key, std::string& value) {
    if (!picked(flag) && file.contains(key)) value = file.at(key).get<std::string>();
  };
  pick_path("--kind", "kind", opts.kind);
  pick_path("--test", "test_path", opts.test_path);
  pick_path("--train", "train_path", opts.train_path);
  pick_path("--dev", "dev_path", opts.dev_path);
  pick_path("--embeddings", "embeddings", opts.embeddings);
  if (!picked("--radius") && file.contains("radius")) opts.radius = file.at("radius").get<int>();
  if (!picked("--dim") && file.contains("dim")) opts.dim = file.at("dim").get<int>();
  if (file.contains("training")) {
    train::TrainConfig from_file;
    train::from_json(file.at("training"), from_file);
    if (!picked("--lr")) tflags.lr = from_file.lr;
    if (!picked("--epochs")) tflags.epochs = from_file.epochs;
    if (!picked("--batch-size")) tflags.batch_size = from_file.batch_size;
    if (!picked("--min-count")) tflags.min_count = from_file.min_count;
  }
  if (!picked("--seed") && file.contains("seed")) seed = file.at("seed").get<std::uint64_t>();
  if (opts.kind.empty()) throw UsageError("baseline: --kind is required");
  if (opts.test_path.empty()) throw UsageError("baseline: --test is required");

  const corpus::Dataset test = corpus::read_canonical(opts.test_path);
  std::optional<corpus::Dataset> train_set;
  if (!opts.train_path.empty()) train_set = corpus::read_canonical(opts.train_path);

  std::map<std::string, std::string> predictions;
  if (opts.kind == "random") {
    for (const auto& inst : test) predictions[inst.id] = models::baseline_random(inst, seed);
  } else if (opts.kind == "maxfreq") {
    for (const auto& inst : test) predictions[inst.id] = models::baseline_maxfreq(inst);
  } else if (opts.kind == "simwindow") {
    if (opts.embeddings.empty()) throw UsageError("baseline: simwindow requires --embeddings");
    const corpus::Vocabulary vocab = corpus::build_vocab(test, 1);
    const corpus::EmbeddingLoad emb = corpus::load_embeddings(opts.embeddings, vocab);
    for (const auto& inst : test)
      predictions[inst.id] = models::baseline_simwindow(inst, emb.table, opts.radius);
  } else if (opts.kind == "query-only") {
    if (opts.train_path.empty() || opts.dev_path.empty())
      throw UsageError("baseline: query-only requires --train and --dev");
    const corpus::Dataset dev_set = corpus::read_canonical(opts.dev_path);
    models::MemNetConfig mcfg;
    mcfg.variant = models::Variant::kQueryOnly;
    mcfg.dim = opts.dim;
    mcfg.radius = opts.radius;
    mcfg.seed = seed;
    train::TrainConfig tcfg = tflags;
    tcfg.seed = seed;
    train::TrainResult result = train::train(mcfg, tcfg, *train_set, dev_set);
    PredictionRun run = predict_dataset(result.best.params, mcfg, result.best.vocab, test);
    predictions = std::move(run.predictions);
  } else {
    throw UsageError("baseline: unknown kind '" + opts.kind + "'");
  }

  const corpus::Dataset scored = deanonymized_copy(test);
  for (const auto& inst : test)
    if (!inst.entity_map.empty())
      predictions[inst.id] = corpus::deanonymize_prediction(inst, predictions[inst.id]);
  eval::EvalReport report = eval::evaluate(predictions, scored, train_set ? &*train_set : nullptr);

  const fs::path out = prepare_out_dir(out_dir);
  write_predictions_file(out / "predictions.jsonl", scored, predictions);
  write_json_file(out / "report.json", eval_report_json(report));

  json resolved = {{"command", "baseline"},
                   {"kind", opts.kind},
                   {"test_path", opts.test_path},
                   {"train_path", opts.train_path},
                   {"dev_path", opts.dev_path},
                   {"embeddings", opts.embeddings},
                   {"radius", opts.radius},
                   {"dim", opts.dim},
                   {"out_dir", out_dir},
                   {"seed", seed},
                   {"training", tflags}};
  write_json_file(out / "config.json", resolved);
  return 0;
}

// ----------------------------------------------------------------- grid ----

int cmd_grid(const CLI::App* cmd, const std::string& config_path, const std::string& out_dir,
             std::uint64_t seed, std::string train_path, std::string dev_path,
             const std::string& variant, models::MemNetConfig mflags,
             train::TrainConfig tflags) {
  const json file = load_config_file(config_path);
  models::MemNetConfig mcfg;
  train::TrainConfig tcfg;
  if (file.contains("model")) models::from_json(file.at("model"), mcfg);
  if (file.contains("training")) train::from_json(file.at("training"), tcfg);
  auto picked = [&](const char* name) { return cmd->count(name) > 0; };
  if (picked("--variant")) mcfg.variant = models::variant_from_name(variant);
  if (picked("--radius")) mcfg.radius = mflags.radius;
  if (picked("--memory")) mcfg.memory_size = mflags.memory_size;
  if (picked("--key-value")) mcfg.key_value = mflags.key_value;
  if (picked("--epochs")) tcfg.epochs = tflags.epochs;
  if (picked("--batch-size")) tcfg.batch_size = tflags.batch_size;
  if (picked("--min-count")) tcfg.min_count = tflags.min_count;
  if (picked("--grid-lr")) tcfg.grid_lr = tflags.grid_lr;
  if (picked("--grid-dim")) tcfg.grid_dim = tflags.grid_dim;
  if (picked("--grid-hops")) tcfg.grid_hops = tflags.grid_hops;
  if (picked("--seed") || !file.contains("seed")) {
    mcfg.seed = seed;
    tcfg.seed = seed;
  }
  auto pick_path = [&](const char* flag, const char* key, std::string& value) {
    if (!picked(flag) && file.contains(key)) value = file.at(key).get<std::string>();
  };
  pick_path("--train", "train_path", train_path);
  pick_path("--dev", "dev_path", dev_path);
  if (train_path.empty()) throw UsageError("grid: --train is required");
  if (dev_path.empty()) throw UsageError("grid: --dev is required");

  const corpus::Dataset train_set = corpus::read_canonical(train_path);
  const corpus::Dataset dev_set = corpus::read_canonical(dev_path);
  train::GridResult result = train::grid_search(mcfg, tcfg, train_set, dev_set);

  auto row_json = [](const train::GridRow& r) {
    return json{{"lr", r.lr},
                {"dim", r.dim},
                {"hops", r.hops},
                {"dev_score", r.dev_score},
                {"best_epoch", r.best_epoch}};
  };
  json rows = json::array();
  for (const auto& r : result.rows) rows.push_back(row_json(r));
  write_json_file(prepare_out_dir(out_dir) / "grid.json",
                  json{{"rows", std::move(rows)}, {"best", row_json(result.best)}});

  json resolved = {{"command", "grid"},   {"train_path", train_path}, {"dev_path", dev_path},
                   {"out_dir", out_dir},  {"seed", tcfg.seed},        {"model", mcfg},
                   {"training", tcfg}};
  write_json_file(fs::path(out_dir) / "config.json", resolved);
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"window-based memory networks for cloze-style reading comprehension"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file; explicit flags override it");
    cmd->add_option("--out-dir", out_dir, "output directory")->required();
    cmd->add_option("--seed", seed, "RNG seed for the whole run");
  };

  int rc = 0;

  // synth
  corpus::SyntheticConfig sflags;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic cloze dataset");
  add_common(synth);
  synth->add_option("--vocab-size", sflags.vocab_size);
  synth->add_option("--entity-pool", sflags.entity_pool);
  synth->add_option("--entities-per-passage", sflags.entities_per_passage);
  synth->add_option("--radius", sflags.radius);
  synth->add_option("--distractors", sflags.distractor_windows);
  synth->add_option("--overlap", sflags.overlap);
  synth->add_option("--unseen-rate", sflags.unseen_rate);
  synth->add_option("--noise-rate", sflags.noise_rate);
  synth->add_option("--cue-rate", sflags.query_cue_rate);
  synth->add_option("--train-size", sflags.train_size);
  synth->add_option("--dev-size", sflags.dev_size);
  synth->add_option("--test-size", sflags.test_size);
  synth->callback([&]() { rc = cmd_synth(synth, config_path, out_dir, seed, sflags); });

  // prepare
  std::string prep_input, prep_train, prep_format = "jsonl", prep_adapter;
  std::vector<std::string> prep_transforms;
  CLI::App* prepare = app.add_subcommand("prepare", "convert and transform datasets");
  add_common(prepare);
  prepare->add_option("--input", prep_input, "input dataset");
  prepare->add_option("--input-format", prep_format, "jsonl|cbt|json-adapter");
  prepare->add_option("--adapter", prep_adapter, "field-mapping JSON for json-adapter input");
  prepare->add_option("--transforms", prep_transforms,
                      "comma-separated: anonymize, cap:<k>, seen-filter")
      ->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  prepare->add_option("--train", prep_train, "training JSONL for seen-filter");
  prepare->callback([&]() {
    rc = cmd_prepare(config_path, out_dir, seed, prep_input, prep_format, prep_adapter,
                     prep_transforms, prep_train, prepare);
  });

  // train
  TrainOpts topts;
  models::MemNetConfig mflags;
  train::TrainConfig tflags;
  CLI::App* train_cmd = app.add_subcommand("train", "train a model");
  add_common(train_cmd);
  train_cmd->add_option("--train", topts.train_path, "training JSONL");
  train_cmd->add_option("--dev", topts.dev_path, "development JSONL");
  train_cmd->add_option("--variant", topts.variant,
                        "vanilla|pointer|attention-feat|attention-feat-only|best-window|query-only");
  train_cmd->add_option("--hops", mflags.hops);
  train_cmd->add_option("--dim", mflags.dim);
  train_cmd->add_option("--radius", mflags.radius);
  train_cmd->add_option("--memory", mflags.memory_size);
  train_cmd->add_flag("--key-value", mflags.key_value);
  train_cmd->add_flag("--anonymized", mflags.anonymized);
  train_cmd->add_option("--lr", tflags.lr);
  train_cmd->add_option("--epochs", tflags.epochs);
  train_cmd->add_option("--batch-size", tflags.batch_size);
  train_cmd->add_option("--min-count", tflags.min_count);
  train_cmd->add_option("--metric", topts.metric, "accuracy|f1");
  train_cmd->add_option("--embeddings", topts.embeddings, "pretrained embedding text file");
  train_cmd->add_flag("--init-eprime-pretrained", topts.init_eprime,
                      "initialize the output embedding matrix from the pretrained file too");
  train_cmd->add_flag("--trace", topts.trace, "write per-instance attention over the dev set");
  train_cmd->callback(
      [&]() { rc = cmd_train(train_cmd, config_path, out_dir, seed, topts, mflags, tflags); });

  // eval
  std::string ev_checkpoint, ev_test, ev_train, ev_compare;
  bool ev_stats = false;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval_cmd);
  eval_cmd->add_option("--checkpoint", ev_checkpoint);
  eval_cmd->add_option("--test", ev_test);
  eval_cmd->add_option("--train", ev_train, "training JSONL for the seen/unseen breakdown");
  eval_cmd->add_flag("--stats", ev_stats, "report attention statistics");
  eval_cmd->add_option("--compare", ev_compare, "another report.json to diff against");
  eval_cmd->callback([&]() {
    rc = cmd_eval(eval_cmd, config_path, out_dir, seed, ev_checkpoint, ev_test, ev_train, ev_stats,
                  ev_compare);
  });

  // baseline
  BaselineOpts bopts;
  train::TrainConfig btflags;
  CLI::App* baseline = app.add_subcommand("baseline", "run a non-neural or probe baseline");
  add_common(baseline);
  baseline->add_option("--kind", bopts.kind, "random|maxfreq|simwindow|query-only");
  baseline->add_option("--test", bopts.test_path);
  baseline->add_option("--train", bopts.train_path);
  baseline->add_option("--dev", bopts.dev_path);
  baseline->add_option("--embeddings", bopts.embeddings, "embedding file for simwindow");
  baseline->add_option("--radius", bopts.radius);
  baseline->add_option("--dim", bopts.dim, "embedding dim for query-only");
  baseline->add_option("--lr", btflags.lr);
  baseline->add_option("--epochs", btflags.epochs);
  baseline->add_option("--batch-size", btflags.batch_size);
  baseline->add_option("--min-count", btflags.min_count);
  baseline->callback(
      [&]() { rc = cmd_baseline(baseline, config_path, out_dir, seed, bopts, btflags); });

  // grid
  std::string g_train, g_dev, g_variant = "vanilla";
  models::MemNetConfig gmflags;
  train::TrainConfig gtflags;
  CLI::App* grid = app.add_subcommand("grid", "hyperparameter grid search");
  add_common(grid);
  grid->add_option("--train", g_train);
  grid->add_option("--dev", g_dev);
  grid->add_option("--variant", g_variant);
  grid->add_option("--radius", gmflags.radius);
  grid->add_option("--memory", gmflags.memory_size);
  grid->add_flag("--key-value", gmflags.key_value);
  grid->add_option("--epochs", gtflags.epochs);
  grid->add_option("--batch-size", gtflags.batch_size);
  grid->add_option("--min-count", gtflags.min_count);
  grid->add_option("--grid-lr", gtflags.grid_lr)
      ->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  grid->add_option("--grid-dim", gtflags.grid_dim)
      ->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  grid->add_option("--grid-hops", gtflags.grid_hops)
      ->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  grid->callback([&]() {
    rc = cmd_grid(grid, config_path, out_dir, seed, g_train, g_dev, g_variant, gmflags, gtflags);
  });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace memnet::cli
