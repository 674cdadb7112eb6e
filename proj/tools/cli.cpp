#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tabgnn/checkpoint.hpp"
#include "tabgnn/downstream.hpp"
#include "tabgnn/embeddings.hpp"
#include "tabgnn/error.hpp"
#include "tabgnn/graph_io.hpp"
#include "tabgnn/relation.hpp"
#include "tabgnn/split.hpp"
#include "tabgnn/table.hpp"
#include "tabgnn/trainer.hpp"

namespace tabgnn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fingerprint(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

struct Options {
  std::string out = "run";
  std::string schema;
  std::string data;
  std::string relations;  // file for build-graph, comma list for train/tune
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string agg;
  std::string task;
  double valid_ratio = 0.1;
  double test_ratio = 0.2;
  bool temporal = false;
  std::optional<std::size_t> cap;
  std::size_t budget = 20;
  double time_limit = 48 * 3600.0;
};

json read_json(const fs::path& path, const std::string& what) {
  std::ifstream in(path);
  if (!in) throw ValidationError("missing artifact: " + path.string() + " (" + what + ")");
  try {
    json doc;
    in >> doc;
    return doc;
  } catch (const json::exception& e) {
    throw ValidationError("malformed " + path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) throw RuntimeError("cannot write " + path.string());
}

std::string now_utc() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Run directory with its manifest: input paths plus one record per stage.
class Run {
 public:
  explicit Run(const Options& opt) : opt_(opt), dir_(opt.out) {
    fs::create_directories(dir_);
    if (fs::exists(dir_ / "manifest.json")) manifest_ = read_json(dir_ / "manifest.json", "run manifest");
    if (!manifest_.is_object()) manifest_ = json::object();
  }

  const fs::path& dir() const { return dir_; }
  fs::path path(const std::string& name) const { return dir_ / name; }

  // Flag value, else the path recorded by an earlier stage.
  std::string input(const std::string& flag_value, const std::string& key, const std::string& flag) {
    if (!flag_value.empty()) {
      const std::string abs = fs::absolute(flag_value).string();
      manifest_["inputs"][key] = abs;
      return abs;
    }
    if (manifest_.contains("inputs") && manifest_["inputs"].contains(key))
      return manifest_["inputs"][key].get<std::string>();
    throw ValidationError("missing " + flag + " (not recorded in " + (dir_ / "manifest.json").string() + ")");
  }

  std::uint64_t seed() {
    if (opt_.seed) {
      manifest_["seed"] = *opt_.seed;
      return *opt_.seed;
    }
    return manifest_.value("seed", std::uint64_t{0});
  }

  void record(const std::string& stage, const json& consumed, const std::vector<std::string>& outputs) {
    manifest_["stages"][stage] = {{"fingerprint", fingerprint(consumed.dump())},
                                  {"config", consumed},
                                  {"finished_at", now_utc()},
                                  {"outputs", outputs}};
    write_text(dir_ / "manifest.json", manifest_.dump(2) + "\n");
  }

 private:
  const Options& opt_;
  fs::path dir_;
  json manifest_;
};

Table load_raw(Run& run, const Options& opt, Schema* schema_out = nullptr) {
  const Schema schema = load_schema(run.input(opt.schema, "schema", "--schema"));
  if (schema_out) *schema_out = schema;
  return load_table(run.input(opt.data, "data", "--data"), schema);
}

std::vector<std::string> row_ids(const Table& table) {
  std::vector<std::string> ids(table.n_rows());
  for (const auto& c : table.columns())
    if (c.schema.kind == ColumnKind::kId) return c.text;
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = std::to_string(i);
  return ids;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

MultiplexGraph load_graph(const Run& run) {
  if (!fs::exists(run.path("graph") / "manifest.json"))
    throw ValidationError("missing artifact: " + (run.path("graph") / "manifest.json").string() +
                          " (run build-graph first)");
  return read_graph(run.path("graph"));
}

MultiplexGraph select_layers(const MultiplexGraph& g, const std::vector<std::string>& names) {
  for (const auto& n : names) {
    const auto have = g.layer_names();
    if (std::find(have.begin(), have.end(), n) == have.end())
      throw ValidationError("relation '" + n + "' is not in the built graph");
  }
  return g.select(names);
}

Preprocessor load_prep(const Run& run) {
  const json doc = read_json(run.path("preprocess.json"), "run ingest first");
  return {vocabulary_from_json(doc.at("vocabulary")), norm_stats_from_json(doc.at("norm_stats"))};
}

Splits load_splits(const Run& run) { return splits_from_json(read_json(run.path("splits.json"), "run ingest first")); }

TrainConfig resolve_config(Run& run, const Options& opt) {
  TrainConfig cfg;
  if (!opt.config.empty()) cfg = load_config(run.input(opt.config, "config", "--config"));
  if (opt.seed) cfg.seed = *opt.seed;
  if (!opt.agg.empty()) cfg.agg = parse_agg_kind(opt.agg);
  if (!opt.task.empty()) cfg.task = parse_task(opt.task);
  cfg.validate();
  return cfg;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// Inputs shared by the commands that run a trained model.
struct Trained {
  Checkpoint ckpt;
  Table table;
  Features features;
  MultiplexGraph graph;
  Splits splits;
};

Trained load_trained(Run& run, const Options& opt) {
  const fs::path path = run.path("checkpoint.json");
  if (!fs::exists(path)) throw ValidationError("missing artifact: " + path.string() + " (run train first)");
  Trained t{load_checkpoint(path), {}, {}, {}, {}};
  t.table = transform(load_raw(run, opt), t.ckpt.prep);
  t.features = build_features(t.table);
  t.graph = select_layers(load_graph(run), t.ckpt.relations);
  t.splits = load_splits(run);
  if (t.graph.n_nodes() != t.table.n_rows()) throw ValidationError("graph was built for a different table");
  return t;
}

int cmd_ingest(const Options& opt, std::ostream& out) {
  Run run(opt);
  Schema schema;
  Table raw = load_raw(run, opt, &schema);
  const std::uint64_t seed = run.seed();
  const Splits splits = make_splits(raw, opt.valid_ratio, opt.test_ratio, opt.temporal, seed);
  auto [table, prep] = fit_transform(std::move(raw), splits.train);
  write_text(run.path("preprocess.json"),
             json{{"schema", schema_to_json(schema)},
                  {"vocabulary", vocabulary_to_json(prep.vocab)},
                  {"norm_stats", norm_stats_to_json(prep.stats)}}
                     .dump(2) +
                 "\n");
  write_text(run.path("splits.json"), splits_to_json(splits).dump() + "\n");
  run.record("ingest",
             {{"schema", schema_to_json(schema)},
              {"valid_ratio", opt.valid_ratio},
              {"test_ratio", opt.test_ratio},
              {"temporal", opt.temporal},
              {"seed", seed}},
             {"preprocess.json", "splits.json"});
  out << "rows: " << table.n_rows() << "\ntrain: " << splits.train.size() << "\nvalid: " << splits.valid.size()
      << "\ntest: " << splits.test.size() << "\nunlabeled: " << splits.unlabeled.size() << '\n';
  return kOk;
}

int cmd_build_graph(const Options& opt, std::ostream& out) {
  Run run(opt);
  Table raw = load_raw(run, opt);
  RelationConfig rel = load_relations(run.input(opt.relations, "relations", "--relations"));
  rel.options.seed = run.seed();
  if (opt.cap) rel.options.cap = *opt.cap;
  // Relation keys are structural and label-free, so categories are indexed
  // over every row here; the encoder vocabulary stays fit on training rows.
  Table keyed = impute(encode_categorical_ids(std::move(raw), std::nullopt).first);
  BuildReport report;
  const MultiplexGraph graph = build_graph(keyed, rel, &report);
  write_graph(run.path("graph"), graph);
  write_text(run.path("relations.json"), relations_to_json(rel).dump(2) + "\n");
  run.record("build-graph", relations_to_json(rel), {"graph/manifest.json", "relations.json"});
  out << "nodes: " << graph.n_nodes() << "\nrelations: " << graph.n_layers()
      << "\ndirected: " << (graph.directed() ? "yes" : "no") << '\n';
  for (std::size_t r = 0; r < graph.n_layers(); ++r)
    out << "edges_" << graph.layer(r).edges.relation << ": " << graph.layer(r).edges.edges.size() << '\n';
  return kOk;
}

int cmd_train(const Options& opt, std::ostream& out) {
  Run run(opt);
  const TrainConfig cfg = resolve_config(run, opt);
  Schema schema;
  const Preprocessor prep = load_prep(run);
  const Table table = transform(load_raw(run, opt, &schema), prep);
  const Splits splits = load_splits(run);
  MultiplexGraph graph = load_graph(run);
  if (!opt.relations.empty()) graph = select_layers(graph, split_list(opt.relations));
  if (graph.n_nodes() != table.n_rows()) throw ValidationError("graph was built for a different table");

  TrainResult res = train(graph, table, splits, cfg);
  Checkpoint ckpt{res.model, cfg, schema, prep, graph.layer_names()};
  save_checkpoint(run.path("checkpoint.json"), ckpt);
  std::ofstream hist(run.path("history.jsonl"));
  write_history(hist, res.history);
  hist.close();
  json consumed = config_to_json(cfg);
  consumed["relations"] = graph.layer_names();
  run.record("train", consumed, {"checkpoint.json", "history.jsonl"});
  out << "epochs: " << res.history.size() << "\nbest_epoch: " << res.best_epoch
      << "\nbest_valid_metric: " << fmt(res.best_metric) << '\n';
  return kOk;
}

int cmd_predict(const Options& opt, std::ostream& out) {
  Run run(opt);
  Trained t = load_trained(run, opt);
  const auto pred = predict(t.ckpt.model, t.graph, t.features);
  const auto ids = row_ids(t.table);
  std::ostringstream csv;
  csv << "row_id,prediction\n";
  char buf[32];
  for (std::size_t i = 0; i < pred.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", pred[i]);
    csv << ids[i] << ',' << buf << '\n';
  }
  write_text(run.path("predictions.csv"), csv.str());
  run.record("predict", config_to_json(t.ckpt.config), {"predictions.csv"});
  out << "predictions: " << pred.size() << '\n';
  return kOk;
}

int cmd_export(const Options& opt, std::ostream& out) {
  Run run(opt);
  Trained t = load_trained(run, opt);
  EmbeddingMatrix emb{row_ids(t.table), embed(t.ckpt.model, t.graph, t.features), t.ckpt.model.beta,
                      fingerprint(config_to_json(t.ckpt.config).dump())};
  write_embeddings(run.path("embeddings.csv"), emb);
  run.record("export-embeddings", config_to_json(t.ckpt.config), {"embeddings.csv"});
  out << "rows: " << emb.z.rows() << "\ndim: " << emb.z.cols() << '\n';
  return kOk;
}

int cmd_evaluate(const Options& opt, std::ostream& out) {
  Run run(opt);
  Trained t = load_trained(run, opt);
  const Task task = t.ckpt.config.task;
  const auto& y = t.table.target().values;
  ForwardOptions fo;
  fo.fixed_beta = &t.ckpt.model.beta;
  const ForwardTrace trace = forward(t.ckpt.model, t.graph, t.features, fo);
  const char* metric = task == Task::kClassification ? "auc" : "mse";

  std::ostringstream rep;
  rep << "task: " << to_string(task) << "\nmetric: " << metric << '\n';
  rep << "train_" << metric << ": " << fmt(split_metric(trace.outputs, y, t.splits.train, task)) << '\n';
  rep << "valid_" << metric << ": " << fmt(split_metric(trace.outputs, y, t.splits.valid, task)) << '\n';
  rep << "test_" << metric << ": " << fmt(split_metric(trace.outputs, y, t.splits.test, task)) << '\n';
  for (std::size_t r = 0; r < t.ckpt.relations.size(); ++r)
    rep << "beta_" << t.ckpt.relations[r] << ": " << fmt(t.ckpt.model.beta.empty() ? std::nan("") : t.ckpt.model.beta[r])
        << '\n';
  try {
    const DownstreamReport d = concat_and_fit(t.table, trace.fused, task, t.splits);
    std::istringstream lines(format_report(d));
    for (std::string line; std::getline(lines, line);)
      if (!line.starts_with("task:")) rep << "downstream_" << line << '\n';
  } catch (const ValidationError& e) {
    rep << "downstream: unavailable (" << e.what() << ")\n";
  }
  write_text(run.path("metrics.txt"), rep.str());
  run.record("evaluate", config_to_json(t.ckpt.config), {"metrics.txt"});
  out << rep.str();
  return kOk;
}

int cmd_tune(const Options& opt, std::ostream& out) {
  Run run(opt);
  if (opt.budget < 1) throw ValidationError("--budget must be at least 1");
  if (!(opt.time_limit > 0.0)) throw ValidationError("--time-limit must be positive");
  const TrainConfig base = resolve_config(run, opt);
  const Table table = transform(load_raw(run, opt), load_prep(run));
  const Splits splits = load_splits(run);
  MultiplexGraph graph = load_graph(run);
  if (!opt.relations.empty()) graph = select_layers(graph, split_list(opt.relations));
  if (graph.n_nodes() != table.n_rows()) throw ValidationError("graph was built for a different table");

  const SearchResult res = random_search(base, opt.budget, std::chrono::duration<double>(opt.time_limit),
                                         [&](const TrainConfig& c) { return train(graph, table, splits, c).best_metric; });
  res.best.validate();
  std::ostringstream trials;
  for (const auto& t : res.trials)
    trials << json{{"trial", t.trial},
                   {"config", config_to_json(t.config)},
                   {"valid_metric", std::isnan(t.metric) ? json(nullptr) : json(t.metric)}}
                  .dump()
           << '\n';
  write_text(run.path("trials.jsonl"), trials.str());
  write_text(run.path("best_config.json"), config_to_json(res.best).dump(2) + "\n");
  json consumed = config_to_json(base);
  consumed["budget"] = opt.budget;
  consumed["time_limit"] = opt.time_limit;
  run.record("tune", consumed, {"trials.jsonl", "best_config.json"});
  out << "trials: " << res.trials.size() << "\nbest_valid_metric: " << fmt(res.best_metric) << '\n';
  return kOk;
}

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--out", o.out, "Run directory holding artifacts and the manifest");
  sub->add_option("--schema", o.schema, "Schema JSON file");
  sub->add_option("--data", o.data, "Delimited data file");
  sub->add_option("--seed", o.seed, "Random seed");
}

void add_training(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "Training config JSON file");
  sub->add_option("--agg", o.agg, "Aggregation: attention, mean or sum")
      ->check(CLI::IsMember({"attention", "mean", "sum"}));
  sub->add_option("--task", o.task, "classification or regression")
      ->check(CLI::IsMember({"classification", "regression"}));
  sub->add_option("--relations", o.relations, "Comma-separated subset of relations to use");
}

std::string error_line(const char* kind, const std::string& message) {
  return json{{"error", kind}, {"message", message}}.dump();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Multiplex graph network for tabular prediction", "tabgnn"};
  app.require_subcommand(1, 1);

  auto* ingest = app.add_subcommand("ingest", "Load a table, split rows, fit preprocessing");
  add_common(ingest, o);
  ingest->add_option("--valid-ratio", o.valid_ratio, "Validation share of labeled rows")->check(CLI::Range(0.0, 1.0));
  ingest->add_option("--test-ratio", o.test_ratio, "Test share of labeled rows")->check(CLI::Range(0.0, 1.0));
  ingest->add_flag("--temporal", o.temporal, "Split by timestamp instead of at random");

  auto* build = app.add_subcommand("build-graph", "Extract relation edges into a multiplex graph");
  add_common(build, o);
  build->add_option("--relations", o.relations, "Relation rules JSON file");
  build->add_option("--cap", o.cap, "Maximum incoming neighbors per node and relation");

  auto* tr = app.add_subcommand("train", "Train and keep the best-validation checkpoint");
  add_common(tr, o);
  add_training(tr, o);

  auto* pred = app.add_subcommand("predict", "Write predictions for every row");
  add_common(pred, o);
  auto* exp = app.add_subcommand("export-embeddings", "Write fused row embeddings");
  add_common(exp, o);
  auto* ev = app.add_subcommand("evaluate", "Report split metrics and the downstream comparison");
  add_common(ev, o);

  auto* tune = app.add_subcommand("tune", "Random hyperparameter search");
  add_common(tune, o);
  add_training(tune, o);
  tune->add_option("--budget", o.budget, "Number of trials");
  tune->add_option("--time-limit", o.time_limit, "Wall-clock limit in seconds");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << error_line("usage", e.what()) << '\n';
    return kUsage;
  }

  try {
    if (*ingest) return cmd_ingest(o, out);
    if (*build) return cmd_build_graph(o, out);
    if (*tr) return cmd_train(o, out);
    if (*pred) return cmd_predict(o, out);
    if (*exp) return cmd_export(o, out);
    if (*ev) return cmd_evaluate(o, out);
    if (*tune) return cmd_tune(o, out);
  } catch (const ValidationError& e) {
    err << error_line("validation", e.what()) << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    err << error_line("runtime", e.what()) << '\n';
    return kRuntimeFailure;
  }
  return kUsage;
}

}  // namespace tabgnn::cli
