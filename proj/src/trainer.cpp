#include "tabgnn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>

#include "tabgnn/error.hpp"
#include "tabgnn/loss.hpp"
#include "tabgnn/metrics.hpp"
#include "tabgnn/optimizer.hpp"

namespace tabgnn {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

template <class T>
bool one_of(T v, std::initializer_list<T> allowed) {
  return std::find(allowed.begin(), allowed.end(), v) != allowed.end();
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr >= 1e-6 && lr <= 1e-3)) throw ValidationError("lr must lie in [1e-6, 1e-3], got " + std::to_string(lr));
  if (!(dropout >= 0.0 && dropout <= 1.0)) throw ValidationError("dropout must lie in [0, 1]");
  if (!one_of<std::size_t>(hidden_dim, {64, 128, 256}))
    throw ValidationError("hidden_dim must be 64, 128 or 256, got " + std::to_string(hidden_dim));
  if (!(weight_decay >= 0.0 && weight_decay <= 1.0)) throw ValidationError("weight_decay must lie in [0, 1]");
  if (!one_of<std::size_t>(attention_head, {2, 4}))
    throw ValidationError("attention_head must be 2 or 4, got " + std::to_string(attention_head));
  if (layer_size < 1 || layer_size > 4) throw ValidationError("layer_size must be in 1..4");
  if (epochs < 1) throw ValidationError("epochs must be at least 1");
  if (hops < 1) throw ValidationError("hops must be at least 1");
  if (emb_cap < 1) throw ValidationError("emb_cap must be at least 1");
}

nlohmann::json config_to_json(const TrainConfig& c) {
  return {{"task", to_string(c.task)},
          {"lr", c.lr},
          {"dropout", c.dropout},
          {"hidden_dim", c.hidden_dim},
          {"weight_decay", c.weight_decay},
          {"attention_head", c.attention_head},
          {"layer_size", c.layer_size},
          {"epochs", c.epochs},
          {"patience", c.patience},
          {"seed", c.seed},
          {"agg", to_string(c.agg)},
          {"hops", c.hops},
          {"batch_size", c.batch_size},
          {"emb_cap", c.emb_cap}};
}

TrainConfig config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ValidationError("training config must be a JSON object");
  TrainConfig c;
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "task") c.task = parse_task(value.get<std::string>());
      else if (key == "lr") c.lr = value.get<double>();
      else if (key == "dropout") c.dropout = value.get<double>();
      else if (key == "hidden_dim") c.hidden_dim = value.get<std::size_t>();
      else if (key == "weight_decay") c.weight_decay = value.get<double>();
      else if (key == "attention_head") c.attention_head = value.get<std::size_t>();
      else if (key == "layer_size") c.layer_size = value.get<std::size_t>();
      else if (key == "epochs") c.epochs = value.get<std::size_t>();
      else if (key == "patience") c.patience = value.get<std::size_t>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "agg") c.agg = parse_agg_kind(value.get<std::string>());
      else if (key == "hops") c.hops = value.get<std::size_t>();
      else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
      else if (key == "emb_cap") c.emb_cap = value.get<std::size_t>();
      else throw ValidationError("unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(doc);
}

ModelDims make_dims(const TrainConfig& cfg, const EncoderSpec& encoder, std::size_t n_relations) {
  ModelDims d;
  d.encoder = encoder;
  d.n_relations = n_relations;
  d.proj_dim = d.out_dim = d.fusion_dim = cfg.hidden_dim;
  d.heads = cfg.agg == AggKind::kAttention ? cfg.attention_head : 1;
  d.hops = cfg.hops;
  d.agg = cfg.agg;
  d.task = cfg.task;
  return d;
}

nlohmann::json epoch_to_json(const EpochRecord& rec) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"epoch", rec.epoch},
          {"train_loss", num(rec.train_loss)},
          {"valid_metric", num(rec.valid_metric)},
          {"valid_loss", num(rec.valid_loss)}};
}

void write_history(std::ostream& out, std::span<const EpochRecord> history) {
  for (const auto& rec : history) out << epoch_to_json(rec).dump() << '\n';
}

double split_metric(std::span<const double> outputs, std::span<const double> targets, std::span<const RowId> rows,
                    Task task) {
  if (rows.empty()) return kNaN;
  std::vector<double> p, y;
  for (RowId r : rows) {
    p.push_back(outputs[r]);
    y.push_back(targets[r]);
  }
  if (task == Task::kRegression) return mse(p, y);
  const bool has_pos = std::find(y.begin(), y.end(), 1.0) != y.end();
  const bool has_neg = std::find(y.begin(), y.end(), 0.0) != y.end();
  return has_pos && has_neg ? auc(p, y) : kNaN;
}

bool metric_better(double candidate, double incumbent, Task task) {
  if (std::isnan(candidate)) return false;
  if (std::isnan(incumbent)) return true;
  return task == Task::kClassification ? candidate > incumbent : candidate < incumbent;
}

std::vector<double> predict(const Model& model, const MultiplexGraph& graph, const Features& features, Exec exec) {
  ForwardOptions opt;
  opt.exec = exec;
  if (!model.beta.empty()) opt.fixed_beta = &model.beta;
  return forward(model, graph, features, opt).outputs;
}

Matrix embed(const Model& model, const MultiplexGraph& graph, const Features& features, Exec exec) {
  ForwardOptions opt;
  opt.exec = exec;
  if (!model.beta.empty()) opt.fixed_beta = &model.beta;
  return forward(model, graph, features, opt).fused;
}

TrainResult train(const TrainData& data, const EncoderSpec& encoder, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  const std::size_t n = data.features.n_rows;
  if (data.graph.n_nodes() != n) throw ValidationError("graph nodes do not cover the table rows");
  if (data.targets.size() != n) throw ValidationError("target length differs from row count");
  if (data.splits.train.empty()) throw ValidationError("training split is empty");
  for (RowId r : data.splits.train) {
    if (r >= n) throw ValidationError("split row out of range");
    const double y = data.targets[r];
    if (cfg.task == Task::kClassification && y != 0.0 && y != 1.0)
      throw ValidationError("classification targets must be 0 or 1 (row " + std::to_string(r) + ")");
  }

  Model model = init_model(make_dims(cfg, encoder, data.graph.n_layers()), cfg.seed);
  OptimizerState state = make_optimizer_state(model.params);
  std::mt19937_64 batch_rng(mix(cfg.seed ^ 0xb5ULL));

  const auto& valid = data.splits.valid;
  TrainResult result;
  result.model = model;
  double best_key = kNaN;
  std::size_t stale = 0;
  std::uint64_t step = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<std::vector<RowId>> batches;
    if (cfg.batch_size == 0 || cfg.batch_size >= data.splits.train.size()) {
      batches.push_back(data.splits.train);
    } else {
      std::vector<RowId> order = data.splits.train;
      std::shuffle(order.begin(), order.end(), batch_rng);
      for (std::size_t i = 0; i < order.size(); i += cfg.batch_size) {
        std::vector<RowId> b(order.begin() + static_cast<std::ptrdiff_t>(i),
                             order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + cfg.batch_size)));
        std::sort(b.begin(), b.end());
        batches.push_back(std::move(b));
      }
    }

    double epoch_loss = 0.0;
    for (const auto& batch : batches) {
      ForwardOptions opt;
      opt.training = true;
      opt.dropout = cfg.dropout;
      opt.dropout_seed = mix(cfg.seed ^ mix(++step));
      if (batches.size() > 1) opt.fusion_nodes = batch;
      ForwardTrace trace = forward(model, data.graph, data.features, opt);
      LossGrad lg = loss_from_logits(trace.logits, data.targets, batch, cfg.task);
      if (!std::isfinite(lg.value))
        throw RuntimeError("training diverged at epoch " + std::to_string(epoch) + ": loss is not finite");
      ModelParams grads = backward(model, data.graph, data.features, trace, lg.dlogits);
      adam_step(model.params, grads, state, cfg.lr, cfg.weight_decay);
      model.beta = trace.beta;
      epoch_loss += lg.value * static_cast<double>(batch.size());
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / static_cast<double>(data.splits.train.size());
    ForwardOptions eval;
    eval.fixed_beta = &model.beta;
    ForwardTrace out = forward(model, data.graph, data.features, eval);
    rec.valid_metric = split_metric(out.outputs, data.targets, valid, cfg.task);
    rec.valid_loss = valid.empty() ? kNaN : loss_from_logits(out.logits, data.targets, valid, cfg.task).value;
    for (double v : model.params.head.w.values())
      if (!std::isfinite(v)) throw RuntimeError("training diverged at epoch " + std::to_string(epoch));
    result.history.push_back(rec);

    // Select on the validation metric; fall back to validation loss, then
    // training loss, when the metric is undefined for this split.
    double key;
    bool improved;
    if (!std::isnan(rec.valid_metric)) {
      key = rec.valid_metric;
      improved = metric_better(key, best_key, cfg.task);
    } else {
      key = valid.empty() ? rec.train_loss : rec.valid_loss;
      improved = std::isnan(best_key) || key < best_key;
    }
    if (improved) {
      best_key = key;
      result.model = model;
      result.best_epoch = epoch;
      result.best_metric = rec.valid_metric;
      stale = 0;
    } else if (++stale > cfg.patience) {
      break;
    }
    if (on_epoch && !on_epoch(rec)) break;
  }
  return result;
}

TrainResult train(const MultiplexGraph& graph, const Table& table, const Splits& splits, const TrainConfig& cfg) {
  const Features features = build_features(table);
  const EncoderSpec spec = make_encoder_spec(table, cfg.hidden_dim, cfg.layer_size, cfg.emb_cap);
  return train(TrainData{graph, features, table.target().values, splits}, spec, cfg);
}

TrainConfig sample_config(const TrainConfig& base, std::mt19937_64& rng) {
  TrainConfig c = base;
  std::uniform_real_distribution<double> log_lr(std::log(1e-6), std::log(1e-3));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto pick = [&](std::initializer_list<std::size_t> xs) {
    std::uniform_int_distribution<std::size_t> d(0, xs.size() - 1);
    return *(xs.begin() + d(rng));
  };
  c.lr = std::clamp(std::exp(log_lr(rng)), 1e-6, 1e-3);
  c.dropout = unit(rng);
  c.hidden_dim = pick({64, 128, 256});
  c.weight_decay = unit(rng);
  c.attention_head = pick({2, 4});
  c.layer_size = pick({1, 2, 3, 4});
  return c;
}

SearchResult random_search(const TrainConfig& base, std::size_t budget, std::chrono::duration<double> time_limit,
                           const std::function<double(const TrainConfig&)>& objective) {
  if (budget < 1) throw ValidationError("search budget must be at least 1");
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  std::mt19937_64 rng(mix(base.seed ^ 0x7f4a7c15ULL));
  SearchResult res;
  res.best = base;
  res.best_metric = kNaN;
  for (std::size_t t = 0; t < budget; ++t) {
    if (t > 0 && Clock::now() - start >= time_limit) break;
    TrialRecord rec;
    rec.trial = t;
    rec.config = sample_config(base, rng);
    const auto t0 = Clock::now();
    rec.metric = objective(rec.config);
    rec.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    if (res.trials.empty() || metric_better(rec.metric, res.best_metric, base.task)) {
      if (res.trials.empty() || !std::isnan(rec.metric)) {
        res.best = rec.config;
        res.best_metric = rec.metric;
      }
    }
    res.trials.push_back(rec);
  }
  return res;
}

}  // namespace tabgnn
