#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tabgnn/encoder.hpp"
#include "tabgnn/graph.hpp"
#include "tabgnn/model.hpp"
#include "tabgnn/split.hpp"
#include "tabgnn/table.hpp"

namespace tabgnn {

struct TrainConfig {
  Task task = Task::kClassification;
  double lr = 1e-3;            // [1e-6, 1e-3]
  double dropout = 0.0;        // [0, 1]
  std::size_t hidden_dim = 64; // {64, 128, 256}
  double weight_decay = 0.0;   // [0, 1]
  std::size_t attention_head = 2;  // {2, 4}
  std::size_t layer_size = 1;      // {1, 2, 3, 4}
  std::size_t epochs = 100;
  std::size_t patience = 10;
  std::uint64_t seed = 0;

  AggKind agg = AggKind::kAttention;
  std::size_t hops = 1;
  // 0 trains full-batch; otherwise train rows are shuffled into batches of
  // this size each epoch.
  std::size_t batch_size = 0;
  std::size_t emb_cap = 16;

  // Throws ValidationError when a value leaves its searchable range.
  void validate() const;
};

nlohmann::json config_to_json(const TrainConfig& cfg);
// Unknown keys are rejected; missing keys keep their defaults.
TrainConfig config_from_json(const nlohmann::json& doc);
TrainConfig load_config(const std::filesystem::path& path);

// Model widths used by train(): projection, aggregation and fusion all take
// hidden_dim.
ModelDims make_dims(const TrainConfig& cfg, const EncoderSpec& encoder, std::size_t n_relations);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  // AUC (classification) or MSE (regression) on the validation rows; NaN
  // when undefined, in which case model selection uses the validation loss.
  double valid_metric = 0.0;
  double valid_loss = 0.0;
};

nlohmann::json epoch_to_json(const EpochRecord& rec);
void write_history(std::ostream& out, std::span<const EpochRecord> history);

struct TrainResult {
  Model model;  // best-validation parameters
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_metric = 0.0;
};

struct TrainData {
  const MultiplexGraph& graph;
  const Features& features;
  std::span<const double> targets;  // NaN for unlabeled rows
  const Splits& splits;
};

// Called after every epoch; returning false stops training.
using EpochCallback = std::function<bool(const EpochRecord&)>;

TrainResult train(const TrainData& data, const EncoderSpec& encoder, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});
// Builds features and encoder shapes from a preprocessed table.
TrainResult train(const MultiplexGraph& graph, const Table& table, const Splits& splits, const TrainConfig& cfg);

// Evaluation-mode outputs for every node, using the model's stored relation
// weights when present.
std::vector<double> predict(const Model& model, const MultiplexGraph& graph, const Features& features,
                            Exec exec = Exec::kParallel);
// Fused embeddings z for every node in evaluation mode.
Matrix embed(const Model& model, const MultiplexGraph& graph, const Features& features, Exec exec = Exec::kParallel);

// Validation metric of `outputs` on `rows`: AUC or MSE, NaN when AUC is
// undefined (single class) or rows are empty.
double split_metric(std::span<const double> outputs, std::span<const double> targets, std::span<const RowId> rows,
                    Task task);
bool metric_better(double candidate, double incumbent, Task task);

// Draws lr log-uniformly, dropout and weight decay uniformly, and discrete
// settings uniformly from their allowed sets. Other fields come from `base`.
TrainConfig sample_config(const TrainConfig& base, std::mt19937_64& rng);

struct TrialRecord {
  std::size_t trial = 0;
  TrainConfig config;
  double metric = 0.0;
  double seconds = 0.0;
};

struct SearchResult {
  TrainConfig best;
  double best_metric = 0.0;
  std::vector<TrialRecord> trials;
};

// Runs trials until `budget` is exhausted or `time_limit` has elapsed (the
// first trial always runs). `objective` returns the validation metric of a
// config; NaN trials never win.
SearchResult random_search(const TrainConfig& base, std::size_t budget, std::chrono::duration<double> time_limit,
                           const std::function<double(const TrainConfig&)>& objective);

}  // namespace tabgnn
