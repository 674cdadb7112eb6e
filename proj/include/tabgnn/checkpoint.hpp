#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "tabgnn/model.hpp"
#include "tabgnn/schema.hpp"
#include "tabgnn/table.hpp"
#include "tabgnn/trainer.hpp"

namespace tabgnn {

// Everything needed to rerun a trained model on the same graph: parameters,
// relation weights, layer order, training config and the fitted
// preprocessing state. Stored as one JSON document; doubles are written in
// shortest round-trip form, so parameters reload bit for bit.
struct Checkpoint {
  Model model;
  TrainConfig config;
  Schema schema;
  Preprocessor prep;
  std::vector<std::string> relations;
};

nlohmann::json dims_to_json(const ModelDims& dims);
ModelDims dims_from_json(const nlohmann::json& doc);
nlohmann::json model_to_json(const Model& model);
Model model_from_json(const nlohmann::json& doc);

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& doc);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
// ValidationError naming the path when the file is absent or malformed.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tabgnn
