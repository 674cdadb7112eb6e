#include "tabgnn/checkpoint.hpp"

#include <fstream>

#include "tabgnn/error.hpp"

namespace tabgnn {

using nlohmann::json;

json dims_to_json(const ModelDims& d) {
  return {{"encoder",
           {{"vocab_sizes", d.encoder.vocab_sizes},
            {"emb_dims", d.encoder.emb_dims},
            {"n_numeric", d.encoder.n_numeric},
            {"hidden_dim", d.encoder.hidden_dim},
            {"layer_size", d.encoder.layer_size}}},
          {"n_relations", d.n_relations},
          {"proj_dim", d.proj_dim},
          {"out_dim", d.out_dim},
          {"fusion_dim", d.fusion_dim},
          {"heads", d.heads},
          {"hops", d.hops},
          {"agg", to_string(d.agg)},
          {"task", to_string(d.task)}};
}

ModelDims dims_from_json(const json& doc) {
  ModelDims d;
  const json& e = doc.at("encoder");
  d.encoder.vocab_sizes = e.at("vocab_sizes").get<std::vector<std::size_t>>();
  d.encoder.emb_dims = e.at("emb_dims").get<std::vector<std::size_t>>();
  d.encoder.n_numeric = e.at("n_numeric").get<std::size_t>();
  d.encoder.hidden_dim = e.at("hidden_dim").get<std::size_t>();
  d.encoder.layer_size = e.at("layer_size").get<std::size_t>();
  d.n_relations = doc.at("n_relations").get<std::size_t>();
  d.proj_dim = doc.at("proj_dim").get<std::size_t>();
  d.out_dim = doc.at("out_dim").get<std::size_t>();
  d.fusion_dim = doc.at("fusion_dim").get<std::size_t>();
  d.heads = doc.at("heads").get<std::size_t>();
  d.hops = doc.at("hops").get<std::size_t>();
  d.agg = parse_agg_kind(doc.at("agg").get<std::string>());
  d.task = parse_task(doc.at("task").get<std::string>());
  d.validate();
  return d;
}

json model_to_json(const Model& model) {
  json tensors = json::object();
  for (const auto& [name, t] : named_tensors(model.params))
    tensors[name] = {{"rows", t->rows()}, {"cols", t->cols()}, {"data", t->values()}};
  return {{"dims", dims_to_json(model.dims)}, {"beta", model.beta}, {"tensors", tensors}};
}

Model model_from_json(const json& doc) {
  Model m;
  m.dims = dims_from_json(doc.at("dims"));
  m.params = zero_params(m.dims);
  m.beta = doc.at("beta").get<std::vector<double>>();
  if (!m.beta.empty() && m.beta.size() != m.dims.n_relations)
    throw ValidationError("checkpoint relation weights do not match the relation count");
  const json& tensors = doc.at("tensors");
  for (auto& [name, t] : named_tensors(m.params)) {
    if (!tensors.contains(name)) throw ValidationError("checkpoint is missing tensor " + name);
    const json& j = tensors.at(name);
    const auto data = j.at("data").get<std::vector<double>>();
    if (j.at("rows").get<std::size_t>() != t->rows() || j.at("cols").get<std::size_t>() != t->cols() ||
        data.size() != t->size())
      throw ValidationError("checkpoint tensor " + name + " has the wrong shape");
    std::copy(data.begin(), data.end(), t->data());
  }
  if (tensors.size() != named_tensors(m.params).size()) throw ValidationError("checkpoint has unexpected tensors");
  return m;
}

json checkpoint_to_json(const Checkpoint& c) {
  return {{"format", "tabgnn-checkpoint"},
          {"version", 1},
          {"model", model_to_json(c.model)},
          {"config", config_to_json(c.config)},
          {"schema", schema_to_json(c.schema)},
          {"vocabulary", vocabulary_to_json(c.prep.vocab)},
          {"norm_stats", norm_stats_to_json(c.prep.stats)},
          {"relations", c.relations}};
}

Checkpoint checkpoint_from_json(const json& doc) {
  if (doc.value("format", "") != "tabgnn-checkpoint") throw ValidationError("not a checkpoint document");
  Checkpoint c;
  c.model = model_from_json(doc.at("model"));
  c.config = config_from_json(doc.at("config"));
  c.schema = schema_from_json(doc.at("schema"));
  c.prep.vocab = vocabulary_from_json(doc.at("vocabulary"));
  c.prep.stats = norm_stats_from_json(doc.at("norm_stats"));
  c.relations = doc.at("relations").get<std::vector<std::string>>();
  if (c.relations.size() != c.model.dims.n_relations)
    throw ValidationError("checkpoint layer order does not match the relation count");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path);
  if (!out) throw RuntimeError("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(ckpt).dump() << '\n';
  if (!out) throw RuntimeError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("missing checkpoint: " + path.string());
  try {
    json doc;
    in >> doc;
    return checkpoint_from_json(doc);
  } catch (const json::exception& e) {
    throw ValidationError("malformed checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace tabgnn
