#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tabgnn/encoder.hpp"
#include "tabgnn/graph.hpp"
#include "tabgnn/kernels.hpp"
#include "tabgnn/matrix.hpp"

namespace tabgnn {

using kernels::AggKind;
using kernels::Exec;

enum class Task { kClassification, kRegression };

std::string_view to_string(Task task);
Task parse_task(std::string_view name);
std::string_view to_string(AggKind kind);
AggKind parse_agg_kind(std::string_view name);

struct ModelDims {
  EncoderSpec encoder;
  std::size_t n_relations = 1;
  std::size_t proj_dim = 64;    // width of M_r h
  std::size_t out_dim = 64;     // width of z^r
  std::size_t fusion_dim = 64;  // rows of the fusion matrix
  std::size_t heads = 2;
  std::size_t hops = 1;
  AggKind agg = AggKind::kAttention;
  Task task = Task::kClassification;

  void validate() const;
};

struct HopParams {
  Matrix weight;     // out_dim x in_dim
  Matrix attention;  // heads x 2*in_dim, [left | right] halves
};

struct RelationParams {
  Matrix projection;  // proj_dim x hidden_dim
  std::vector<HopParams> hops;
};

struct FusionParams {
  Matrix q;     // 1 x fusion_dim
  Matrix w;     // fusion_dim x out_dim
  Matrix bias;  // 1 x fusion_dim
};

struct HeadParams {
  Matrix w;     // 1 x out_dim
  Matrix bias;  // 1 x 1
};

struct ModelParams {
  EncoderParams encoder;
  std::vector<RelationParams> relations;
  FusionParams fusion;
  HeadParams head;
};

ModelParams zero_params(const ModelDims& dims);

// Every trainable tensor with a stable name, in a fixed order.
std::vector<std::pair<std::string, Matrix*>> named_tensors(ModelParams& params);
std::vector<std::pair<std::string, const Matrix*>> named_tensors(const ModelParams& params);

struct Model {
  ModelDims dims;
  ModelParams params;
  // Relation weights from the latest training step; evaluation-mode forward
  // passes reuse them so a node's output depends only on its neighborhood.
  std::vector<double> beta;
};

// Uniform(+-sqrt(6/(fan_in+fan_out))) matrices, zero biases.
Model init_model(const ModelDims& dims, std::uint64_t seed);

struct ForwardOptions {
  bool training = false;
  double dropout = 0.0;
  std::uint64_t dropout_seed = 0;
  // Nodes averaged over in the relation scores; empty means all nodes.
  std::span<const NodeId> fusion_nodes;
  // Use these relation weights instead of computing them.
  const std::vector<double>* fixed_beta = nullptr;
  Exec exec = Exec::kParallel;
};

struct HopTrace {
  Matrix input;  // after dropout for hops > 0
  Matrix mask;   // dropout mask on input (hops > 0, training only)
  kernels::AggregateBuffers buffers;
  Matrix pre;
  Matrix out;
};

struct RelationTrace {
  Matrix projected;
  std::vector<HopTrace> hops;
};

struct ForwardTrace {
  EncoderTrace encoder;
  Matrix encoded;    // h = ENC(x)
  Matrix gnn_mask;   // dropout mask on h
  Matrix gnn_input;  // h after dropout
  std::vector<RelationTrace> relations;
  std::vector<NodeId> fusion_nodes;
  std::vector<Matrix> fusion_tanh;  // per relation: |fusion_nodes| x fusion_dim
  std::vector<double> scores;       // s^r
  std::vector<double> beta;         // softmax(s)
  bool fixed_beta = false;
  Matrix fused;                     // z, n x out_dim
  std::vector<double> logits;       // W_o z + b_o
  std::vector<double> outputs;      // logistic(logits) or logits
};

// encode -> project -> aggregate (per relation, per hop) -> fuse -> predict.
ForwardTrace forward(const Model& model, const MultiplexGraph& graph, const Features& features,
                     const ForwardOptions& options = {});

// Gradients of sum_v dlogits[v] * logit_v w.r.t. every parameter.
ModelParams backward(const Model& model, const MultiplexGraph& graph, const Features& features,
                     const ForwardTrace& trace, std::span<const double> dlogits, Exec exec = Exec::kParallel);

// Building blocks, exposed for tests and the homogeneous baseline.

// Ĥ = H M^T.
Matrix project(const Matrix& h, const Matrix& m, Exec exec = Exec::kParallel);

struct IntraResult {
  kernels::AggregateBuffers buffers;
  Matrix pre;
  Matrix out;  // rectified
};
// z^r_v = rectifier(W_r AGG({ĥ_u : u in {v} ∪ N(v)})).
IntraResult intra_aggregate(const Neighborhood& hood, const Matrix& projected, const HopParams& params,
                            AggKind kind, std::size_t heads, Exec exec = Exec::kParallel);

struct FuseResult {
  Matrix fused;
  std::vector<double> scores;
  std::vector<double> beta;
  std::vector<Matrix> tanh;
};
// s^r = mean_v q . tanh(W z^r_v + b), beta = softmax(s), z_v = sum_r beta^r z^r_v.
FuseResult inter_fuse(std::span<const Matrix> per_relation, const FusionParams& params,
                      std::span<const NodeId> nodes = {});

std::vector<double> softmax(std::span<const double> s);

double predict_head(std::span<const double> z, const HeadParams& head, Task task);

}  // namespace tabgnn
