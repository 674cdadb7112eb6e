#include "tabgnn/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "tabgnn/error.hpp"

namespace tabgnn {

namespace {

using Index = std::ptrdiff_t;

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void apply_mask(Matrix& m, const Matrix& mask) {
  for (std::size_t i = 0; i < m.size(); ++i) m[i] *= mask[i];
}

std::size_t hop_in_dim(const ModelDims& dims, std::size_t hop) { return hop == 0 ? dims.proj_dim : dims.out_dim; }

}  // namespace

std::string_view to_string(Task task) { return task == Task::kClassification ? "classification" : "regression"; }

Task parse_task(std::string_view name) {
  if (name == "classification") return Task::kClassification;
  if (name == "regression") return Task::kRegression;
  throw ValidationError("unknown task '" + std::string(name) + "'");
}

std::string_view to_string(AggKind kind) {
  switch (kind) {
    case AggKind::kAttention: return "attention";
    case AggKind::kMean: return "mean";
    case AggKind::kSum: return "sum";
  }
  return "unknown";
}

AggKind parse_agg_kind(std::string_view name) {
  if (name == "attention") return AggKind::kAttention;
  if (name == "mean") return AggKind::kMean;
  if (name == "sum") return AggKind::kSum;
  throw ValidationError("unknown aggregation '" + std::string(name) + "'");
}

void ModelDims::validate() const {
  encoder.validate();
  if (n_relations < 1) throw ValidationError("model needs at least one relation");
  if (proj_dim == 0 || out_dim == 0 || fusion_dim == 0) throw ValidationError("model widths must be positive");
  if (heads < 1) throw ValidationError("attention heads must be at least 1");
  if (hops < 1) throw ValidationError("hops must be at least 1");
  if (agg == AggKind::kAttention && out_dim % heads != 0)
    throw ValidationError("attention heads (" + std::to_string(heads) + ") must divide the output width (" +
                          std::to_string(out_dim) + ")");
}

ModelParams zero_params(const ModelDims& dims) {
  ModelParams p;
  p.encoder = zero_encoder_params(dims.encoder);
  for (std::size_t r = 0; r < dims.n_relations; ++r) {
    RelationParams rel;
    rel.projection = Matrix(dims.proj_dim, dims.encoder.hidden_dim);
    for (std::size_t l = 0; l < dims.hops; ++l) {
      const std::size_t in = hop_in_dim(dims, l);
      rel.hops.push_back({Matrix(dims.out_dim, in), Matrix(dims.heads, 2 * in)});
    }
    p.relations.push_back(std::move(rel));
  }
  p.fusion = {Matrix(1, dims.fusion_dim), Matrix(dims.fusion_dim, dims.out_dim), Matrix(1, dims.fusion_dim)};
  p.head = {Matrix(1, dims.out_dim), Matrix(1, 1)};
  return p;
}

namespace {

template <class P, class M>
std::vector<std::pair<std::string, M*>> collect(P& p) {
  std::vector<std::pair<std::string, M*>> out;
  for (std::size_t i = 0; i < p.encoder.embeddings.size(); ++i)
    out.emplace_back("encoder.emb." + std::to_string(i), &p.encoder.embeddings[i]);
  for (std::size_t l = 0; l < p.encoder.weights.size(); ++l) {
    out.emplace_back("encoder.w." + std::to_string(l), &p.encoder.weights[l]);
    out.emplace_back("encoder.b." + std::to_string(l), &p.encoder.biases[l]);
  }
  for (std::size_t r = 0; r < p.relations.size(); ++r) {
    const std::string base = "rel." + std::to_string(r);
    out.emplace_back(base + ".proj", &p.relations[r].projection);
    for (std::size_t l = 0; l < p.relations[r].hops.size(); ++l) {
      out.emplace_back(base + ".hop." + std::to_string(l) + ".w", &p.relations[r].hops[l].weight);
      out.emplace_back(base + ".hop." + std::to_string(l) + ".attn", &p.relations[r].hops[l].attention);
    }
  }
  out.emplace_back("fusion.q", &p.fusion.q);
  out.emplace_back("fusion.w", &p.fusion.w);
  out.emplace_back("fusion.b", &p.fusion.bias);
  out.emplace_back("head.w", &p.head.w);
  out.emplace_back("head.b", &p.head.bias);
  return out;
}

bool is_bias(const std::string& name) {
  return name.starts_with("encoder.b.") || name == "fusion.b" || name == "head.b";
}

}  // namespace

std::vector<std::pair<std::string, Matrix*>> named_tensors(ModelParams& params) {
  return collect<ModelParams, Matrix>(params);
}

std::vector<std::pair<std::string, const Matrix*>> named_tensors(const ModelParams& params) {
  return collect<const ModelParams, const Matrix>(params);
}

Model init_model(const ModelDims& dims, std::uint64_t seed) {
  dims.validate();
  Model m{dims, zero_params(dims), {}};
  std::mt19937_64 rng(seed);
  for (auto& [name, t] : named_tensors(m.params)) {
    if (is_bias(name)) continue;
    const double bound = std::sqrt(6.0 / static_cast<double>(t->rows() + t->cols()));
    std::uniform_real_distribution<double> unif(-bound, bound);
    for (auto& v : t->values()) v = unif(rng);
  }
  return m;
}

Matrix project(const Matrix& h, const Matrix& m, Exec exec) {
  if (h.cols() != m.cols())
    throw ValidationError("projection expects " + std::to_string(m.cols()) + " input columns, got " +
                          std::to_string(h.cols()));
  Matrix out;
  kernels::kernels(exec).matmul_nt(h, m, out);
  return out;
}

IntraResult intra_aggregate(const Neighborhood& hood, const Matrix& projected, const HopParams& params,
                            AggKind kind, std::size_t heads, Exec exec) {
  if (projected.rows() != hood.n_nodes()) throw ValidationError("feature rows do not match graph nodes");
  if (params.weight.cols() != projected.cols()) throw ValidationError("aggregation weight width mismatch");
  const auto& k = kernels::kernels(exec);
  IntraResult r;
  k.aggregate_forward(hood, projected, params.attention, kind, heads, r.buffers);
  for (double a : r.buffers.alpha.values())
    if (std::isnan(a)) throw RuntimeError("NaN attention weight");
  k.channel_linear(r.buffers.agg, params.weight, kernels::channels(kind, heads), r.pre);
  r.out = r.pre;
  for (auto& v : r.out.values()) v = v > 0.0 ? v : 0.0;
  return r;
}

std::vector<double> softmax(std::span<const double> s) {
  std::vector<double> out(s.size());
  if (s.empty()) return out;
  const double mx = *std::max_element(s.begin(), s.end());
  double z = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) z += out[i] = std::exp(s[i] - mx);
  for (auto& v : out) v /= z;
  return out;
}

FuseResult inter_fuse(std::span<const Matrix> per_relation, const FusionParams& params,
                      std::span<const NodeId> nodes) {
  if (per_relation.empty()) throw ValidationError("fusion needs at least one relation");
  const std::size_t n = per_relation.front().rows(), d = per_relation.front().cols();
  for (const auto& z : per_relation)
    if (z.rows() != n || z.cols() != d) throw ValidationError("relation embeddings differ in shape");
  if (params.w.cols() != d) throw ValidationError("fusion matrix width mismatch");
  std::vector<NodeId> all;
  if (nodes.empty()) {
    all.resize(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = static_cast<NodeId>(i);
    nodes = all;
  }
  const std::size_t fd = params.w.rows(), m = nodes.size();
  FuseResult out;
  for (const Matrix& z : per_relation) {
    Matrix t(m, fd);
    std::vector<double> contrib(m);
#pragma omp parallel for schedule(static)
    for (Index ii = 0; ii < static_cast<Index>(m); ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      const auto zv = z.row(nodes[i]);
      double acc = 0.0;
      for (std::size_t a = 0; a < fd; ++a) {
        double u = params.bias[a];
        for (std::size_t j = 0; j < d; ++j) u += params.w(a, j) * zv[j];
        t(i, a) = std::tanh(u);
        acc += params.q[a] * t(i, a);
      }
      contrib[i] = acc;
    }
    double s = 0.0;
    for (double c : contrib) s += c;
    out.scores.push_back(s / static_cast<double>(m));
    out.tanh.push_back(std::move(t));
  }
  out.beta = softmax(out.scores);
  out.fused = Matrix(n, d);
  for (std::size_t r = 0; r < per_relation.size(); ++r)
    for (std::size_t i = 0; i < n * d; ++i) out.fused[i] += out.beta[r] * per_relation[r][i];
  return out;
}

double predict_head(std::span<const double> z, const HeadParams& head, Task task) {
  if (z.size() != head.w.cols()) throw ValidationError("head width mismatch");
  double logit = head.bias[0];
  for (std::size_t j = 0; j < z.size(); ++j) logit += head.w[j] * z[j];
  return task == Task::kClassification ? logistic(logit) : logit;
}

ForwardTrace forward(const Model& model, const MultiplexGraph& graph, const Features& features,
                     const ForwardOptions& options) {
  const ModelDims& dims = model.dims;
  const auto& k = kernels::kernels(options.exec);
  if (graph.n_nodes() != features.n_rows)
    throw ValidationError("graph has " + std::to_string(graph.n_nodes()) + " nodes but features have " +
                          std::to_string(features.n_rows) + " rows");
  if (graph.n_layers() != dims.n_relations)
    throw ValidationError("graph has " + std::to_string(graph.n_layers()) + " relations, model expects " +
                          std::to_string(dims.n_relations));
  const std::size_t n = features.n_rows;
  const bool drop = options.training && options.dropout > 0.0;
  std::mt19937_64 rng(options.dropout_seed);

  ForwardTrace t;
  t.encoded = encode_forward(dims.encoder, model.params.encoder, features, options.exec, options.dropout,
                             drop ? &rng : nullptr, &t.encoder);
  t.gnn_input = t.encoded;
  if (drop) {
    t.gnn_mask = dropout_mask(n, dims.encoder.hidden_dim, options.dropout, rng);
    apply_mask(t.gnn_input, t.gnn_mask);
  }

  std::vector<Matrix> outs;
  for (std::size_t r = 0; r < dims.n_relations; ++r) {
    const RelationParams& rp = model.params.relations[r];
    RelationTrace rt;
    k.matmul_nt(t.gnn_input, rp.projection, rt.projected);
    for (std::size_t l = 0; l < dims.hops; ++l) {
      HopTrace ht;
      if (l == 0) {
        ht.input = rt.projected;
      } else {
        ht.input = rt.hops.back().out;
        if (drop) {
          ht.mask = dropout_mask(n, ht.input.cols(), options.dropout, rng);
          apply_mask(ht.input, ht.mask);
        }
      }
      IntraResult ir = intra_aggregate(graph.layer(r).hood, ht.input, rp.hops[l], dims.agg, dims.heads, options.exec);
      ht.buffers = std::move(ir.buffers);
      ht.pre = std::move(ir.pre);
      ht.out = std::move(ir.out);
      rt.hops.push_back(std::move(ht));
    }
    outs.push_back(rt.hops.back().out);
    t.relations.push_back(std::move(rt));
  }

  if (options.fixed_beta) {
    if (options.fixed_beta->size() != dims.n_relations) throw ValidationError("fixed relation weights have wrong size");
    t.fixed_beta = true;
    t.beta = *options.fixed_beta;
    t.fused = Matrix(n, dims.out_dim);
    for (std::size_t r = 0; r < dims.n_relations; ++r)
      for (std::size_t i = 0; i < t.fused.size(); ++i) t.fused[i] += t.beta[r] * outs[r][i];
  } else {
    t.fusion_nodes.assign(options.fusion_nodes.begin(), options.fusion_nodes.end());
    FuseResult fr = inter_fuse(outs, model.params.fusion, t.fusion_nodes);
    if (t.fusion_nodes.empty()) {
      t.fusion_nodes.resize(n);
      for (std::size_t i = 0; i < n; ++i) t.fusion_nodes[i] = static_cast<NodeId>(i);
    }
    t.fused = std::move(fr.fused);
    t.scores = std::move(fr.scores);
    t.beta = std::move(fr.beta);
    t.fusion_tanh = std::move(fr.tanh);
  }

  t.logits.resize(n);
  t.outputs.resize(n);
  const HeadParams& head = model.params.head;
#pragma omp parallel for schedule(static) if (options.exec == Exec::kParallel)
  for (Index vv = 0; vv < static_cast<Index>(n); ++vv) {
    const auto v = static_cast<std::size_t>(vv);
    double logit = head.bias[0];
    const auto z = t.fused.row(v);
    for (std::size_t j = 0; j < z.size(); ++j) logit += head.w[j] * z[j];
    t.logits[v] = logit;
    t.outputs[v] = dims.task == Task::kClassification ? logistic(logit) : logit;
  }
  return t;
}

ModelParams backward(const Model& model, const MultiplexGraph& graph, const Features& features,
                     const ForwardTrace& trace, std::span<const double> dlogits, Exec exec) {
  const ModelDims& dims = model.dims;
  const ModelParams& p = model.params;
  const auto& k = kernels::kernels(exec);
  const std::size_t n = features.n_rows, d1 = dims.out_dim, R = dims.n_relations;
  const bool par = exec == Exec::kParallel;
  if (dlogits.size() != n || trace.fused.rows() != n || trace.relations.size() != R)
    throw ValidationError("trace does not match the model and graph");
  ModelParams g = zero_params(dims);

  // prediction head
  Matrix dz(n, d1);
  for (std::size_t v = 0; v < n; ++v) g.head.bias[0] += dlogits[v];
#pragma omp parallel for schedule(static) if (par)
  for (Index jj = 0; jj < static_cast<Index>(d1); ++jj) {
    const auto j = static_cast<std::size_t>(jj);
    double s = 0.0;
    for (std::size_t v = 0; v < n; ++v) s += dlogits[v] * trace.fused(v, j);
    g.head.w[j] = s;
  }
#pragma omp parallel for schedule(static) if (par)
  for (Index vv = 0; vv < static_cast<Index>(n); ++vv) {
    const auto v = static_cast<std::size_t>(vv);
    for (std::size_t j = 0; j < d1; ++j) dz(v, j) = dlogits[v] * p.head.w[j];
  }

  // relation fusion
  std::vector<Matrix> dz_rel(R, Matrix(n, d1));
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t i = 0; i < n * d1; ++i) dz_rel[r][i] = trace.beta[r] * dz[i];
  if (!trace.fixed_beta) {
    std::vector<double> dbeta(R, 0.0);
    for (std::size_t r = 0; r < R; ++r) {
      const Matrix& zr = trace.relations[r].hops.back().out;
      std::vector<double> per(n);
#pragma omp parallel for schedule(static) if (par)
      for (Index vv = 0; vv < static_cast<Index>(n); ++vv) {
        const auto v = static_cast<std::size_t>(vv);
        double s = 0.0;
        for (std::size_t j = 0; j < d1; ++j) s += dz(v, j) * zr(v, j);
        per[v] = s;
      }
      for (double s : per) dbeta[r] += s;
    }
    double mean = 0.0;
    for (std::size_t r = 0; r < R; ++r) mean += trace.beta[r] * dbeta[r];
    const auto& nodes = trace.fusion_nodes;
    const std::size_t m = nodes.size(), fd = dims.fusion_dim;
    for (std::size_t r = 0; r < R; ++r) {
      const double coef = trace.beta[r] * (dbeta[r] - mean) / static_cast<double>(m);
      const Matrix& tr = trace.fusion_tanh[r];
      const Matrix& zr = trace.relations[r].hops.back().out;
      Matrix du(m, fd);
      for (std::size_t a = 0; a < fd; ++a) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += tr(i, a);
        g.fusion.q[a] += coef * s;
      }
#pragma omp parallel for schedule(static) if (par)
      for (Index ii = 0; ii < static_cast<Index>(m); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        for (std::size_t a = 0; a < fd; ++a) du(i, a) = coef * p.fusion.q[a] * (1.0 - tr(i, a) * tr(i, a));
        auto out = dz_rel[r].row(nodes[i]);
        for (std::size_t a = 0; a < fd; ++a)
          for (std::size_t j = 0; j < d1; ++j) out[j] += du(i, a) * p.fusion.w(a, j);
      }
#pragma omp parallel for schedule(static) if (par)
      for (Index aa = 0; aa < static_cast<Index>(fd); ++aa) {
        const auto a = static_cast<std::size_t>(aa);
        double sb = 0.0;
        auto wrow = g.fusion.w.row(a);
        for (std::size_t i = 0; i < m; ++i) {
          const double u = du(i, a);
          sb += u;
          const auto zv = zr.row(nodes[i]);
          for (std::size_t j = 0; j < d1; ++j) wrow[j] += u * zv[j];
        }
        g.fusion.bias[a] += sb;
      }
    }
  }

  // per-relation aggregation stacks
  Matrix dgnn(n, dims.encoder.hidden_dim);
  const std::size_t ch = kernels::channels(dims.agg, dims.heads);
  for (std::size_t r = 0; r < R; ++r) {
    const RelationTrace& rt = trace.relations[r];
    const Neighborhood& hood = graph.layer(r).hood;
    Matrix dout = std::move(dz_rel[r]);
    Matrix dproj;
    for (std::size_t l = dims.hops; l-- > 0;) {
      const HopTrace& ht = rt.hops[l];
      Matrix dpre = dout;
      for (std::size_t i = 0; i < dpre.size(); ++i)
        if (!(ht.pre[i] > 0.0)) dpre[i] = 0.0;
      Matrix dagg;
      k.channel_linear_backward(ht.buffers.agg, p.relations[r].hops[l].weight, ch, dpre, dagg,
                                g.relations[r].hops[l].weight);
      Matrix dx(n, ht.input.cols());
      k.aggregate_backward(hood, ht.input, p.relations[r].hops[l].attention, dims.agg, dims.heads, ht.buffers, dagg,
                           dx, g.relations[r].hops[l].attention);
      if (l == 0) {
        dproj = std::move(dx);
      } else {
        if (!ht.mask.empty()) apply_mask(dx, ht.mask);
        dout = std::move(dx);
      }
    }
    k.matmul_nt_backward(trace.gnn_input, p.relations[r].projection, dproj, &dgnn, g.relations[r].projection);
  }
  if (!trace.gnn_mask.empty()) apply_mask(dgnn, trace.gnn_mask);
  encode_backward(dims.encoder, p.encoder, features, trace.encoder, dgnn, g.encoder, exec);
  return g;
}

}  // namespace tabgnn
