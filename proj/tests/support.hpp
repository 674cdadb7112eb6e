#pragma once

// Random instances and independent reference implementations shared by the
// unit tests and the acceptance suite. Nothing here calls into the kernels,
// so agreement with the library is meaningful.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "tabgnn/encoder.hpp"
#include "tabgnn/graph.hpp"
#include "tabgnn/model.hpp"

namespace support {

using namespace tabgnn;

inline Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Matrix m(r, c);
  for (auto& v : m.values()) v = d(rng);
  return m;
}

struct Instance {
  Features features;
  ModelDims dims;
  Model model;
  MultiplexGraph graph;
  std::vector<double> targets;
};

struct InstanceShape {
  std::size_t n = 10;
  std::size_t relations = 2;
  std::size_t hidden = 8;
  std::size_t out = 8;
  std::size_t heads = 2;
  std::size_t hops = 1;
  std::size_t layer_size = 1;
  std::size_t n_categorical = 2;
  std::size_t n_numeric = 3;
  double edge_prob = 0.3;
  bool directed = false;
  AggKind agg = AggKind::kAttention;
  Task task = Task::kClassification;
};

// Random edge sets; directed ones point from smaller to larger node id, as a
// strictly increasing timestamp order would.
inline std::vector<EdgeSet> random_edges(std::size_t n, std::size_t relations, double p, bool directed,
                                         std::mt19937_64& rng) {
  std::bernoulli_distribution coin(p);
  std::vector<EdgeSet> sets;
  for (std::size_t r = 0; r < relations; ++r) {
    EdgeSet es{"rel" + std::to_string(r), {}, directed};
    for (NodeId a = 0; a < n; ++a)
      for (NodeId b = a + 1; b < n; ++b)
        if (coin(rng)) es.edges.emplace_back(a, b);
    sets.push_back(std::move(es));
  }
  return sets;
}

inline Features random_features(std::size_t n, const EncoderSpec& spec, std::mt19937_64& rng) {
  Features f;
  f.n_rows = n;
  f.n_categorical = spec.vocab_sizes.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < f.n_categorical; ++c) {
      std::uniform_int_distribution<std::int32_t> id(0, static_cast<std::int32_t>(spec.vocab_sizes[c]) - 1);
      f.categorical.push_back(id(rng));
    }
  f.numeric = random_matrix(n, spec.n_numeric, rng);
  return f;
}

// Model at its initialization scale with small random biases, so every
// tensor carries a nonzero gradient.
inline Model random_model(const ModelDims& dims, std::mt19937_64& rng, double bias_scale = 0.1) {
  Model m = init_model(dims, rng());
  for (auto& [name, t] : named_tensors(m.params))
    if (name.starts_with("encoder.b.") || name == "fusion.b" || name == "head.b")
      for (auto& v : t->values()) v = std::normal_distribution<double>(0.0, bias_scale)(rng);
  return m;
}

inline Instance random_instance(const InstanceShape& s, std::mt19937_64& rng) {
  Instance inst;
  EncoderSpec spec;
  for (std::size_t c = 0; c < s.n_categorical; ++c) {
    const std::size_t vocab = 2 + rng() % 4;
    spec.vocab_sizes.push_back(vocab);
    spec.emb_dims.push_back(std::min<std::size_t>(vocab, 3));
  }
  spec.n_numeric = s.n_numeric;
  spec.hidden_dim = s.hidden;
  spec.layer_size = s.layer_size;
  inst.dims.encoder = spec;
  inst.dims.n_relations = s.relations;
  inst.dims.proj_dim = s.hidden;
  inst.dims.out_dim = s.out;
  inst.dims.fusion_dim = s.hidden;
  inst.dims.heads = s.agg == AggKind::kAttention ? s.heads : 1;
  inst.dims.hops = s.hops;
  inst.dims.agg = s.agg;
  inst.dims.task = s.task;
  inst.features = random_features(s.n, spec, rng);
  inst.model = random_model(inst.dims, rng);
  inst.graph = assemble(s.n, random_edges(s.n, s.relations, s.edge_prob, s.directed, rng));
  std::bernoulli_distribution coin(0.5);
  for (std::size_t i = 0; i < s.n; ++i)
    inst.targets.push_back(s.task == Task::kClassification ? (coin(rng) ? 1.0 : 0.0)
                                                           : std::normal_distribution<double>(0.0, 1.0)(rng));
  return inst;
}

// ---- dense reference forward -------------------------------------------

using Vec = std::vector<double>;

inline Vec mat_vec(const Matrix& w, const Vec& x) {
  Vec y(w.rows(), 0.0);
  for (std::size_t i = 0; i < w.rows(); ++i)
    for (std::size_t j = 0; j < w.cols(); ++j) y[i] += w(i, j) * x[j];
  return y;
}

inline Vec relu(Vec v) {
  for (auto& x : v) x = std::max(x, 0.0);
  return v;
}

inline Vec encode_row(const Model& m, const Features& f, std::size_t i) {
  const auto& spec = m.dims.encoder;
  Vec x;
  for (std::size_t c = 0; c < spec.vocab_sizes.size(); ++c) {
    const auto row = m.params.encoder.embeddings[c].row(static_cast<std::size_t>(f.id(i, c)));
    x.insert(x.end(), row.begin(), row.end());
  }
  for (std::size_t j = 0; j < spec.n_numeric; ++j) x.push_back(f.numeric(i, j));
  for (std::size_t l = 0; l < spec.layer_size; ++l) {
    Vec y = mat_vec(m.params.encoder.weights[l], x);
    for (std::size_t j = 0; j < y.size(); ++j) y[j] += m.params.encoder.biases[l][j];
    x = l + 1 == spec.layer_size ? y : relu(y);
  }
  return x;
}

// Incoming neighbor lists {v} ∪ N(v) straight from the edge list.
inline std::vector<std::vector<NodeId>> neighbor_lists(std::size_t n, const EdgeSet& es) {
  std::vector<std::vector<NodeId>> in(n);
  for (std::size_t v = 0; v < n; ++v) in[v].push_back(static_cast<NodeId>(v));
  for (const auto& [a, b] : es.edges) {
    in[b].push_back(a);
    if (!es.directed) in[a].push_back(b);
  }
  return in;
}

struct DenseResult {
  std::vector<std::vector<Vec>> per_relation;  // [r][v]
  std::vector<std::vector<std::vector<Vec>>> alpha;  // [r][v][head] over neighbor list (last hop)
  Vec scores;
  Vec beta;
  std::vector<Vec> fused;
  Vec outputs;
};

inline DenseResult dense_forward(const Model& m, const std::vector<EdgeSet>& edges, const Features& f,
                                 const std::vector<double>* fixed_beta = nullptr) {
  const std::size_t n = f.n_rows, R = m.dims.n_relations;
  std::vector<Vec> h(n);
  for (std::size_t i = 0; i < n; ++i) h[i] = encode_row(m, f, i);
  DenseResult out;
  for (std::size_t r = 0; r < R; ++r) {
    const auto nb = neighbor_lists(n, edges[r]);
    const auto& rp = m.params.relations[r];
    std::vector<Vec> x(n);
    for (std::size_t v = 0; v < n; ++v) x[v] = mat_vec(rp.projection, h[v]);
    std::vector<std::vector<Vec>> alphas(n);
    for (std::size_t l = 0; l < m.dims.hops; ++l) {
      const Matrix& w = rp.hops[l].weight;
      const Matrix& a = rp.hops[l].attention;
      const std::size_t d = x[0].size();
      const std::size_t heads = m.dims.agg == AggKind::kAttention ? m.dims.heads : 1;
      const std::size_t block = w.rows() / heads;
      std::vector<Vec> next(n);
      for (std::size_t v = 0; v < n; ++v) {
        alphas[v].assign(heads, {});
        Vec z(w.rows(), 0.0);
        for (std::size_t k = 0; k < heads; ++k) {
          Vec wts;
          if (m.dims.agg == AggKind::kAttention) {
            Vec e;
            for (NodeId u : nb[v]) {
              double s = 0.0;
              for (std::size_t j = 0; j < d; ++j) s += a(k, j) * x[v][j] + a(k, d + j) * x[u][j];
              e.push_back(s > 0 ? s : 0.2 * s);
            }
            double total = 0.0;
            for (double s : e) total += std::exp(s);
            for (double s : e) wts.push_back(std::exp(s) / total);
          } else {
            const double wt = m.dims.agg == AggKind::kMean ? 1.0 / static_cast<double>(nb[v].size()) : 1.0;
            wts.assign(nb[v].size(), wt);
          }
          alphas[v][k] = wts;
          Vec agg(d, 0.0);
          for (std::size_t t = 0; t < nb[v].size(); ++t)
            for (std::size_t j = 0; j < d; ++j) agg[j] += wts[t] * x[nb[v][t]][j];
          for (std::size_t i = 0; i < w.rows(); ++i) {
            if (heads > 1 && i / block != k) continue;
            for (std::size_t j = 0; j < d; ++j) z[i] += w(i, j) * agg[j];
          }
        }
        next[v] = relu(z);
      }
      x = std::move(next);
    }
    out.per_relation.push_back(x);
    out.alpha.push_back(alphas);
  }
  if (fixed_beta) {
    out.beta = *fixed_beta;
  } else {
    const auto& fp = m.params.fusion;
    for (std::size_t r = 0; r < R; ++r) {
      double s = 0.0;
      for (std::size_t v = 0; v < n; ++v) {
        Vec u = mat_vec(fp.w, out.per_relation[r][v]);
        for (std::size_t i = 0; i < u.size(); ++i) s += fp.q[i] * std::tanh(u[i] + fp.bias[i]);
      }
      out.scores.push_back(s / static_cast<double>(n));
    }
    double total = 0.0;
    for (double s : out.scores) total += std::exp(s);
    for (double s : out.scores) out.beta.push_back(std::exp(s) / total);
  }
  for (std::size_t v = 0; v < n; ++v) {
    Vec z(m.dims.out_dim, 0.0);
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t j = 0; j < z.size(); ++j) z[j] += out.beta[r] * out.per_relation[r][v][j];
    double logit = m.params.head.bias[0];
    for (std::size_t j = 0; j < z.size(); ++j) logit += m.params.head.w[j] * z[j];
    out.outputs.push_back(m.dims.task == Task::kClassification ? 1.0 / (1.0 + std::exp(-logit)) : logit);
    out.fused.push_back(std::move(z));
  }
  return out;
}

// ---- metric oracles -----------------------------------------------------

inline double auc_pairs(const Vec& scores, const Vec& labels) {
  double good = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    for (std::size_t j = 0; j < scores.size(); ++j)
      if (labels[i] == 1.0 && labels[j] == 0.0) {
        pairs += 1.0;
        good += scores[i] > scores[j] ? 1.0 : scores[i] == scores[j] ? 0.5 : 0.0;
      }
  return good / pairs;
}

// ---- kink distance ------------------------------------------------------

// Smallest nonzero |input| over every rectifier in the forward pass; finite
// differences are only meaningful away from these non-differentiable points.
// Exact zeros come from inputs that are themselves all zero and are skipped.
inline double kink_margin(const ForwardTrace& t, const ModelDims& dims) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l + 1 < t.encoder.pre.size(); ++l)
    for (double v : t.encoder.pre[l].values())
      if (v != 0.0) m = std::min(m, std::abs(v));
  for (const auto& rt : t.relations)
    for (const auto& ht : rt.hops) {
      for (double v : ht.pre.values())
        if (v != 0.0) m = std::min(m, std::abs(v));
      if (dims.agg == AggKind::kAttention)
        for (double v : ht.buffers.score.values())
          if (v != 0.0) m = std::min(m, std::abs(v));
    }
  return m;
}

}  // namespace support

// ---- finite-difference gradient check ----------------------------------

#include <string>

#include "tabgnn/loss.hpp"

namespace support {

struct GradCheck {
  double max_rel = 0.0;
  std::string worst;
  std::size_t checked = 0;
};

struct GradCheckOptions {
  double step = 1e-4;
  // Denominator floor for the relative error, so entries whose true gradient
  // is ~0 are judged on absolute error instead.
  double floor = 1e-6;
  double dropout = 0.0;
  std::uint64_t dropout_seed = 1;
  std::vector<NodeId> fusion_nodes;  // empty: all
};

inline double instance_loss(const Instance& inst, const std::vector<RowId>& rows, const GradCheckOptions& o,
                            ForwardTrace* trace_out = nullptr) {
  ForwardOptions fo;
  fo.training = true;
  fo.dropout = o.dropout;
  fo.dropout_seed = o.dropout_seed;
  fo.fusion_nodes = o.fusion_nodes;
  fo.exec = Exec::kSerial;
  ForwardTrace t = forward(inst.model, inst.graph, inst.features, fo);
  const double value = loss_from_logits(t.logits, inst.targets, rows, inst.dims.task).value;
  if (trace_out) *trace_out = std::move(t);
  return value;
}

inline GradCheck gradient_check(Instance& inst, const std::vector<RowId>& rows, const GradCheckOptions& o) {
  ForwardTrace trace;
  instance_loss(inst, rows, o, &trace);
  const LossGrad lg = loss_from_logits(trace.logits, inst.targets, rows, inst.dims.task);
  const ModelParams grads = backward(inst.model, inst.graph, inst.features, trace, lg.dlogits, Exec::kSerial);
  const auto g = named_tensors(grads);
  auto p = named_tensors(inst.model.params);
  GradCheck res;
  for (std::size_t k = 0; k < p.size(); ++k) {
    Matrix& t = *p[k].second;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double orig = t[i];
      t[i] = orig + o.step;
      const double up = instance_loss(inst, rows, o);
      t[i] = orig - o.step;
      const double down = instance_loss(inst, rows, o);
      t[i] = orig;
      const double numeric = (up - down) / (2 * o.step);
      const double analytic = (*g[k].second)[i];
      const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), o.floor});
      ++res.checked;
      if (rel > res.max_rel) {
        res.max_rel = rel;
        res.worst = p[k].first + "[" + std::to_string(i) + "] analytic " + std::to_string(analytic) + " numeric " +
                    std::to_string(numeric);
      }
    }
  }
  return res;
}

// Draws instances until every rectifier input sits at least `margin` away
// from its kink, so central differences see a smooth function. Returns the
// number of rejected draws through `rejected`.
inline Instance smooth_instance(const InstanceShape& shape, std::mt19937_64& rng, const GradCheckOptions& o,
                                double margin = 1e-3, std::size_t* rejected = nullptr) {
  std::vector<RowId> rows(shape.n);
  for (std::size_t i = 0; i < shape.n; ++i) rows[i] = static_cast<RowId>(i);
  for (;;) {
    Instance inst = random_instance(shape, rng);
    ForwardTrace t;
    instance_loss(inst, rows, o, &t);
    if (kink_margin(t, inst.dims) >= margin) return inst;
    if (rejected) ++*rejected;
  }
}

}  // namespace support
