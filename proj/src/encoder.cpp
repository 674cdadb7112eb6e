#include "tabgnn/encoder.hpp"

#include <algorithm>
#include <string>

#include "tabgnn/error.hpp"

namespace tabgnn {

namespace {

bool numeric_feature(const ColumnSchema& s) {
  return s.feature && (s.kind == ColumnKind::kNumerical || s.kind == ColumnKind::kTimestamp);
}

void add_bias(Matrix& m, const Matrix& bias) {
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) += bias[j];
}

}  // namespace

Features build_features(const Table& table) {
  Features f;
  f.n_rows = table.n_rows();
  std::vector<const Column*> cats, nums;
  for (const auto& c : table.columns()) {
    if (c.schema.feature && is_categorical(c.schema.kind)) cats.push_back(&c);
    if (numeric_feature(c.schema)) nums.push_back(&c);
  }
  f.n_categorical = cats.size();
  f.categorical.resize(f.n_rows * cats.size());
  for (std::size_t j = 0; j < cats.size(); ++j) {
    if (cats[j]->ids.size() != f.n_rows)
      throw ValidationError("column '" + cats[j]->schema.name + "' has no category ids");
    for (std::size_t i = 0; i < f.n_rows; ++i) f.categorical[i * cats.size() + j] = cats[j]->ids[i];
  }
  f.numeric = Matrix(f.n_rows, nums.size());
  for (std::size_t j = 0; j < nums.size(); ++j) {
    if (nums[j]->normalized.size() != f.n_rows)
      throw ValidationError("column '" + nums[j]->schema.name + "' is not normalized");
    for (std::size_t i = 0; i < f.n_rows; ++i) f.numeric(i, j) = nums[j]->normalized[i];
  }
  return f;
}

std::size_t EncoderSpec::input_width() const {
  std::size_t w = n_numeric;
  for (auto e : emb_dims) w += e;
  return w;
}

void EncoderSpec::validate() const {
  if (vocab_sizes.size() != emb_dims.size()) throw ValidationError("encoder vocab/embedding count mismatch");
  for (auto e : emb_dims)
    if (e == 0) throw ValidationError("embedding width must be positive");
  if (layer_size < 1 || layer_size > 4) throw ValidationError("encoder layer_size must be in {1,2,3,4}");
  if (hidden_dim == 0) throw ValidationError("hidden_dim must be positive");
  if (input_width() == 0) throw ValidationError("encoder has no input features");
}

EncoderSpec make_encoder_spec(const Table& table, std::size_t hidden_dim, std::size_t layer_size,
                              std::size_t emb_cap) {
  EncoderSpec spec;
  spec.hidden_dim = hidden_dim;
  spec.layer_size = layer_size;
  for (const auto& c : table.columns()) {
    if (c.schema.feature && is_categorical(c.schema.kind)) {
      spec.vocab_sizes.push_back(c.vocab_size);
      spec.emb_dims.push_back(std::max<std::size_t>(1, std::min({hidden_dim, c.vocab_size, emb_cap})));
    }
    if (numeric_feature(c.schema)) ++spec.n_numeric;
  }
  return spec;
}

EncoderParams zero_encoder_params(const EncoderSpec& spec) {
  EncoderParams p;
  for (std::size_t i = 0; i < spec.vocab_sizes.size(); ++i) p.embeddings.emplace_back(spec.vocab_sizes[i], spec.emb_dims[i]);
  for (std::size_t l = 0; l < spec.layer_size; ++l) {
    p.weights.emplace_back(spec.hidden_dim, l == 0 ? spec.input_width() : spec.hidden_dim);
    p.biases.emplace_back(1, spec.hidden_dim);
  }
  return p;
}

Matrix dropout_mask(std::size_t rows, std::size_t cols, double p, std::mt19937_64& rng) {
  Matrix mask(rows, cols);
  if (p >= 1.0) return mask;
  const double keep = 1.0 / (1.0 - p);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (auto& m : mask.values()) m = unif(rng) < p ? 0.0 : keep;
  return mask;
}

Matrix encode_forward(const EncoderSpec& spec, const EncoderParams& params, const Features& features,
                      kernels::Exec exec, double dropout, std::mt19937_64* rng, EncoderTrace* trace) {
  const auto& k = kernels::kernels(exec);
  const std::size_t n = features.n_rows;
  if (features.n_categorical != spec.vocab_sizes.size() || features.numeric.cols() != spec.n_numeric)
    throw ValidationError("feature layout does not match the encoder");
  Matrix input(n, spec.input_width());
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t off = 0;
    for (std::size_t c = 0; c < spec.vocab_sizes.size(); ++c) {
      const std::int32_t id = features.id(i, c);
      if (id < 0 || static_cast<std::size_t>(id) >= spec.vocab_sizes[c])
        throw ValidationError("category id " + std::to_string(id) + " out of range for categorical feature " +
                              std::to_string(c) + " at row " + std::to_string(i));
      const auto row = params.embeddings[c].row(static_cast<std::size_t>(id));
      std::copy(row.begin(), row.end(), input.data() + i * input.cols() + off);
      off += spec.emb_dims[c];
    }
    for (std::size_t j = 0; j < spec.n_numeric; ++j) input(i, off + j) = features.numeric(i, j);
  }
  const bool drop = rng && dropout > 0.0;
  EncoderTrace local;
  EncoderTrace& t = trace ? *trace : local;
  t = EncoderTrace{};
  t.input = std::move(input);
  const Matrix* cur = &t.input;
  Matrix out;
  for (std::size_t l = 0; l < spec.layer_size; ++l) {
    Matrix pre;
    k.matmul_nt(*cur, params.weights[l], pre);
    add_bias(pre, params.biases[l]);
    if (l + 1 == spec.layer_size) {
      out = pre;
      t.pre.push_back(std::move(pre));
      break;
    }
    Matrix act = pre;
    for (auto& v : act.values()) v = v > 0.0 ? v : 0.0;
    if (drop) {
      Matrix mask = dropout_mask(act.rows(), act.cols(), dropout, *rng);
      for (std::size_t i = 0; i < act.size(); ++i) act[i] *= mask[i];
      t.masks.push_back(std::move(mask));
    } else {
      t.masks.emplace_back();
    }
    t.pre.push_back(std::move(pre));
    t.acts.push_back(std::move(act));
    cur = &t.acts.back();
  }
  return out;
}

void encode_backward(const EncoderSpec& spec, const EncoderParams& params, const Features& features,
                     const EncoderTrace& trace, const Matrix& dh, EncoderParams& grads, kernels::Exec exec) {
  const auto& k = kernels::kernels(exec);
  Matrix dpre = dh;
  for (std::size_t l = spec.layer_size; l-- > 0;) {
    const Matrix& in = l == 0 ? trace.input : trace.acts[l - 1];
    for (std::size_t i = 0; i < dpre.rows(); ++i)
      for (std::size_t j = 0; j < dpre.cols(); ++j) grads.biases[l][j] += dpre(i, j);
    Matrix din(in.rows(), in.cols());
    k.matmul_nt_backward(in, params.weights[l], dpre, &din, grads.weights[l]);
    if (l == 0) {
      dpre = std::move(din);
      break;
    }
    const Matrix& mask = trace.masks[l - 1];
    const Matrix& pre = trace.pre[l - 1];
    for (std::size_t i = 0; i < din.size(); ++i) {
      double g = mask.empty() ? din[i] : din[i] * mask[i];
      din[i] = pre[i] > 0.0 ? g : 0.0;
    }
    dpre = std::move(din);
  }
  // dpre now holds d(input); route the embedding slices to their table rows
  for (std::size_t i = 0; i < features.n_rows; ++i) {
    std::size_t off = 0;
    for (std::size_t c = 0; c < spec.vocab_sizes.size(); ++c) {
      auto row = grads.embeddings[c].row(static_cast<std::size_t>(features.id(i, c)));
      for (std::size_t j = 0; j < spec.emb_dims[c]; ++j) row[j] += dpre(i, off + j);
      off += spec.emb_dims[c];
    }
  }
}

std::vector<double> encode(const EncoderSpec& spec, const EncoderParams& params,
                           std::span<const std::int32_t> categorical, std::span<const double> numeric) {
  Features f;
  f.n_rows = 1;
  f.n_categorical = categorical.size();
  f.categorical.assign(categorical.begin(), categorical.end());
  f.numeric = Matrix(1, numeric.size());
  std::copy(numeric.begin(), numeric.end(), f.numeric.data());
  Matrix h = encode_forward(spec, params, f, kernels::Exec::kSerial);
  return {h.data(), h.data() + h.size()};
}

}  // namespace tabgnn
