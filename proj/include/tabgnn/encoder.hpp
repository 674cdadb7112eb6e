#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "tabgnn/kernels.hpp"
#include "tabgnn/matrix.hpp"
#include "tabgnn/table.hpp"

namespace tabgnn {

// Encoder input of every row: category ids of the categorical feature columns
// and the normalized numerical feature values.
struct Features {
  std::size_t n_rows = 0;
  std::size_t n_categorical = 0;
  std::vector<std::int32_t> categorical;  // n_rows x n_categorical
  Matrix numeric;                         // n_rows x n_numeric

  std::int32_t id(std::size_t row, std::size_t col) const { return categorical[row * n_categorical + col]; }
};

Features build_features(const Table& table);

struct EncoderSpec {
  std::vector<std::size_t> vocab_sizes;
  std::vector<std::size_t> emb_dims;
  std::size_t n_numeric = 0;
  std::size_t hidden_dim = 64;
  std::size_t layer_size = 1;

  std::size_t input_width() const;
  void validate() const;
};

// One embedding per categorical feature column of width
// min(hidden_dim, vocab_size, emb_cap).
EncoderSpec make_encoder_spec(const Table& table, std::size_t hidden_dim, std::size_t layer_size,
                              std::size_t emb_cap = 16);

struct EncoderParams {
  std::vector<Matrix> embeddings;  // vocab_i x emb_i
  std::vector<Matrix> weights;     // first: hidden x input_width, rest: hidden x hidden
  std::vector<Matrix> biases;      // 1 x hidden
};

EncoderParams zero_encoder_params(const EncoderSpec& spec);

struct EncoderTrace {
  Matrix input;               // concat(embeddings, numeric)
  std::vector<Matrix> pre;    // per MLP layer, before the rectifier
  std::vector<Matrix> masks;  // inverted-dropout masks on hidden activations
  std::vector<Matrix> acts;   // input of MLP layer l+1
};

// Inverted dropout mask: entries are 0 or 1/(1-p). p >= 1 drops everything.
Matrix dropout_mask(std::size_t rows, std::size_t cols, double p, std::mt19937_64& rng);

// h = MLP(concat(e_cat..., x_num...)): rectifier between layers, last layer
// linear. Dropout is applied to hidden activations when `rng` is given.
Matrix encode_forward(const EncoderSpec& spec, const EncoderParams& params, const Features& features,
                      kernels::Exec exec, double dropout = 0.0, std::mt19937_64* rng = nullptr,
                      EncoderTrace* trace = nullptr);

// Accumulates into `grads`; only embedding rows that were looked up receive
// gradient.
void encode_backward(const EncoderSpec& spec, const EncoderParams& params, const Features& features,
                     const EncoderTrace& trace, const Matrix& dh, EncoderParams& grads, kernels::Exec exec);

// Single-row evaluation-mode encoding.
std::vector<double> encode(const EncoderSpec& spec, const EncoderParams& params,
                           std::span<const std::int32_t> categorical, std::span<const double> numeric);

}  // namespace tabgnn
