#pragma once

#include <span>
#include <string>
#include <vector>

#include "tabgnn/matrix.hpp"
#include "tabgnn/model.hpp"
#include "tabgnn/split.hpp"
#include "tabgnn/table.hpp"

namespace tabgnn {

// Feature matrix of a preprocessed table for the linear model: one-hot
// category ids of categorical feature columns, then normalized numerical
// feature columns.
Matrix design_matrix(const Table& table);

// Appends the columns of z, standardized with mean/std over `fit_rows`
// (constant columns stay 0).
Matrix append_columns(const Matrix& x, const Matrix& z, std::span<const RowId> fit_rows);

struct LinearModel {
  std::vector<double> w;
  double bias = 0.0;
  std::size_t iterations = 0;
};

// L2-penalized logistic regression by Newton's method (intercept
// unpenalized), or ridge least squares for regression.
LinearModel fit_linear(const Matrix& x, std::span<const double> y, std::span<const RowId> rows, Task task,
                       double l2);
std::vector<double> predict_linear(const LinearModel& model, const Matrix& x, Task task);

struct DownstreamReport {
  Task task = Task::kClassification;
  double original = 0.0;
  double augmented = 0.0;
  // Relative gain of augmented over original, in percent; for regression a
  // drop in MSE counts as a gain.
  double improvement = 0.0;
  std::size_t n_fit = 0;
  std::size_t n_eval = 0;
  std::size_t constant_original = 0;
  std::size_t constant_augmented = 0;
};

// Fits the linear model on the training rows with and without z and scores
// both on the test rows (validation rows when there is no test split).
DownstreamReport concat_and_fit(const Table& table, const Matrix& z, Task task, const Splits& splits,
                                double l2 = 1.0);
// Same with a precomputed base design matrix.
DownstreamReport concat_and_fit(const Matrix& x, std::span<const double> y, const Matrix& z, Task task,
                                const Splits& splits, double l2 = 1.0);

// `key: value` lines.
std::string format_report(const DownstreamReport& report);

}  // namespace tabgnn
