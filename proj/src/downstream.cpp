#include "tabgnn/downstream.hpp"

#include <cmath>
#include <cstdio>

#include <Eigen/Dense>

#include "tabgnn/error.hpp"
#include "tabgnn/metrics.hpp"

namespace tabgnn {

namespace {

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::size_t constant_columns(const Matrix& x, std::span<const RowId> rows) {
  std::size_t count = 0;
  for (std::size_t j = 0; j < x.cols(); ++j) {
    bool constant = true;
    for (RowId r : rows)
      if (x(r, j) != x(rows.front(), j)) {
        constant = false;
        break;
      }
    count += constant;
  }
  return count;
}

double score(std::span<const double> pred, std::span<const double> y, std::span<const RowId> rows, Task task) {
  std::vector<double> p, t;
  for (RowId r : rows) {
    p.push_back(pred[r]);
    t.push_back(y[r]);
  }
  return task == Task::kClassification ? auc(p, t) : mse(p, t);
}

}  // namespace

Matrix design_matrix(const Table& table) {
  std::size_t width = 0;
  for (const auto& c : table.columns()) {
    if (!c.schema.feature) continue;
    if (is_categorical(c.schema.kind)) width += c.vocab_size;
    else if (c.schema.kind == ColumnKind::kNumerical || c.schema.kind == ColumnKind::kTimestamp) width += 1;
  }
  Matrix x(table.n_rows(), width);
  std::size_t off = 0;
  for (const auto& c : table.columns()) {
    if (!c.schema.feature) continue;
    if (is_categorical(c.schema.kind)) {
      if (c.ids.size() != table.n_rows()) throw ValidationError("column '" + c.schema.name + "' is not encoded");
      for (std::size_t i = 0; i < table.n_rows(); ++i) {
        const auto id = c.ids[i];
        if (id < 0 || static_cast<std::size_t>(id) >= c.vocab_size)
          throw ValidationError("unresolved category in column '" + c.schema.name + "'");
        x(i, off + static_cast<std::size_t>(id)) = 1.0;
      }
      off += c.vocab_size;
    } else if (c.schema.kind == ColumnKind::kNumerical || c.schema.kind == ColumnKind::kTimestamp) {
      if (c.normalized.size() != table.n_rows())
        throw ValidationError("column '" + c.schema.name + "' is not normalized");
      for (std::size_t i = 0; i < table.n_rows(); ++i) x(i, off) = c.normalized[i];
      off += 1;
    }
  }
  return x;
}

Matrix append_columns(const Matrix& x, const Matrix& z, std::span<const RowId> fit_rows) {
  if (x.rows() != z.rows()) throw ValidationError("embeddings do not cover every row");
  if (fit_rows.empty()) throw ValidationError("no rows to standardize embeddings on");
  Matrix out(x.rows(), x.cols() + z.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = x(i, j);
  for (std::size_t j = 0; j < z.cols(); ++j) {
    double mean = 0.0, var = 0.0;
    for (RowId r : fit_rows) mean += z(r, j);
    mean /= static_cast<double>(fit_rows.size());
    for (RowId r : fit_rows) var += (z(r, j) - mean) * (z(r, j) - mean);
    const double sd = std::sqrt(var / static_cast<double>(fit_rows.size()));
    for (std::size_t i = 0; i < x.rows(); ++i) out(i, x.cols() + j) = sd > 0.0 ? (z(i, j) - mean) / sd : 0.0;
  }
  return out;
}

LinearModel fit_linear(const Matrix& x, std::span<const double> y, std::span<const RowId> rows, Task task,
                       double l2) {
  if (rows.empty()) throw ValidationError("no rows to fit the linear model on");
  if (!(l2 >= 0.0)) throw ValidationError("l2 penalty must be non-negative");
  const auto m = static_cast<Eigen::Index>(rows.size());
  const auto p = static_cast<Eigen::Index>(x.cols()) + 1;  // last column is the intercept
  Eigen::MatrixXd a(m, p);
  Eigen::VectorXd t(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const RowId r = rows[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j + 1 < p; ++j) a(i, j) = x(r, static_cast<std::size_t>(j));
    a(i, p - 1) = 1.0;
    t(i) = y[r];
  }
  Eigen::VectorXd penalty = Eigen::VectorXd::Constant(p, l2);
  penalty(p - 1) = 0.0;

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  LinearModel out;
  if (task == Task::kRegression) {
    Eigen::MatrixXd h = a.transpose() * a;
    h.diagonal() += penalty;
    beta = h.ldlt().solve(a.transpose() * t);
    out.iterations = 1;
  } else {
    for (int it = 0; it < 100; ++it) {
      const Eigen::VectorXd eta = a * beta;
      Eigen::VectorXd prob(m), wts(m);
      for (Eigen::Index i = 0; i < m; ++i) {
        prob(i) = logistic(eta(i));
        wts(i) = std::max(prob(i) * (1.0 - prob(i)), 1e-12);
      }
      Eigen::VectorXd grad = a.transpose() * (t - prob) - penalty.cwiseProduct(beta);
      Eigen::MatrixXd h = a.transpose() * wts.asDiagonal() * a;
      h.diagonal() += penalty;
      h(p - 1, p - 1) += 1e-10;  // keeps the system definite when a class is absent
      const Eigen::VectorXd step = h.ldlt().solve(grad);
      beta += step;
      out.iterations = static_cast<std::size_t>(it) + 1;
      if (step.cwiseAbs().maxCoeff() < 1e-10) break;
    }
  }
  out.w.assign(beta.data(), beta.data() + p - 1);
  out.bias = beta(p - 1);
  return out;
}

std::vector<double> predict_linear(const LinearModel& model, const Matrix& x, Task task) {
  if (model.w.size() != x.cols()) throw ValidationError("linear model width mismatch");
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double s = model.bias;
    for (std::size_t j = 0; j < x.cols(); ++j) s += model.w[j] * x(i, j);
    out[i] = task == Task::kClassification ? logistic(s) : s;
  }
  return out;
}

DownstreamReport concat_and_fit(const Matrix& x, std::span<const double> y, const Matrix& z, Task task,
                                const Splits& splits, double l2) {
  const auto& eval_rows = splits.test.empty() ? splits.valid : splits.test;
  if (eval_rows.empty()) throw ValidationError("downstream evaluation needs a test or validation split");
  const Matrix xz = append_columns(x, z, splits.train);
  DownstreamReport rep;
  rep.task = task;
  rep.n_fit = splits.train.size();
  rep.n_eval = eval_rows.size();
  rep.constant_original = constant_columns(x, splits.train);
  rep.constant_augmented = constant_columns(xz, splits.train);
  const LinearModel base = fit_linear(x, y, splits.train, task, l2);
  const LinearModel aug = fit_linear(xz, y, splits.train, task, l2);
  rep.original = score(predict_linear(base, x, task), y, eval_rows, task);
  rep.augmented = score(predict_linear(aug, xz, task), y, eval_rows, task);
  if (task == Task::kClassification)
    rep.improvement = 100.0 * (rep.augmented - rep.original) / rep.original;
  else
    rep.improvement = rep.original > 0.0 ? 100.0 * (rep.original - rep.augmented) / rep.original : 0.0;
  return rep;
}

DownstreamReport concat_and_fit(const Table& table, const Matrix& z, Task task, const Splits& splits, double l2) {
  return concat_and_fit(design_matrix(table), table.target().values, z, task, splits, l2);
}

std::string format_report(const DownstreamReport& r) {
  const char* metric = r.task == Task::kClassification ? "auc" : "mse";
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "task: %s\nmetric: %s\n%s_original: %.6f\n%s_augmented: %.6f\nimprovement: %+.2f%%\n"
                "fit_rows: %zu\neval_rows: %zu\nconstant_features_original: %zu\nconstant_features_augmented: %zu\n",
                std::string(to_string(r.task)).c_str(), metric, metric, r.original, metric, r.augmented,
                r.improvement, r.n_fit, r.n_eval, r.constant_original, r.constant_augmented);
  return buf;
}

}  // namespace tabgnn
