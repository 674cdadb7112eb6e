#include "tabgnn/embeddings.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tabgnn/error.hpp"

namespace tabgnn {

namespace {

std::filesystem::path meta_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".meta.json");
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void write_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& emb) {
  if (emb.ids.size() != emb.z.rows()) throw ValidationError("embedding ids and rows differ in count");
  std::ofstream out(path);
  if (!out) throw RuntimeError("cannot write embeddings " + path.string());
  out << "row_id";
  for (std::size_t j = 0; j < emb.z.cols(); ++j) out << ",z_" << j;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < emb.z.rows(); ++i) {
    out << emb.ids[i];
    for (double v : emb.z.row(i)) {
      if (!std::isfinite(v)) throw RuntimeError("non-finite embedding value at row " + emb.ids[i]);
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw RuntimeError("failed writing embeddings " + path.string());
  std::ofstream meta(meta_path(path));
  meta << nlohmann::json{{"beta", emb.beta}, {"fingerprint", emb.fingerprint}, {"dim", emb.z.cols()}}.dump(2)
       << '\n';
  if (!meta) throw RuntimeError("failed writing " + meta_path(path).string());
}

EmbeddingMatrix read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("missing embeddings file: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty embeddings file " + path.string());
  const auto header = split_line(line);
  if (header.empty() || header[0] != "row_id") throw ValidationError("embeddings header must start with row_id");
  const std::size_t d = header.size() - 1;
  EmbeddingMatrix emb;
  std::vector<double> data;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != d + 1)
      throw ValidationError("embeddings line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                            " fields, expected " + std::to_string(d + 1));
    emb.ids.push_back(cells[0]);
    for (std::size_t j = 1; j <= d; ++j) {
      double v = 0.0;
      const auto* end = cells[j].data() + cells[j].size();
      auto [p, ec] = std::from_chars(cells[j].data(), end, v);
      if (ec != std::errc() || p != end)
        throw ValidationError("bad embedding value '" + cells[j] + "' on line " + std::to_string(line_no));
      data.push_back(v);
    }
  }
  emb.z = Matrix(emb.ids.size(), d);
  std::copy(data.begin(), data.end(), emb.z.data());
  std::ifstream meta(meta_path(path));
  if (meta) {
    nlohmann::json doc;
    meta >> doc;
    emb.beta = doc.value("beta", std::vector<double>{});
    emb.fingerprint = doc.value("fingerprint", "");
  }
  return emb;
}

}  // namespace tabgnn
