#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tabgnn/matrix.hpp"

namespace tabgnn {

struct EmbeddingMatrix {
  std::vector<std::string> ids;  // one per row of z
  Matrix z;
  std::vector<double> beta;
  std::string fingerprint;  // of the config that produced z
};

// CSV with header `row_id,z_0,...,z_{d-1}` and values at full precision;
// relation weights and fingerprint go to `<path>.meta.json`.
void write_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& emb);
EmbeddingMatrix read_embeddings(const std::filesystem::path& path);

}  // namespace tabgnn
