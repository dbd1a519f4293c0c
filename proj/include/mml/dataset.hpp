#pragma once

#include <string>
#include <vector>

#include "mml/matrix.hpp"

namespace mml {

// One data split: per-modality feature matrices (equal row counts) plus the
// shared label vector.
struct SplitData {
  std::vector<Matrix> features;  // M x [n x dim]
  std::vector<int> labels;       // n

  std::size_t size() const { return labels.size(); }
  std::size_t modalities() const { return features.size(); }
};

// Raw little-endian binary matrix files ("MMLMAT1\0" magic, u64 rows/cols,
// row-major doubles). Byte-identical round trips by construction.
void save_matrix(const Matrix& m, const std::string& path);
Matrix load_matrix(const std::string& path);

void save_labels(const std::vector<int>& labels, const std::string& path);
std::vector<int> load_labels(const std::string& path);

}  // namespace mml
