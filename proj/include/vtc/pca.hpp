#pragma once

#include <string>
#include <vector>

#include "vtc/util.hpp"

namespace vtc {

struct PcaResult {
  Mat components;  // dims_found x D, orthonormal rows, dominant first
  Vec eigenvalues;            // per-component variance (sample covariance)
  std::vector<double> explained_ratio;  // eigenvalue / total variance
  Mat projected;              // n x dims_found
  Vec mean;                   // the removed center
  std::vector<std::string> warnings;

  int dims_found() const { return static_cast<int>(components.rows()); }
};

// Mean-centered PCA by power iteration with deflation. Asks for `dims`
// components; returns fewer (with a warning) when the data lacks the rank.
PcaResult pca_project(const std::vector<Vec>& embeddings, int dims, uint64_t seed = 0);

// id,class,x,y,z rows (axes beyond the found components print 0).
std::string pca_csv(const PcaResult& result, const std::vector<std::string>& ids,
                    const std::vector<std::string>& classes);

}  // namespace vtc
