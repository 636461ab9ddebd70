#include "vtc/embedding.hpp"

#include <cmath>

#include "vtc/errors.hpp"

namespace vtc {

Vec normalized(const Vec& v) {
  if (v.size() == 0) throw EmptyInput("normalized: empty vector");
  if (!all_finite(v)) throw NonFiniteInput("normalized: non-finite entries");
  const double n = v.norm();
  if (n < 1e-12) throw ZeroVector("normalized: norm below 1e-12");
  return v / n;
}

double cosine_similarity(const Vec& a, const Vec& b) {
  if (a.size() != b.size())
    throw DimensionMismatch("cosine_similarity: " + std::to_string(a.size()) + " vs " +
                            std::to_string(b.size()));
  if (a.size() == 0) throw EmptyInput("cosine_similarity: empty vectors");
  return a.dot(b);
}

Vec softmax(const Vec& logits) {
  if (logits.size() == 0) throw EmptyInput("softmax: empty logits");
  const double m = logits.maxCoeff();
  Vec e = (logits.array() - m).exp();
  return e / e.sum();
}

SimilarityMatrix similarity_matrix(const std::vector<Vec>& rows, const std::vector<Vec>& cols,
                                   std::vector<std::string> row_ids,
                                   std::vector<std::string> col_ids) {
  if (rows.empty() || cols.empty()) throw EmptyInput("similarity_matrix: empty embedding set");
  if (!row_ids.empty() && row_ids.size() != rows.size())
    throw DimensionMismatch("similarity_matrix: row id count mismatch");
  if (!col_ids.empty() && col_ids.size() != cols.size())
    throw DimensionMismatch("similarity_matrix: col id count mismatch");
  SimilarityMatrix out;
  out.entries.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < cols.size(); ++j)
      out.entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          cosine_similarity(rows[i], cols[j]);
  out.row_ids = std::move(row_ids);
  out.col_ids = std::move(col_ids);
  return out;
}

Vec classify(const Vec& video, const std::vector<Vec>& class_embeddings, const Temperature& temp) {
  if (class_embeddings.empty()) throw EmptyClassSet("classify: no class embeddings");
  Vec logits(static_cast<Eigen::Index>(class_embeddings.size()));
  const double s = temp.inv_tau();
  for (size_t j = 0; j < class_embeddings.size(); ++j)
    logits[static_cast<Eigen::Index>(j)] = s * cosine_similarity(video, class_embeddings[j]);
  return softmax(logits);
}

Vec compose_compound(const std::vector<Vec>& components) {
  if (components.empty()) throw EmptyInput("compose_compound: no components");
  Vec sum = components[0];
  for (size_t i = 1; i < components.size(); ++i) {
    if (components[i].size() != sum.size())
      throw DimensionMismatch("compose_compound: component dimension mismatch");
    sum += components[i];
  }
  return normalized(sum / static_cast<double>(components.size()));
}

Vec aggregate_embeddings(const std::vector<Vec>& items, AggregateMode) {
  return compose_compound(items);
}

}  // namespace vtc
