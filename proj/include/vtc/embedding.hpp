#pragma once

#include <string>
#include <vector>

#include "vtc/util.hpp"

namespace vtc {

// Learnable softmax temperature. The stored parameter is log_scale; the logit
// multiplier 1/tau = exp(log_scale) is clamped to at most kMaxInvTau, so tau
// stays strictly positive.
struct Temperature {
  static constexpr double kMaxInvTau = 100.0;
  static constexpr double kInitInvTau = 14.29;

  double log_scale;

  Temperature() : log_scale(std::log(kInitInvTau)) {}
  explicit Temperature(double ls) : log_scale(ls) {}

  static Temperature from_inv_tau(double inv_tau) {
    require(inv_tau > 0.0, "Temperature: 1/tau must be positive");
    return Temperature(std::log(inv_tau));
  }

  double inv_tau() const { return std::min(std::exp(log_scale), kMaxInvTau); }
  double tau() const { return 1.0 / inv_tau(); }

  // Applied after every optimizer step so the stored parameter itself
  // respects the clamp.
  void clamp() { log_scale = std::min(log_scale, std::log(kMaxInvTau)); }
};

// Returns v / ||v||. Throws ZeroVector when ||v|| < 1e-12.
Vec normalized(const Vec& v);

// Dot product of two same-dimension vectors; callers pass unit vectors, so
// the result is their cosine similarity.
double cosine_similarity(const Vec& a, const Vec& b);

// Numerically stable softmax.
Vec softmax(const Vec& logits);

struct SimilarityMatrix {
  Mat entries;  // rows.size() x cols.size()
  std::vector<std::string> row_ids;
  std::vector<std::string> col_ids;
};

SimilarityMatrix similarity_matrix(const std::vector<Vec>& rows, const std::vector<Vec>& cols,
                                   std::vector<std::string> row_ids = {},
                                   std::vector<std::string> col_ids = {});

// Posterior over classes for one video embedding: softmax of cosine
// similarities scaled by 1/tau.
Vec classify(const Vec& video, const std::vector<Vec>& class_embeddings, const Temperature& temp);

// Unit-normalized mean of pre-normalized component embeddings; used to build
// compound-class embeddings out of their components.
Vec compose_compound(const std::vector<Vec>& components);

enum class AggregateMode { kFrameEnsemble, kPromptEnsemble };

// Same arithmetic as compose_compound; the mode only tags what is being
// pooled (per-frame embeddings vs. per-prompt embeddings).
Vec aggregate_embeddings(const std::vector<Vec>& items, AggregateMode mode);

}  // namespace vtc
