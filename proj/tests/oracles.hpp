#pragma once

// Brute-force reference implementations of every reported metric, coded
// independently of src/metrics.cpp (plain counting loops, pairwise AUC) so
// the two can be checked against each other.

#include <cmath>
#include <optional>
#include <vector>

#include "vtc/util.hpp"

namespace oracle {

inline std::vector<int> argmax_preds(const vtc::Mat& probs) {
  std::vector<int> preds;
  for (int i = 0; i < probs.rows(); ++i) {
    int best = 0;
    for (int c = 1; c < probs.cols(); ++c)
      if (probs(i, c) > probs(i, best)) best = c;
    preds.push_back(best);
  }
  return preds;
}

inline double war(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
  int hit = 0;
  for (size_t i = 0; i < y_true.size(); ++i)
    if (y_true[i] == y_pred[i]) ++hit;
  return static_cast<double>(hit) / y_true.size();
}

inline double uar(const std::vector<int>& y_true, const std::vector<int>& y_pred, int n) {
  double sum = 0.0;
  int classes = 0;
  for (int c = 0; c < n; ++c) {
    int support = 0, hit = 0;
    for (size_t i = 0; i < y_true.size(); ++i) {
      if (y_true[i] != c) continue;
      ++support;
      if (y_pred[i] == c) ++hit;
    }
    if (support == 0) continue;
    sum += static_cast<double>(hit) / support;
    ++classes;
  }
  return classes > 0 ? sum / classes : 0.0;
}

inline double macro_f1(const std::vector<int>& y_true, const std::vector<int>& y_pred, int n) {
  double sum = 0.0;
  for (int c = 0; c < n; ++c) {
    int tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < y_true.size(); ++i) {
      const bool t = y_true[i] == c, p = y_pred[i] == c;
      if (t && p) ++tp;
      if (!t && p) ++fp;
      if (t && !p) ++fn;
    }
    const double prec = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    const double rec = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    sum += prec + rec > 0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
  }
  return sum / n;
}

// Pairwise counting form: P(score_pos > score_neg) + 0.5 P(tie).
inline double macro_auc(const std::vector<int>& y_true, const vtc::Mat& probs) {
  const int n = static_cast<int>(probs.cols());
  double sum = 0.0;
  int classes = 0;
  for (int c = 0; c < n; ++c) {
    std::vector<double> pos, neg;
    for (size_t i = 0; i < y_true.size(); ++i)
      (y_true[i] == c ? pos : neg).push_back(probs(static_cast<int>(i), c));
    if (pos.empty() || neg.empty()) continue;
    double wins = 0.0;
    for (double p : pos)
      for (double q : neg) {
        if (p > q)
          wins += 1.0;
        else if (p == q)
          wins += 0.5;
      }
    sum += wins / (static_cast<double>(pos.size()) * neg.size());
    ++classes;
  }
  return classes > 0 ? sum / classes : 0.5;
}

inline double mae(const std::vector<double>& t, const std::vector<double>& p) {
  double sum = 0.0;
  for (size_t i = 0; i < t.size(); ++i) sum += std::abs(p[i] - t[i]);
  return sum / t.size();
}

inline double rmse(const std::vector<double>& t, const std::vector<double>& p) {
  double sum = 0.0;
  for (size_t i = 0; i < t.size(); ++i) sum += (p[i] - t[i]) * (p[i] - t[i]);
  return std::sqrt(sum / t.size());
}

// Textbook sample correlation; nullopt when either variance vanishes.
inline std::optional<double> pcc(const std::vector<double>& t, const std::vector<double>& p) {
  const size_t n = t.size();
  double mt = 0.0, mp = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mt += t[i];
    mp += p[i];
  }
  mt /= n;
  mp /= n;
  double num = 0.0, vt = 0.0, vp = 0.0;
  for (size_t i = 0; i < n; ++i) {
    num += (t[i] - mt) * (p[i] - mp);
    vt += (t[i] - mt) * (t[i] - mt);
    vp += (p[i] - mp) * (p[i] - mp);
  }
  if (std::sqrt(vt * vp) < 1e-12) return std::nullopt;
  return num / std::sqrt(vt * vp);
}

}  // namespace oracle
