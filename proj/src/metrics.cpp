#include "vtc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "vtc/errors.hpp"

namespace vtc {
namespace {

// Tie-aware one-vs-rest AUC via the rank-sum identity: with average ranks for
// tied scores, AUC = (R_pos - n_pos(n_pos+1)/2) / (n_pos * n_neg), which
// equals trapezoidal ROC integration over score thresholds.
double rank_auc(const std::vector<double>& scores, const std::vector<char>& is_pos) {
  const int n = static_cast<int>(scores.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  int n_pos = 0;
  int i = 0;
  while (i < n) {
    int j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * ((i + 1) + j);  // 1-based average rank of the tie block
    for (int k = i; k < j; ++k) {
      if (is_pos[order[k]]) {
        pos_rank_sum += avg_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const int n_neg = n - n_pos;
  return (pos_rank_sum - 0.5 * n_pos * (n_pos + 1.0)) / (static_cast<double>(n_pos) * n_neg);
}

std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

}  // namespace

int argmax_row(const Mat& probs, int row) {
  int best = 0;
  for (int c = 1; c < probs.cols(); ++c)
    if (probs(row, c) > probs(row, best)) best = c;
  return best;
}

ClassificationReport classification_metrics(const std::vector<int>& y_true, const Mat& y_prob) {
  const int b = static_cast<int>(y_true.size());
  if (b == 0) throw EmptyInput("classification_metrics: no samples");
  if (y_prob.rows() != b)
    throw ShapeMismatch("classification_metrics: " + std::to_string(b) + " labels vs " +
                        std::to_string(y_prob.rows()) + " probability rows");
  const int n = static_cast<int>(y_prob.cols());
  if (n < 1) throw EmptyInput("classification_metrics: no classes");
  if (!all_finite(y_prob)) throw NonFiniteInput("classification_metrics: non-finite probability");
  for (int i = 0; i < b; ++i) {
    if (y_true[i] < 0 || y_true[i] >= n)
      throw LabelOutOfRange("classification_metrics: label " + std::to_string(y_true[i]) +
                            " outside [0, " + std::to_string(n) + ") at row " +
                            std::to_string(i));
    if (std::abs(y_prob.row(i).sum() - 1.0) > 1e-4)
      throw InvalidProbability("classification_metrics: row " + std::to_string(i) +
                               " sums to " + std::to_string(y_prob.row(i).sum()));
  }

  ClassificationReport r;
  r.n_classes = n;
  r.total = b;
  r.confusion = Eigen::MatrixXi::Zero(n, n);
  for (int i = 0; i < b; ++i) r.confusion(y_true[i], argmax_row(y_prob, i)) += 1;

  r.support.assign(n, 0);
  r.per_class_recall.assign(n, 0.0);
  double recall_sum = 0.0;
  int with_support = 0;
  double f1_sum = 0.0;
  for (int c = 0; c < n; ++c) {
    r.support[c] = r.confusion.row(c).sum();
    const int predicted = r.confusion.col(c).sum();
    const int hit = r.confusion(c, c);
    if (r.support[c] > 0) {
      r.per_class_recall[c] = static_cast<double>(hit) / r.support[c];
      recall_sum += r.per_class_recall[c];
      ++with_support;
    }
    // F1 collapses to 0 whenever the class has no support or no correct hit.
    if (hit > 0) f1_sum += 2.0 * hit / (r.support[c] + predicted);
  }
  r.war = static_cast<double>(r.confusion.trace()) / b;
  r.uar = with_support > 0 ? recall_sum / with_support : 0.0;
  r.macro_f1 = f1_sum / n;

  double auc_sum = 0.0;
  int auc_classes = 0;
  std::vector<double> scores(b);
  std::vector<char> is_pos(b);
  for (int c = 0; c < n; ++c) {
    if (r.support[c] == 0 || r.support[c] == b) continue;  // needs both sides
    for (int i = 0; i < b; ++i) {
      scores[i] = y_prob(i, c);
      is_pos[i] = y_true[i] == c;
    }
    auc_sum += rank_auc(scores, is_pos);
    ++auc_classes;
  }
  r.macro_auc = auc_classes > 0 ? auc_sum / auc_classes : 0.5;
  return r;
}

RegressionReport regression_metrics(const Mat& y_true, const Mat& y_pred,
                                    std::vector<std::string> target_names) {
  if (y_true.rows() != y_pred.rows() || y_true.cols() != y_pred.cols())
    throw ShapeMismatch("regression_metrics: shape mismatch");
  const int b = static_cast<int>(y_true.rows());
  const int k = static_cast<int>(y_true.cols());
  if (b == 0 || k == 0) throw EmptyInput("regression_metrics: empty input");
  if (!all_finite(y_true) || !all_finite(y_pred))
    throw NonFiniteInput("regression_metrics: non-finite value");
  if (target_names.empty())
    for (int t = 0; t < k; ++t) target_names.push_back("target_" + std::to_string(t));
  if (static_cast<int>(target_names.size()) != k)
    throw ShapeMismatch("regression_metrics: " + std::to_string(target_names.size()) +
                        " names for " + std::to_string(k) + " targets");

  RegressionReport r;
  r.targets = std::move(target_names);
  for (int t = 0; t < k; ++t) {
    const Vec diff = y_pred.col(t) - y_true.col(t);
    r.mae.push_back(diff.cwiseAbs().mean());
    r.rmse.push_back(std::sqrt(diff.squaredNorm() / b));
    if (b < 2) {
      r.pcc.push_back(std::nullopt);
      continue;
    }
    const Vec ct = y_true.col(t).array() - y_true.col(t).mean();
    const Vec cp = y_pred.col(t).array() - y_pred.col(t).mean();
    const double denom = std::sqrt(ct.squaredNorm() * cp.squaredNorm());
    if (denom < 1e-12)
      r.pcc.push_back(std::nullopt);  // zero variance: correlation undefined
    else
      r.pcc.push_back(ct.dot(cp) / denom);
  }
  return r;
}

std::string format_percent(double fraction) { return format_fixed(fraction * 100.0, 2); }

std::string classification_csv(const ClassificationReport& report) {
  std::ostringstream out;
  out << "metric,value\n";
  out << "uar," << format_percent(report.uar) << "\n";
  out << "war," << format_percent(report.war) << "\n";
  out << "macro_f1," << format_percent(report.macro_f1) << "\n";
  out << "macro_auc," << format_percent(report.macro_auc) << "\n";
  out << "samples," << report.total << "\n";
  out << "classes," << report.n_classes << "\n";
  return out.str();
}

std::string confusion_csv(const ClassificationReport& report,
                          const std::vector<std::string>& class_names) {
  if (static_cast<int>(class_names.size()) != report.n_classes)
    throw ShapeMismatch("confusion_csv: name count does not match class count");
  std::ostringstream out;
  out << "true_class";
  for (const auto& name : class_names) out << "," << name;
  out << "\n";
  for (int c = 0; c < report.n_classes; ++c) {
    out << class_names[c];
    for (int p = 0; p < report.n_classes; ++p) out << "," << report.confusion(c, p);
    out << "\n";
  }
  return out.str();
}

std::string regression_csv(const RegressionReport& report) {
  std::ostringstream out;
  out << "target,mae,rmse,pcc\n";
  for (size_t t = 0; t < report.targets.size(); ++t) {
    out << report.targets[t] << "," << format_fixed(report.mae[t], 4) << ","
        << format_fixed(report.rmse[t], 4) << ","
        << (report.pcc[t] ? format_fixed(*report.pcc[t], 4) : "undefined") << "\n";
  }
  return out.str();
}

std::string classification_pretty(const ClassificationReport& report,
                                  const std::vector<std::string>& class_names) {
  if (static_cast<int>(class_names.size()) != report.n_classes)
    throw ShapeMismatch("classification_pretty: name count does not match class count");
  std::ostringstream out;
  out << "samples " << report.total << ", classes " << report.n_classes << "\n";
  out << "UAR " << format_percent(report.uar) << "  WAR " << format_percent(report.war)
      << "  macro-F1 " << format_percent(report.macro_f1) << "  macro-AUC "
      << format_percent(report.macro_auc) << "\n";
  size_t width = 5;
  for (const auto& name : class_names) width = std::max(width, name.size());
  for (int c = 0; c < report.n_classes; ++c) {
    out << "  " << class_names[c] << std::string(width - class_names[c].size(), ' ')
        << "  support " << report.support[c] << "  recall "
        << format_percent(report.per_class_recall[c]) << "\n";
  }
  return out.str();
}

std::string regression_pretty(const RegressionReport& report) {
  std::ostringstream out;
  size_t width = 6;
  for (const auto& name : report.targets) width = std::max(width, name.size());
  for (size_t t = 0; t < report.targets.size(); ++t) {
    out << "  " << report.targets[t] << std::string(width - report.targets[t].size(), ' ')
        << "  MAE " << format_fixed(report.mae[t], 4) << "  RMSE "
        << format_fixed(report.rmse[t], 4) << "  PCC "
        << (report.pcc[t] ? format_fixed(*report.pcc[t], 4) : "undefined") << "\n";
  }
  return out.str();
}

}  // namespace vtc
