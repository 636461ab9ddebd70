#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vtc/util.hpp"

namespace vtc {

// Multi-class classification summary. Metrics live in [0,1] internally;
// formatting helpers scale to percent for reports.
struct ClassificationReport {
  Eigen::MatrixXi confusion;  // rows = true class, cols = predicted class
  std::vector<int> support;
  std::vector<double> per_class_recall;  // 0 for classes without support
  double uar = 0.0;       // mean recall over classes with support
  double war = 0.0;       // trace / total
  double macro_f1 = 0.0;  // mean F1 over all classes, absent classes as 0
  double macro_auc = 0.5;  // mean one-vs-rest AUC over classes with pos+neg
  int n_classes = 0;
  int total = 0;
};

// Per-target regression summary. PCC is undefined (not zero) when either side
// of a target has zero variance.
struct RegressionReport {
  std::vector<std::string> targets;
  std::vector<double> mae;
  std::vector<double> rmse;
  std::vector<std::optional<double>> pcc;
};

// Row argmax with ties broken toward the lowest index.
int argmax_row(const Mat& probs, int row);

// `y_prob` holds one probability row per sample (rows sum to 1 within 1e-4);
// labels index its columns.
ClassificationReport classification_metrics(const std::vector<int>& y_true, const Mat& y_prob);

// One column per target. `target_names` may be empty (auto-named) but must
// otherwise match the column count.
RegressionReport regression_metrics(const Mat& y_true, const Mat& y_pred,
                                    std::vector<std::string> target_names = {});

// "12.34" style percent with two decimals, the external form of [0,1] metrics.
std::string format_percent(double fraction);

// metric,value rows with percent formatting.
std::string classification_csv(const ClassificationReport& report);
// true_class,<predicted class names> count grid.
std::string confusion_csv(const ClassificationReport& report,
                          const std::vector<std::string>& class_names);
// target,mae,rmse,pcc rows; undefined PCC prints "undefined".
std::string regression_csv(const RegressionReport& report);

// Human-readable summaries for terminal output.
std::string classification_pretty(const ClassificationReport& report,
                                  const std::vector<std::string>& class_names);
std::string regression_pretty(const RegressionReport& report);

}  // namespace vtc
