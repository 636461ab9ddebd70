#pragma once

#include <string>
#include <vector>

#include "vtc/data_io.hpp"
#include "vtc/folds.hpp"
#include "vtc/metrics.hpp"
#include "vtc/model.hpp"
#include "vtc/util.hpp"

namespace vtc {

// One regression target with its declared value range. Targets marked
// `scale` (total scores) are affinely mapped onto the common item range for
// training and mapped back before error reporting.
struct TargetSpec {
  std::string name;
  double raw_min = 0.0;
  double raw_max = 0.0;
  bool scale = false;
};

struct LabelScaler {
  std::vector<TargetSpec> targets;
  double item_min = 0.0;
  double item_max = 0.0;

  // Validates ranges (DegenerateRange on min == max anywhere it matters).
  static LabelScaler make(std::vector<TargetSpec> targets, double item_min, double item_max);

  int outputs() const { return static_cast<int>(targets.size()); }
  std::vector<std::string> names() const;
  Mat scale(const Mat& raw) const;      // column t mapped iff targets[t].scale
  Mat unscale(const Mat& scaled) const;  // exact inverse
};

// The conventional target layout of the planted probe corpus: `items` item
// columns in [item_min, item_max] plus a final "total" column scaled down
// from its sum range.
LabelScaler probe_corpus_scaler(int items, double item_min, double item_max);

// Per-record symptom rows as a matrix; every record must carry exactly
// `outputs` values.
Mat symptom_matrix(const Manifest& manifest, int outputs);

// ---------------------------------------------------------------------------
// The probe head: embed_dim -> hidden (tanh) -> outputs, trained on frozen
// video embeddings.
// ---------------------------------------------------------------------------

struct ProbeParams {
  Mat w1;  // D x H
  Vec b1;
  Mat w2;  // H x K
  Vec b2;

  static ProbeParams init(int embed_dim, int hidden, int outputs, uint64_t seed);
  static ProbeParams zeros_like(const ProbeParams& other);
};

struct ProbeCache {
  Vec z, a1, y;
};

// y = w2^T tanh(w1^T z + b1) + b2.
Vec probe_forward(const ProbeParams& p, const Vec& z, ProbeCache* cache = nullptr);
void probe_backward(const ProbeParams& p, const ProbeCache& c, const Vec& d_y,
                    ProbeParams& grad);

struct ProbeConfig {
  int hidden = 0;   // 0 -> the model's embed_dim
  int outputs = 0;  // required
  double lr = 0.01;
  int epochs = 50;
  int clip_len = 0;  // 0 -> the model's max_frames
  int downsample = 1;
  bool random_crop = true;  // train-time temporal crop augmentation
  uint64_t seed = 0;
  int threads = 1;  // parallel folds in evaluate_lopo

  void validate(const ModelConfig& model) const;  // ConfigInvalid
};

struct ProbeTrainResult {
  ProbeParams params;
  std::vector<double> loss_history;  // mean squared error per epoch
};

// Minimizes MSE over all targets jointly with per-sample SGD on scaled
// labels; the backbone is read-only throughout. Frames are read through the
// manifest once and clips are drawn per epoch (seeded random crop when
// enabled, centered otherwise).
ProbeTrainResult train_probe(const ModelState& frozen, const Manifest& manifest,
                             const LabelScaler& scaler, const ProbeConfig& config);

struct ClipPrediction {
  std::string video_id;
  int clip_index = 0;
  Vec prediction;
};

// Element-wise mean over one video's clip predictions.
Vec aggregate_clips(const std::vector<ClipPrediction>& preds);

// Probe output averaged over a video's non-overlapping eval windows,
// unscaled to raw target units.
Vec predict_video(const ModelState& frozen, const ProbeParams& probe, const Mat& raw_frames,
                  const LabelScaler& scaler, int clip_len, int downsample);

struct LopoResult {
  RegressionReport report;  // on raw (unscaled) values, all folds pooled
  FoldSpec folds;
  Mat truths;       // records x K, raw
  Mat predictions;  // records x K, raw; every record predicted exactly once
};

// Leave-one-patient-out: per fold, train on the other patients, predict the
// held-out patient's videos clip-averaged, pool across folds.
LopoResult evaluate_lopo(const ModelState& frozen, const Manifest& manifest,
                         const LabelScaler& scaler, const ProbeConfig& config);

}  // namespace vtc
