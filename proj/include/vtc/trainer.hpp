#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vtc/model.hpp"

namespace vtc {

struct BatchItem {
  Mat frames;               // clip, T x F
  std::vector<int> tokens;  // caption token ids
};

struct Batch {
  std::vector<BatchItem> items;
};

struct TrainSample {
  std::string id;
  Mat frames;  // full video, T_raw x F
  std::vector<int> tokens;
};

struct TrainConfig {
  int epochs = 30;
  int batch_size = 64;
  double head_lr = 1e-3;       // temporal module, class token, positions, temperature
  double backbone_lr = 1e-6;   // frame and text encoders
  uint64_t seed = 0;
  int clip_len = 32;
  int downsample = 4;
  double feature_jitter = 0.0;  // additive gaussian sigma on clip features, 0 = off
  std::string loss_log_path;    // per-step csv; empty = no log
};

// Symmetric cross-entropy over a square similarity matrix with diagonal
// targets: mean of the video-to-text and text-to-video directions. Optionally
// returns d(loss)/d(sims) and d(loss)/d(inv_tau).
double symmetric_infonce(const Mat& sims, double inv_tau, Mat* d_sims = nullptr,
                         double* d_inv_tau = nullptr);

struct LossResult {
  double value;
  ModelState grads;
};

// Loss and full parameter gradient for one batch.
LossResult contrastive_loss(const ModelState& s, const Batch& batch);

// Forward-only loss; used by finite-difference checks.
double contrastive_loss_value(const ModelState& s, const Batch& batch);

// One SGD update with per-group learning rates, then the temperature clamp.
// Throws NonFiniteLoss before touching the state when the loss is not finite.
double train_step(ModelState& s, const Batch& batch, const TrainConfig& cfg);

struct TrainHistory {
  std::vector<double> epoch_mean_loss;
  int64_t steps = 0;
};

// Seeded epoch loop: shuffle, fixed-size batches (trailing partial batch is
// dropped), per-sample random clips. Epoch randomness depends only on
// (seed, epoch index), so resuming at start_epoch reproduces an
// uninterrupted run exactly. on_epoch runs after each epoch with the epoch
// index just finished.
using EpochCallback = std::function<void(const ModelState&, int, const TrainHistory&)>;
TrainHistory train(ModelState& s, const std::vector<TrainSample>& data, const TrainConfig& cfg,
                   const EpochCallback& on_epoch = {}, int start_epoch = 0,
                   TrainHistory carry = {});

}  // namespace vtc
