#include "vtc/probe.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <random>

#include "vtc/clip_sampling.hpp"
#include "vtc/errors.hpp"

namespace vtc {
namespace {

double range_factor(double lo, double hi, const std::string& what) {
  if (!(hi > lo)) throw DegenerateRange(what + ": range [" + std::to_string(lo) + ", " +
                                        std::to_string(hi) + "] has no width");
  return hi - lo;
}

int resolved_outputs(const LabelScaler& scaler, const ProbeConfig& cfg) {
  if (cfg.outputs == 0) return scaler.outputs();
  if (cfg.outputs != scaler.outputs())
    throw ConfigInvalid("probe outputs " + std::to_string(cfg.outputs) + " vs " +
                        std::to_string(scaler.outputs()) + " scaler targets");
  return cfg.outputs;
}

struct ProbeStep {
  ProbeParams grad;
  ProbeCache cache;
};

// One SGD step on (z, target); returns the pre-update squared error mean.
double sgd_step(ProbeParams& p, const Vec& z, const Vec& target, double lr, ProbeStep& ws) {
  const Vec y = probe_forward(p, z, &ws.cache);
  const Vec err = y - target;
  const double loss = err.squaredNorm() / err.size();
  if (lr == 0.0) return loss;
  ws.grad.w1.setZero();
  ws.grad.b1.setZero();
  ws.grad.w2.setZero();
  ws.grad.b2.setZero();
  probe_backward(p, ws.cache, 2.0 / err.size() * err, ws.grad);
  p.w1 -= lr * ws.grad.w1;
  p.b1 -= lr * ws.grad.b1;
  p.w2 -= lr * ws.grad.w2;
  p.b2 -= lr * ws.grad.b2;
  return loss;
}

// The frozen embedding a training step sees. Records whose downsampled
// length cannot move the crop window are computed once and reused.
struct TrainInputs {
  std::vector<Mat> frames;           // raw, per record
  std::vector<Vec> fixed_embedding;  // empty Vec when the crop varies
  int clip_len = 0;
  int downsample = 1;
  bool random_crop = true;
};

Vec step_embedding(const ModelState& frozen, const TrainInputs& in, int record, Rng& crop_rng) {
  if (in.fixed_embedding[record].size() > 0) return in.fixed_embedding[record];
  const Mat clip = sample_clip(in.frames[record], in.clip_len, in.downsample,
                               ClipPolicy::kTrain, &crop_rng);
  return encode_video(frozen, clip);
}

TrainInputs prepare_inputs(const ModelState& frozen, const std::vector<Mat>& frames,
                           const std::vector<int>& indices, const ProbeConfig& cfg,
                           int clip_len) {
  TrainInputs in;
  in.clip_len = clip_len;
  in.downsample = cfg.downsample;
  in.random_crop = cfg.random_crop;
  in.frames.reserve(indices.size());
  for (int i : indices) in.frames.push_back(frames[i]);
  in.fixed_embedding.resize(indices.size());
  for (size_t r = 0; r < in.frames.size(); ++r) {
    const int usable = static_cast<int>((in.frames[r].rows() + cfg.downsample - 1) /
                                        cfg.downsample);
    if (!cfg.random_crop || usable <= clip_len) {
      const Mat clip = sample_clip(in.frames[r], clip_len, cfg.downsample, ClipPolicy::kEval);
      in.fixed_embedding[r] = encode_video(frozen, clip);
    }
  }
  return in;
}

ProbeTrainResult train_probe_impl(const ModelState& frozen, const std::vector<Mat>& frames,
                                  const Mat& scaled_labels, const std::vector<int>& indices,
                                  const LabelScaler& scaler, const ProbeConfig& cfg) {
  cfg.validate(frozen.config);
  if (indices.empty()) throw InsufficientData("train_probe: no training records");
  const int k = resolved_outputs(scaler, cfg);
  const int hidden = cfg.hidden > 0 ? cfg.hidden : frozen.config.embed_dim;
  const int clip_len = cfg.clip_len > 0 ? cfg.clip_len : frozen.config.max_frames;

  TrainInputs in = prepare_inputs(frozen, frames, indices, cfg, clip_len);
  const int n = static_cast<int>(indices.size());

  ProbeTrainResult res;
  res.params = ProbeParams::init(frozen.config.embed_dim, hidden, k, cfg.seed);
  ProbeStep ws;
  ws.grad = ProbeParams::zeros_like(res.params);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng = make_rng(cfg.seed, 0x73687566ULL + epoch);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (int r : order) {
      Rng crop_rng = make_rng(cfg.seed, 0x63726f70ULL + 1000003ULL * epoch + r);
      const Vec z = step_embedding(frozen, in, r, crop_rng);
      loss_sum += sgd_step(res.params, z, scaled_labels.row(indices[r]).transpose(), cfg.lr, ws);
    }
    const double epoch_loss = loss_sum / n;
    if (!std::isfinite(epoch_loss))
      throw NonFiniteLoss("train_probe: loss diverged at epoch " + std::to_string(epoch));
    res.loss_history.push_back(epoch_loss);
  }
  return res;
}

std::vector<Mat> load_all_frames(const Manifest& manifest) {
  std::vector<Mat> frames;
  frames.reserve(manifest.records.size());
  for (const auto& rec : manifest.records) frames.push_back(read_frames(manifest.resolve(rec)));
  return frames;
}

}  // namespace

LabelScaler LabelScaler::make(std::vector<TargetSpec> targets, double item_min,
                              double item_max) {
  if (targets.empty()) throw EmptyInput("LabelScaler: no targets");
  LabelScaler s;
  s.item_min = item_min;
  s.item_max = item_max;
  range_factor(item_min, item_max, "LabelScaler item range");
  for (const auto& t : targets)
    if (t.scale) range_factor(t.raw_min, t.raw_max, "LabelScaler target '" + t.name + "'");
  s.targets = std::move(targets);
  return s;
}

std::vector<std::string> LabelScaler::names() const {
  std::vector<std::string> out;
  for (const auto& t : targets) out.push_back(t.name);
  return out;
}

Mat LabelScaler::scale(const Mat& raw) const {
  if (raw.cols() != outputs())
    throw ShapeMismatch("LabelScaler::scale: " + std::to_string(raw.cols()) +
                        " columns for " + std::to_string(outputs()) + " targets");
  Mat out = raw;
  for (int t = 0; t < outputs(); ++t) {
    if (!targets[t].scale) continue;
    const double k = (item_max - item_min) / (targets[t].raw_max - targets[t].raw_min);
    out.col(t) = (raw.col(t).array() - targets[t].raw_min) * k + item_min;
  }
  return out;
}

Mat LabelScaler::unscale(const Mat& scaled) const {
  if (scaled.cols() != outputs())
    throw ShapeMismatch("LabelScaler::unscale: " + std::to_string(scaled.cols()) +
                        " columns for " + std::to_string(outputs()) + " targets");
  Mat out = scaled;
  for (int t = 0; t < outputs(); ++t) {
    if (!targets[t].scale) continue;
    const double k = (targets[t].raw_max - targets[t].raw_min) / (item_max - item_min);
    out.col(t) = (scaled.col(t).array() - item_min) * k + targets[t].raw_min;
  }
  return out;
}

LabelScaler probe_corpus_scaler(int items, double item_min, double item_max) {
  if (items < 1) throw ConfigInvalid("probe_corpus_scaler: need at least one item");
  std::vector<TargetSpec> targets;
  for (int i = 0; i < items; ++i)
    targets.push_back({"item_" + std::to_string(i + 1), item_min, item_max, false});
  targets.push_back({"total", items * item_min, items * item_max, true});
  return LabelScaler::make(std::move(targets), item_min, item_max);
}

Mat symptom_matrix(const Manifest& manifest, int outputs) {
  const int n = static_cast<int>(manifest.records.size());
  if (n == 0) throw EmptyInput("symptom_matrix: empty manifest");
  Mat labels(n, outputs);
  for (int i = 0; i < n; ++i) {
    const auto& rec = manifest.records[i];
    if (rec.symptoms.empty())
      throw MissingMetadata("record '" + rec.id + "' carries no symptom values");
    if (static_cast<int>(rec.symptoms.size()) != outputs)
      throw ShapeMismatch("record '" + rec.id + "' has " +
                          std::to_string(rec.symptoms.size()) + " symptom values, expected " +
                          std::to_string(outputs));
    for (int t = 0; t < outputs; ++t) labels(i, t) = rec.symptoms[t];
  }
  return labels;
}

ProbeParams ProbeParams::init(int embed_dim, int hidden, int outputs, uint64_t seed) {
  require(embed_dim >= 1 && hidden >= 1 && outputs >= 1, "ProbeParams: bad dimensions");
  ProbeParams p;
  Rng rng = make_rng(seed, 0x70726f62ULL);  // probe-init stream
  auto fill = [&rng](Mat& m, int fan_in) {
    std::uniform_real_distribution<double> u(-1.0 / std::sqrt(fan_in),
                                             1.0 / std::sqrt(fan_in));
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < m.cols(); ++j) m(i, j) = u(rng);
  };
  p.w1 = Mat(embed_dim, hidden);
  fill(p.w1, embed_dim);
  p.b1 = Vec::Zero(hidden);
  p.w2 = Mat(hidden, outputs);
  fill(p.w2, hidden);
  p.b2 = Vec::Zero(outputs);
  return p;
}

ProbeParams ProbeParams::zeros_like(const ProbeParams& other) {
  ProbeParams p;
  p.w1 = Mat::Zero(other.w1.rows(), other.w1.cols());
  p.b1 = Vec::Zero(other.b1.size());
  p.w2 = Mat::Zero(other.w2.rows(), other.w2.cols());
  p.b2 = Vec::Zero(other.b2.size());
  return p;
}

Vec probe_forward(const ProbeParams& p, const Vec& z, ProbeCache* cache) {
  if (z.size() != p.w1.rows())
    throw ShapeMismatch("probe_forward: embedding width " + std::to_string(z.size()) +
                        " vs probe input " + std::to_string(p.w1.rows()));
  ProbeCache local;
  ProbeCache& c = cache ? *cache : local;
  c.z = z;
  c.a1 = (p.w1.transpose() * z + p.b1).array().tanh();
  c.y = p.w2.transpose() * c.a1 + p.b2;
  return c.y;
}

void probe_backward(const ProbeParams& p, const ProbeCache& c, const Vec& d_y,
                    ProbeParams& grad) {
  grad.b2 += d_y;
  grad.w2 += c.a1 * d_y.transpose();
  const Vec d_h = (1.0 - c.a1.array().square()).matrix().cwiseProduct(p.w2 * d_y);
  grad.b1 += d_h;
  grad.w1 += c.z * d_h.transpose();
}

void ProbeConfig::validate(const ModelConfig& model) const {
  if (outputs < 0) throw ConfigInvalid("ProbeConfig: outputs must be >= 0");
  if (hidden < 0) throw ConfigInvalid("ProbeConfig: hidden must be >= 0");
  if (lr < 0.0) throw ConfigInvalid("ProbeConfig: lr must be >= 0");
  if (epochs < 0) throw ConfigInvalid("ProbeConfig: epochs must be >= 0");
  if (downsample < 1) throw ConfigInvalid("ProbeConfig: downsample must be >= 1");
  const int resolved = clip_len > 0 ? clip_len : model.max_frames;
  if (resolved > model.max_frames)
    throw ConfigInvalid("ProbeConfig: clip_len " + std::to_string(resolved) +
                        " exceeds the model's max_frames " + std::to_string(model.max_frames));
  if (threads < 1) throw ConfigInvalid("ProbeConfig: threads must be >= 1");
}

ProbeTrainResult train_probe(const ModelState& frozen, const Manifest& manifest,
                             const LabelScaler& scaler, const ProbeConfig& config) {
  const Mat raw = symptom_matrix(manifest, scaler.outputs());
  const Mat scaled = scaler.scale(raw);
  std::vector<int> all(manifest.records.size());
  std::iota(all.begin(), all.end(), 0);
  return train_probe_impl(frozen, load_all_frames(manifest), scaled, all, scaler, config);
}

Vec aggregate_clips(const std::vector<ClipPrediction>& preds) {
  if (preds.empty()) throw EmptyInput("aggregate_clips: no clip predictions");
  Vec sum = Vec::Zero(preds[0].prediction.size());
  for (const auto& cp : preds) {
    if (cp.video_id != preds[0].video_id)
      throw ShapeMismatch("aggregate_clips: mixed video ids '" + preds[0].video_id +
                          "' and '" + cp.video_id + "'");
    if (cp.prediction.size() != sum.size())
      throw ShapeMismatch("aggregate_clips: mixed prediction widths");
    sum += cp.prediction;
  }
  return sum / static_cast<double>(preds.size());
}

Vec predict_video(const ModelState& frozen, const ProbeParams& probe, const Mat& raw_frames,
                  const LabelScaler& scaler, int clip_len, int downsample) {
  std::vector<ClipPrediction> preds;
  const std::vector<Mat> windows = clip_windows(raw_frames, clip_len, downsample);
  for (size_t w = 0; w < windows.size(); ++w) {
    const Vec z = encode_video(frozen, windows[w]);
    preds.push_back({"video", static_cast<int>(w), probe_forward(probe, z)});
  }
  const Vec scaled = aggregate_clips(preds);
  return scaler.unscale(scaled.transpose()).row(0).transpose();
}

LopoResult evaluate_lopo(const ModelState& frozen, const Manifest& manifest,
                         const LabelScaler& scaler, const ProbeConfig& config) {
  config.validate(frozen.config);
  const Mat raw = symptom_matrix(manifest, scaler.outputs());
  const Mat scaled = scaler.scale(raw);
  const std::vector<Mat> frames = load_all_frames(manifest);
  const int clip_len = config.clip_len > 0 ? config.clip_len : frozen.config.max_frames;

  LopoResult res;
  res.folds = make_folds(manifest, FoldScheme::kLeaveOnePatientOut);
  if (res.folds.fold_count() < 2)
    throw InsufficientData("evaluate_lopo: need at least two patients");
  res.truths = raw;
  res.predictions = Mat::Zero(raw.rows(), raw.cols());

  std::vector<std::exception_ptr> failures(res.folds.fold_count());
  parallel_for(res.folds.fold_count(), config.threads, [&](int f) {
    try {
      ProbeTrainResult trained =
          train_probe_impl(frozen, frames, scaled, res.folds.train_indices(f), scaler, config);
      for (int i : res.folds.eval_indices(f))
        res.predictions.row(i) = predict_video(frozen, trained.params, frames[i], scaler,
                                               clip_len, config.downsample)
                                     .transpose();
    } catch (...) {
      failures[f] = std::current_exception();
    }
  });
  for (auto& e : failures)
    if (e) std::rethrow_exception(e);

  res.report = regression_metrics(res.truths, res.predictions, scaler.names());
  return res;
}

}  // namespace vtc
