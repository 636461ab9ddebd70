#include "vtc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "vtc/clip_sampling.hpp"
#include "vtc/errors.hpp"

namespace vtc {

double symmetric_infonce(const Mat& sims, double inv_tau, Mat* d_sims, double* d_inv_tau) {
  const Eigen::Index b = sims.rows();
  if (b < 1) throw EmptyInput("symmetric_infonce: empty similarity matrix");
  if (sims.cols() != b) throw ShapeMismatch("symmetric_infonce: similarity matrix must be square");
  if (!all_finite(sims)) throw NonFiniteLoss("symmetric_infonce: non-finite similarities");

  Mat logits = sims * inv_tau;
  Mat p_row(b, b), p_col(b, b);
  double loss_row = 0.0, loss_col = 0.0;
  for (Eigen::Index r = 0; r < b; ++r) {
    const double m = logits.row(r).maxCoeff();
    Eigen::RowVectorXd e = (logits.row(r).array() - m).exp();
    const double lse = m + std::log(e.sum());
    loss_row += lse - logits(r, r);
    p_row.row(r) = e / e.sum();
  }
  for (Eigen::Index cidx = 0; cidx < b; ++cidx) {
    const double m = logits.col(cidx).maxCoeff();
    Vec e = (logits.col(cidx).array() - m).exp();
    const double lse = m + std::log(e.sum());
    loss_col += lse - logits(cidx, cidx);
    p_col.col(cidx) = e / e.sum();
  }
  const double denom = 2.0 * static_cast<double>(b);
  const double loss = (loss_row + loss_col) / denom;
  if (!std::isfinite(loss)) throw NonFiniteLoss("symmetric_infonce: loss is not finite");

  if (d_sims || d_inv_tau) {
    Mat d_logits = (p_row + p_col - 2.0 * Mat::Identity(b, b)) / denom;
    if (d_sims) *d_sims = d_logits * inv_tau;
    if (d_inv_tau) *d_inv_tau = d_logits.cwiseProduct(sims).sum();
  }
  return loss;
}

namespace {

void encode_batch(const ModelState& s, const Batch& batch, Mat& zv, Mat& zt,
                  std::vector<VideoCache>* vc, std::vector<TextCache>* tc) {
  const size_t b = batch.items.size();
  if (b == 0) throw EmptyInput("contrastive_loss: empty batch");
  const Eigen::Index d = s.config.embed_dim;
  zv.resize(static_cast<Eigen::Index>(b), d);
  zt.resize(static_cast<Eigen::Index>(b), d);
  for (size_t i = 0; i < b; ++i) {
    const auto& item = batch.items[i];
    const Eigen::Index r = static_cast<Eigen::Index>(i);
    zv.row(r) = encode_video(s, item.frames, vc ? &(*vc)[i] : nullptr).transpose();
    zt.row(r) = encode_text(s, item.tokens, tc ? &(*tc)[i] : nullptr).transpose();
  }
}

}  // namespace

LossResult contrastive_loss(const ModelState& s, const Batch& batch) {
  const size_t b = batch.items.size();
  std::vector<VideoCache> vc(b);
  std::vector<TextCache> tc(b);
  Mat zv, zt;
  encode_batch(s, batch, zv, zt, &vc, &tc);
  Mat sims = zv * zt.transpose();

  Mat d_sims;
  double d_inv_tau = 0.0;
  LossResult res{symmetric_infonce(sims, s.temperature.inv_tau(), &d_sims, &d_inv_tau),
                 ModelState::zeros_like(s)};

  const double e = std::exp(s.temperature.log_scale);
  res.grads.temperature.log_scale = e < Temperature::kMaxInvTau ? d_inv_tau * e : 0.0;

  Mat d_zv = d_sims * zt;
  Mat d_zt = d_sims.transpose() * zv;
  for (size_t i = 0; i < b; ++i) {
    const Eigen::Index r = static_cast<Eigen::Index>(i);
    encode_video_backward(s, vc[i], d_zv.row(r).transpose(), res.grads);
    encode_text_backward(s, tc[i], d_zt.row(r).transpose(), res.grads);
  }
  return res;
}

double contrastive_loss_value(const ModelState& s, const Batch& batch) {
  Mat zv, zt;
  encode_batch(s, batch, zv, zt, nullptr, nullptr);
  return symmetric_infonce(zv * zt.transpose(), s.temperature.inv_tau());
}

double train_step(ModelState& s, const Batch& batch, const TrainConfig& cfg) {
  LossResult res = contrastive_loss(s, batch);
  ModelState& grads = res.grads;
  auto ps = param_refs(s);
  auto gs = param_refs(grads);
  for (size_t i = 0; i < ps.size(); ++i) {
    const double lr = ps[i].group == ParamGroup::kBackbone ? cfg.backbone_lr : cfg.head_lr;
    for (Eigen::Index k = 0; k < ps[i].size; ++k) ps[i].data[k] -= lr * gs[i].data[k];
  }
  s.temperature.clamp();
  return res.value;
}

TrainHistory train(ModelState& s, const std::vector<TrainSample>& data, const TrainConfig& cfg,
                   const EpochCallback& on_epoch, int start_epoch, TrainHistory carry) {
  if (cfg.batch_size < 1) throw ConfigInvalid("train: batch_size must be >= 1");
  if (cfg.epochs < 0) throw ConfigInvalid("train: epochs must be >= 0");
  if (static_cast<int>(data.size()) < cfg.batch_size)
    throw InsufficientData("train: " + std::to_string(data.size()) +
                           " captioned samples < batch_size " + std::to_string(cfg.batch_size));
  for (const auto& sample : data) {
    if (sample.tokens.empty())
      throw EmptySequence("train: sample '" + sample.id + "' has no caption tokens");
    if (sample.frames.rows() == 0)
      throw EmptyVideo("train: sample '" + sample.id + "' has no frames");
  }

  std::ofstream log;
  if (!cfg.loss_log_path.empty()) {
    log.open(cfg.loss_log_path, start_epoch == 0 ? std::ios::trunc : std::ios::app);
    if (!log) throw IoError("train: cannot open loss log " + cfg.loss_log_path);
    if (start_epoch == 0) log << "epoch,step,loss,tau\n";
  }

  TrainHistory history = std::move(carry);
  const int steps_per_epoch = static_cast<int>(data.size()) / cfg.batch_size;
  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    Rng rng = make_rng(cfg.seed, 0xe10c0000ULL + static_cast<uint64_t>(epoch));
    std::vector<size_t> order(data.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    double epoch_loss = 0.0;
    for (int step = 0; step < steps_per_epoch; ++step) {
      Batch batch;
      batch.items.resize(static_cast<size_t>(cfg.batch_size));
      for (int j = 0; j < cfg.batch_size; ++j) {
        const auto& sample = data[order[static_cast<size_t>(step * cfg.batch_size + j)]];
        auto& item = batch.items[static_cast<size_t>(j)];
        item.frames = sample_clip(sample.frames, cfg.clip_len, cfg.downsample, ClipPolicy::kTrain,
                                  &rng);
        if (cfg.feature_jitter > 0.0) {
          std::normal_distribution<double> noise(0.0, cfg.feature_jitter);
          for (Eigen::Index k = 0; k < item.frames.size(); ++k)
            item.frames.data()[k] += noise(rng);
        }
        item.tokens = sample.tokens;
      }
      double loss;
      try {
        loss = train_step(s, batch, cfg);
      } catch (const NonFiniteLoss& e) {
        throw NonFiniteLoss("train: epoch " + std::to_string(epoch) + " step " +
                            std::to_string(step) + ": " + e.what());
      }
      epoch_loss += loss;
      ++history.steps;
      if (log)
        log << epoch << ',' << step << ',' << loss << ',' << s.temperature.tau() << '\n';
    }
    history.epoch_mean_loss.push_back(steps_per_epoch > 0 ? epoch_loss / steps_per_epoch : 0.0);
    if (on_epoch) on_epoch(s, epoch, history);
  }
  return history;
}

}  // namespace vtc
