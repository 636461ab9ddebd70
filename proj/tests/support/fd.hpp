#pragma once

// Finite-difference oracle for the analytic gradients. Central differences in
// double precision; independent of the backward-pass code under test.

#include <string>

#include "vtc/model.hpp"
#include "vtc/trainer.hpp"

namespace vtc_test {

struct FdReport {
  double max_rel = 0.0;
  std::string worst_param;
  long checked = 0;
};

inline double rel_err(double a, double b, double floor = 1e-6) {
  const double denom = std::max({std::abs(a), std::abs(b), floor});
  return std::abs(a - b) / denom;
}

inline FdReport fd_check_loss_grads(vtc::ModelState& s, const vtc::Batch& batch,
                                    double h = 1e-4) {
  vtc::LossResult res = vtc::contrastive_loss(s, batch);
  auto ps = vtc::param_refs(s);
  auto gs = vtc::param_refs(res.grads);
  FdReport rep;
  for (size_t i = 0; i < ps.size(); ++i) {
    for (Eigen::Index k = 0; k < ps[i].size; ++k) {
      const double saved = ps[i].data[k];
      ps[i].data[k] = saved + h;
      const double lp = vtc::contrastive_loss_value(s, batch);
      ps[i].data[k] = saved - h;
      const double lm = vtc::contrastive_loss_value(s, batch);
      ps[i].data[k] = saved;
      const double fd = (lp - lm) / (2.0 * h);
      const double r = rel_err(fd, gs[i].data[k]);
      ++rep.checked;
      if (r > rep.max_rel) {
        rep.max_rel = r;
        rep.worst_param = ps[i].name + "[" + std::to_string(k) + "]";
      }
    }
  }
  return rep;
}

// A "parameter point": seeded init plus a uniform perturbation of every
// tensor, so zero-initialized tensors (positions, biases) are exercised away
// from zero as well.
inline vtc::ModelState random_model_point(const vtc::ModelConfig& cfg, uint64_t seed) {
  vtc::ModelState s = vtc::ModelState::init(cfg, seed);
  vtc::Rng rng = vtc::make_rng(seed, 0xfd);
  std::uniform_real_distribution<double> dist(-0.25, 0.25);
  for (auto& p : vtc::param_refs(s)) {
    if (p.name == "temperature") continue;
    for (Eigen::Index k = 0; k < p.size; ++k) p.data[k] += dist(rng);
  }
  std::uniform_real_distribution<double> tdist(-0.2, 0.2);
  s.temperature.log_scale += tdist(rng);
  return s;
}

inline vtc::Batch random_batch(const vtc::ModelConfig& cfg, int b, int t, uint64_t seed) {
  vtc::Rng rng = vtc::make_rng(seed, 0xba);
  std::uniform_real_distribution<double> feat(-1.0, 1.0);
  std::uniform_int_distribution<int> tok(0, cfg.vocab_size - 1);
  std::uniform_int_distribution<int> len(3, std::min(8, cfg.max_tokens));
  vtc::Batch batch;
  batch.items.resize(static_cast<size_t>(b));
  for (auto& item : batch.items) {
    item.frames.resize(t, cfg.feature_dim);
    for (Eigen::Index k = 0; k < item.frames.size(); ++k) item.frames.data()[k] = feat(rng);
    const int n = len(rng);
    item.tokens.resize(static_cast<size_t>(n));
    for (auto& id : item.tokens) id = tok(rng);
  }
  return batch;
}

}  // namespace vtc_test
