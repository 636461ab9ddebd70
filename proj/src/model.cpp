#include "vtc/model.hpp"

#include <cmath>

#include "vtc/errors.hpp"

namespace vtc {

namespace {

constexpr double kLnEps = 1e-5;

void fill_uniform(Rng& rng, double bound, double* data, Eigen::Index n) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < n; ++i) data[i] = dist(rng);
}

Mat uniform_mat(Rng& rng, Eigen::Index rows, Eigen::Index cols, double fan_in) {
  Mat m(rows, cols);
  fill_uniform(rng, 1.0 / std::sqrt(fan_in), m.data(), m.size());
  return m;
}

Vec uniform_vec(Rng& rng, Eigen::Index n, double fan_in) {
  Vec v(n);
  fill_uniform(rng, 1.0 / std::sqrt(fan_in), v.data(), v.size());
  return v;
}

Mat layer_norm(const Vec& g, const Vec& b, const Mat& x, LayerNormCache& c) {
  const Eigen::Index rows = x.rows(), cols = x.cols();
  c.xhat.resize(rows, cols);
  c.inv_std.resize(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().sum() / static_cast<double>(cols);
    const double inv_std = 1.0 / std::sqrt(var + kLnEps);
    c.inv_std[r] = inv_std;
    c.xhat.row(r) = (x.row(r).array() - mean) * inv_std;
  }
  c.out = c.xhat * g.asDiagonal();
  c.out.rowwise() += b.transpose();
  return c.out;
}

Mat layer_norm_backward(const Vec& g, const LayerNormCache& c, const Mat& d_out, Vec& d_g,
                        Vec& d_b) {
  d_g += d_out.cwiseProduct(c.xhat).colwise().sum().transpose();
  d_b += d_out.colwise().sum().transpose();
  const Eigen::Index rows = d_out.rows();
  Mat d_x(rows, d_out.cols());
  for (Eigen::Index r = 0; r < rows; ++r) {
    Eigen::RowVectorXd d_xhat = d_out.row(r).cwiseProduct(g.transpose());
    const double m1 = d_xhat.mean();
    const double m2 = d_xhat.cwiseProduct(c.xhat.row(r)).mean();
    d_x.row(r) = c.inv_std[r] * (d_xhat.array() - m1 - c.xhat.row(r).array() * m2);
  }
  return d_x;
}

Mat attention(const LayerParams& p, int heads, const Mat& y, AttnCache& c) {
  const Eigen::Index S = y.rows(), D = y.cols();
  const Eigen::Index dh = D / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  c.q = (y * p.wq).rowwise() + p.bq.transpose();
  c.k = (y * p.wk).rowwise() + p.bk.transpose();
  c.v = (y * p.wv).rowwise() + p.bv.transpose();
  c.attn.assign(static_cast<size_t>(heads), Mat());
  c.concat.resize(S, D);
  for (int h = 0; h < heads; ++h) {
    auto qh = c.q.middleCols(h * dh, dh);
    auto kh = c.k.middleCols(h * dh, dh);
    auto vh = c.v.middleCols(h * dh, dh);
    Mat scores = qh * kh.transpose() * scale;
    Mat a(S, S);
    for (Eigen::Index r = 0; r < S; ++r) {
      const double m = scores.row(r).maxCoeff();
      Eigen::RowVectorXd e = (scores.row(r).array() - m).exp();
      a.row(r) = e / e.sum();
    }
    c.attn[static_cast<size_t>(h)] = a;
    c.concat.middleCols(h * dh, dh) = a * vh;
  }
  return (c.concat * p.wo).rowwise() + p.bo.transpose();
}

Mat layer_forward(const LayerParams& p, int heads, const Mat& x, LayerCache& c) {
  c.input = x;
  Mat y = layer_norm(p.ln1_g, p.ln1_b, x, c.ln1);
  Mat att_out = attention(p, heads, y, c.att);
  c.res1 = x + att_out;
  Mat z2 = layer_norm(p.ln2_g, p.ln2_b, c.res1, c.ln2);
  Mat h = (z2 * p.ff_w1).rowwise() + p.ff_b1.transpose();
  c.ff_a = h.array().tanh();
  c.out = c.res1 + ((c.ff_a * p.ff_w2).rowwise() + p.ff_b2.transpose());
  return c.out;
}

Mat layer_backward(const LayerParams& p, LayerParams& g, int heads, const LayerCache& c,
                   const Mat& d_out) {
  const Eigen::Index S = d_out.rows(), D = d_out.cols();
  const Eigen::Index dh = D / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  // feed-forward branch
  g.ff_w2 += c.ff_a.transpose() * d_out;
  g.ff_b2 += d_out.colwise().sum().transpose();
  Mat d_ffa = d_out * p.ff_w2.transpose();
  Mat d_ffh = d_ffa.cwiseProduct((1.0 - c.ff_a.array().square()).matrix());
  g.ff_w1 += c.ln2.out.transpose() * d_ffh;
  g.ff_b1 += d_ffh.colwise().sum().transpose();
  Mat d_z2 = d_ffh * p.ff_w1.transpose();
  Mat d_res1 = d_out + layer_norm_backward(p.ln2_g, c.ln2, d_z2, g.ln2_g, g.ln2_b);

  // attention branch
  Mat d_x = d_res1;
  g.wo += c.att.concat.transpose() * d_res1;
  g.bo += d_res1.colwise().sum().transpose();
  Mat d_concat = d_res1 * p.wo.transpose();
  Mat d_q = Mat::Zero(S, D), d_k = Mat::Zero(S, D), d_v = Mat::Zero(S, D);
  for (int h = 0; h < heads; ++h) {
    const Mat& a = c.att.attn[static_cast<size_t>(h)];
    auto qh = c.att.q.middleCols(h * dh, dh);
    auto kh = c.att.k.middleCols(h * dh, dh);
    auto vh = c.att.v.middleCols(h * dh, dh);
    Mat d_oh = d_concat.middleCols(h * dh, dh);
    Mat d_a = d_oh * vh.transpose();
    d_v.middleCols(h * dh, dh) = a.transpose() * d_oh;
    Mat d_s(S, S);
    for (Eigen::Index r = 0; r < S; ++r) {
      const double dot = a.row(r).dot(d_a.row(r));
      d_s.row(r) = a.row(r).array() * (d_a.row(r).array() - dot);
    }
    d_q.middleCols(h * dh, dh) = d_s * kh * scale;
    d_k.middleCols(h * dh, dh) = d_s.transpose() * qh * scale;
  }
  const Mat& y = c.ln1.out;
  g.wq += y.transpose() * d_q;
  g.bq += d_q.colwise().sum().transpose();
  g.wk += y.transpose() * d_k;
  g.bk += d_k.colwise().sum().transpose();
  g.wv += y.transpose() * d_v;
  g.bv += d_v.colwise().sum().transpose();
  Mat d_y = d_q * p.wq.transpose() + d_k * p.wk.transpose() + d_v * p.wv.transpose();
  d_x += layer_norm_backward(p.ln1_g, c.ln1, d_y, g.ln1_g, g.ln1_b);
  return d_x;
}

}  // namespace

void ModelConfig::validate() const {
  if (feature_dim < 1) throw ConfigInvalid("feature_dim must be >= 1");
  if (embed_dim < 1) throw ConfigInvalid("embed_dim must be >= 1");
  if (heads < 1) throw ConfigInvalid("heads must be >= 1");
  if (embed_dim % heads != 0) throw ConfigInvalid("embed_dim must be divisible by heads");
  if (layers < 1) throw ConfigInvalid("layers must be >= 1");
  if (ff_mult < 1) throw ConfigInvalid("ff_mult must be >= 1");
  if (vocab_size < 1) throw ConfigInvalid("vocab_size must be >= 1");
  if (max_frames < 1) throw ConfigInvalid("max_frames must be >= 1");
  if (max_tokens < 1) throw ConfigInvalid("max_tokens must be >= 1");
  if (dropout != 0.0) throw ConfigInvalid("dropout is reserved; only 0 is supported");
}

ModelState ModelState::init(const ModelConfig& config, uint64_t seed) {
  config.validate();
  const int D = config.embed_dim;
  const int F = config.feature_dim;
  ModelState s;
  s.config = config;
  Rng rng = make_rng(seed, 0x6d6f64656cULL);
  s.frame_w1 = uniform_mat(rng, F, D, F);
  s.frame_b1 = Vec::Zero(D);
  s.frame_w2 = uniform_mat(rng, D, D, D);
  s.frame_b2 = Vec::Zero(D);
  s.token_embed = uniform_mat(rng, config.vocab_size, D, D);
  s.text_w1 = uniform_mat(rng, D, D, D);
  s.text_b1 = Vec::Zero(D);
  s.text_w2 = uniform_mat(rng, D, D, D);
  s.text_b2 = Vec::Zero(D);
  s.layers.resize(static_cast<size_t>(config.layers));
  for (auto& l : s.layers) {
    l.ln1_g = Vec::Ones(D);
    l.ln1_b = Vec::Zero(D);
    l.wq = uniform_mat(rng, D, D, D);
    l.bq = Vec::Zero(D);
    l.wk = uniform_mat(rng, D, D, D);
    l.bk = Vec::Zero(D);
    l.wv = uniform_mat(rng, D, D, D);
    l.bv = Vec::Zero(D);
    l.wo = uniform_mat(rng, D, D, D);
    l.bo = Vec::Zero(D);
    l.ln2_g = Vec::Ones(D);
    l.ln2_b = Vec::Zero(D);
    l.ff_w1 = uniform_mat(rng, D, config.ff_dim(), D);
    l.ff_b1 = Vec::Zero(config.ff_dim());
    l.ff_w2 = uniform_mat(rng, config.ff_dim(), D, config.ff_dim());
    l.ff_b2 = Vec::Zero(D);
  }
  s.cls_token = uniform_vec(rng, D, D);
  s.pos_embed = Mat::Zero(config.max_frames + 1, D);
  s.temperature = Temperature();
  return s;
}

ModelState ModelState::zeros_like(const ModelState& other) {
  ModelState g;
  g.config = other.config;
  g.frame_w1 = Mat::Zero(other.frame_w1.rows(), other.frame_w1.cols());
  g.frame_b1 = Vec::Zero(other.frame_b1.size());
  g.frame_w2 = Mat::Zero(other.frame_w2.rows(), other.frame_w2.cols());
  g.frame_b2 = Vec::Zero(other.frame_b2.size());
  g.token_embed = Mat::Zero(other.token_embed.rows(), other.token_embed.cols());
  g.text_w1 = Mat::Zero(other.text_w1.rows(), other.text_w1.cols());
  g.text_b1 = Vec::Zero(other.text_b1.size());
  g.text_w2 = Mat::Zero(other.text_w2.rows(), other.text_w2.cols());
  g.text_b2 = Vec::Zero(other.text_b2.size());
  g.layers.resize(other.layers.size());
  for (size_t i = 0; i < other.layers.size(); ++i) {
    const auto& o = other.layers[i];
    auto& l = g.layers[i];
    l.ln1_g = Vec::Zero(o.ln1_g.size());
    l.ln1_b = Vec::Zero(o.ln1_b.size());
    l.wq = Mat::Zero(o.wq.rows(), o.wq.cols());
    l.bq = Vec::Zero(o.bq.size());
    l.wk = Mat::Zero(o.wk.rows(), o.wk.cols());
    l.bk = Vec::Zero(o.bk.size());
    l.wv = Mat::Zero(o.wv.rows(), o.wv.cols());
    l.bv = Vec::Zero(o.bv.size());
    l.wo = Mat::Zero(o.wo.rows(), o.wo.cols());
    l.bo = Vec::Zero(o.bo.size());
    l.ln2_g = Vec::Zero(o.ln2_g.size());
    l.ln2_b = Vec::Zero(o.ln2_b.size());
    l.ff_w1 = Mat::Zero(o.ff_w1.rows(), o.ff_w1.cols());
    l.ff_b1 = Vec::Zero(o.ff_b1.size());
    l.ff_w2 = Mat::Zero(o.ff_w2.rows(), o.ff_w2.cols());
    l.ff_b2 = Vec::Zero(o.ff_b2.size());
  }
  g.cls_token = Vec::Zero(other.cls_token.size());
  g.pos_embed = Mat::Zero(other.pos_embed.rows(), other.pos_embed.cols());
  g.temperature.log_scale = 0.0;
  return g;
}

std::vector<ParamRef> param_refs(ModelState& s) {
  std::vector<ParamRef> refs;
  auto add = [&refs](const std::string& name, ParamGroup group, double* data, Eigen::Index size) {
    refs.push_back(ParamRef{name, group, data, size});
  };
  auto add_mat = [&add](const std::string& name, ParamGroup g, Mat& m) {
    add(name, g, m.data(), m.size());
  };
  auto add_vec = [&add](const std::string& name, ParamGroup g, Vec& v) {
    add(name, g, v.data(), v.size());
  };
  add_mat("frame_w1", ParamGroup::kBackbone, s.frame_w1);
  add_vec("frame_b1", ParamGroup::kBackbone, s.frame_b1);
  add_mat("frame_w2", ParamGroup::kBackbone, s.frame_w2);
  add_vec("frame_b2", ParamGroup::kBackbone, s.frame_b2);
  add_mat("token_embed", ParamGroup::kBackbone, s.token_embed);
  add_mat("text_w1", ParamGroup::kBackbone, s.text_w1);
  add_vec("text_b1", ParamGroup::kBackbone, s.text_b1);
  add_mat("text_w2", ParamGroup::kBackbone, s.text_w2);
  add_vec("text_b2", ParamGroup::kBackbone, s.text_b2);
  for (size_t i = 0; i < s.layers.size(); ++i) {
    auto& l = s.layers[i];
    const std::string p = "layer" + std::to_string(i) + ".";
    add_vec(p + "ln1_g", ParamGroup::kHead, l.ln1_g);
    add_vec(p + "ln1_b", ParamGroup::kHead, l.ln1_b);
    add_mat(p + "wq", ParamGroup::kHead, l.wq);
    add_vec(p + "bq", ParamGroup::kHead, l.bq);
    add_mat(p + "wk", ParamGroup::kHead, l.wk);
    add_vec(p + "bk", ParamGroup::kHead, l.bk);
    add_mat(p + "wv", ParamGroup::kHead, l.wv);
    add_vec(p + "bv", ParamGroup::kHead, l.bv);
    add_mat(p + "wo", ParamGroup::kHead, l.wo);
    add_vec(p + "bo", ParamGroup::kHead, l.bo);
    add_vec(p + "ln2_g", ParamGroup::kHead, l.ln2_g);
    add_vec(p + "ln2_b", ParamGroup::kHead, l.ln2_b);
    add_mat(p + "ff_w1", ParamGroup::kHead, l.ff_w1);
    add_vec(p + "ff_b1", ParamGroup::kHead, l.ff_b1);
    add_mat(p + "ff_w2", ParamGroup::kHead, l.ff_w2);
    add_vec(p + "ff_b2", ParamGroup::kHead, l.ff_b2);
  }
  add_vec("cls_token", ParamGroup::kHead, s.cls_token);
  add_mat("pos_embed", ParamGroup::kHead, s.pos_embed);
  add("temperature", ParamGroup::kHead, &s.temperature.log_scale, 1);
  return refs;
}

uint64_t state_hash(const ModelState& state) {
  // param_refs needs mutable access; the traversal itself only reads.
  auto refs = param_refs(const_cast<ModelState&>(state));
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& ref : refs) h = fnv1a64(ref.data, sizeof(double) * ref.size, h);
  return h;
}

Mat encode_frames(const ModelState& s, const Mat& frames, FrameCache* cache) {
  if (frames.rows() < 1) throw EmptyInput("encode_frames: no frames");
  if (frames.cols() != s.config.feature_dim)
    throw ShapeMismatch("encode_frames: expected " + std::to_string(s.config.feature_dim) +
                        " features, got " + std::to_string(frames.cols()));
  if (!all_finite(frames)) throw NonFiniteInput("encode_frames: non-finite frame features");
  Mat h1 = (frames * s.frame_w1).rowwise() + s.frame_b1.transpose();
  Mat a1 = h1.array().tanh();
  Mat out = (a1 * s.frame_w2).rowwise() + s.frame_b2.transpose();
  if (!all_finite(out)) throw NonFiniteActivation("encode_frames: non-finite output");
  if (cache) {
    cache->input = frames;
    cache->a1 = a1;
    cache->out = out;
  }
  return out;
}

void encode_frames_backward(const ModelState& s, const FrameCache& c, const Mat& d_out,
                            ModelState& grad, Mat* d_input) {
  grad.frame_w2 += c.a1.transpose() * d_out;
  grad.frame_b2 += d_out.colwise().sum().transpose();
  Mat d_a1 = d_out * s.frame_w2.transpose();
  Mat d_h1 = d_a1.cwiseProduct((1.0 - c.a1.array().square()).matrix());
  grad.frame_w1 += c.input.transpose() * d_h1;
  grad.frame_b1 += d_h1.colwise().sum().transpose();
  if (d_input) *d_input = d_h1 * s.frame_w1.transpose();
}

Vec temporal_encode(const ModelState& s, const Mat& frame_feats, TemporalCache* cache) {
  const auto& cfg = s.config;
  const Eigen::Index T = frame_feats.rows();
  if (T < 1) throw EmptyInput("temporal_encode: no frames");
  if (frame_feats.cols() != cfg.embed_dim)
    throw ShapeMismatch("temporal_encode: feature width " + std::to_string(frame_feats.cols()) +
                        " != embed_dim " + std::to_string(cfg.embed_dim));
  if (T > cfg.max_frames)
    throw ShapeMismatch("temporal_encode: " + std::to_string(T) + " frames exceed max_frames " +
                        std::to_string(cfg.max_frames));
  if (!all_finite(frame_feats)) throw NonFiniteInput("temporal_encode: non-finite input");

  TemporalCache local;
  TemporalCache& c = cache ? *cache : local;
  c.t = static_cast<int>(T);
  Mat x(T + 1, cfg.embed_dim);
  x.row(0) = s.cls_token.transpose() + s.pos_embed.row(0);
  x.bottomRows(T) = frame_feats + s.pos_embed.middleRows(1, T);
  c.layers.assign(static_cast<size_t>(cfg.layers), LayerCache());
  for (int l = 0; l < cfg.layers; ++l)
    x = layer_forward(s.layers[static_cast<size_t>(l)], cfg.heads, x,
                      c.layers[static_cast<size_t>(l)]);
  c.cls_raw = x.row(0).transpose();
  const double n = c.cls_raw.norm();
  if (!(n >= 1e-12)) throw ZeroVector("temporal_encode: class-token output has zero norm");
  c.norm = n;
  c.z = c.cls_raw / n;
  if (!all_finite(c.z)) throw NonFiniteActivation("temporal_encode: non-finite embedding");
  return c.z;
}

void temporal_encode_backward(const ModelState& s, const TemporalCache& c, const Vec& d_z,
                              ModelState& grad, Mat* d_frame_feats) {
  const auto& cfg = s.config;
  Vec d_u = (d_z - c.z * c.z.dot(d_z)) / c.norm;
  Mat d_x = Mat::Zero(c.t + 1, cfg.embed_dim);
  d_x.row(0) = d_u.transpose();
  for (int l = cfg.layers - 1; l >= 0; --l)
    d_x = layer_backward(s.layers[static_cast<size_t>(l)], grad.layers[static_cast<size_t>(l)],
                         cfg.heads, c.layers[static_cast<size_t>(l)], d_x);
  grad.cls_token += d_x.row(0).transpose();
  grad.pos_embed.row(0) += d_x.row(0);
  grad.pos_embed.middleRows(1, c.t) += d_x.bottomRows(c.t);
  if (d_frame_feats) *d_frame_feats = d_x.bottomRows(c.t);
}

Vec encode_text(const ModelState& s, const std::vector<int>& tokens, TextCache* cache) {
  if (tokens.empty()) throw EmptySequence("encode_text: empty token sequence");
  if (static_cast<int>(tokens.size()) > s.config.max_tokens)
    throw ShapeMismatch("encode_text: " + std::to_string(tokens.size()) +
                        " tokens exceed max_tokens " + std::to_string(s.config.max_tokens));
  const Eigen::Index D = s.config.embed_dim;
  Vec mean = Vec::Zero(D);
  for (int id : tokens) {
    if (id < 0 || id >= s.config.vocab_size)
      throw UnknownToken("encode_text: token id " + std::to_string(id) + " outside vocabulary of " +
                         std::to_string(s.config.vocab_size));
    mean += s.token_embed.row(id).transpose();
  }
  mean /= static_cast<double>(tokens.size());
  Vec h1 = s.text_w1.transpose() * mean + s.text_b1;
  Vec a1 = h1.array().tanh();
  Vec u = s.text_w2.transpose() * a1 + s.text_b2;
  const double n = u.norm();
  if (!(n >= 1e-12)) throw ZeroVector("encode_text: output has zero norm");
  Vec z = u / n;
  if (!all_finite(z)) throw NonFiniteActivation("encode_text: non-finite embedding");
  if (cache) {
    cache->tokens = tokens;
    cache->mean = mean;
    cache->a1 = a1;
    cache->u = u;
    cache->norm = n;
    cache->z = z;
  }
  return z;
}

void encode_text_backward(const ModelState& s, const TextCache& c, const Vec& d_z,
                          ModelState& grad) {
  Vec d_u = (d_z - c.z * c.z.dot(d_z)) / c.norm;
  grad.text_b2 += d_u;
  grad.text_w2 += c.a1 * d_u.transpose();
  Vec d_a1 = s.text_w2 * d_u;
  Vec d_h1 = d_a1.cwiseProduct((1.0 - c.a1.array().square()).matrix());
  grad.text_b1 += d_h1;
  grad.text_w1 += c.mean * d_h1.transpose();
  Vec d_mean = s.text_w1 * d_h1;
  const double inv = 1.0 / static_cast<double>(c.tokens.size());
  for (int id : c.tokens) grad.token_embed.row(id) += inv * d_mean.transpose();
}

Vec encode_video(const ModelState& s, const Mat& frames, VideoCache* cache) {
  VideoCache local;
  VideoCache& c = cache ? *cache : local;
  Mat feats = encode_frames(s, frames, &c.frames);
  return temporal_encode(s, feats, &c.temporal);
}

void encode_video_backward(const ModelState& s, const VideoCache& c, const Vec& d_z,
                           ModelState& grad, Mat* d_frames) {
  Mat d_feats;
  temporal_encode_backward(s, c.temporal, d_z, grad, &d_feats);
  encode_frames_backward(s, c.frames, d_feats, grad, d_frames);
}

}  // namespace vtc
