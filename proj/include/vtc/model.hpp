#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vtc/embedding.hpp"
#include "vtc/util.hpp"

namespace vtc {

struct ModelConfig {
  int feature_dim = 0;  // per-frame feature width F
  int embed_dim = 0;    // joint embedding width D
  int max_frames = 32;  // longest clip the temporal module accepts
  int layers = 2;
  int heads = 2;
  int ff_mult = 4;  // feed-forward width = ff_mult * embed_dim
  int vocab_size = 0;
  int max_tokens = 64;
  double dropout = 0.0;  // reserved; only 0 is supported

  int ff_dim() const { return ff_mult * embed_dim; }
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct LayerParams {
  Vec ln1_g, ln1_b;
  Mat wq, wk, wv, wo;  // D x D, applied as X * W
  Vec bq, bk, bv, bo;
  Vec ln2_g, ln2_b;
  Mat ff_w1;  // D x ff
  Vec ff_b1;
  Mat ff_w2;  // ff x D
  Vec ff_b2;
};

// All trainable tensors. The same struct doubles as the gradient container
// (see zeros_like), so parameter traversal code works on either.
struct ModelState {
  ModelConfig config;

  // frame path: per-frame affine F->D, tanh, affine D->D
  Mat frame_w1;
  Vec frame_b1;
  Mat frame_w2;
  Vec frame_b2;

  // text path: embedding lookup, mean pool, affine D->D, tanh, affine D->D
  Mat token_embed;  // V x D
  Mat text_w1;
  Vec text_b1;
  Mat text_w2;
  Vec text_b2;

  // temporal module: learnable class token, learnable positions, transformer
  std::vector<LayerParams> layers;
  Vec cls_token;
  Mat pos_embed;  // (max_frames + 1) x D, row 0 belongs to the class token
  Temperature temperature;

  // Weights uniform in +-1/sqrt(fan_in), biases zero, layer-norm gains one,
  // positions zero so an untrained temporal module is order-invariant.
  static ModelState init(const ModelConfig& config, uint64_t seed);
  static ModelState zeros_like(const ModelState& other);
};

enum class ParamGroup { kBackbone, kHead };

struct ParamRef {
  std::string name;
  ParamGroup group;
  double* data;
  Eigen::Index size;
};

// Stable-order traversal of every trainable tensor; state and its gradient
// produce pairwise-matching lists.
std::vector<ParamRef> param_refs(ModelState& state);

// Checksum over every trainable tensor's bytes; detects any parameter drift.
uint64_t state_hash(const ModelState& state);

// ---- forward caches -------------------------------------------------------

struct FrameCache {
  Mat input;  // T x F
  Mat a1;     // T x D, tanh output
  Mat out;    // T x D
};

struct LayerNormCache {
  Mat xhat;  // standardized input
  Vec inv_std;
  Mat out;
};

struct AttnCache {
  Mat q, k, v;            // S x D
  std::vector<Mat> attn;  // per head, S x S row-softmax
  Mat concat;             // S x D
};

struct LayerCache {
  Mat input;
  LayerNormCache ln1;
  AttnCache att;
  Mat res1;
  LayerNormCache ln2;
  Mat ff_a;  // S x ff, tanh output
  Mat out;
};

struct TemporalCache {
  int t = 0;  // frame count
  std::vector<LayerCache> layers;
  Vec cls_raw;  // pre-normalization class-token row
  double norm = 0.0;
  Vec z;
};

struct TextCache {
  std::vector<int> tokens;
  Vec mean;
  Vec a1;
  Vec u;  // pre-normalization output
  double norm = 0.0;
  Vec z;
};

struct VideoCache {
  FrameCache frames;
  TemporalCache temporal;
};

// ---- forward / backward ---------------------------------------------------

// Per-frame projection of a T x F matrix to T x D. Rows are independent.
Mat encode_frames(const ModelState& s, const Mat& frames, FrameCache* cache = nullptr);
void encode_frames_backward(const ModelState& s, const FrameCache& c, const Mat& d_out,
                            ModelState& grad, Mat* d_input = nullptr);

// Class-token transformer pool of projected frames; returns the unit-norm
// class-token row.
Vec temporal_encode(const ModelState& s, const Mat& frame_feats, TemporalCache* cache = nullptr);
void temporal_encode_backward(const ModelState& s, const TemporalCache& c, const Vec& d_z,
                              ModelState& grad, Mat* d_frame_feats = nullptr);

// Unit-norm text embedding of a token id sequence.
Vec encode_text(const ModelState& s, const std::vector<int>& tokens, TextCache* cache = nullptr);
void encode_text_backward(const ModelState& s, const TextCache& c, const Vec& d_z,
                          ModelState& grad);

// temporal_encode(encode_frames(frames)).
Vec encode_video(const ModelState& s, const Mat& frames, VideoCache* cache = nullptr);
void encode_video_backward(const ModelState& s, const VideoCache& c, const Vec& d_z,
                           ModelState& grad, Mat* d_frames = nullptr);

}  // namespace vtc
