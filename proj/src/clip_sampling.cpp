#include "vtc/clip_sampling.hpp"

#include "vtc/errors.hpp"

namespace vtc {

namespace {

Mat downsampled(const Mat& frames, int downsample) {
  const Eigen::Index t_raw = frames.rows();
  const Eigen::Index kept = (t_raw + downsample - 1) / downsample;
  Mat out(kept, frames.cols());
  for (Eigen::Index i = 0; i < kept; ++i) out.row(i) = frames.row(i * downsample);
  return out;
}

Mat padded_window(const Mat& seq, Eigen::Index start, int clip_len) {
  Mat out(clip_len, seq.cols());
  const Eigen::Index last = seq.rows() - 1;
  for (Eigen::Index i = 0; i < clip_len; ++i)
    out.row(i) = seq.row(std::min(start + i, last));
  return out;
}

}  // namespace

Mat sample_clip(const Mat& frames, int clip_len, int downsample, ClipPolicy policy, Rng* rng) {
  if (frames.rows() == 0) throw EmptyVideo("sample_clip: video has no frames");
  if (clip_len < 1) throw ConfigInvalid("sample_clip: clip_len must be >= 1");
  if (downsample < 1) throw ConfigInvalid("sample_clip: downsample must be >= 1");
  Mat seq = downsampled(frames, downsample);
  const Eigen::Index len = seq.rows();
  Eigen::Index start = 0;
  if (len > clip_len) {
    if (policy == ClipPolicy::kEval) {
      start = (len - clip_len) / 2;
    } else {
      if (!rng) throw ConfigInvalid("sample_clip: train policy needs an rng");
      std::uniform_int_distribution<Eigen::Index> dist(0, len - clip_len);
      start = dist(*rng);
    }
  }
  return padded_window(seq, start, clip_len);
}

std::vector<Mat> clip_windows(const Mat& frames, int clip_len, int downsample) {
  if (frames.rows() == 0) throw EmptyVideo("clip_windows: video has no frames");
  if (clip_len < 1) throw ConfigInvalid("clip_windows: clip_len must be >= 1");
  if (downsample < 1) throw ConfigInvalid("clip_windows: downsample must be >= 1");
  Mat seq = downsampled(frames, downsample);
  const Eigen::Index count = (seq.rows() + clip_len - 1) / clip_len;
  std::vector<Mat> out;
  out.reserve(static_cast<size_t>(count));
  for (Eigen::Index w = 0; w < count; ++w) out.push_back(padded_window(seq, w * clip_len, clip_len));
  return out;
}

}  // namespace vtc
