#pragma once

#include <vector>

#include "vtc/util.hpp"

namespace vtc {

enum class ClipPolicy { kEval, kTrain };

// Temporal subsampling: keep every downsample-th frame first, then cut a
// clip_len window. Eval takes the centered window; train takes a seeded
// random window. Sequences shorter than clip_len are padded by repeating the
// final frame.
Mat sample_clip(const Mat& frames, int clip_len, int downsample, ClipPolicy policy,
                Rng* rng = nullptr);

// Complete coverage for evaluation: consecutive non-overlapping clip_len
// windows of the downsampled sequence, final window padded.
std::vector<Mat> clip_windows(const Mat& frames, int clip_len, int downsample);

}  // namespace vtc
