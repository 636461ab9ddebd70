#include <doctest.h>

#include "vtc/clip_sampling.hpp"
#include "vtc/errors.hpp"

using namespace vtc;

namespace {

// frame t has constant value t, so clip contents identify source rows
Mat indexed_frames(int t_raw, int f = 3) {
  Mat m(t_raw, f);
  for (int r = 0; r < t_raw; ++r) m.row(r).setConstant(static_cast<double>(r));
  return m;
}

}  // namespace

TEST_CASE("eval clip keeps every downsample-th frame") {
  Mat clip = sample_clip(indexed_frames(128), 32, 4, ClipPolicy::kEval);
  REQUIRE(clip.rows() == 32);
  for (int i = 0; i < 32; ++i) CHECK(clip(i, 0) == doctest::Approx(4.0 * i));
}

TEST_CASE("short videos pad by repeating the final frame") {
  Mat clip = sample_clip(indexed_frames(8), 32, 4, ClipPolicy::kEval);
  REQUIRE(clip.rows() == 32);
  CHECK(clip(0, 0) == 0.0);
  CHECK(clip(1, 0) == 4.0);
  for (int i = 2; i < 32; ++i) CHECK(clip(i, 0) == 4.0);
}

TEST_CASE("eval clip is the centered window") {
  Mat clip = sample_clip(indexed_frames(40), 10, 1, ClipPolicy::kEval);
  REQUIRE(clip.rows() == 10);
  for (int i = 0; i < 10; ++i) CHECK(clip(i, 0) == doctest::Approx(15.0 + i));
}

TEST_CASE("train clip is a seeded random contiguous window") {
  Rng a = make_rng(5, 1), b = make_rng(5, 1), c = make_rng(6, 1);
  Mat f = indexed_frames(100);
  Mat ca = sample_clip(f, 10, 1, ClipPolicy::kTrain, &a);
  Mat cb = sample_clip(f, 10, 1, ClipPolicy::kTrain, &b);
  CHECK((ca - cb).cwiseAbs().maxCoeff() == 0.0);
  // window is contiguous and in range
  const double start = ca(0, 0);
  CHECK(start >= 0.0);
  CHECK(start <= 90.0);
  for (int i = 1; i < 10; ++i) CHECK(ca(i, 0) == doctest::Approx(start + i));
  // different seeds explore different windows
  bool any_diff = false;
  for (int trial = 0; trial < 10; ++trial) {
    Mat cc = sample_clip(f, 10, 1, ClipPolicy::kTrain, &c);
    any_diff = any_diff || cc(0, 0) != start;
  }
  CHECK(any_diff);
  CHECK_THROWS_AS(sample_clip(f, 10, 1, ClipPolicy::kTrain, nullptr), ConfigInvalid);
}

TEST_CASE("clip windows cover the sequence without overlap") {
  auto windows = clip_windows(indexed_frames(33), 16, 1);
  REQUIRE(windows.size() == 3);
  CHECK(windows[0](0, 0) == 0.0);
  CHECK(windows[0](15, 0) == 15.0);
  CHECK(windows[1](0, 0) == 16.0);
  CHECK(windows[2](0, 0) == 32.0);
  for (int i = 1; i < 16; ++i) CHECK(windows[2](i, 0) == 32.0);  // padded
}

TEST_CASE("empty videos are rejected") {
  CHECK_THROWS_AS(sample_clip(Mat(0, 3), 8, 1, ClipPolicy::kEval), EmptyVideo);
  CHECK_THROWS_AS(clip_windows(Mat(0, 3), 8, 1), EmptyVideo);
  CHECK_THROWS_AS(sample_clip(indexed_frames(4), 0, 1, ClipPolicy::kEval), ConfigInvalid);
  CHECK_THROWS_AS(sample_clip(indexed_frames(4), 8, 0, ClipPolicy::kEval), ConfigInvalid);
}
