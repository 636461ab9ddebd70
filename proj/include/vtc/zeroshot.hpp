#pragma once

#include <string>
#include <vector>

#include "vtc/data_io.hpp"
#include "vtc/metrics.hpp"
#include "vtc/model.hpp"
#include "vtc/registry.hpp"
#include "vtc/tokenizer.hpp"

namespace vtc {

// How a video collapses to the single embedding that gets classified.
//   temporal: full frame projection + transformer pool.
//   middle_frame: the clip's middle frame alone, frame-projected, normalized.
//   frame_ensemble: every frame projected and normalized, then pooled.
// The last two bypass the temporal module entirely.
enum class VideoMode { kTemporal, kMiddleFrame, kFrameEnsemble };
VideoMode video_mode_from_string(const std::string& s);  // UnknownScheme
std::string to_string(VideoMode mode);

// Where the per-class text embeddings come from: the registry's built
// description embeddings, or a pooled set of name-filled prompt templates.
enum class PromptMode { kClassDescription, kPromptEnsemble };
PromptMode prompt_mode_from_string(const std::string& s);  // UnknownScheme
std::string to_string(PromptMode mode);

struct ZeroShotOptions {
  VideoMode mode = VideoMode::kTemporal;
  PromptMode prompt_mode = PromptMode::kClassDescription;
  int clip_len = 0;  // frames fed per video; 0 = the model's max_frames
  int downsample = 1;
  int threads = 1;
};

struct ZeroShotResult {
  ClassificationReport report;
  std::vector<std::string> class_names;
  std::vector<std::string> ids;  // record order
  std::vector<int> y_true;
  std::vector<int> y_pred;
  Mat probs;  // records x classes
};

// Templates the prompt-ensemble baseline fills with each class name.
const std::vector<std::string>& prompt_ensemble_templates();

// One pooled embedding per registry class, built from name-filled templates.
std::vector<Vec> prompt_ensemble_embeddings(const DescriptionRegistry& registry,
                                            const ModelState& state, const Vocabulary& vocab);

// Classifies every manifest record against the registry classes. Labels must
// name registry classes; frame sources are read through the manifest.
ZeroShotResult zero_shot_eval(const ModelState& state, const Vocabulary& vocab,
                              const DescriptionRegistry& registry, const Manifest& manifest,
                              const ZeroShotOptions& options = {});

// id,true_class,predicted_class,p_predicted rows.
std::string predictions_csv(const ZeroShotResult& result);

}  // namespace vtc
