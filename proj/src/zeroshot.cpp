#include "vtc/zeroshot.hpp"

#include <algorithm>
#include <exception>
#include <sstream>

#include "vtc/clip_sampling.hpp"
#include "vtc/embedding.hpp"
#include "vtc/errors.hpp"

namespace vtc {
namespace {

Vec video_embedding(const ModelState& state, const Mat& clip, VideoMode mode) {
  switch (mode) {
    case VideoMode::kTemporal:
      return encode_video(state, clip);
    case VideoMode::kMiddleFrame: {
      const Mat row = clip.row(clip.rows() / 2);
      return normalized(encode_frames(state, row).row(0).transpose());
    }
    case VideoMode::kFrameEnsemble: {
      const Mat feats = encode_frames(state, clip);
      std::vector<Vec> rows;
      rows.reserve(feats.rows());
      for (int t = 0; t < feats.rows(); ++t)
        rows.push_back(normalized(feats.row(t).transpose()));
      return aggregate_embeddings(rows, AggregateMode::kFrameEnsemble);
    }
  }
  throw ConfigInvalid("video_embedding: unhandled mode");
}

std::string fill_name(const std::string& tmpl, const std::string& name) {
  std::string out = tmpl;
  size_t pos = out.find("{}");
  require(pos != std::string::npos, "prompt template lacks a {} placeholder: " + tmpl);
  out.replace(pos, 2, name);
  return out;
}

}  // namespace

VideoMode video_mode_from_string(const std::string& s) {
  if (s == "temporal") return VideoMode::kTemporal;
  if (s == "middle_frame") return VideoMode::kMiddleFrame;
  if (s == "frame_ensemble") return VideoMode::kFrameEnsemble;
  throw UnknownScheme("unknown video mode '" + s +
                      "' (expected temporal, middle_frame, or frame_ensemble)");
}

std::string to_string(VideoMode mode) {
  switch (mode) {
    case VideoMode::kTemporal: return "temporal";
    case VideoMode::kMiddleFrame: return "middle_frame";
    case VideoMode::kFrameEnsemble: return "frame_ensemble";
  }
  return "?";
}

PromptMode prompt_mode_from_string(const std::string& s) {
  if (s == "class_description") return PromptMode::kClassDescription;
  if (s == "prompt_ensemble") return PromptMode::kPromptEnsemble;
  throw UnknownScheme("unknown prompt mode '" + s +
                      "' (expected class_description or prompt_ensemble)");
}

std::string to_string(PromptMode mode) {
  return mode == PromptMode::kClassDescription ? "class_description" : "prompt_ensemble";
}

const std::vector<std::string>& prompt_ensemble_templates() {
  static const std::vector<std::string> kTemplates = {
      "an expression of {}",
      "a photo of a {} face",
      "a person feeling {}",
      "a facial expression of {}",
      "a video of a {} expression",
  };
  return kTemplates;
}

std::vector<Vec> prompt_ensemble_embeddings(const DescriptionRegistry& registry,
                                            const ModelState& state, const Vocabulary& vocab) {
  std::vector<Vec> out;
  out.reserve(registry.classes.size());
  for (const auto& cd : registry.classes) {
    std::vector<Vec> variants;
    bool any_known = false;
    for (const auto& tmpl : prompt_ensemble_templates()) {
      std::vector<int> tokens = vocab.encode(fill_name(tmpl, cd.name), state.config.max_tokens);
      any_known |= std::any_of(tokens.begin(), tokens.end(),
                               [](int t) { return t != Vocabulary::kUnkId; });
      variants.push_back(encode_text(state, tokens));
    }
    if (!any_known)
      throw UnknownToken("class '" + cd.name + "': no prompt contains an in-vocabulary word");
    out.push_back(aggregate_embeddings(variants, AggregateMode::kPromptEnsemble));
  }
  return out;
}

ZeroShotResult zero_shot_eval(const ModelState& state, const Vocabulary& vocab,
                              const DescriptionRegistry& registry, const Manifest& manifest,
                              const ZeroShotOptions& options) {
  if (registry.size() == 0) throw EmptyClassSet("zero_shot_eval: empty registry");
  const int b = static_cast<int>(manifest.records.size());
  if (b == 0) throw EmptyInput("zero_shot_eval: empty manifest");
  const int clip_len = options.clip_len > 0 ? options.clip_len : state.config.max_frames;
  if (options.downsample < 1)
    throw ConfigInvalid("zero_shot_eval: downsample must be >= 1");
  if (clip_len > state.config.max_frames)
    throw ConfigInvalid("zero_shot_eval: clip_len " + std::to_string(clip_len) +
                        " exceeds the model's max_frames " +
                        std::to_string(state.config.max_frames));
  if (manifest.feature_dim != state.config.feature_dim)
    throw SchemaMismatch("zero_shot_eval: manifest feature_dim " +
                         std::to_string(manifest.feature_dim) + " vs model " +
                         std::to_string(state.config.feature_dim));

  std::vector<Vec> class_embeddings;
  if (options.prompt_mode == PromptMode::kPromptEnsemble) {
    class_embeddings = prompt_ensemble_embeddings(registry, state, vocab);
  } else {
    if (!registry.has_embeddings())
      throw ConfigInvalid("zero_shot_eval: registry embeddings not built");
    class_embeddings = registry.embeddings;
  }

  ZeroShotResult res;
  for (const auto& cd : registry.classes) res.class_names.push_back(cd.name);
  res.ids.reserve(b);
  res.y_true.reserve(b);
  for (const auto& rec : manifest.records) {
    if (rec.label.empty())
      throw MissingMetadata("record '" + rec.id + "' carries no class label");
    const int idx = registry.index_of(rec.label);
    if (idx < 0)
      throw ClassNotInRegistry("record '" + rec.id + "': label '" + rec.label +
                               "' is not a registry class");
    res.ids.push_back(rec.id);
    res.y_true.push_back(idx);
  }

  res.probs = Mat::Zero(b, registry.size());
  std::vector<std::exception_ptr> failures(b);
  parallel_for(b, options.threads, [&](int i) {
    try {
      const Mat raw = read_frames(manifest.resolve(manifest.records[i]));
      const Mat clip = sample_clip(raw, clip_len, options.downsample, ClipPolicy::kEval);
      const Vec z = video_embedding(state, clip, options.mode);
      res.probs.row(i) = classify(z, class_embeddings, state.temperature).transpose();
    } catch (...) {
      failures[i] = std::current_exception();
    }
  });
  for (int i = 0; i < b; ++i)
    if (failures[i]) std::rethrow_exception(failures[i]);

  res.y_pred.resize(b);
  for (int i = 0; i < b; ++i) res.y_pred[i] = argmax_row(res.probs, i);
  res.report = classification_metrics(res.y_true, res.probs);
  return res;
}

std::string predictions_csv(const ZeroShotResult& result) {
  std::ostringstream out;
  out << "id,true_class,predicted_class,p_predicted_percent\n";
  for (size_t i = 0; i < result.ids.size(); ++i) {
    out << result.ids[i] << "," << result.class_names[result.y_true[i]] << ","
        << result.class_names[result.y_pred[i]] << ","
        << format_percent(result.probs(static_cast<int>(i), result.y_pred[i])) << "\n";
  }
  return out.str();
}

}  // namespace vtc
