#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vtc/model.hpp"
#include "vtc/util.hpp"

namespace vtc {

// ---------------------------------------------------------------------------
// Manifest: the on-disk index of a corpus. Frame features live in separate
// binary files referenced by relative path; labels are class names so a
// manifest is meaningful against any registry that defines those classes.
// ---------------------------------------------------------------------------

struct ManifestRecord {
  std::string id;
  std::string source;  // frame-feature file, relative to the manifest's directory
  std::string caption;            // empty if absent
  std::string label;              // class name, empty if absent
  int fold = -1;                  // -1 if absent
  std::string patient;            // empty if absent
  std::vector<double> symptoms;   // empty if absent
};

struct Manifest {
  int schema_version = 1;
  int feature_dim = 0;
  std::string root;  // directory sources resolve against; not serialized
  std::vector<ManifestRecord> records;

  std::string resolve(const ManifestRecord& rec) const;
};

// Parses and fully validates: unique ids, every source resolves, every
// source header matches feature_dim. No partially-loaded manifest escapes.
Manifest load_manifest(const std::string& path);
void save_manifest(const Manifest& m, const std::string& path);

// ---------------------------------------------------------------------------
// Frame-feature files: "VTCF" | u32 version | u32 t_raw | u32 f | u32 dtype |
// row-major float64 LE payload | u64 fnv1a checksum of the payload bytes.
// ---------------------------------------------------------------------------

struct FrameHeader {
  int t_raw = 0;
  int feature_dim = 0;
};

void write_frames(const std::string& path, const Mat& frames);
FrameHeader read_frames_header(const std::string& path);
Mat read_frames(const std::string& path);

// ---------------------------------------------------------------------------
// Checkpoints: "VTCK" | u32 version | u64 header_len | JSON header (config,
// vocab, progress, seed) | raw float64 tensors in param_refs order | u64
// checksum. Round trips are bit-exact.
// ---------------------------------------------------------------------------

struct Checkpoint {
  ModelState state;
  std::vector<std::string> vocab_words;
  int epochs_done = 0;
  long long step = 0;
  uint64_t seed = 0;
};

void save_checkpoint(const Checkpoint& cp, const std::string& path);
// expected, when given, must match the stored config exactly (SchemaMismatch).
Checkpoint load_checkpoint(const std::string& path, const ModelConfig* expected = nullptr);

// ---------------------------------------------------------------------------
// Synthetic corpus generator. Each sample's frames follow a per-class latent
// prototype modulated by a temporal envelope over a shared rest direction:
//   frames(t) = w(t)·prototype + (1 - w(t))·rest + noise
// Rising/falling envelopes vanish at the middle frame, so classes sharing a
// prototype are separable only by frame order. Captions are built from the
// class's attribute tokens (never its name); the ground-truth key maps each
// class to its attributes so eval-side descriptions need attributes only.
// ---------------------------------------------------------------------------

enum class Envelope { kFlat, kRising, kFalling };

struct ClassSpec {
  std::string name;
  Vec prototype;                        // ignored for compounds
  std::vector<std::string> attributes;  // may be empty for compounds
  Envelope envelope = Envelope::kFlat;
  std::vector<std::string> components;  // nonempty -> compound over these basics
};

struct SyntheticCorpusConfig {
  std::vector<ClassSpec> classes;
  int samples_per_class = 100;
  int frames_per_sample = 16;
  bool temporal_patterns = true;  // false -> every envelope treated as flat
  double noise = 0.1;
  Vec rest;  // empty -> zero vector
  std::vector<std::string> caption_templates;  // each contains "{attrs}"
  uint64_t seed = 0;

  void validate() const;  // ConfigInvalid
};

struct SyntheticCorpus {
  Manifest manifest;        // captions + name labels; sources filled by write_corpus
  std::vector<Mat> frames;  // parallel to manifest.records
  // ground-truth key, index-aligned across the three vectors
  std::vector<std::string> class_names;
  std::vector<std::vector<std::string>> class_attributes;
  std::vector<std::vector<std::string>> class_components;  // empty for basics
};

SyntheticCorpus generate_synthetic_corpus(const SyntheticCorpusConfig& config);

// Builds a class-level description from attributes alone (shared by the
// generator's registry asset and by tests constructing eval-side prompts).
std::string attribute_description(const std::vector<std::string>& attributes);

// Writes frames/<id>.vtcf, manifest.json, key.json, and classes.txt (a
// registry asset with attribute-built descriptions) under out_dir.
void write_corpus(const SyntheticCorpus& corpus, const std::string& out_dir);

// ---------------------------------------------------------------------------
// Planted probe corpus: stationary per-video signals whose regression targets
// are an affine function of the frozen video embedding, so a probe that reads
// that embedding can recover them. Targets 1..K-1 lie in item_range; the last
// target is their raw sum (a "total" exercising label scaling).
// ---------------------------------------------------------------------------

struct ProbeCorpusConfig {
  int patients = 20;
  int videos_per_patient = 3;
  int frames_per_video = 48;
  int feature_dim = 32;
  int items = 3;  // item targets; one extra total column is appended
  double noise = 0.05;
  double item_min = 1.0;
  double item_max = 7.0;
  uint64_t seed = 0;

  void validate() const;  // ConfigInvalid
};

struct ProbeCorpus {
  Manifest manifest;        // patient ids + symptom vectors (items..., total)
  std::vector<Mat> frames;  // parallel to manifest.records
  Mat response;             // items x D: the planted affine map
  Vec offset;               // items
};

// clip_len/downsample define the eval clip whose frozen embedding the targets
// are planted on (the first non-overlapping window, matching clip_windows).
ProbeCorpus generate_probe_corpus(const ProbeCorpusConfig& config, const ModelState& frozen,
                                  int clip_len, int downsample);

// Writes frames/<id>.vtcf, manifest.json, and response.json (the planted
// affine map, for debugging) under out_dir.
void write_corpus(const ProbeCorpus& corpus, const std::string& out_dir);

}  // namespace vtc
