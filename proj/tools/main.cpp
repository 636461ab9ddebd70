#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "vtc/clip_sampling.hpp"
#include "vtc/data_io.hpp"
#include "vtc/errors.hpp"
#include "vtc/folds.hpp"
#include "vtc/metrics.hpp"
#include "vtc/model.hpp"
#include "vtc/pca.hpp"
#include "vtc/probe.hpp"
#include "vtc/registry.hpp"
#include "vtc/tokenizer.hpp"
#include "vtc/trainer.hpp"
#include "vtc/zeroshot.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;
using namespace vtc;

namespace {

std::string strf(const char* format, ...) {
  char buf[1024];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

// Collects every artifact of one run under its output directory. Log lines
// carry no timestamps so reruns with identical inputs write identical bytes.
struct RunDir {
  fs::path dir;
  std::string log_lines;

  explicit RunDir(const std::string& out) {
    std::string resolved = out;
    if (resolved.empty()) {
      const char* env = std::getenv("VTC_OUT_DIR");
      if (env != nullptr && *env != '\0') resolved = env;
    }
    if (resolved.empty())
      throw CLI::RequiredError("--out (or the VTC_OUT_DIR environment variable)");
    dir = resolved;
    fs::create_directories(dir);
  }

  void note(const std::string& line) {
    log_lines += line;
    log_lines += '\n';
    std::printf("%s\n", line.c_str());
  }

  void write(const std::string& name, const std::string& content) const {
    const fs::path p = dir / name;
    std::ofstream f(p, std::ios::binary);
    if (!f) throw IoError("cannot write " + p.string());
    f << content;
  }

  void finish(const ordered_json& resolved) const {
    write("resolved_config.json", resolved.dump(2) + "\n");
    write("run.log", log_lines);
  }
};

// Config precedence: defaults < config file < explicit flags. Each resolve()
// marks its key as recognized; unknown keys in the file are an error so a
// typo cannot silently fall back to a default.
struct FileConfig {
  json data = json::object();
  std::set<std::string> seen;
  std::string path;

  static FileConfig load(const std::string& config_path) {
    FileConfig c;
    c.path = config_path;
    if (config_path.empty()) return c;
    std::ifstream f(config_path);
    if (!f) throw AssetMissing("config file not found: " + config_path);
    try {
      c.data = json::parse(f);
    } catch (const json::exception& e) {
      throw ConfigInvalid("config file " + config_path + ": " + e.what());
    }
    if (!c.data.is_object())
      throw ConfigInvalid("config file " + config_path + " must hold a JSON object");
    return c;
  }

  static std::string key_for(const std::string& flag) {
    std::string key = flag.substr(2);
    std::replace(key.begin(), key.end(), '-', '_');
    return key;
  }

  template <typename T>
  void resolve(const CLI::App& cmd, const std::string& flag, T& value) {
    const std::string key = key_for(flag);
    seen.insert(key);
    if (cmd.count(flag) > 0) return;
    auto it = data.find(key);
    if (it == data.end()) return;
    try {
      value = it->get<T>();
    } catch (const json::exception& e) {
      throw ConfigInvalid("config key '" + key + "': " + e.what());
    }
  }

  void claim(const std::string& key) { seen.insert(key); }

  void reject_unknown() const {
    for (const auto& item : data.items())
      if (seen.count(item.key()) == 0)
        throw ConfigInvalid("config file " + path + ": unknown key '" + item.key() + "'");
  }
};

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) {
    out += l;
    out += '\n';
  }
  return out;
}

ordered_json to_json(const Vec& v) {
  ordered_json a = ordered_json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

ordered_json to_json(const Mat& m) {
  ordered_json rows = ordered_json::array();
  for (int r = 0; r < m.rows(); ++r) rows.push_back(to_json(Vec(m.row(r).transpose())));
  return rows;
}

// ---------------------------------------------------------------------------
// gen-synth
// ---------------------------------------------------------------------------

Envelope envelope_from_string(const std::string& s) {
  if (s == "flat") return Envelope::kFlat;
  if (s == "rising") return Envelope::kRising;
  if (s == "falling") return Envelope::kFalling;
  throw ConfigInvalid("unknown envelope '" + s + "' (expected flat | rising | falling)");
}

std::string to_string(Envelope e) {
  switch (e) {
    case Envelope::kFlat: return "flat";
    case Envelope::kRising: return "rising";
    case Envelope::kFalling: return "falling";
  }
  return "?";
}

struct GenSynthSettings {
  std::string config_path, out, kind = "synth", checkpoint;
  int feature_dim = 16;
  int samples_per_class = 100;
  int frames_per_sample = 16;
  bool temporal_patterns = true;
  double noise = 0.1;
  uint64_t seed = 0;
  // probe kind
  int patients = 20, videos_per_patient = 3, frames_per_video = 48, items = 3;
  double item_min = 1.0, item_max = 7.0;
  int clip_len = 0, downsample = 1;
};

Vec parse_vec(const json& arr, const std::string& what) {
  if (!arr.is_array() || arr.empty())
    throw ConfigInvalid(what + " must be a non-empty number array");
  Vec v(arr.size());
  for (size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw ConfigInvalid(what + " must hold numbers only");
    v[static_cast<int>(i)] = arr[i].get<double>();
  }
  return v;
}

void run_gen_synth(const CLI::App& cmd, GenSynthSettings& s) {
  FileConfig cfg = FileConfig::load(s.config_path);
  cfg.resolve(cmd, "--kind", s.kind);
  cfg.resolve(cmd, "--seed", s.seed);
  RunDir run(s.out);

  ordered_json echo;
  echo["command"] = "gen-synth";
  echo["kind"] = s.kind;

  if (s.kind == "probe") {
    cfg.resolve(cmd, "--checkpoint", s.checkpoint);
    cfg.resolve(cmd, "--patients", s.patients);
    cfg.resolve(cmd, "--videos-per-patient", s.videos_per_patient);
    cfg.resolve(cmd, "--frames-per-video", s.frames_per_video);
    const bool dim_explicit = cmd.count("--feature-dim") > 0 ||
                              cfg.data.contains(FileConfig::key_for("--feature-dim"));
    cfg.resolve(cmd, "--feature-dim", s.feature_dim);
    cfg.resolve(cmd, "--items", s.items);
    cfg.resolve(cmd, "--item-min", s.item_min);
    cfg.resolve(cmd, "--item-max", s.item_max);
    cfg.resolve(cmd, "--noise", s.noise);
    cfg.resolve(cmd, "--clip-len", s.clip_len);
    cfg.resolve(cmd, "--downsample", s.downsample);
    cfg.reject_unknown();
    if (s.checkpoint.empty())
      throw ConfigInvalid("gen-synth --kind probe needs --checkpoint for the frozen backbone");

    Checkpoint cp = load_checkpoint(s.checkpoint);
    if (!dim_explicit) s.feature_dim = cp.state.config.feature_dim;  // follow the backbone
    if (cp.state.config.feature_dim != s.feature_dim)
      throw ConfigInvalid(strf("checkpoint expects feature_dim %d, config asks for %d",
                               cp.state.config.feature_dim, s.feature_dim));
    ProbeCorpusConfig pc;
    pc.patients = s.patients;
    pc.videos_per_patient = s.videos_per_patient;
    pc.frames_per_video = s.frames_per_video;
    pc.feature_dim = s.feature_dim;
    pc.items = s.items;
    pc.noise = s.noise;
    pc.item_min = s.item_min;
    pc.item_max = s.item_max;
    pc.seed = s.seed;
    const int clip = s.clip_len > 0 ? s.clip_len : cp.state.config.max_frames;
    ProbeCorpus corpus = generate_probe_corpus(pc, cp.state, clip, s.downsample);
    write_corpus(corpus, run.dir.string());
    run.note(strf("wrote probe corpus: %zu videos, %d patients, %d items + total",
                  corpus.manifest.records.size(), pc.patients, pc.items));

    echo["checkpoint"] = s.checkpoint;
    echo["patients"] = pc.patients;
    echo["videos_per_patient"] = pc.videos_per_patient;
    echo["frames_per_video"] = pc.frames_per_video;
    echo["feature_dim"] = pc.feature_dim;
    echo["items"] = pc.items;
    echo["item_min"] = pc.item_min;
    echo["item_max"] = pc.item_max;
    echo["noise"] = pc.noise;
    echo["clip_len"] = clip;
    echo["downsample"] = s.downsample;
    echo["seed"] = s.seed;
    run.finish(echo);
    return;
  }
  if (s.kind != "synth")
    throw ConfigInvalid("unknown corpus kind '" + s.kind + "' (expected synth | probe)");

  cfg.resolve(cmd, "--feature-dim", s.feature_dim);
  cfg.resolve(cmd, "--samples-per-class", s.samples_per_class);
  cfg.resolve(cmd, "--frames-per-sample", s.frames_per_sample);
  cfg.resolve(cmd, "--temporal-patterns", s.temporal_patterns);
  cfg.resolve(cmd, "--noise", s.noise);
  cfg.claim("classes");
  cfg.claim("caption_templates");
  cfg.claim("rest");
  cfg.reject_unknown();

  if (!cfg.data.contains("classes"))
    throw ConfigInvalid("gen-synth needs a 'classes' array in the config file");

  SyntheticCorpusConfig sc;
  sc.samples_per_class = s.samples_per_class;
  sc.frames_per_sample = s.frames_per_sample;
  sc.temporal_patterns = s.temporal_patterns;
  sc.noise = s.noise;
  sc.seed = s.seed;
  sc.caption_templates = {"a face showing {attrs}"};
  if (cfg.data.contains("caption_templates"))
    sc.caption_templates = cfg.data["caption_templates"].get<std::vector<std::string>>();
  if (cfg.data.contains("rest")) sc.rest = parse_vec(cfg.data["rest"], "rest");

  // Basic classes without an explicit prototype get seeded random unit
  // directions, drawn in listed order from one stream.
  Rng proto_rng = make_rng(s.seed, 0x70726f74);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (const auto& entry : cfg.data["classes"]) {
    if (!entry.is_object() || !entry.contains("name"))
      throw ConfigInvalid("every class entry needs a 'name'");
    ClassSpec spec;
    spec.name = entry["name"].get<std::string>();
    if (entry.contains("attributes"))
      spec.attributes = entry["attributes"].get<std::vector<std::string>>();
    if (entry.contains("components"))
      spec.components = entry["components"].get<std::vector<std::string>>();
    spec.envelope = envelope_from_string(
        entry.contains("envelope") ? entry["envelope"].get<std::string>() : "flat");
    if (spec.components.empty()) {
      if (entry.contains("prototype")) {
        spec.prototype = parse_vec(entry["prototype"], "class '" + spec.name + "' prototype");
        if (spec.prototype.size() != s.feature_dim)
          throw ConfigInvalid(strf("class '%s': prototype has %d entries, feature_dim is %d",
                                   spec.name.c_str(), static_cast<int>(spec.prototype.size()),
                                   s.feature_dim));
      } else {
        Vec p(s.feature_dim);
        for (int i = 0; i < s.feature_dim; ++i) p[i] = gauss(proto_rng);
        spec.prototype = p.normalized();
      }
    } else if (entry.contains("prototype")) {
      throw ConfigInvalid("class '" + spec.name + "': compounds derive their prototype");
    }
    sc.classes.push_back(std::move(spec));
  }

  SyntheticCorpus corpus = generate_synthetic_corpus(sc);
  write_corpus(corpus, run.dir.string());
  run.note(strf("wrote synthetic corpus: %zu records, %zu classes",
                corpus.manifest.records.size(), sc.classes.size()));

  echo["feature_dim"] = s.feature_dim;
  echo["samples_per_class"] = sc.samples_per_class;
  echo["frames_per_sample"] = sc.frames_per_sample;
  echo["temporal_patterns"] = sc.temporal_patterns;
  echo["noise"] = sc.noise;
  echo["seed"] = sc.seed;
  echo["caption_templates"] = sc.caption_templates;
  if (sc.rest.size() > 0) echo["rest"] = to_json(sc.rest);
  ordered_json classes = ordered_json::array();
  for (const auto& c : sc.classes) {
    ordered_json e;
    e["name"] = c.name;
    if (!c.attributes.empty()) e["attributes"] = c.attributes;
    if (!c.components.empty()) e["components"] = c.components;
    e["envelope"] = to_string(c.envelope);
    if (c.prototype.size() > 0) e["prototype"] = to_json(c.prototype);
    classes.push_back(std::move(e));
  }
  echo["classes"] = std::move(classes);
  run.finish(echo);
}

// ---------------------------------------------------------------------------
// train (shared with eval-loco's per-fold retraining)
// ---------------------------------------------------------------------------

struct TrainSettings {
  std::string manifest, config_path, out;
  TrainConfig t;
  int embed_dim = 64, layers = 2, heads = 2, ff_mult = 4, max_tokens = 64;
};

void add_train_flags(CLI::App* cmd, TrainSettings& s) {
  cmd->add_option("--epochs", s.t.epochs, "training epochs")->capture_default_str();
  cmd->add_option("--batch-size", s.t.batch_size, "contrastive batch size")
      ->capture_default_str();
  cmd->add_option("--head-lr", s.t.head_lr,
                  "learning rate for the temporal module, class token, positions, temperature")
      ->capture_default_str();
  cmd->add_option("--backbone-lr", s.t.backbone_lr,
                  "learning rate for the frame and text encoders")
      ->capture_default_str();
  cmd->add_option("--seed", s.t.seed, "run seed")->capture_default_str();
  cmd->add_option("--clip-len", s.t.clip_len, "frames per training clip")->capture_default_str();
  cmd->add_option("--downsample", s.t.downsample, "keep every n-th frame")
      ->capture_default_str();
  cmd->add_option("--feature-jitter", s.t.feature_jitter,
                  "additive gaussian sigma on clip features (0 = off)")
      ->capture_default_str();
  cmd->add_option("--embed-dim", s.embed_dim, "joint embedding width")->capture_default_str();
  cmd->add_option("--layers", s.layers, "temporal transformer layers")->capture_default_str();
  cmd->add_option("--heads", s.heads, "attention heads")->capture_default_str();
  cmd->add_option("--ff-mult", s.ff_mult, "feed-forward width multiplier")
      ->capture_default_str();
  cmd->add_option("--max-tokens", s.max_tokens, "caption token budget")->capture_default_str();
}

void resolve_train_flags(const CLI::App& cmd, FileConfig& cfg, TrainSettings& s) {
  cfg.resolve(cmd, "--epochs", s.t.epochs);
  cfg.resolve(cmd, "--batch-size", s.t.batch_size);
  cfg.resolve(cmd, "--head-lr", s.t.head_lr);
  cfg.resolve(cmd, "--backbone-lr", s.t.backbone_lr);
  cfg.resolve(cmd, "--seed", s.t.seed);
  cfg.resolve(cmd, "--clip-len", s.t.clip_len);
  cfg.resolve(cmd, "--downsample", s.t.downsample);
  cfg.resolve(cmd, "--feature-jitter", s.t.feature_jitter);
  cfg.resolve(cmd, "--embed-dim", s.embed_dim);
  cfg.resolve(cmd, "--layers", s.layers);
  cfg.resolve(cmd, "--heads", s.heads);
  cfg.resolve(cmd, "--ff-mult", s.ff_mult);
  cfg.resolve(cmd, "--max-tokens", s.max_tokens);
}

void echo_train_fields(ordered_json& echo, const TrainSettings& s, const ModelConfig& mc) {
  echo["epochs"] = s.t.epochs;
  echo["batch_size"] = s.t.batch_size;
  echo["head_lr"] = s.t.head_lr;
  echo["backbone_lr"] = s.t.backbone_lr;
  echo["seed"] = s.t.seed;
  echo["clip_len"] = s.t.clip_len;
  echo["downsample"] = s.t.downsample;
  echo["feature_jitter"] = s.t.feature_jitter;
  echo["feature_dim"] = mc.feature_dim;
  echo["embed_dim"] = mc.embed_dim;
  echo["layers"] = mc.layers;
  echo["heads"] = mc.heads;
  echo["ff_mult"] = mc.ff_mult;
  echo["max_tokens"] = mc.max_tokens;
  echo["vocab_size"] = mc.vocab_size;
}

ModelConfig model_config_for(const TrainSettings& s, int feature_dim, int vocab_size) {
  ModelConfig mc;
  mc.feature_dim = feature_dim;
  mc.embed_dim = s.embed_dim;
  mc.max_frames = s.t.clip_len;
  mc.layers = s.layers;
  mc.heads = s.heads;
  mc.ff_mult = s.ff_mult;
  mc.vocab_size = vocab_size;
  mc.max_tokens = s.max_tokens;
  mc.validate();
  return mc;
}

std::vector<TrainSample> collect_samples(const Manifest& m, const std::vector<int>& indices,
                                         const Vocabulary& vocab, int max_tokens,
                                         int* skipped_out) {
  std::vector<TrainSample> samples;
  int skipped = 0;
  for (int i : indices) {
    const ManifestRecord& rec = m.records[i];
    if (rec.caption.empty()) {
      ++skipped;
      continue;
    }
    samples.push_back(
        {rec.id, read_frames(m.resolve(rec)), vocab.encode(rec.caption, max_tokens)});
  }
  if (skipped_out != nullptr) *skipped_out = skipped;
  return samples;
}

std::vector<int> all_indices(const Manifest& m) {
  std::vector<int> idx(m.records.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  return idx;
}

std::string epoch_loss_csv(const TrainHistory& h) {
  std::string csv = "epoch,mean_loss\n";
  for (size_t e = 0; e < h.epoch_mean_loss.size(); ++e)
    csv += strf("%zu,%.17g\n", e + 1, h.epoch_mean_loss[e]);
  return csv;
}

void run_train(const CLI::App& cmd, TrainSettings& s) {
  FileConfig cfg = FileConfig::load(s.config_path);
  resolve_train_flags(cmd, cfg, s);
  cfg.reject_unknown();
  RunDir run(s.out);

  Manifest m = load_manifest(s.manifest);
  run.note(strf("loaded manifest: %zu records, feature_dim %d", m.records.size(),
                m.feature_dim));

  std::vector<std::string> captions;
  for (const auto& rec : m.records)
    if (!rec.caption.empty()) captions.push_back(rec.caption);
  if (captions.empty()) throw InsufficientData("no records carry captions; nothing to train on");
  Vocabulary vocab = Vocabulary::build(captions);

  ModelConfig mc = model_config_for(s, m.feature_dim, vocab.size());
  ModelState state = ModelState::init(mc, s.t.seed);

  int skipped = 0;
  std::vector<TrainSample> samples =
      collect_samples(m, all_indices(m), vocab, mc.max_tokens, &skipped);
  if (skipped > 0) run.note(strf("skipped %d records without captions", skipped));
  if (static_cast<int>(samples.size()) < s.t.batch_size)
    throw InsufficientData(strf("%zu usable records cannot fill one batch of %d",
                                samples.size(), s.t.batch_size));

  TrainConfig tc = s.t;
  tc.loss_log_path = (run.dir / "loss_steps.csv").string();
  TrainHistory history = train(
      state, samples, tc, [&](const ModelState&, int epoch, const TrainHistory& h) {
        run.note(strf("epoch %d/%d mean loss %.6f", epoch + 1, tc.epochs,
                      h.epoch_mean_loss[epoch]));
      });

  Checkpoint cp;
  cp.state = std::move(state);
  cp.vocab_words = vocab.words();
  cp.epochs_done = tc.epochs;
  cp.step = history.steps;
  cp.seed = tc.seed;
  save_checkpoint(cp, (run.dir / "final.vtck").string());
  run.write("loss_epochs.csv", epoch_loss_csv(history));
  run.note(strf("saved checkpoint after %lld steps", static_cast<long long>(history.steps)));

  ordered_json echo;
  echo["command"] = "train";
  echo["manifest"] = s.manifest;
  echo_train_fields(echo, s, mc);
  run.finish(echo);
}

// ---------------------------------------------------------------------------
// eval-zeroshot / eval-compound
// ---------------------------------------------------------------------------

struct EvalSettings {
  std::string checkpoint, manifest, registry_path, config_path, out;
  std::string subset = "custom";
  std::string mode = "temporal";
  std::string prompt_mode = "class_description";
  std::string compounds;          // eval-compound only
  std::string method = "compose";  // eval-compound only
  int clip_len = 0, downsample = 1, threads = 1;
};

void add_eval_flags(CLI::App* cmd, EvalSettings& s, bool compound) {
  cmd->add_option("--checkpoint", s.checkpoint, "trained model checkpoint")->required();
  cmd->add_option("--manifest", s.manifest, "corpus manifest to evaluate")->required();
  cmd->add_option("--registry", s.registry_path, "class description asset")->required();
  cmd->add_option("--config", s.config_path, "JSON config file (flags override it)");
  cmd->add_option("--out", s.out, "output directory (default: $VTC_OUT_DIR)");
  cmd->add_option("--subset", s.subset, "class subset: eleven | seven | custom")
      ->capture_default_str();
  cmd->add_option("--mode", s.mode, "video mode: temporal | middle_frame | frame_ensemble")
      ->capture_default_str();
  cmd->add_option("--clip-len", s.clip_len, "frames per eval clip (0 = model maximum)")
      ->capture_default_str();
  cmd->add_option("--downsample", s.downsample, "keep every n-th frame")
      ->capture_default_str();
  cmd->add_option("--threads", s.threads, "worker threads")->capture_default_str();
  if (compound) {
    cmd->add_option("--compounds", s.compounds, "compound class spec file")->required();
    cmd->add_option("--method", s.method,
                    "compound embedding: compose (mean of components) | concat "
                    "(joined descriptions)")
        ->capture_default_str();
  } else {
    cmd->add_option("--prompt-mode", s.prompt_mode,
                    "class embeddings: class_description | prompt_ensemble")
        ->capture_default_str();
  }
}

void resolve_eval_flags(const CLI::App& cmd, FileConfig& cfg, EvalSettings& s, bool compound) {
  cfg.resolve(cmd, "--subset", s.subset);
  cfg.resolve(cmd, "--mode", s.mode);
  cfg.resolve(cmd, "--clip-len", s.clip_len);
  cfg.resolve(cmd, "--downsample", s.downsample);
  cfg.resolve(cmd, "--threads", s.threads);
  if (compound)
    cfg.resolve(cmd, "--method", s.method);
  else
    cfg.resolve(cmd, "--prompt-mode", s.prompt_mode);
}

void write_eval_outputs(RunDir& run, const ZeroShotResult& res,
                        const std::vector<std::string>& warnings) {
  run.write("report.csv", classification_csv(res.report));
  run.write("confusion.csv", confusion_csv(res.report, res.class_names));
  run.write("predictions.csv", predictions_csv(res));
  if (!warnings.empty()) run.write("warnings.txt", join_lines(warnings));
  run.note(classification_pretty(res.report, res.class_names));
}

void run_eval(const CLI::App& cmd, EvalSettings& s, bool compound) {
  FileConfig cfg = FileConfig::load(s.config_path);
  resolve_eval_flags(cmd, cfg, s, compound);
  cfg.reject_unknown();
  RunDir run(s.out);

  Checkpoint cp = load_checkpoint(s.checkpoint);
  Vocabulary vocab = Vocabulary::from_words(cp.vocab_words);
  Manifest m = load_manifest(s.manifest);
  DescriptionRegistry reg = load_registry(s.registry_path, subset_from_string(s.subset));
  reg = build_class_embedding_set(reg, cp.state, vocab);
  run.note(strf("registry: %d classes from %s", reg.size(), reg.provenance.c_str()));

  ZeroShotOptions opt;
  opt.mode = video_mode_from_string(s.mode);
  opt.clip_len = s.clip_len;
  opt.downsample = s.downsample;
  opt.threads = s.threads;

  ordered_json echo;
  if (compound) {
    auto specs = load_compound_specs(s.compounds);
    if (s.method == "compose")
      reg = extend_with_compounds(reg, specs);
    else if (s.method == "concat")
      reg = concat_prompt_baseline(reg, specs, cp.state, vocab);
    else
      throw ConfigInvalid("unknown --method '" + s.method + "' (expected compose | concat)");
    run.note(strf("extended to %d classes with %zu compounds (%s)", reg.size(), specs.size(),
                  s.method.c_str()));
    echo["command"] = "eval-compound";
  } else {
    opt.prompt_mode = prompt_mode_from_string(s.prompt_mode);
    echo["command"] = "eval-zeroshot";
  }

  ZeroShotResult res = zero_shot_eval(cp.state, vocab, reg, m, opt);
  write_eval_outputs(run, res, reg.warnings);

  echo["checkpoint"] = s.checkpoint;
  echo["manifest"] = s.manifest;
  echo["registry"] = s.registry_path;
  echo["subset"] = s.subset;
  echo["mode"] = s.mode;
  if (compound) {
    echo["compounds"] = s.compounds;
    echo["method"] = s.method;
  } else {
    echo["prompt_mode"] = s.prompt_mode;
  }
  echo["clip_len"] = s.clip_len;
  echo["downsample"] = s.downsample;
  echo["threads"] = s.threads;
  run.finish(echo);
}

// ---------------------------------------------------------------------------
// eval-loco: retrain per fold with the held-out class absent from training,
// then classify that fold's samples against the full class set.
// ---------------------------------------------------------------------------

struct EvalLocoSettings {
  TrainSettings train;  // manifest/config/out live here
  std::string registry_path;
  std::string subset = "custom";
  std::string mode = "temporal";
  int eval_clip_len = 0, eval_downsample = 1, threads = 1;
};

void run_eval_loco(const CLI::App& cmd, EvalLocoSettings& s) {
  FileConfig cfg = FileConfig::load(s.train.config_path);
  resolve_train_flags(cmd, cfg, s.train);
  cfg.resolve(cmd, "--subset", s.subset);
  cfg.resolve(cmd, "--mode", s.mode);
  cfg.resolve(cmd, "--eval-clip-len", s.eval_clip_len);
  cfg.resolve(cmd, "--eval-downsample", s.eval_downsample);
  cfg.resolve(cmd, "--threads", s.threads);
  cfg.reject_unknown();
  RunDir run(s.train.out);

  Manifest m = load_manifest(s.train.manifest);
  FoldSpec folds = make_folds(m, FoldScheme::kLeaveOneClassOut);
  DescriptionRegistry reg = load_registry(s.registry_path, subset_from_string(s.subset));
  run.note(strf("loaded manifest: %zu records, %d class folds", m.records.size(),
                folds.fold_count()));

  // The tokenizer vocabulary is a preprocessing artifact shared across folds
  // (captions plus class descriptions); holding out a class removes its
  // samples from training, not its words from the tokenizer.
  std::vector<std::string> texts;
  for (const auto& rec : m.records)
    if (!rec.caption.empty()) texts.push_back(rec.caption);
  if (texts.empty()) throw InsufficientData("no records carry captions; nothing to train on");
  for (const auto& c : reg.classes)
    if (!c.description.empty()) texts.push_back(c.description);
  Vocabulary vocab = Vocabulary::build(texts);
  ModelConfig mc = model_config_for(s.train, m.feature_dim, vocab.size());

  ZeroShotOptions opt;
  opt.mode = video_mode_from_string(s.mode);
  opt.clip_len = s.eval_clip_len;
  opt.downsample = s.eval_downsample;
  opt.threads = s.threads;

  std::vector<std::string> ids, warnings;
  std::vector<int> y_true, y_pred;
  std::vector<Vec> prob_rows;
  std::vector<std::string> class_names;
  std::string folds_csv = "fold,held_out_class,eval_samples,uar_percent,war_percent\n";

  for (int f = 0; f < folds.fold_count(); ++f) {
    const std::vector<int> train_idx = folds.train_indices(f);
    const std::vector<int> eval_idx = folds.eval_indices(f);
    int skipped = 0;
    std::vector<TrainSample> samples =
        collect_samples(m, train_idx, vocab, mc.max_tokens, &skipped);
    if (static_cast<int>(samples.size()) < s.train.t.batch_size)
      throw InsufficientData(
          strf("fold %d ('%s'): %zu usable records cannot fill one batch of %d", f,
               folds.held_out_keys[f].c_str(), samples.size(), s.train.t.batch_size));

    TrainConfig tc = s.train.t;
    tc.seed = s.train.t.seed + static_cast<uint64_t>(f);  // independent fold runs
    ModelState state = ModelState::init(mc, tc.seed);
    TrainHistory history = train(state, samples, tc);

    DescriptionRegistry built = build_class_embedding_set(reg, state, vocab);
    for (const auto& w : built.warnings) warnings.push_back(strf("fold %d: %s", f, w.c_str()));
    Manifest sub;
    sub.feature_dim = m.feature_dim;
    sub.root = m.root;
    for (int i : eval_idx) sub.records.push_back(m.records[i]);
    ZeroShotResult res = zero_shot_eval(state, vocab, built, sub, opt);

    class_names = res.class_names;
    ids.insert(ids.end(), res.ids.begin(), res.ids.end());
    y_true.insert(y_true.end(), res.y_true.begin(), res.y_true.end());
    y_pred.insert(y_pred.end(), res.y_pred.begin(), res.y_pred.end());
    for (int r = 0; r < res.probs.rows(); ++r) prob_rows.push_back(res.probs.row(r).transpose());
    folds_csv += strf("%d,%s,%zu,%s,%s\n", f, folds.held_out_keys[f].c_str(), eval_idx.size(),
                      format_percent(res.report.uar).c_str(),
                      format_percent(res.report.war).c_str());
    run.note(strf("fold %d held out '%s': trained %d epochs (final loss %.6f), UAR %s", f,
                  folds.held_out_keys[f].c_str(), tc.epochs,
                  history.epoch_mean_loss.empty() ? 0.0 : history.epoch_mean_loss.back(),
                  format_percent(res.report.uar).c_str()));
  }

  Mat probs(static_cast<int>(prob_rows.size()), static_cast<int>(class_names.size()));
  for (size_t r = 0; r < prob_rows.size(); ++r) probs.row(static_cast<int>(r)) = prob_rows[r];
  ZeroShotResult pooled;
  pooled.report = classification_metrics(y_true, probs);
  pooled.class_names = class_names;
  pooled.ids = std::move(ids);
  pooled.y_true = std::move(y_true);
  pooled.y_pred = std::move(y_pred);
  pooled.probs = std::move(probs);

  write_eval_outputs(run, pooled, warnings);
  run.write("folds.csv", folds_csv);

  ordered_json echo;
  echo["command"] = "eval-loco";
  echo["manifest"] = s.train.manifest;
  echo["registry"] = s.registry_path;
  echo["subset"] = s.subset;
  echo_train_fields(echo, s.train, mc);
  echo["mode"] = s.mode;
  echo["eval_clip_len"] = s.eval_clip_len;
  echo["eval_downsample"] = s.eval_downsample;
  echo["threads"] = s.threads;
  run.finish(echo);
}

// ---------------------------------------------------------------------------
// probe-train / probe-eval
// ---------------------------------------------------------------------------

struct ProbeSettings {
  std::string checkpoint, manifest, config_path, out;
  ProbeConfig p;
  int items = 0;  // 0 = infer from the manifest's symptom width
  double item_min = 1.0, item_max = 7.0;
};

void add_probe_flags(CLI::App* cmd, ProbeSettings& s, bool eval) {
  cmd->add_option("--checkpoint", s.checkpoint, "frozen backbone checkpoint")->required();
  cmd->add_option("--manifest", s.manifest, "corpus manifest with symptom targets")->required();
  cmd->add_option("--config", s.config_path, "JSON config file (flags override it)");
  cmd->add_option("--out", s.out, "output directory (default: $VTC_OUT_DIR)");
  cmd->add_option("--hidden", s.p.hidden, "probe hidden width (0 = embedding width)")
      ->capture_default_str();
  cmd->add_option("--lr", s.p.lr, "probe learning rate")->capture_default_str();
  cmd->add_option("--epochs", s.p.epochs, "probe training epochs")->capture_default_str();
  cmd->add_option("--clip-len", s.p.clip_len, "frames per clip (0 = model maximum)")
      ->capture_default_str();
  cmd->add_option("--downsample", s.p.downsample, "keep every n-th frame")
      ->capture_default_str();
  cmd->add_flag("--random-crop,!--no-random-crop", s.p.random_crop,
                "random temporal crop per training step")
      ->capture_default_str();
  cmd->add_option("--seed", s.p.seed, "run seed")->capture_default_str();
  cmd->add_option("--items", s.items,
                  "symptom item count before the total column (0 = infer from the manifest)")
      ->capture_default_str();
  cmd->add_option("--item-min", s.item_min, "minimum item score")->capture_default_str();
  cmd->add_option("--item-max", s.item_max, "maximum item score")->capture_default_str();
  if (eval)
    cmd->add_option("--threads", s.p.threads, "parallel fold workers")->capture_default_str();
}

LabelScaler resolve_probe(const CLI::App& cmd, FileConfig& cfg, ProbeSettings& s,
                          const Manifest& m, bool eval) {
  cfg.resolve(cmd, "--hidden", s.p.hidden);
  cfg.resolve(cmd, "--lr", s.p.lr);
  cfg.resolve(cmd, "--epochs", s.p.epochs);
  cfg.resolve(cmd, "--clip-len", s.p.clip_len);
  cfg.resolve(cmd, "--downsample", s.p.downsample);
  cfg.resolve(cmd, "--random-crop", s.p.random_crop);
  cfg.resolve(cmd, "--seed", s.p.seed);
  cfg.resolve(cmd, "--items", s.items);
  cfg.resolve(cmd, "--item-min", s.item_min);
  cfg.resolve(cmd, "--item-max", s.item_max);
  if (eval) cfg.resolve(cmd, "--threads", s.p.threads);
  cfg.reject_unknown();

  if (s.items == 0) {
    if (m.records.empty()) throw EmptyInput("manifest holds no records");
    s.items = static_cast<int>(m.records.front().symptoms.size()) - 1;
    if (s.items < 1)
      throw ConfigInvalid(strf("record '%s' carries %zu symptom values; need items + total",
                               m.records.front().id.c_str(),
                               m.records.front().symptoms.size()));
  }
  LabelScaler scaler = probe_corpus_scaler(s.items, s.item_min, s.item_max);
  s.p.outputs = scaler.outputs();
  return scaler;
}

void echo_probe_fields(ordered_json& echo, const ProbeSettings& s) {
  echo["checkpoint"] = s.checkpoint;
  echo["manifest"] = s.manifest;
  echo["hidden"] = s.p.hidden;
  echo["lr"] = s.p.lr;
  echo["epochs"] = s.p.epochs;
  echo["clip_len"] = s.p.clip_len;
  echo["downsample"] = s.p.downsample;
  echo["random_crop"] = s.p.random_crop;
  echo["seed"] = s.p.seed;
  echo["items"] = s.items;
  echo["item_min"] = s.item_min;
  echo["item_max"] = s.item_max;
}

std::string probe_predictions_csv(const Manifest& m, const LabelScaler& scaler,
                                  const Mat& truths, const Mat& preds,
                                  const std::vector<int>* fold_of) {
  std::string csv = "id,patient";
  if (fold_of != nullptr) csv += ",fold";
  for (const auto& name : scaler.names()) csv += "," + name + "_true," + name + "_pred";
  csv += '\n';
  for (size_t r = 0; r < m.records.size(); ++r) {
    csv += m.records[r].id + "," + m.records[r].patient;
    if (fold_of != nullptr) csv += strf(",%d", (*fold_of)[r]);
    for (int t = 0; t < truths.cols(); ++t)
      csv += strf(",%.6f,%.6f", truths(static_cast<int>(r), t), preds(static_cast<int>(r), t));
    csv += '\n';
  }
  return csv;
}

ordered_json probe_params_json(const ProbeParams& params) {
  ordered_json j;
  j["w1"] = to_json(params.w1);
  j["b1"] = to_json(params.b1);
  j["w2"] = to_json(params.w2);
  j["b2"] = to_json(params.b2);
  return j;
}

void run_probe_train(const CLI::App& cmd, ProbeSettings& s) {
  FileConfig cfg = FileConfig::load(s.config_path);
  Checkpoint cp = load_checkpoint(s.checkpoint);
  Manifest m = load_manifest(s.manifest);
  LabelScaler scaler = resolve_probe(cmd, cfg, s, m, false);
  RunDir run(s.out);
  run.note(strf("loaded manifest: %zu records, %d targets", m.records.size(),
                scaler.outputs()));

  ProbeTrainResult res = train_probe(cp.state, m, scaler, s.p);
  std::string loss = "epoch,mse\n";
  for (size_t e = 0; e < res.loss_history.size(); ++e)
    loss += strf("%zu,%.17g\n", e + 1, res.loss_history[e]);
  run.write("loss.csv", loss);
  run.write("probe.json", probe_params_json(res.params).dump(2) + "\n");
  run.note(strf("trained %d epochs, final mse %.6f", s.p.epochs,
                res.loss_history.empty() ? 0.0 : res.loss_history.back()));

  const int clip = s.p.clip_len > 0 ? s.p.clip_len : cp.state.config.max_frames;
  Mat truths = symptom_matrix(m, scaler.outputs());
  Mat preds(truths.rows(), truths.cols());
  for (size_t r = 0; r < m.records.size(); ++r)
    preds.row(static_cast<int>(r)) =
        predict_video(cp.state, res.params, read_frames(m.resolve(m.records[r])), scaler, clip,
                      s.p.downsample)
            .transpose();
  run.write("predictions.csv", probe_predictions_csv(m, scaler, truths, preds, nullptr));

  ordered_json echo;
  echo["command"] = "probe-train";
  echo_probe_fields(echo, s);
  run.finish(echo);
}

void run_probe_eval(const CLI::App& cmd, ProbeSettings& s) {
  FileConfig cfg = FileConfig::load(s.config_path);
  Checkpoint cp = load_checkpoint(s.checkpoint);
  Manifest m = load_manifest(s.manifest);
  LabelScaler scaler = resolve_probe(cmd, cfg, s, m, true);
  RunDir run(s.out);
  run.note(strf("loaded manifest: %zu records, %d targets", m.records.size(),
                scaler.outputs()));

  LopoResult res = evaluate_lopo(cp.state, m, scaler, s.p);
  run.note(strf("evaluated %d patient folds", res.folds.fold_count()));
  run.write("report.csv", regression_csv(res.report));
  run.write("predictions.csv",
            probe_predictions_csv(m, scaler, res.truths, res.predictions,
                                  &res.folds.assignments));
  run.note(regression_pretty(res.report));

  ordered_json echo;
  echo["command"] = "probe-eval";
  echo_probe_fields(echo, s);
  echo["threads"] = s.p.threads;
  run.finish(echo);
}

// ---------------------------------------------------------------------------
// export-embeddings
// ---------------------------------------------------------------------------

struct ExportSettings {
  std::string checkpoint, manifest, config_path, out;
  int clip_len = 0, downsample = 1, dims = 2;
  uint64_t seed = 0;
};

void run_export(const CLI::App& cmd, ExportSettings& s) {
  FileConfig cfg = FileConfig::load(s.config_path);
  cfg.resolve(cmd, "--clip-len", s.clip_len);
  cfg.resolve(cmd, "--downsample", s.downsample);
  cfg.resolve(cmd, "--dims", s.dims);
  cfg.resolve(cmd, "--seed", s.seed);
  cfg.reject_unknown();
  RunDir run(s.out);

  Checkpoint cp = load_checkpoint(s.checkpoint);
  Manifest m = load_manifest(s.manifest);
  if (m.records.empty()) throw EmptyInput("manifest holds no records");
  const int clip = s.clip_len > 0 ? s.clip_len : cp.state.config.max_frames;

  std::vector<Vec> embeddings;
  std::vector<std::string> ids, classes;
  for (const auto& rec : m.records) {
    const Mat frames = read_frames(m.resolve(rec));
    embeddings.push_back(
        encode_video(cp.state, sample_clip(frames, clip, s.downsample, ClipPolicy::kEval)));
    ids.push_back(rec.id);
    classes.push_back(rec.label);
  }
  run.note(strf("encoded %zu videos (embed_dim %d)", embeddings.size(),
                cp.state.config.embed_dim));

  std::string raw = "id,class";
  for (int d = 0; d < cp.state.config.embed_dim; ++d) raw += strf(",e%d", d);
  raw += '\n';
  for (size_t r = 0; r < embeddings.size(); ++r) {
    raw += ids[r] + "," + classes[r];
    for (int d = 0; d < embeddings[r].size(); ++d) raw += strf(",%.17g", embeddings[r][d]);
    raw += '\n';
  }
  run.write("embeddings.csv", raw);

  PcaResult pca = pca_project(embeddings, s.dims, s.seed);
  run.write("projection.csv", pca_csv(pca, ids, classes));
  std::string variance = "component,eigenvalue,explained_ratio\n";
  for (int k = 0; k < pca.dims_found(); ++k)
    variance += strf("%d,%.17g,%.17g\n", k, pca.eigenvalues[k], pca.explained_ratio[k]);
  run.write("variance.csv", variance);
  if (!pca.warnings.empty()) run.write("warnings.txt", join_lines(pca.warnings));
  run.note(strf("projected to %d of %d requested components", pca.dims_found(), s.dims));

  ordered_json echo;
  echo["command"] = "export-embeddings";
  echo["checkpoint"] = s.checkpoint;
  echo["manifest"] = s.manifest;
  echo["clip_len"] = s.clip_len;
  echo["downsample"] = s.downsample;
  echo["dims"] = s.dims;
  echo["seed"] = s.seed;
  run.finish(echo);
}

// ---------------------------------------------------------------------------
// registration
// ---------------------------------------------------------------------------

void register_commands(CLI::App& app) {
  {
    auto s = std::make_shared<GenSynthSettings>();
    CLI::App* cmd = app.add_subcommand(
        "gen-synth", "generate a corpus: synthetic classes or planted probe targets");
    cmd->add_option("--config", s->config_path,
                    "JSON corpus description (synth kind needs its 'classes' array)");
    cmd->add_option("--out", s->out, "output directory (default: $VTC_OUT_DIR)");
    cmd->add_option("--kind", s->kind, "corpus kind: synth | probe")->capture_default_str();
    cmd->add_option("--checkpoint", s->checkpoint, "frozen backbone (probe kind)");
    cmd->add_option("--seed", s->seed, "corpus seed")->capture_default_str();
    cmd->add_option("--feature-dim", s->feature_dim,
                    "per-frame feature width (probe kind defaults to the checkpoint's)")
        ->capture_default_str();
    cmd->add_option("--samples-per-class", s->samples_per_class, "videos per class (synth)")
        ->capture_default_str();
    cmd->add_option("--frames-per-sample", s->frames_per_sample, "frames per video (synth)")
        ->capture_default_str();
    cmd->add_flag("--temporal-patterns,!--no-temporal-patterns", s->temporal_patterns,
                  "class-specific temporal envelopes (synth)")
        ->capture_default_str();
    cmd->add_option("--noise", s->noise, "frame noise sigma")->capture_default_str();
    cmd->add_option("--patients", s->patients, "patient count (probe)")->capture_default_str();
    cmd->add_option("--videos-per-patient", s->videos_per_patient, "videos per patient (probe)")
        ->capture_default_str();
    cmd->add_option("--frames-per-video", s->frames_per_video, "frames per video (probe)")
        ->capture_default_str();
    cmd->add_option("--items", s->items, "symptom items before the total column (probe)")
        ->capture_default_str();
    cmd->add_option("--item-min", s->item_min, "minimum item score (probe)")
        ->capture_default_str();
    cmd->add_option("--item-max", s->item_max, "maximum item score (probe)")
        ->capture_default_str();
    cmd->add_option("--clip-len", s->clip_len,
                    "planted eval clip length (probe, 0 = model maximum)")
        ->capture_default_str();
    cmd->add_option("--downsample", s->downsample, "planted eval downsample (probe)")
        ->capture_default_str();
    cmd->callback([s, cmd] { run_gen_synth(*cmd, *s); });
  }
  {
    auto s = std::make_shared<TrainSettings>();
    CLI::App* cmd =
        app.add_subcommand("train", "contrastive video-text training on a corpus manifest");
    cmd->add_option("--manifest", s->manifest, "corpus manifest path")->required();
    cmd->add_option("--config", s->config_path, "JSON config file (flags override it)");
    cmd->add_option("--out", s->out, "output directory (default: $VTC_OUT_DIR)");
    add_train_flags(cmd, *s);
    cmd->callback([s, cmd] { run_train(*cmd, *s); });
  }
  {
    auto s = std::make_shared<EvalSettings>();
    CLI::App* cmd = app.add_subcommand(
        "eval-zeroshot", "zero-shot classification against class description embeddings");
    add_eval_flags(cmd, *s, false);
    cmd->callback([s, cmd] { run_eval(*cmd, *s, false); });
  }
  {
    auto s = std::make_shared<EvalSettings>();
    CLI::App* cmd = app.add_subcommand(
        "eval-compound", "zero-shot evaluation over composed compound classes");
    add_eval_flags(cmd, *s, true);
    cmd->callback([s, cmd] { run_eval(*cmd, *s, true); });
  }
  {
    auto s = std::make_shared<EvalLocoSettings>();
    CLI::App* cmd = app.add_subcommand(
        "eval-loco", "leave-one-class-out: retrain per fold, classify the held-out class");
    cmd->add_option("--manifest", s->train.manifest, "corpus manifest path")->required();
    cmd->add_option("--registry", s->registry_path, "class description asset")->required();
    cmd->add_option("--config", s->train.config_path, "JSON config file (flags override it)");
    cmd->add_option("--out", s->train.out, "output directory (default: $VTC_OUT_DIR)");
    cmd->add_option("--subset", s->subset, "class subset: eleven | seven | custom")
        ->capture_default_str();
    add_train_flags(cmd, s->train);
    cmd->add_option("--mode", s->mode, "video mode: temporal | middle_frame | frame_ensemble")
        ->capture_default_str();
    cmd->add_option("--eval-clip-len", s->eval_clip_len,
                    "frames per eval clip (0 = model maximum)")
        ->capture_default_str();
    cmd->add_option("--eval-downsample", s->eval_downsample, "eval keep every n-th frame")
        ->capture_default_str();
    cmd->add_option("--threads", s->threads, "worker threads for evaluation")
        ->capture_default_str();
    cmd->callback([s, cmd] { run_eval_loco(*cmd, *s); });
  }
  {
    auto s = std::make_shared<ProbeSettings>();
    CLI::App* cmd = app.add_subcommand(
        "probe-train", "train the frozen-backbone symptom probe on a full corpus");
    add_probe_flags(cmd, *s, false);
    cmd->callback([s, cmd] { run_probe_train(*cmd, *s); });
  }
  {
    auto s = std::make_shared<ProbeSettings>();
    CLI::App* cmd = app.add_subcommand(
        "probe-eval", "leave-one-patient-out probe evaluation with MAE/RMSE/PCC");
    add_probe_flags(cmd, *s, true);
    cmd->callback([s, cmd] { run_probe_eval(*cmd, *s); });
  }
  {
    auto s = std::make_shared<ExportSettings>();
    CLI::App* cmd = app.add_subcommand(
        "export-embeddings", "export video embeddings and their principal-axis projection");
    cmd->add_option("--checkpoint", s->checkpoint, "trained model checkpoint")->required();
    cmd->add_option("--manifest", s->manifest, "corpus manifest path")->required();
    cmd->add_option("--config", s->config_path, "JSON config file (flags override it)");
    cmd->add_option("--out", s->out, "output directory (default: $VTC_OUT_DIR)");
    cmd->add_option("--clip-len", s->clip_len, "frames per eval clip (0 = model maximum)")
        ->capture_default_str();
    cmd->add_option("--downsample", s->downsample, "keep every n-th frame")
        ->capture_default_str();
    cmd->add_option("--dims", s->dims, "projection components")->capture_default_str();
    cmd->add_option("--seed", s->seed, "projection seed")->capture_default_str();
    cmd->callback([s, cmd] { run_export(*cmd, *s); });
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"video-text contrastive embedding toolkit"};
  app.require_subcommand(1);
  register_commands(app);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // help exits clean; usage problems exit 2
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
