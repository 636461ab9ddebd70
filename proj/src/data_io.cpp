#include "vtc/data_io.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "vtc/clip_sampling.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace vtc {

namespace {

constexpr char kFramesMagic[4] = {'V', 'T', 'C', 'F'};
constexpr char kCheckpointMagic[4] = {'V', 'T', 'C', 'K'};
constexpr uint32_t kFormatVersion = 1;
constexpr uint32_t kDtypeFloat64 = 1;

void write_bytes(std::ofstream& out, const void* data, size_t n) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out) throw IoError("write failed");
}

void write_u32(std::ofstream& out, uint32_t v) { write_bytes(out, &v, sizeof v); }
void write_u64(std::ofstream& out, uint64_t v) { write_bytes(out, &v, sizeof v); }

// Truncation mid-structure is corruption, not schema drift.
void read_bytes(std::ifstream& in, void* data, size_t n, const char* what) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (in.gcount() != static_cast<std::streamsize>(n))
    throw CorruptPayload(std::string("truncated while reading ") + what);
}

uint32_t read_u32(std::ifstream& in, const char* what) {
  uint32_t v = 0;
  read_bytes(in, &v, sizeof v, what);
  return v;
}

uint64_t read_u64(std::ifstream& in, const char* what) {
  uint64_t v = 0;
  read_bytes(in, &v, sizeof v, what);
  return v;
}

std::ifstream open_read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return in;
}

std::ofstream open_write(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  return out;
}

void check_magic(std::ifstream& in, const char (&magic)[4], const std::string& path) {
  char got[4] = {};
  read_bytes(in, got, 4, "magic");
  if (std::memcmp(got, magic, 4) != 0) throw SchemaMismatch(path + ": unrecognized file magic");
}

std::string record_ctx(size_t idx, const std::string& id) {
  std::ostringstream os;
  os << "record " << idx;
  if (!id.empty()) os << " (" << id << ")";
  return os.str();
}

// ---- manifest json helpers ------------------------------------------------

const nlohmann::json& field(const nlohmann::json& obj, const char* key, size_t idx,
                            const std::string& id) {
  auto it = obj.find(key);
  if (it == obj.end())
    throw ParseError(record_ctx(idx, id) + ": missing field '" + key + "'");
  return *it;
}

std::string string_field(const nlohmann::json& obj, const char* key, size_t idx,
                         const std::string& id, bool required) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (required) throw ParseError(record_ctx(idx, id) + ": missing field '" + key + "'");
    return "";
  }
  if (!it->is_string())
    throw ParseError(record_ctx(idx, id) + ": field '" + key + "' must be a string");
  return it->get<std::string>();
}

}  // namespace

// ---- manifest -------------------------------------------------------------

std::string Manifest::resolve(const ManifestRecord& rec) const {
  fs::path src(rec.source);
  if (root.empty() || src.is_absolute()) return rec.source;
  return (fs::path(root) / src).string();
}

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (!doc.is_object()) throw ParseError(path + ": top level must be an object");
  if (!doc.contains("schema_version") || !doc["schema_version"].is_number_integer())
    throw ParseError(path + ": missing integer schema_version");
  Manifest m;
  m.schema_version = doc["schema_version"].get<int>();
  if (m.schema_version != 1)
    throw SchemaMismatch(path + ": unsupported schema_version " +
                         std::to_string(m.schema_version));
  if (!doc.contains("feature_dim") || !doc["feature_dim"].is_number_integer())
    throw ParseError(path + ": missing integer feature_dim");
  m.feature_dim = doc["feature_dim"].get<int>();
  if (m.feature_dim <= 0) throw ParseError(path + ": feature_dim must be positive");
  if (!doc.contains("records") || !doc["records"].is_array())
    throw ParseError(path + ": missing records array");

  m.root = fs::path(path).parent_path().string();

  std::set<std::string> seen;
  const auto& records = doc["records"];
  m.records.reserve(records.size());
  for (size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (!r.is_object()) throw ParseError(record_ctx(i, "") + ": must be an object");
    ManifestRecord rec;
    rec.id = string_field(r, "id", i, "", true);
    if (rec.id.empty()) throw ParseError(record_ctx(i, "") + ": empty id");
    rec.source = string_field(r, "source", i, rec.id, true);
    if (rec.source.empty()) throw ParseError(record_ctx(i, rec.id) + ": empty source");
    rec.caption = string_field(r, "caption", i, rec.id, false);
    rec.label = string_field(r, "label", i, rec.id, false);
    rec.patient = string_field(r, "patient", i, rec.id, false);
    if (r.contains("fold")) {
      if (!r["fold"].is_number_integer())
        throw ParseError(record_ctx(i, rec.id) + ": fold must be an integer");
      rec.fold = r["fold"].get<int>();
    }
    if (r.contains("symptoms")) {
      const auto& sym = field(r, "symptoms", i, rec.id);
      if (!sym.is_array())
        throw ParseError(record_ctx(i, rec.id) + ": symptoms must be an array");
      for (const auto& v : sym) {
        if (!v.is_number())
          throw ParseError(record_ctx(i, rec.id) + ": symptoms must be numeric");
        rec.symptoms.push_back(v.get<double>());
      }
    }
    if (!seen.insert(rec.id).second)
      throw DuplicateId(record_ctx(i, rec.id) + ": duplicate sample id");
    m.records.push_back(std::move(rec));
  }

  // Eager source validation: every referenced file must exist and agree on F.
  for (size_t i = 0; i < m.records.size(); ++i) {
    const auto& rec = m.records[i];
    const std::string resolved = m.resolve(rec);
    if (!fs::exists(resolved))
      throw UnresolvedSource(record_ctx(i, rec.id) + ": missing source " + resolved);
    FrameHeader h = read_frames_header(resolved);
    if (h.feature_dim != m.feature_dim)
      throw SchemaMismatch(record_ctx(i, rec.id) + ": source feature_dim " +
                           std::to_string(h.feature_dim) + " != manifest feature_dim " +
                           std::to_string(m.feature_dim));
  }
  return m;
}

void save_manifest(const Manifest& m, const std::string& path) {
  ordered_json doc;
  doc["schema_version"] = m.schema_version;
  doc["feature_dim"] = m.feature_dim;
  doc["records"] = ordered_json::array();
  for (const auto& rec : m.records) {
    ordered_json r;
    r["id"] = rec.id;
    r["source"] = rec.source;
    if (!rec.caption.empty()) r["caption"] = rec.caption;
    if (!rec.label.empty()) r["label"] = rec.label;
    if (rec.fold >= 0) r["fold"] = rec.fold;
    if (!rec.patient.empty()) r["patient"] = rec.patient;
    if (!rec.symptoms.empty()) r["symptoms"] = rec.symptoms;
    doc["records"].push_back(std::move(r));
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << doc.dump(2) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

// ---- frame-feature files --------------------------------------------------

void write_frames(const std::string& path, const Mat& frames) {
  if (frames.rows() == 0 || frames.cols() == 0) throw EmptyInput("write_frames: empty matrix");
  if (!all_finite(frames)) throw NonFiniteInput("write_frames: non-finite entries");
  std::ofstream out = open_write(path);
  write_bytes(out, kFramesMagic, 4);
  write_u32(out, kFormatVersion);
  write_u32(out, static_cast<uint32_t>(frames.rows()));
  write_u32(out, static_cast<uint32_t>(frames.cols()));
  write_u32(out, kDtypeFloat64);
  // row-major payload regardless of Eigen's storage order
  std::vector<double> payload(static_cast<size_t>(frames.size()));
  size_t k = 0;
  for (Eigen::Index t = 0; t < frames.rows(); ++t)
    for (Eigen::Index f = 0; f < frames.cols(); ++f) payload[k++] = frames(t, f);
  write_bytes(out, payload.data(), payload.size() * sizeof(double));
  write_u64(out, fnv1a64(payload.data(), payload.size() * sizeof(double)));
}

FrameHeader read_frames_header(const std::string& path) {
  std::ifstream in = open_read(path);
  check_magic(in, kFramesMagic, path);
  const uint32_t version = read_u32(in, "version");
  if (version != kFormatVersion)
    throw SchemaMismatch(path + ": unsupported version " + std::to_string(version));
  FrameHeader h;
  h.t_raw = static_cast<int>(read_u32(in, "t_raw"));
  h.feature_dim = static_cast<int>(read_u32(in, "feature_dim"));
  const uint32_t dtype = read_u32(in, "dtype");
  if (dtype != kDtypeFloat64)
    throw SchemaMismatch(path + ": unsupported dtype " + std::to_string(dtype));
  if (h.t_raw <= 0 || h.feature_dim <= 0)
    throw CorruptPayload(path + ": degenerate shape in header");
  return h;
}

Mat read_frames(const std::string& path) {
  const FrameHeader h = read_frames_header(path);
  std::ifstream in = open_read(path);
  in.seekg(4 + 4 * sizeof(uint32_t));
  std::vector<double> payload(static_cast<size_t>(h.t_raw) * static_cast<size_t>(h.feature_dim));
  read_bytes(in, payload.data(), payload.size() * sizeof(double), "frame payload");
  const uint64_t stored = read_u64(in, "checksum");
  if (stored != fnv1a64(payload.data(), payload.size() * sizeof(double)))
    throw CorruptPayload(path + ": checksum mismatch");
  Mat frames(h.t_raw, h.feature_dim);
  size_t k = 0;
  for (Eigen::Index t = 0; t < frames.rows(); ++t)
    for (Eigen::Index f = 0; f < frames.cols(); ++f) frames(t, f) = payload[k++];
  return frames;
}

// ---- checkpoints ----------------------------------------------------------

void save_checkpoint(const Checkpoint& cp, const std::string& path) {
  ordered_json header;
  const ModelConfig& c = cp.state.config;
  header["config"] = {{"feature_dim", c.feature_dim}, {"embed_dim", c.embed_dim},
                      {"max_frames", c.max_frames},   {"layers", c.layers},
                      {"heads", c.heads},             {"ff_mult", c.ff_mult},
                      {"vocab_size", c.vocab_size},   {"max_tokens", c.max_tokens},
                      {"dropout", c.dropout}};
  header["vocab"] = cp.vocab_words;
  header["epochs_done"] = cp.epochs_done;
  header["step"] = cp.step;
  header["seed"] = cp.seed;
  const std::string header_bytes = header.dump();

  std::ofstream out = open_write(path);
  write_bytes(out, kCheckpointMagic, 4);
  write_u32(out, kFormatVersion);
  write_u64(out, header_bytes.size());
  write_bytes(out, header_bytes.data(), header_bytes.size());

  // param_refs mutates nothing; it only needs a non-const state to hand out
  // pointers, so saving from a const snapshot is safe.
  auto refs = param_refs(const_cast<ModelState&>(cp.state));
  uint64_t checksum = fnv1a64(nullptr, 0);
  for (const auto& ref : refs) {
    const size_t bytes = static_cast<size_t>(ref.size) * sizeof(double);
    write_bytes(out, ref.data, bytes);
    checksum = fnv1a64(ref.data, bytes, checksum);
  }
  write_u64(out, checksum);
}

Checkpoint load_checkpoint(const std::string& path, const ModelConfig* expected) {
  std::ifstream in = open_read(path);
  check_magic(in, kCheckpointMagic, path);
  const uint32_t version = read_u32(in, "version");
  if (version != kFormatVersion)
    throw SchemaMismatch(path + ": unsupported version " + std::to_string(version));
  const uint64_t header_len = read_u64(in, "header length");
  if (header_len > (1ULL << 30)) throw CorruptPayload(path + ": absurd header length");
  std::string header_bytes(header_len, '\0');
  read_bytes(in, header_bytes.data(), header_len, "header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_bytes);
  } catch (const nlohmann::json::exception& e) {
    throw CorruptPayload(path + ": header parse: " + e.what());
  }

  Checkpoint cp;
  try {
    const auto& c = header.at("config");
    ModelConfig config;
    config.feature_dim = c.at("feature_dim").get<int>();
    config.embed_dim = c.at("embed_dim").get<int>();
    config.max_frames = c.at("max_frames").get<int>();
    config.layers = c.at("layers").get<int>();
    config.heads = c.at("heads").get<int>();
    config.ff_mult = c.at("ff_mult").get<int>();
    config.vocab_size = c.at("vocab_size").get<int>();
    config.max_tokens = c.at("max_tokens").get<int>();
    config.dropout = c.at("dropout").get<double>();
    config.validate();
    cp.state = ModelState::init(config, 0);
    cp.vocab_words = header.at("vocab").get<std::vector<std::string>>();
    cp.epochs_done = header.at("epochs_done").get<int>();
    cp.step = header.at("step").get<long long>();
    cp.seed = header.at("seed").get<uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaMismatch(path + ": header: " + e.what());
  }
  if (!cp.vocab_words.empty() &&
      static_cast<int>(cp.vocab_words.size()) != cp.state.config.vocab_size)
    throw SchemaMismatch(path + ": vocab size " + std::to_string(cp.vocab_words.size()) +
                         " != config vocab_size " +
                         std::to_string(cp.state.config.vocab_size));
  if (expected && !(*expected == cp.state.config))
    throw SchemaMismatch(path + ": checkpoint config does not match the expected config");

  auto refs = param_refs(cp.state);
  uint64_t checksum = fnv1a64(nullptr, 0);
  for (const auto& ref : refs) {
    const size_t bytes = static_cast<size_t>(ref.size) * sizeof(double);
    read_bytes(in, ref.data, bytes, ref.name.c_str());
    checksum = fnv1a64(ref.data, bytes, checksum);
  }
  const uint64_t stored = read_u64(in, "checksum");
  if (stored != checksum) throw CorruptPayload(path + ": checksum mismatch");
  return cp;
}

// ---- synthetic corpus -----------------------------------------------------

namespace {

// Rising envelopes stay zero through the middle frame then ramp to one, so a
// middle-frame snapshot carries no prototype signal; falling is its mirror.
// Flat classes use the envelope's mean so all modes see equal average energy.
std::vector<double> envelope_weights(Envelope env, int len, bool temporal_patterns) {
  std::vector<double> w(static_cast<size_t>(len), 0.0);
  if (len == 1) {
    w[0] = 0.5;
    return w;
  }
  const double m = (len - 1) / 2.0;
  double mean = 0.0;
  for (int t = 0; t < len; ++t) {
    const double rising = t <= m ? 0.0 : (t - m) / ((len - 1) - m);
    w[static_cast<size_t>(t)] = rising;
    mean += rising / len;
  }
  if (!temporal_patterns || env == Envelope::kFlat) {
    std::fill(w.begin(), w.end(), mean);
  } else if (env == Envelope::kFalling) {
    std::reverse(w.begin(), w.end());
  }
  return w;
}

std::string fill_template(const std::string& tmpl, const std::vector<std::string>& attrs) {
  std::string joined;
  for (size_t i = 0; i < attrs.size(); ++i) {
    if (i) joined += ' ';
    joined += attrs[i];
  }
  std::string out = tmpl;
  const size_t pos = out.find("{attrs}");
  out.replace(pos, 7, joined);
  return out;
}

std::string pad4(int v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d", v);
  return buf;
}

}  // namespace

void SyntheticCorpusConfig::validate() const {
  if (classes.empty()) throw ConfigInvalid("synthetic corpus: no classes");
  if (samples_per_class < 1) throw ConfigInvalid("synthetic corpus: samples_per_class < 1");
  if (frames_per_sample < 1) throw ConfigInvalid("synthetic corpus: frames_per_sample < 1");
  if (noise < 0.0) throw ConfigInvalid("synthetic corpus: negative noise");
  if (caption_templates.empty()) throw ConfigInvalid("synthetic corpus: no caption templates");
  for (const auto& t : caption_templates)
    if (t.find("{attrs}") == std::string::npos)
      throw ConfigInvalid("synthetic corpus: template lacks {attrs}: " + t);

  Eigen::Index f = -1;
  std::set<std::string> names;
  std::set<std::string> basics;
  for (const auto& cls : classes) {
    if (cls.name.empty()) throw ConfigInvalid("synthetic corpus: unnamed class");
    if (!names.insert(cls.name).second)
      throw ConfigInvalid("synthetic corpus: duplicate class " + cls.name);
    if (cls.components.empty()) {
      if (cls.prototype.size() == 0)
        throw ConfigInvalid("synthetic corpus: class " + cls.name + " lacks a prototype");
      if (f < 0) f = cls.prototype.size();
      if (cls.prototype.size() != f)
        throw ConfigInvalid("synthetic corpus: prototype size mismatch for " + cls.name);
      if (cls.prototype.norm() < 1e-12)
        throw ConfigInvalid("synthetic corpus: zero prototype for " + cls.name);
      if (cls.attributes.empty())
        throw ConfigInvalid("synthetic corpus: class " + cls.name + " lacks attributes");
      basics.insert(cls.name);
    }
  }
  for (const auto& cls : classes)
    for (const auto& comp : cls.components)
      if (!basics.count(comp))
        throw ConfigInvalid("synthetic corpus: " + cls.name + " references unknown basic " +
                            comp);
  if (rest.size() != 0 && rest.size() != f)
    throw ConfigInvalid("synthetic corpus: rest direction size mismatch");

  // attribute sets must differ between any two attribute-bearing classes
  std::vector<std::pair<std::string, std::set<std::string>>> attr_sets;
  for (const auto& cls : classes) {
    if (cls.attributes.empty()) continue;
    std::set<std::string> s(cls.attributes.begin(), cls.attributes.end());
    for (const auto& [other, set] : attr_sets)
      if (set == s)
        throw ConfigInvalid("synthetic corpus: classes " + other + " and " + cls.name +
                            " share an attribute set");
    attr_sets.emplace_back(cls.name, std::move(s));
  }
}

std::string attribute_description(const std::vector<std::string>& attributes) {
  std::string out = "a person showing";
  for (const auto& a : attributes) out += " " + a;
  return out;
}

SyntheticCorpus generate_synthetic_corpus(const SyntheticCorpusConfig& config) {
  config.validate();
  const int len = config.frames_per_sample;

  auto find_class = [&](const std::string& name) -> const ClassSpec& {
    for (const auto& cls : config.classes)
      if (cls.name == name) return cls;
    throw ConfigInvalid("synthetic corpus: unknown class " + name);  // unreachable post-validate
  };

  Eigen::Index f = -1;
  for (const auto& cls : config.classes)
    if (cls.components.empty()) {
      f = cls.prototype.size();
      break;
    }
  if (f < 0) throw ConfigInvalid("synthetic corpus: no basic classes");
  const Vec rest = config.rest.size() == 0 ? Vec(Vec::Zero(f)) : config.rest;

  SyntheticCorpus corpus;
  corpus.manifest.feature_dim = static_cast<int>(f);

  for (size_t ci = 0; ci < config.classes.size(); ++ci) {
    const ClassSpec& cls = config.classes[ci];
    corpus.class_names.push_back(cls.name);
    corpus.class_components.push_back(cls.components);

    // compound attribute fallback: ordered union of component attributes
    std::vector<std::string> attrs = cls.attributes;
    if (attrs.empty()) {
      std::set<std::string> seen;
      for (const auto& comp : cls.components)
        for (const auto& a : find_class(comp).attributes)
          if (seen.insert(a).second) attrs.push_back(a);
    }
    corpus.class_attributes.push_back(attrs);

    // per-frame prototype mix: mean of component envelopes and prototypes
    std::vector<const ClassSpec*> parts;
    if (cls.components.empty()) {
      parts.push_back(&cls);
    } else {
      for (const auto& comp : cls.components) parts.push_back(&find_class(comp));
    }
    std::vector<std::vector<double>> part_w;
    for (const auto* part : parts) {
      Envelope env = cls.components.empty() ? cls.envelope : part->envelope;
      part_w.push_back(envelope_weights(env, len, config.temporal_patterns));
    }

    for (int si = 0; si < config.samples_per_class; ++si) {
      Rng rng = make_rng(config.seed, 0x53594e00ULL + ci * 131071ULL + static_cast<uint64_t>(si));
      ManifestRecord rec;
      rec.id = cls.name + "_" + pad4(si);
      rec.source = "frames/" + rec.id + ".vtcf";
      rec.label = cls.name;

      std::uniform_int_distribution<size_t> pick(0, config.caption_templates.size() - 1);
      std::vector<std::string> shuffled = attrs;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      rec.caption = fill_template(config.caption_templates[pick(rng)], shuffled);

      Mat frames(len, f);
      std::normal_distribution<double> gauss(0.0, 1.0);
      for (int t = 0; t < len; ++t) {
        double wsum = 0.0;
        Vec row = Vec::Zero(f);
        for (size_t p = 0; p < parts.size(); ++p) {
          const double w = part_w[p][static_cast<size_t>(t)];
          wsum += w / parts.size();
          row += (w / parts.size()) * parts[p]->prototype;
        }
        row += (1.0 - wsum) * rest;
        for (Eigen::Index j = 0; j < f; ++j) row[j] += config.noise * gauss(rng);
        frames.row(t) = row.transpose();
      }
      corpus.frames.push_back(std::move(frames));
      corpus.manifest.records.push_back(std::move(rec));
    }
  }
  return corpus;
}

void write_corpus(const SyntheticCorpus& corpus, const std::string& out_dir) {
  if (corpus.manifest.records.size() != corpus.frames.size())
    throw ShapeMismatch("write_corpus: records and frames differ in count");
  fs::create_directories(fs::path(out_dir) / "frames");
  for (size_t i = 0; i < corpus.frames.size(); ++i) {
    const auto& rec = corpus.manifest.records[i];
    write_frames((fs::path(out_dir) / rec.source).string(), corpus.frames[i]);
  }
  save_manifest(corpus.manifest, (fs::path(out_dir) / "manifest.json").string());

  ordered_json key;
  key["classes"] = ordered_json::array();
  for (size_t c = 0; c < corpus.class_names.size(); ++c) {
    ordered_json entry;
    entry["name"] = corpus.class_names[c];
    entry["attributes"] = corpus.class_attributes[c];
    entry["components"] = corpus.class_components[c];
    key["classes"].push_back(std::move(entry));
  }
  std::ofstream key_out((fs::path(out_dir) / "key.json").string(), std::ios::trunc);
  if (!key_out) throw IoError("cannot write key.json");
  key_out << key.dump(2) << "\n";

  // registry asset: descriptions built from attributes alone, never names
  std::ofstream reg((fs::path(out_dir) / "classes.txt").string(), std::ios::trunc);
  if (!reg) throw IoError("cannot write classes.txt");
  reg << "# synthetic corpus classes: name | description, or name | a + b for compounds\n";
  for (size_t c = 0; c < corpus.class_names.size(); ++c) {
    if (corpus.class_components[c].empty()) {
      reg << corpus.class_names[c] << " | " << attribute_description(corpus.class_attributes[c])
          << "\n";
    } else {
      reg << corpus.class_names[c] << " | ";
      for (size_t k = 0; k < corpus.class_components[c].size(); ++k) {
        if (k) reg << " + ";
        reg << corpus.class_components[c][k];
      }
      reg << "\n";
    }
  }
}

// ---- planted probe corpus -------------------------------------------------

void ProbeCorpusConfig::validate() const {
  if (patients < 2) throw ConfigInvalid("probe corpus: need at least 2 patients");
  if (videos_per_patient < 1) throw ConfigInvalid("probe corpus: videos_per_patient < 1");
  if (frames_per_video < 1) throw ConfigInvalid("probe corpus: frames_per_video < 1");
  if (feature_dim < 1) throw ConfigInvalid("probe corpus: feature_dim < 1");
  if (items < 1) throw ConfigInvalid("probe corpus: items < 1");
  if (noise < 0.0) throw ConfigInvalid("probe corpus: negative noise");
  if (!(item_min < item_max)) throw ConfigInvalid("probe corpus: empty item range");
}

ProbeCorpus generate_probe_corpus(const ProbeCorpusConfig& config, const ModelState& frozen,
                                  int clip_len, int downsample) {
  config.validate();
  if (frozen.config.feature_dim != config.feature_dim)
    throw ConfigInvalid("probe corpus: feature_dim does not match the frozen model");

  const Eigen::Index d = frozen.config.embed_dim;
  const double center = 0.5 * (config.item_min + config.item_max);
  const double scale = 0.475 * (config.item_max - config.item_min);

  ProbeCorpus corpus;
  corpus.manifest.feature_dim = config.feature_dim;
  corpus.response = Mat(config.items, d);
  corpus.offset = Vec::Constant(config.items, center);
  Rng resp_rng = make_rng(config.seed, 0x70726f62ULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int k = 0; k < config.items; ++k) {
    Vec a(d);
    for (Eigen::Index j = 0; j < d; ++j) a[j] = gauss(resp_rng);
    corpus.response.row(k) = (scale / a.norm()) * a.transpose();
  }

  for (int p = 0; p < config.patients; ++p) {
    for (int v = 0; v < config.videos_per_patient; ++v) {
      Rng rng = make_rng(config.seed,
                         0x76696400ULL + static_cast<uint64_t>(p) * 4096ULL +
                             static_cast<uint64_t>(v));
      Vec signal(config.feature_dim);
      for (Eigen::Index j = 0; j < config.feature_dim; ++j) signal[j] = gauss(rng);
      signal.normalize();

      Mat frames(config.frames_per_video, config.feature_dim);
      for (Eigen::Index t = 0; t < frames.rows(); ++t)
        for (Eigen::Index j = 0; j < frames.cols(); ++j)
          frames(t, j) = signal[j] + config.noise * gauss(rng);

      // plant targets on the mean frozen embedding over the eval windows —
      // exactly what clip-averaged predictions estimate
      Vec mean_z = Vec::Zero(d);
      const auto windows = clip_windows(frames, clip_len, downsample);
      for (const auto& w : windows) mean_z += encode_video(frozen, w);
      mean_z /= static_cast<double>(windows.size());

      ManifestRecord rec;
      rec.id = "p" + pad4(p) + "_v" + std::to_string(v);
      rec.source = "frames/" + rec.id + ".vtcf";
      rec.patient = "p" + pad4(p);
      Vec items = corpus.response * mean_z + corpus.offset;
      double total = 0.0;
      for (int k = 0; k < config.items; ++k) {
        rec.symptoms.push_back(items[k]);
        total += items[k];
      }
      rec.symptoms.push_back(total);
      corpus.frames.push_back(std::move(frames));
      corpus.manifest.records.push_back(std::move(rec));
    }
  }
  return corpus;
}

void write_corpus(const ProbeCorpus& corpus, const std::string& out_dir) {
  if (corpus.manifest.records.size() != corpus.frames.size())
    throw ShapeMismatch("write_corpus: records and frames differ in count");
  fs::create_directories(fs::path(out_dir) / "frames");
  for (size_t i = 0; i < corpus.frames.size(); ++i) {
    const auto& rec = corpus.manifest.records[i];
    write_frames((fs::path(out_dir) / rec.source).string(), corpus.frames[i]);
  }
  save_manifest(corpus.manifest, (fs::path(out_dir) / "manifest.json").string());

  ordered_json truth;
  truth["offset"] = std::vector<double>(corpus.offset.data(),
                                        corpus.offset.data() + corpus.offset.size());
  truth["response"] = ordered_json::array();
  for (int k = 0; k < corpus.response.rows(); ++k) {
    std::vector<double> row(corpus.response.cols());
    for (int j = 0; j < corpus.response.cols(); ++j) row[j] = corpus.response(k, j);
    truth["response"].push_back(row);
  }
  std::ofstream out((fs::path(out_dir) / "response.json").string(), std::ios::trunc);
  if (!out) throw IoError("cannot write response.json");
  out << truth.dump(2) << "\n";
}

}  // namespace vtc
