#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "vtc/clip_sampling.hpp"
#include "vtc/data_io.hpp"

using namespace vtc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("vtc_test_" + std::to_string(reinterpret_cast<uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

Mat random_frames(int t, int f, uint64_t seed) {
  Rng rng = make_rng(seed, 0xf);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Mat m(t, f);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = dist(rng);
  return m;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

SyntheticCorpusConfig small_corpus_config(int f = 5) {
  SyntheticCorpusConfig cfg;
  const char* names[3] = {"calm", "tense", "bright"};
  const char* attrs[3][2] = {
      {"soft_brow", "still_gaze"}, {"tight_jaw", "fixed_stare"}, {"wide_eyes", "lifted_cheeks"}};
  for (int c = 0; c < 3; ++c) {
    ClassSpec spec;
    spec.name = names[c];
    spec.prototype = Vec::Zero(f);
    spec.prototype[c] = 1.0;
    spec.attributes = {attrs[c][0], attrs[c][1]};
    spec.envelope = c % 2 == 0 ? Envelope::kRising : Envelope::kFalling;
    cfg.classes.push_back(spec);
  }
  cfg.samples_per_class = 4;
  cfg.frames_per_sample = 8;
  cfg.noise = 0.05;
  cfg.caption_templates = {"the subject looks {attrs} here", "a clip of someone {attrs}"};
  cfg.seed = 11;
  return cfg;
}

}  // namespace

TEST_CASE("frame files round-trip bit-exactly") {
  TempDir dir;
  Mat frames = random_frames(7, 4, 1);
  write_frames(dir.file("a.vtcf"), frames);

  FrameHeader h = read_frames_header(dir.file("a.vtcf"));
  CHECK(h.t_raw == 7);
  CHECK(h.feature_dim == 4);

  Mat back = read_frames(dir.file("a.vtcf"));
  REQUIRE(back.rows() == frames.rows());
  REQUIRE(back.cols() == frames.cols());
  for (Eigen::Index k = 0; k < frames.size(); ++k) CHECK(back.data()[k] == frames.data()[k]);

  // write -> read -> write is byte-identical
  write_frames(dir.file("b.vtcf"), back);
  CHECK(read_file(dir.file("a.vtcf")) == read_file(dir.file("b.vtcf")));
}

TEST_CASE("frame file corruption and schema errors") {
  TempDir dir;
  write_frames(dir.file("a.vtcf"), random_frames(3, 2, 2));

  SUBCASE("truncated payload") {
    std::string bytes = read_file(dir.file("a.vtcf"));
    std::ofstream out(dir.file("cut.vtcf"), std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 11));
    out.close();
    CHECK_THROWS_AS(read_frames(dir.file("cut.vtcf")), CorruptPayload);
  }
  SUBCASE("flipped payload byte fails the checksum") {
    std::string bytes = read_file(dir.file("a.vtcf"));
    bytes[4 + 16 + 9] ^= 0x40;  // inside the payload
    std::ofstream out(dir.file("flip.vtcf"), std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();
    CHECK_THROWS_AS(read_frames(dir.file("flip.vtcf")), CorruptPayload);
  }
  SUBCASE("wrong magic") {
    std::ofstream out(dir.file("bad.vtcf"), std::ios::binary | std::ios::trunc);
    out << "NOPE then some bytes";
    out.close();
    CHECK_THROWS_AS(read_frames_header(dir.file("bad.vtcf")), SchemaMismatch);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(read_frames(dir.file("absent.vtcf")), IoError);
  }
  SUBCASE("empty or non-finite input refused") {
    CHECK_THROWS_AS(write_frames(dir.file("x.vtcf"), Mat(0, 3)), EmptyInput);
    Mat nan = Mat::Zero(2, 2);
    nan(1, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(write_frames(dir.file("x.vtcf"), nan), NonFiniteInput);
  }
}

TEST_CASE("minimal manifest loads and resolves sources") {
  TempDir dir;
  fs::create_directories(dir.path / "frames");
  write_frames(dir.file("frames/s0.vtcf"), random_frames(5, 3, 3));
  std::ofstream out(dir.file("manifest.json"));
  out << R"({"schema_version":1,"feature_dim":3,"records":[
    {"id":"s0","source":"frames/s0.vtcf","caption":"a calm face","label":"calm"}]})";
  out.close();

  Manifest m = load_manifest(dir.file("manifest.json"));
  REQUIRE(m.records.size() == 1);
  CHECK(m.records[0].id == "s0");
  CHECK(m.records[0].caption == "a calm face");
  CHECK(m.records[0].label == "calm");
  CHECK(m.records[0].fold == -1);
  CHECK(read_frames(m.resolve(m.records[0])).rows() == 5);
}

TEST_CASE("manifest validation failures") {
  TempDir dir;
  fs::create_directories(dir.path / "frames");
  write_frames(dir.file("frames/s0.vtcf"), random_frames(5, 3, 4));

  SUBCASE("duplicate id") {
    std::ofstream out(dir.file("manifest.json"));
    out << R"({"schema_version":1,"feature_dim":3,"records":[
      {"id":"s0","source":"frames/s0.vtcf"},{"id":"s0","source":"frames/s0.vtcf"}]})";
    out.close();
    CHECK_THROWS_AS(load_manifest(dir.file("manifest.json")), DuplicateId);
  }
  SUBCASE("missing source file") {
    std::ofstream out(dir.file("manifest.json"));
    out << R"({"schema_version":1,"feature_dim":3,"records":[
      {"id":"s0","source":"frames/gone.vtcf"}]})";
    out.close();
    CHECK_THROWS_AS(load_manifest(dir.file("manifest.json")), UnresolvedSource);
  }
  SUBCASE("feature_dim disagreement with the source header") {
    std::ofstream out(dir.file("manifest.json"));
    out << R"({"schema_version":1,"feature_dim":8,"records":[
      {"id":"s0","source":"frames/s0.vtcf"}]})";
    out.close();
    CHECK_THROWS_AS(load_manifest(dir.file("manifest.json")), SchemaMismatch);
  }
  SUBCASE("malformed json") {
    std::ofstream out(dir.file("manifest.json"));
    out << "{not json";
    out.close();
    CHECK_THROWS_AS(load_manifest(dir.file("manifest.json")), ParseError);
  }
  SUBCASE("bad record field type names the record") {
    std::ofstream out(dir.file("manifest.json"));
    out << R"({"schema_version":1,"feature_dim":3,"records":[
      {"id":"s0","source":"frames/s0.vtcf","fold":"zero"}]})";
    out.close();
    try {
      load_manifest(dir.file("manifest.json"));
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("record 0") != std::string::npos);
    }
  }
  SUBCASE("unsupported schema version") {
    std::ofstream out(dir.file("manifest.json"));
    out << R"({"schema_version":2,"feature_dim":3,"records":[]})";
    out.close();
    CHECK_THROWS_AS(load_manifest(dir.file("manifest.json")), SchemaMismatch);
  }
}

TEST_CASE("manifest save/load round-trips a 100-record corpus") {
  TempDir dir;
  fs::create_directories(dir.path / "frames");
  Manifest m;
  m.feature_dim = 4;
  for (int i = 0; i < 100; ++i) {
    ManifestRecord rec;
    rec.id = "s" + std::to_string(i);
    rec.source = "frames/" + rec.id + ".vtcf";
    rec.caption = "caption number " + std::to_string(i);
    rec.label = i % 2 ? "tense" : "calm";
    rec.fold = i % 5;
    rec.patient = "p" + std::to_string(i % 7);
    rec.symptoms = {1.0 + i, 2.5};
    write_frames(dir.file(rec.source), random_frames(3, 4, 100 + static_cast<uint64_t>(i)));
    m.records.push_back(rec);
  }
  save_manifest(m, dir.file("manifest.json"));
  Manifest back = load_manifest(dir.file("manifest.json"));
  REQUIRE(back.records.size() == m.records.size());
  CHECK(back.feature_dim == m.feature_dim);
  for (size_t i = 0; i < m.records.size(); ++i) {
    CHECK(back.records[i].id == m.records[i].id);
    CHECK(back.records[i].source == m.records[i].source);
    CHECK(back.records[i].caption == m.records[i].caption);
    CHECK(back.records[i].label == m.records[i].label);
    CHECK(back.records[i].fold == m.records[i].fold);
    CHECK(back.records[i].patient == m.records[i].patient);
    CHECK(back.records[i].symptoms == m.records[i].symptoms);
  }

  // byte determinism: save(load(save(x))) == save(x)
  save_manifest(back, dir.file("again.json"));
  CHECK(read_file(dir.file("manifest.json")) == read_file(dir.file("again.json")));
}

TEST_CASE("checkpoint round-trip is bit-exact") {
  TempDir dir;
  ModelConfig cfg;
  cfg.feature_dim = 5;
  cfg.embed_dim = 8;
  cfg.max_frames = 6;
  cfg.vocab_size = 9;
  Checkpoint cp;
  cp.state = ModelState::init(cfg, 21);
  cp.epochs_done = 3;
  cp.step = 123;
  cp.seed = 77;
  save_checkpoint(cp, dir.file("m.vtck"));

  Checkpoint back = load_checkpoint(dir.file("m.vtck"));
  CHECK(back.epochs_done == 3);
  CHECK(back.step == 123);
  CHECK(back.seed == 77);
  CHECK(back.state.config == cfg);
  auto ra = param_refs(cp.state), rb = param_refs(back.state);
  REQUIRE(ra.size() == rb.size());
  for (size_t i = 0; i < ra.size(); ++i) {
    REQUIRE(ra[i].size == rb[i].size);
    for (Eigen::Index k = 0; k < ra[i].size; ++k) CHECK(ra[i].data[k] == rb[i].data[k]);
  }

  // save -> load -> save yields byte-identical files
  save_checkpoint(back, dir.file("again.vtck"));
  CHECK(read_file(dir.file("m.vtck")) == read_file(dir.file("again.vtck")));
}

TEST_CASE("checkpoint vocabulary persists") {
  TempDir dir;
  ModelConfig cfg;
  cfg.feature_dim = 3;
  cfg.embed_dim = 4;
  cfg.vocab_size = 4;
  Checkpoint cp;
  cp.state = ModelState::init(cfg, 5);
  cp.vocab_words = {"<unk>", "calm", "tense", "face"};
  save_checkpoint(cp, dir.file("m.vtck"));
  Checkpoint back = load_checkpoint(dir.file("m.vtck"));
  CHECK(back.vocab_words == cp.vocab_words);
}

TEST_CASE("checkpoint schema and corruption errors") {
  TempDir dir;
  ModelConfig cfg;
  cfg.feature_dim = 5;
  cfg.embed_dim = 8;
  cfg.vocab_size = 9;
  Checkpoint cp;
  cp.state = ModelState::init(cfg, 21);
  save_checkpoint(cp, dir.file("m.vtck"));

  SUBCASE("config mismatch refused") {
    ModelConfig other = cfg;
    other.embed_dim = 16;
    CHECK_THROWS_AS(load_checkpoint(dir.file("m.vtck"), &other), SchemaMismatch);
    CHECK_NOTHROW(load_checkpoint(dir.file("m.vtck"), &cfg));
  }
  SUBCASE("truncated file") {
    std::string bytes = read_file(dir.file("m.vtck"));
    std::ofstream out(dir.file("cut.vtck"), std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    out.close();
    CHECK_THROWS_AS(load_checkpoint(dir.file("cut.vtck")), CorruptPayload);
  }
  SUBCASE("flipped tensor byte fails the checksum") {
    std::string bytes = read_file(dir.file("m.vtck"));
    bytes[bytes.size() - 40] ^= 0x01;
    std::ofstream out(dir.file("flip.vtck"), std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();
    CHECK_THROWS_AS(load_checkpoint(dir.file("flip.vtck")), CorruptPayload);
  }
  SUBCASE("frame file refused as a checkpoint") {
    write_frames(dir.file("f.vtcf"), random_frames(2, 2, 9));
    CHECK_THROWS_AS(load_checkpoint(dir.file("f.vtcf")), SchemaMismatch);
  }
}

TEST_CASE("synthetic corpus determinism and structure") {
  SyntheticCorpusConfig cfg = small_corpus_config();
  SyntheticCorpus a = generate_synthetic_corpus(cfg);
  SyntheticCorpus b = generate_synthetic_corpus(cfg);

  REQUIRE(a.manifest.records.size() == 12);
  REQUIRE(a.frames.size() == 12);
  CHECK(a.class_names == std::vector<std::string>{"calm", "tense", "bright"});

  for (size_t i = 0; i < a.frames.size(); ++i) {
    CHECK(a.manifest.records[i].id == b.manifest.records[i].id);
    CHECK(a.manifest.records[i].caption == b.manifest.records[i].caption);
    CHECK((a.frames[i] - b.frames[i]).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("synthetic corpus writes a loadable on-disk layout byte-deterministically") {
  TempDir d1, d2;
  SyntheticCorpusConfig cfg = small_corpus_config();
  write_corpus(generate_synthetic_corpus(cfg), d1.path.string());
  write_corpus(generate_synthetic_corpus(cfg), d2.path.string());

  Manifest m = load_manifest(d1.file("manifest.json"));
  CHECK(m.records.size() == 12);
  CHECK(read_file(d1.file("manifest.json")) == read_file(d2.file("manifest.json")));
  CHECK(read_file(d1.file("key.json")) == read_file(d2.file("key.json")));
  CHECK(read_file(d1.file("classes.txt")) == read_file(d2.file("classes.txt")));
  CHECK(read_file(d1.file("frames/calm_0000.vtcf")) == read_file(d2.file("frames/calm_0000.vtcf")));

  // registry asset never leaks class names into descriptions
  std::ifstream reg(d1.file("classes.txt"));
  std::string line;
  while (std::getline(reg, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto bar = line.find('|');
    REQUIRE(bar != std::string::npos);
    const std::string name = line.substr(0, bar - 1);
    CHECK(line.find(name, bar) == std::string::npos);
  }
}

TEST_CASE("degenerate generator: zero noise and flat patterns collapse within a class") {
  SyntheticCorpusConfig cfg = small_corpus_config();
  cfg.noise = 0.0;
  cfg.temporal_patterns = false;
  SyntheticCorpus c = generate_synthetic_corpus(cfg);
  // all samples of one class share one frame matrix
  for (int s = 1; s < cfg.samples_per_class; ++s)
    CHECK((c.frames[0] - c.frames[static_cast<size_t>(s)]).cwiseAbs().maxCoeff() == 0.0);
  // and within a sample every row is the same (flat envelope)
  for (int t = 1; t < cfg.frames_per_sample; ++t)
    CHECK((c.frames[0].row(0) - c.frames[0].row(t)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("captions never contain the class name and vary across samples") {
  SyntheticCorpus c = generate_synthetic_corpus(small_corpus_config());
  for (const auto& rec : c.manifest.records)
    CHECK(rec.caption.find(rec.label) == std::string::npos);
  bool any_differ = false;
  for (size_t i = 1; i < c.manifest.records.size(); ++i)
    if (c.manifest.records[i].label == c.manifest.records[0].label &&
        c.manifest.records[i].caption != c.manifest.records[0].caption)
      any_differ = true;
  CHECK(any_differ);
}

TEST_CASE("nearest-prototype classifier is perfect on a separable corpus") {
  SyntheticCorpusConfig cfg;
  const int f = 16;
  Rng rng = make_rng(5, 0xabc);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int c = 0; c < 7; ++c) {
    ClassSpec spec;
    spec.name = "c" + std::to_string(c);
    spec.prototype = Vec::Zero(f);
    spec.prototype[c] = 1.0;  // orthogonal prototypes: pairwise cosine 0 < 0.3
    spec.attributes = {"attr" + std::to_string(2 * c), "attr" + std::to_string(2 * c + 1)};
    spec.envelope = Envelope::kFlat;
    cfg.classes.push_back(spec);
  }
  cfg.samples_per_class = 30;
  cfg.frames_per_sample = 8;
  cfg.temporal_patterns = false;
  cfg.noise = 0.1;
  cfg.caption_templates = {"someone {attrs}"};
  cfg.seed = 9;

  SyntheticCorpus corpus = generate_synthetic_corpus(cfg);
  int correct = 0, total = 0;
  for (size_t i = 0; i < corpus.frames.size(); ++i) {
    Vec mean = corpus.frames[i].colwise().mean().transpose();
    int best = -1;
    double best_cos = -2.0;
    for (int c = 0; c < 7; ++c) {
      const double cs = mean.dot(cfg.classes[static_cast<size_t>(c)].prototype) /
                        (mean.norm() * cfg.classes[static_cast<size_t>(c)].prototype.norm());
      if (cs > best_cos) {
        best_cos = cs;
        best = c;
      }
    }
    correct += ("c" + std::to_string(best)) == corpus.manifest.records[i].label;
    ++total;
  }
  CHECK(correct == total);
}

TEST_CASE("compound classes mix component prototypes and inherit attributes") {
  SyntheticCorpusConfig cfg = small_corpus_config();
  ClassSpec compound;
  compound.name = "calm_bright";
  compound.components = {"calm", "bright"};
  cfg.classes.push_back(compound);
  cfg.noise = 0.0;

  SyntheticCorpus c = generate_synthetic_corpus(cfg);
  REQUIRE(c.class_names.size() == 4);
  CHECK(c.class_components[3] == std::vector<std::string>{"calm", "bright"});
  // inherited attribute union, component order
  CHECK(c.class_attributes[3] ==
        std::vector<std::string>{"soft_brow", "still_gaze", "wide_eyes", "lifted_cheeks"});

  // single-component compound reduces exactly to its basic class
  SyntheticCorpusConfig cfg2 = small_corpus_config();
  cfg2.noise = 0.0;
  ClassSpec solo;
  solo.name = "calm_alone";
  solo.components = {"calm"};
  cfg2.classes.push_back(solo);
  SyntheticCorpus c2 = generate_synthetic_corpus(cfg2);
  // calm block is records [0, 4); calm_alone block starts at 12
  CHECK((c2.frames[0] - c2.frames[12]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("synthetic corpus config validation") {
  SyntheticCorpusConfig cfg = small_corpus_config();
  SUBCASE("no classes") {
    cfg.classes.clear();
    CHECK_THROWS_AS(generate_synthetic_corpus(cfg), ConfigInvalid);
  }
  SUBCASE("negative noise") {
    cfg.noise = -0.1;
    CHECK_THROWS_AS(generate_synthetic_corpus(cfg), ConfigInvalid);
  }
  SUBCASE("template without placeholder") {
    cfg.caption_templates = {"no placeholder at all"};
    CHECK_THROWS_AS(generate_synthetic_corpus(cfg), ConfigInvalid);
  }
  SUBCASE("duplicate attribute sets") {
    cfg.classes[1].attributes = cfg.classes[0].attributes;
    CHECK_THROWS_AS(generate_synthetic_corpus(cfg), ConfigInvalid);
  }
  SUBCASE("unknown compound component") {
    ClassSpec bad;
    bad.name = "mix";
    bad.components = {"missing"};
    cfg.classes.push_back(bad);
    CHECK_THROWS_AS(generate_synthetic_corpus(cfg), ConfigInvalid);
  }
  SUBCASE("prototype size mismatch") {
    cfg.classes[2].prototype = Vec::Ones(9);
    CHECK_THROWS_AS(generate_synthetic_corpus(cfg), ConfigInvalid);
  }
}

TEST_CASE("planted probe corpus targets are an affine read of the frozen embedding") {
  ModelConfig mc;
  mc.feature_dim = 6;
  mc.embed_dim = 8;
  mc.max_frames = 4;
  mc.vocab_size = 4;
  ModelState frozen = ModelState::init(mc, 31);

  ProbeCorpusConfig pc;
  pc.patients = 4;
  pc.videos_per_patient = 2;
  pc.frames_per_video = 8;
  pc.feature_dim = 6;
  pc.items = 3;
  pc.noise = 0.02;
  pc.seed = 12;

  ProbeCorpus corpus = generate_probe_corpus(pc, frozen, 4, 1);
  REQUIRE(corpus.manifest.records.size() == 8);
  for (const auto& rec : corpus.manifest.records) {
    REQUIRE(rec.symptoms.size() == 4);  // 3 items + total
    double total = 0.0;
    for (int k = 0; k < 3; ++k) {
      CHECK(rec.symptoms[static_cast<size_t>(k)] >= pc.item_min);
      CHECK(rec.symptoms[static_cast<size_t>(k)] <= pc.item_max);
      total += rec.symptoms[static_cast<size_t>(k)];
    }
    CHECK(rec.symptoms[3] == doctest::Approx(total).epsilon(1e-12));
  }

  // reconstruct the planted map from the stored response/offset
  for (size_t i = 0; i < corpus.frames.size(); ++i) {
    const auto windows = clip_windows(corpus.frames[i], 4, 1);
    Vec mean_z = Vec::Zero(mc.embed_dim);
    for (const auto& w : windows) mean_z += encode_video(frozen, w);
    mean_z /= static_cast<double>(windows.size());
    Vec y = corpus.response * mean_z + corpus.offset;
    for (int k = 0; k < 3; ++k)
      CHECK(y[k] == doctest::Approx(corpus.manifest.records[i].symptoms[static_cast<size_t>(k)])
                        .epsilon(1e-12));
  }

  // patient grouping: 2 videos per patient, distinct ids per patient
  CHECK(corpus.manifest.records[0].patient == corpus.manifest.records[1].patient);
  CHECK(corpus.manifest.records[0].patient != corpus.manifest.records[2].patient);

  // determinism
  ProbeCorpus again = generate_probe_corpus(pc, frozen, 4, 1);
  for (size_t i = 0; i < corpus.frames.size(); ++i)
    CHECK((corpus.frames[i] - again.frames[i]).cwiseAbs().maxCoeff() == 0.0);

  // feature_dim disagreement with the frozen model
  ProbeCorpusConfig bad = pc;
  bad.feature_dim = 7;
  CHECK_THROWS_AS(generate_probe_corpus(bad, frozen, 4, 1), ConfigInvalid);
}
