#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "vtc/embedding.hpp"
#include "vtc/errors.hpp"
#include "vtc/model.hpp"
#include "vtc/registry.hpp"
#include "vtc/tokenizer.hpp"

using namespace vtc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("vtc_registry_test_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string write_file(const TempDir& dir, const std::string& name, const std::string& body) {
  fs::path p = dir.path / name;
  std::ofstream out(p);
  out << body;
  return p.string();
}

std::string asset_path(const std::string& name) {
  return std::string(VTC_ASSET_DIR) + "/" + name;
}

const std::vector<std::string> kEleven = {
    "anger",    "disgust",  "fear",    "happiness",    "neutral",       "sadness",
    "surprise", "contempt", "anxiety", "helplessness", "disappointment"};

ModelConfig text_config(int vocab_size, int max_tokens) {
  ModelConfig c;
  c.feature_dim = 4;
  c.embed_dim = 8;
  c.max_frames = 4;
  c.layers = 1;
  c.heads = 2;
  c.ff_mult = 2;
  c.vocab_size = vocab_size;
  c.max_tokens = max_tokens;
  return c;
}

Vocabulary description_vocab(const DescriptionRegistry& reg) {
  std::vector<std::string> texts;
  for (const auto& cd : reg.classes)
    if (!cd.description.empty()) texts.push_back(cd.description);
  return Vocabulary::build(texts);
}

}  // namespace

TEST_CASE("registry: canonical asset loads for every subset") {
  const std::string path = asset_path("class_descriptions.txt");

  DescriptionRegistry eleven = load_registry(path, Subset::kEleven);
  REQUIRE(eleven.size() == 11);
  CHECK(eleven.provenance == path);
  CHECK(!eleven.has_embeddings());
  for (int i = 0; i < 11; ++i) {
    CHECK(eleven.classes[i].name == kEleven[i]);
    CHECK(!eleven.classes[i].is_compound());
    CHECK(eleven.classes[i].description.size() > 20);
    CHECK(eleven.index_of(kEleven[i]) == i);
  }
  CHECK(eleven.index_of("boredom") == -1);

  DescriptionRegistry seven = load_registry(path, Subset::kSeven);
  REQUIRE(seven.size() == 7);
  for (int i = 0; i < 7; ++i) {
    CHECK(seven.classes[i].name == kEleven[i]);
    CHECK(seven.classes[i].description == eleven.classes[i].description);
  }

  DescriptionRegistry custom = load_registry(path, Subset::kCustom);
  CHECK(custom.size() == 11);  // the asset defines no compounds
}

TEST_CASE("registry: subset names map to enum values") {
  CHECK(subset_from_string("eleven") == Subset::kEleven);
  CHECK(subset_from_string("seven") == Subset::kSeven);
  CHECK(subset_from_string("custom") == Subset::kCustom);
  CHECK_THROWS_AS(subset_from_string("twelve"), UnknownSubset);
  CHECK_THROWS_AS(subset_from_string(""), UnknownSubset);
}

TEST_CASE("registry: malformed asset files are rejected") {
  TempDir dir;

  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_registry((dir.path / "absent.txt").string(), Subset::kCustom),
                    AssetMissing);
  }
  SUBCASE("duplicate class name") {
    auto p = write_file(dir, "dup.txt", "a | first version\na | second version\n");
    CHECK_THROWS_AS(load_registry(p, Subset::kCustom), ParseError);
  }
  SUBCASE("name with whitespace") {
    auto p = write_file(dir, "space.txt", "two words | some text\n");
    CHECK_THROWS_AS(load_registry(p, Subset::kCustom), ParseError);
  }
  SUBCASE("line without separator") {
    auto p = write_file(dir, "nobar.txt", "just a line of text\n");
    CHECK_THROWS_AS(load_registry(p, Subset::kCustom), ParseError);
  }
  SUBCASE("empty description") {
    auto p = write_file(dir, "empty.txt", "a |   \n");
    CHECK_THROWS_AS(load_registry(p, Subset::kCustom), ParseError);
  }
  SUBCASE("compound referencing an undefined class") {
    auto p = write_file(dir, "undef.txt", "ab | a + b\n");
    CHECK_THROWS_AS(load_registry(p, Subset::kCustom), ParseError);
  }
  SUBCASE("compound referencing another compound") {
    auto p = write_file(dir, "nested.txt",
                        "a | calm steady gaze\nb | wide open eyes\nab | a + b\nabc | ab + a\n");
    CHECK_THROWS_AS(load_registry(p, Subset::kCustom), ParseError);
  }
  SUBCASE("comments and blank lines are skipped") {
    auto p = write_file(dir, "ok.txt", "# header\n\na | calm steady gaze\n");
    DescriptionRegistry reg = load_registry(p, Subset::kCustom);
    REQUIRE(reg.size() == 1);
    CHECK(reg.classes[0].description == "calm steady gaze");
  }
  SUBCASE("seven/eleven subsets require their classes") {
    auto p = write_file(dir, "short.txt",
                        "anger | text one\ndisgust | text two\nfear | text three\n"
                        "happiness | text four\nneutral | text five\nsadness | text six\n"
                        "surprise | text seven\n");
    CHECK(load_registry(p, Subset::kSeven).size() == 7);
    try {
      load_registry(p, Subset::kEleven);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("contempt") != std::string::npos);
    }
  }
  SUBCASE("subset classes must be basic") {
    auto p = write_file(dir, "compound_fear.txt",
                        "anger | text one\ndisgust | text two\nfear | anger + disgust\n"
                        "happiness | text four\nneutral | text five\nsadness | text six\n"
                        "surprise | text seven\n");
    CHECK_THROWS_AS(load_registry(p, Subset::kSeven), ParseError);
  }
}

TEST_CASE("registry: component lists only form when every part is a bare name") {
  TempDir dir;
  auto p = write_file(dir, "mix.txt",
                      "x | narrow steady gaze\ny | soft raised cheeks\n"
                      "plus_text | calm gaze + soft smile\n"
                      "tight_plus | x +y\n"
                      "xy | x + y\n");
  DescriptionRegistry reg = load_registry(p, Subset::kCustom);
  REQUIRE(reg.size() == 5);
  CHECK(!reg.classes[2].is_compound());  // multi-word pieces stay a description
  CHECK(reg.classes[2].description == "calm gaze + soft smile");
  CHECK(!reg.classes[3].is_compound());  // no " + " separator present
  CHECK(reg.classes[4].is_compound());
  CHECK(reg.classes[4].components == std::vector<std::string>{"x", "y"});
}

TEST_CASE("registry: neutral prompt sampling covers every ordered pair") {
  std::vector<std::string> prompts = load_neutral_prompts(asset_path("neutral_prompts.txt"));
  REQUIRE(prompts.size() == 5);
  for (const auto& p : prompts) {
    CHECK(!p.empty());
    CHECK(p[0] != '#');
  }

  std::map<std::string, int> expected;
  for (size_t i = 0; i < prompts.size(); ++i)
    for (size_t j = 0; j < prompts.size(); ++j)
      if (i != j) expected[prompts[i] + " " + prompts[j]] = 0;
  REQUIRE(expected.size() == 20);

  Rng rng = make_rng(7, 1);
  for (int n = 0; n < 10000; ++n) {
    std::string s = sample_neutral_description(prompts, rng);
    auto it = expected.find(s);
    REQUIRE(it != expected.end());  // never a self-pair, never a malformed join
    ++it->second;
  }
  for (const auto& [pair, count] : expected) CHECK(count >= 300);  // ~500 expected each

  SUBCASE("same seed replays the same sequence") {
    Rng a = make_rng(9, 2);
    Rng b = make_rng(9, 2);
    for (int n = 0; n < 50; ++n)
      CHECK(sample_neutral_description(prompts, a) == sample_neutral_description(prompts, b));
  }
  SUBCASE("fewer than two prompts cannot form a pair") {
    Rng a = make_rng(1, 1);
    std::vector<std::string> one = {"only prompt"};
    CHECK_THROWS_AS(sample_neutral_description(one, a), AssetMissing);
  }
}

TEST_CASE("registry: class embeddings come from encoded descriptions") {
  DescriptionRegistry reg = load_registry(asset_path("class_descriptions.txt"), Subset::kEleven);
  Vocabulary vocab = description_vocab(reg);
  ModelConfig cfg = text_config(vocab.size(), 64);
  ModelState state = ModelState::init(cfg, 5);

  DescriptionRegistry built = build_class_embedding_set(reg, state, vocab);
  REQUIRE(built.has_embeddings());
  REQUIRE(static_cast<int>(built.embeddings.size()) == built.size());
  CHECK(built.warnings.empty());  // 64 tokens hold every description
  for (const auto& z : built.embeddings) {
    REQUIRE(z.size() == cfg.embed_dim);
    CHECK(std::abs(z.norm() - 1.0) < 1e-12);
  }

  // The embedding reflects the description, not the class name: "sadness" is
  // itself an in-vocabulary word, and encoding it alone lands elsewhere.
  Vec name_only = encode_text(state, vocab.encode("sadness", cfg.max_tokens));
  CHECK((built.embeddings[5] - name_only).norm() > 1e-6);

  DescriptionRegistry again = build_class_embedding_set(reg, state, vocab);
  for (int i = 0; i < built.size(); ++i)
    CHECK((built.embeddings[i] - again.embeddings[i]).norm() == 0.0);

  SUBCASE("tight token budgets are reported per class") {
    ModelConfig tight = text_config(vocab.size(), 5);
    ModelState tight_state = ModelState::init(tight, 5);
    DescriptionRegistry truncated = build_class_embedding_set(reg, tight_state, vocab);
    CHECK(truncated.warnings.size() == 11);  // every description exceeds 5 tokens
    for (const auto& w : truncated.warnings)
      CHECK(w.find("truncated") != std::string::npos);
    for (const auto& z : truncated.embeddings) CHECK(std::abs(z.norm() - 1.0) < 1e-12);
  }
  SUBCASE("descriptions with no known words are refused") {
    Vocabulary tiny = Vocabulary::build({"zebra quark"});
    ModelConfig tiny_cfg = text_config(tiny.size(), 64);
    ModelState tiny_state = ModelState::init(tiny_cfg, 5);
    try {
      build_class_embedding_set(reg, tiny_state, tiny);
      FAIL("expected UnknownToken");
    } catch (const UnknownToken& e) {
      CHECK(std::string(e.what()).find("anger") != std::string::npos);
    }
  }
}

TEST_CASE("registry: in-file compounds compose from their basics") {
  TempDir dir;
  auto p = write_file(dir, "cc.txt",
                      "a | calm steady gaze\nb | wide open eyes\nab | a + b\n");
  DescriptionRegistry reg = load_registry(p, Subset::kCustom);
  Vocabulary vocab = description_vocab(reg);
  ModelState state = ModelState::init(text_config(vocab.size(), 64), 3);
  DescriptionRegistry built = build_class_embedding_set(reg, state, vocab);

  Vec composed = compose_compound({built.embeddings[0], built.embeddings[1]});
  CHECK((built.embeddings[2] - composed).norm() == 0.0);
  // Two-vector means are order-exact; larger sets agree to rounding.
  Vec swapped = compose_compound({built.embeddings[1], built.embeddings[0]});
  CHECK((built.embeddings[2] - swapped).norm() == 0.0);
}

TEST_CASE("registry: compound extension appends without disturbing indices") {
  DescriptionRegistry reg = load_registry(asset_path("class_descriptions.txt"), Subset::kEleven);
  Vocabulary vocab = description_vocab(reg);
  ModelState state = ModelState::init(text_config(vocab.size(), 64), 5);
  DescriptionRegistry built = build_class_embedding_set(reg, state, vocab);

  auto specs = load_compound_specs(asset_path("compounds_example.txt"));
  REQUIRE(specs.size() == 43);
  CHECK(specs[0].first == "angrily_disgusted");
  CHECK(specs[0].second == std::vector<std::string>{"anger", "disgust"});

  DescriptionRegistry ext = extend_with_compounds(built, specs);
  REQUIRE(ext.size() == 54);
  for (int i = 0; i < 11; ++i) {
    CHECK(ext.classes[i].name == built.classes[i].name);
    CHECK((ext.embeddings[i] - built.embeddings[i]).norm() == 0.0);
  }
  CHECK(ext.index_of("angrily_disgusted") == 11);
  for (int i = 11; i < ext.size(); ++i) {
    CHECK(ext.classes[i].is_compound());
    CHECK(ext.classes[i].description.empty());
    CHECK(std::abs(ext.embeddings[i].norm() - 1.0) < 1e-12);
  }

  // Composition order cannot matter for a two-component mean.
  int ad = ext.index_of("angrily_disgusted");
  Vec manual = compose_compound({built.embeddings[built.index_of("disgust")],
                                 built.embeddings[built.index_of("anger")]});
  CHECK((ext.embeddings[ad] - manual).norm() == 0.0);

  SUBCASE("a single-component compound is its component") {
    DescriptionRegistry solo = extend_with_compounds(built, {{"solo", {"fear"}}});
    CHECK((solo.embeddings[11] - built.embeddings[built.index_of("fear")]).norm() < 1e-12);
  }
  SUBCASE("extension rejects bad specs") {
    CHECK_THROWS_AS(extend_with_compounds(reg, specs), ConfigInvalid);  // no embeddings yet
    CHECK_THROWS_AS(extend_with_compounds(built, {{"anger", {"fear"}}}), DuplicateName);
    CHECK_THROWS_AS(extend_with_compounds(built, {{"m", {"fear"}}, {"m", {"anger"}}}),
                    DuplicateName);
    CHECK_THROWS_AS(extend_with_compounds(built, {{"m", {"boredom"}}}), UnknownComponent);
    CHECK_THROWS_AS(extend_with_compounds(built, {{"m", {}}}), EmptyInput);
  }
}

TEST_CASE("registry: concatenation baseline differs from composition") {
  DescriptionRegistry reg = load_registry(asset_path("class_descriptions.txt"), Subset::kEleven);
  Vocabulary vocab = description_vocab(reg);
  ModelConfig cfg = text_config(vocab.size(), 64);
  ModelState state = ModelState::init(cfg, 5);
  DescriptionRegistry built = build_class_embedding_set(reg, state, vocab);

  std::vector<std::pair<std::string, std::vector<std::string>>> mix = {
      {"mix", {"anger", "disgust"}}};
  DescriptionRegistry composed = extend_with_compounds(built, mix);
  DescriptionRegistry concat = concat_prompt_baseline(built, mix, state, vocab);

  REQUIRE(concat.size() == 12);
  CHECK(concat.classes[11].description ==
        built.classes[0].description + " " + built.classes[1].description);
  CHECK(std::abs(concat.embeddings[11].norm() - 1.0) < 1e-12);
  // Encoding the joined text is a different function of the parts than
  // normalizing their embedding mean.
  CHECK((concat.embeddings[11] - composed.embeddings[11]).norm() > 1e-3);

  SUBCASE("without truncation the mean-pooled encoder ignores order") {
    std::vector<std::pair<std::string, std::vector<std::string>>> rev = {
        {"mix", {"disgust", "anger"}}};
    DescriptionRegistry fwd = concat_prompt_baseline(built, mix, state, vocab);
    DescriptionRegistry bwd = concat_prompt_baseline(built, rev, state, vocab);
    CHECK(fwd.warnings.empty());
    CHECK((fwd.embeddings[11] - bwd.embeddings[11]).norm() < 1e-12);
  }
  SUBCASE("truncation makes concatenation order-sensitive") {
    ModelConfig tight = text_config(vocab.size(), 5);
    ModelState tight_state = ModelState::init(tight, 5);
    DescriptionRegistry tight_built = build_class_embedding_set(reg, tight_state, vocab);
    std::vector<std::pair<std::string, std::vector<std::string>>> rev = {
        {"mix", {"disgust", "anger"}}};
    DescriptionRegistry fwd = concat_prompt_baseline(tight_built, mix, tight_state, vocab);
    DescriptionRegistry bwd = concat_prompt_baseline(tight_built, rev, tight_state, vocab);
    CHECK(fwd.warnings.size() > tight_built.warnings.size());
    CHECK((fwd.embeddings[11] - bwd.embeddings[11]).norm() > 1e-6);
    // Five tokens only ever cover the head of the first description, so the
    // concat embedding collapses onto that class's truncated embedding.
    CHECK((fwd.embeddings[11] - tight_built.embeddings[0]).norm() == 0.0);
  }
  SUBCASE("concatenation needs description text") {
    CHECK_THROWS_AS(concat_prompt_baseline(composed, {{"deep", {"mix", "fear"}}}, state, vocab),
                    ConfigInvalid);
    CHECK_THROWS_AS(concat_prompt_baseline(built, {{"m", {"boredom"}}}, state, vocab),
                    UnknownComponent);
    CHECK_THROWS_AS(concat_prompt_baseline(built, {{"anger", {"fear"}}}, state, vocab),
                    DuplicateName);
    CHECK_THROWS_AS(concat_prompt_baseline(reg, mix, state, vocab), ConfigInvalid);
  }
}

TEST_CASE("registry: compound spec files are validated") {
  TempDir dir;
  SUBCASE("well-formed list loads in order") {
    auto p = write_file(dir, "specs.txt", "# note\nab | a + b\nsolo | a\n");
    auto specs = load_compound_specs(p);
    REQUIRE(specs.size() == 2);
    CHECK(specs[0].first == "ab");
    CHECK(specs[0].second == std::vector<std::string>{"a", "b"});
    CHECK(specs[1].second == std::vector<std::string>{"a"});
  }
  SUBCASE("duplicate names are rejected") {
    auto p = write_file(dir, "dup.txt", "ab | a + b\nab | b + a\n");
    CHECK_THROWS_AS(load_compound_specs(p), ParseError);
  }
  SUBCASE("free text is not a component list") {
    auto p = write_file(dir, "text.txt", "ab | a person showing two things\n");
    CHECK_THROWS_AS(load_compound_specs(p), ParseError);
  }
}
