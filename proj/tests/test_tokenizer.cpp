#include <doctest.h>

#include "vtc/errors.hpp"
#include "vtc/tokenizer.hpp"

using namespace vtc;

TEST_CASE("tokenize lowercases and splits on punctuation") {
  auto words = tokenize_words("A face, showing JOY!  plain_token x2");
  REQUIRE(words.size() == 6);
  CHECK(words[0] == "a");
  CHECK(words[1] == "face");
  CHECK(words[2] == "showing");
  CHECK(words[3] == "joy");
  CHECK(words[4] == "plain_token");
  CHECK(words[5] == "x2");
  CHECK(tokenize_words("...").empty());
}

TEST_CASE("vocabulary assigns first-appearance ids with unk at zero") {
  Vocabulary v = Vocabulary::build({"red fox", "fox jumps"});
  CHECK(v.size() == 4);  // <unk>, red, fox, jumps
  CHECK(v.id("red") == 1);
  CHECK(v.id("fox") == 2);
  CHECK(v.id("jumps") == 3);
  CHECK(v.id("missing") == Vocabulary::kUnkId);
  CHECK(v.words()[0] == "<unk>");
}

TEST_CASE("encode truncates at max tokens and reports it") {
  Vocabulary v = Vocabulary::build({"a b c d e"});
  bool truncated = false;
  auto ids = v.encode("a b c d e", 3, &truncated);
  CHECK(ids.size() == 3);
  CHECK(truncated);
  ids = v.encode("a b", 3, &truncated);
  CHECK(ids.size() == 2);
  CHECK_FALSE(truncated);
}

TEST_CASE("vocabulary round trips through its word list") {
  Vocabulary v = Vocabulary::build({"alpha beta gamma"});
  Vocabulary w = Vocabulary::from_words(v.words());
  CHECK(w.size() == v.size());
  CHECK(w.id("beta") == v.id("beta"));
  CHECK_THROWS_AS(Vocabulary::from_words({"nounk"}), SchemaMismatch);
  CHECK_THROWS_AS(Vocabulary::from_words({"<unk>", "a", "a"}), SchemaMismatch);
}
