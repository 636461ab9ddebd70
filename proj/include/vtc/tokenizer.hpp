#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace vtc {

// Lowercases and splits on anything outside [a-z0-9_].
std::vector<std::string> tokenize_words(const std::string& text);

// Corpus-built word list. Id 0 is the unknown token; remaining ids follow
// first appearance order, which makes the mapping reproducible from the same
// corpus.
class Vocabulary {
 public:
  static constexpr int kUnkId = 0;

  Vocabulary();
  static Vocabulary build(const std::vector<std::string>& texts);
  static Vocabulary from_words(std::vector<std::string> words);

  int size() const { return static_cast<int>(words_.size()); }
  int id(const std::string& word) const;
  const std::vector<std::string>& words() const { return words_; }

  // Token ids for `text`, truncated to max_tokens. Sets *truncated when the
  // cut dropped tokens.
  std::vector<int> encode(const std::string& text, int max_tokens, bool* truncated = nullptr) const;

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace vtc
