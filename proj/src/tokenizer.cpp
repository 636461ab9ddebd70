#include "vtc/tokenizer.hpp"

#include <cctype>

#include "vtc/errors.hpp"

namespace vtc {

std::vector<std::string> tokenize_words(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char raw : text) {
    const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
    const bool word_char = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
    if (word_char) {
      cur.push_back(c);
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

Vocabulary::Vocabulary() {
  words_.push_back("<unk>");
  index_["<unk>"] = kUnkId;
}

Vocabulary Vocabulary::build(const std::vector<std::string>& texts) {
  Vocabulary v;
  for (const auto& text : texts) {
    for (const auto& w : tokenize_words(text)) {
      if (v.index_.emplace(w, static_cast<int>(v.words_.size())).second) v.words_.push_back(w);
    }
  }
  return v;
}

Vocabulary Vocabulary::from_words(std::vector<std::string> words) {
  if (words.empty() || words[0] != "<unk>")
    throw SchemaMismatch("Vocabulary: word list must start with <unk>");
  Vocabulary v;
  v.words_.clear();
  v.index_.clear();
  for (auto& w : words) {
    const int next = static_cast<int>(v.words_.size());
    if (!v.index_.emplace(w, next).second)
      throw SchemaMismatch("Vocabulary: duplicate word '" + w + "'");
    v.words_.push_back(std::move(w));
  }
  return v;
}

int Vocabulary::id(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? kUnkId : it->second;
}

std::vector<int> Vocabulary::encode(const std::string& text, int max_tokens,
                                    bool* truncated) const {
  auto words = tokenize_words(text);
  if (truncated) *truncated = max_tokens >= 0 && static_cast<int>(words.size()) > max_tokens;
  if (max_tokens >= 0 && static_cast<int>(words.size()) > max_tokens)
    words.resize(static_cast<size_t>(max_tokens));
  std::vector<int> ids;
  ids.reserve(words.size());
  for (const auto& w : words) ids.push_back(id(w));
  return ids;
}

}  // namespace vtc
