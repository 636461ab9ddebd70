#include "vtc/registry.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "vtc/embedding.hpp"
#include "vtc/errors.hpp"

namespace vtc {
namespace {

const std::array<const char*, 11> kCanonicalEleven = {
    "anger",    "disgust", "fear",    "happiness",    "neutral",       "sadness",
    "surprise", "contempt", "anxiety", "helplessness", "disappointment"};
constexpr int kSevenCount = 7;  // leading entries of kCanonicalEleven

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool has_space(const std::string& s) {
  return std::any_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

// Splits `rest` on " + " separators. The result is a component list only when
// every piece is a bare single-word class name; free text stays a description.
std::vector<std::string> split_components(const std::string& rest) {
  std::vector<std::string> parts;
  size_t pos = 0;
  while (true) {
    size_t sep = rest.find(" + ", pos);
    if (sep == std::string::npos) {
      parts.push_back(trim(rest.substr(pos)));
      break;
    }
    parts.push_back(trim(rest.substr(pos, sep - pos)));
    pos = sep + 3;
  }
  for (const auto& p : parts)
    if (p.empty() || has_space(p)) return {};
  return parts;
}

struct AssetLine {
  int number = 0;
  std::string name;
  std::string rest;
};

std::vector<AssetLine> read_asset_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw AssetMissing("cannot open asset file: " + path);
  std::vector<AssetLine> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t bar = t.find('|');
    if (bar == std::string::npos)
      throw ParseError(path + ":" + std::to_string(number) + ": expected 'name | text'");
    AssetLine al;
    al.number = number;
    al.name = trim(t.substr(0, bar));
    al.rest = trim(t.substr(bar + 1));
    if (al.name.empty() || has_space(al.name))
      throw ParseError(path + ":" + std::to_string(number) +
                       ": class name must be a single word");
    if (al.rest.empty())
      throw ParseError(path + ":" + std::to_string(number) + ": missing text after '|'");
    out.push_back(std::move(al));
  }
  return out;
}

std::string spec_label(const std::string& path, int number) {
  return path + ":" + std::to_string(number);
}

}  // namespace

Subset subset_from_string(const std::string& s) {
  if (s == "eleven") return Subset::kEleven;
  if (s == "seven") return Subset::kSeven;
  if (s == "custom") return Subset::kCustom;
  throw UnknownSubset("unknown class subset '" + s + "' (expected eleven, seven, or custom)");
}

int DescriptionRegistry::index_of(const std::string& name) const {
  for (size_t i = 0; i < classes.size(); ++i)
    if (classes[i].name == name) return static_cast<int>(i);
  return -1;
}

DescriptionRegistry load_registry(const std::string& path, Subset subset) {
  std::vector<ClassDescription> parsed;
  std::unordered_map<std::string, int> by_name;  // name -> index in `parsed`
  for (const AssetLine& al : read_asset_lines(path)) {
    if (by_name.count(al.name))
      throw ParseError(spec_label(path, al.number) + ": duplicate class name '" + al.name + "'");
    ClassDescription cd;
    cd.name = al.name;
    std::vector<std::string> parts = split_components(al.rest);
    if (parts.size() >= 2) {
      for (const auto& p : parts) {
        auto it = by_name.find(p);
        if (it == by_name.end())
          throw ParseError(spec_label(path, al.number) + ": compound '" + al.name +
                           "' references undefined class '" + p + "'");
        if (parsed[it->second].is_compound())
          throw ParseError(spec_label(path, al.number) + ": compound '" + al.name +
                           "' may only reference basic classes, not '" + p + "'");
      }
      cd.components = std::move(parts);
    } else {
      cd.description = al.rest;
    }
    by_name.emplace(cd.name, static_cast<int>(parsed.size()));
    parsed.push_back(std::move(cd));
  }

  DescriptionRegistry reg;
  reg.provenance = path;
  if (subset == Subset::kCustom) {
    reg.classes = std::move(parsed);
    return reg;
  }
  const int want = subset == Subset::kEleven ? static_cast<int>(kCanonicalEleven.size())
                                             : kSevenCount;
  std::unordered_set<std::string> wanted(kCanonicalEleven.begin(),
                                         kCanonicalEleven.begin() + want);
  for (auto& cd : parsed) {
    if (!wanted.count(cd.name)) continue;
    if (cd.is_compound())
      throw ParseError(path + ": class '" + cd.name + "' must be a basic class, not a compound");
    wanted.erase(cd.name);
    reg.classes.push_back(std::move(cd));
  }
  if (!wanted.empty()) {
    std::string missing;
    for (int i = 0; i < want; ++i)
      if (wanted.count(kCanonicalEleven[i])) missing += std::string(" ") + kCanonicalEleven[i];
    throw ParseError(path + ": asset is missing required class(es):" + missing);
  }
  return reg;
}

std::vector<std::pair<std::string, std::vector<std::string>>> load_compound_specs(
    const std::string& path) {
  std::vector<std::pair<std::string, std::vector<std::string>>> specs;
  std::unordered_set<std::string> seen;
  for (const AssetLine& al : read_asset_lines(path)) {
    if (!seen.insert(al.name).second)
      throw ParseError(spec_label(path, al.number) + ": duplicate compound name '" + al.name +
                       "'");
    std::vector<std::string> parts = split_components(al.rest);
    if (parts.empty())
      throw ParseError(spec_label(path, al.number) +
                       ": expected 'name | component + component'");
    specs.emplace_back(al.name, std::move(parts));
  }
  return specs;
}

std::vector<std::string> load_neutral_prompts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw AssetMissing("cannot open asset file: " + path);
  std::vector<std::string> prompts;
  std::string line;
  while (std::getline(in, line)) {
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    prompts.push_back(std::move(t));
  }
  return prompts;
}

std::string sample_neutral_description(const std::vector<std::string>& prompts, Rng& rng) {
  if (prompts.size() < 2)
    throw AssetMissing("sampling a neutral description needs at least two prompts, have " +
                       std::to_string(prompts.size()));
  const int n = static_cast<int>(prompts.size());
  std::uniform_int_distribution<int> first(0, n - 1);
  std::uniform_int_distribution<int> second(0, n - 2);
  int i = first(rng);
  int j = second(rng);
  if (j >= i) ++j;  // uniform over the n-1 prompts other than i
  return prompts[i] + " " + prompts[j];
}

DescriptionRegistry build_class_embedding_set(const DescriptionRegistry& reg,
                                              const ModelState& state, const Vocabulary& vocab) {
  DescriptionRegistry out = reg;
  out.embeddings.assign(reg.classes.size(), Vec());
  for (size_t i = 0; i < reg.classes.size(); ++i) {
    const ClassDescription& cd = reg.classes[i];
    if (cd.is_compound()) continue;
    bool truncated = false;
    std::vector<int> tokens =
        vocab.encode(cd.description, state.config.max_tokens, &truncated);
    if (truncated)
      out.warnings.push_back("class '" + cd.name + "': description truncated to " +
                             std::to_string(state.config.max_tokens) + " tokens");
    const bool known = std::any_of(tokens.begin(), tokens.end(),
                                   [](int t) { return t != Vocabulary::kUnkId; });
    if (!known)
      throw UnknownToken("class '" + cd.name +
                         "': description contains no in-vocabulary words");
    out.embeddings[i] = encode_text(state, tokens);
  }
  for (size_t i = 0; i < reg.classes.size(); ++i) {
    const ClassDescription& cd = reg.classes[i];
    if (!cd.is_compound()) continue;
    std::vector<Vec> parts;
    parts.reserve(cd.components.size());
    // load_registry guarantees components name basic classes in this file.
    for (const auto& name : cd.components) parts.push_back(out.embeddings[out.index_of(name)]);
    out.embeddings[i] = compose_compound(parts);
  }
  return out;
}

DescriptionRegistry extend_with_compounds(
    const DescriptionRegistry& reg,
    const std::vector<std::pair<std::string, std::vector<std::string>>>& specs) {
  if (!reg.has_embeddings())
    throw ConfigInvalid("cannot compose compounds before class embeddings are built");
  DescriptionRegistry out = reg;
  for (const auto& [name, components] : specs) {
    if (out.index_of(name) >= 0)
      throw DuplicateName("compound '" + name + "' already names a registry class");
    if (components.empty())
      throw EmptyInput("compound '" + name + "' lists no components");
    std::vector<Vec> parts;
    parts.reserve(components.size());
    for (const auto& comp : components) {
      int idx = out.index_of(comp);
      if (idx < 0)
        throw UnknownComponent("compound '" + name + "' references unknown class '" + comp +
                               "'");
      parts.push_back(out.embeddings[idx]);
    }
    out.classes.push_back(ClassDescription{name, "", components});
    out.embeddings.push_back(compose_compound(parts));
  }
  return out;
}

DescriptionRegistry concat_prompt_baseline(
    const DescriptionRegistry& reg,
    const std::vector<std::pair<std::string, std::vector<std::string>>>& specs,
    const ModelState& state, const Vocabulary& vocab) {
  if (!reg.has_embeddings())
    throw ConfigInvalid("cannot extend a registry before class embeddings are built");
  DescriptionRegistry out = reg;
  for (const auto& [name, components] : specs) {
    if (out.index_of(name) >= 0)
      throw DuplicateName("compound '" + name + "' already names a registry class");
    if (components.empty())
      throw EmptyInput("compound '" + name + "' lists no components");
    std::string joined;
    for (const auto& comp : components) {
      int idx = out.index_of(comp);
      if (idx < 0)
        throw UnknownComponent("compound '" + name + "' references unknown class '" + comp +
                               "'");
      const ClassDescription& cd = out.classes[idx];
      if (cd.description.empty())
        throw ConfigInvalid("component '" + comp + "' of '" + name +
                            "' carries no description text to concatenate");
      if (!joined.empty()) joined += " ";
      joined += cd.description;
    }
    bool truncated = false;
    std::vector<int> tokens = vocab.encode(joined, state.config.max_tokens, &truncated);
    if (truncated)
      out.warnings.push_back("compound '" + name + "': concatenated description truncated to " +
                             std::to_string(state.config.max_tokens) + " tokens");
    out.classes.push_back(ClassDescription{name, joined, components});
    out.embeddings.push_back(encode_text(state, tokens));
  }
  return out;
}

}  // namespace vtc
