#pragma once

#include <string>
#include <utility>
#include <vector>

#include "vtc/model.hpp"
#include "vtc/tokenizer.hpp"
#include "vtc/util.hpp"

namespace vtc {

// One class the evaluator can predict: either a basic class carrying a text
// description, or a compound decomposing into basic class names.
struct ClassDescription {
  std::string name;
  std::string description;              // non-empty for basics
  std::vector<std::string> components;  // non-empty marks a compound

  bool is_compound() const { return !components.empty(); }
};

enum class Subset { kEleven, kSeven, kCustom };

// Maps a CLI-style subset string ("eleven" | "seven" | "custom").
Subset subset_from_string(const std::string& s);  // UnknownSubset

// Ordered class list plus (once built) one unit-norm embedding per class.
// Index i of `classes` and `embeddings` always refer to the same class, and
// operations only ever append, so indices are stable for a report's lifetime.
struct DescriptionRegistry {
  std::vector<ClassDescription> classes;
  std::vector<Vec> embeddings;  // empty until build_class_embedding_set
  std::string provenance;       // asset path the classes came from
  std::vector<std::string> warnings;  // e.g. tokenizer truncation notices

  int size() const { return static_cast<int>(classes.size()); }
  bool has_embeddings() const { return !embeddings.empty(); }
  int index_of(const std::string& name) const;  // -1 when absent
};

// Asset lines: `name | description` for basics, `name | a + b` for compounds
// (components single-word, previously defined). '#' comments allowed.
// kEleven / kSeven check for the canonical class sets and keep asset order;
// kCustom takes the file as-is.
DescriptionRegistry load_registry(const std::string& path, Subset subset);

// Compound spec file: `name | component + component` lines only.
std::vector<std::pair<std::string, std::vector<std::string>>> load_compound_specs(
    const std::string& path);

std::vector<std::string> load_neutral_prompts(const std::string& path);

// Space-joined concatenation of two distinct uniformly-drawn prompts.
std::string sample_neutral_description(const std::vector<std::string>& prompts, Rng& rng);

// Embeds every basic class description with the text encoder, then composes
// the registry's own compound entries from those. Descriptions that tokenize
// to nothing but unknowns raise UnknownToken naming the class; truncation is
// recorded in warnings.
DescriptionRegistry build_class_embedding_set(const DescriptionRegistry& reg,
                                              const ModelState& state, const Vocabulary& vocab);

// Appends one composed class per spec: embedding = normalized mean of the
// component embeddings. Components must already exist with embeddings.
DescriptionRegistry extend_with_compounds(
    const DescriptionRegistry& reg,
    const std::vector<std::pair<std::string, std::vector<std::string>>>& specs);

// The concatenation baseline: appends one class per spec whose embedding is
// encode_text of the space-joined component descriptions. Truncation by the
// tokenizer's max_tokens is recorded in warnings.
DescriptionRegistry concat_prompt_baseline(
    const DescriptionRegistry& reg,
    const std::vector<std::pair<std::string, std::vector<std::string>>>& specs,
    const ModelState& state, const Vocabulary& vocab);

}  // namespace vtc
