#include "vtc/folds.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <unordered_map>

#include "vtc/errors.hpp"

namespace vtc {
namespace {

// Folds keyed by a per-record string (class label or patient id), one fold
// per distinct key in first-appearance order.
FoldSpec folds_by_key(const Manifest& manifest, FoldScheme scheme,
                      const std::string& (*key_of)(const ManifestRecord&),
                      const char* key_name) {
  FoldSpec spec;
  spec.scheme = scheme;
  std::unordered_map<std::string, int> fold_of;
  for (const auto& rec : manifest.records) {
    const std::string& key = key_of(rec);
    if (key.empty())
      throw MissingMetadata("record '" + rec.id + "' carries no " + key_name);
    auto [it, inserted] = fold_of.try_emplace(key, spec.fold_count());
    if (inserted) spec.held_out_keys.push_back(key);
    spec.assignments.push_back(it->second);
  }
  return spec;
}

const std::string& label_of(const ManifestRecord& r) { return r.label; }
const std::string& patient_of(const ManifestRecord& r) { return r.patient; }

}  // namespace

FoldScheme fold_scheme_from_string(const std::string& s) {
  if (s == "kfold") return FoldScheme::kKFold;
  if (s == "loco") return FoldScheme::kLeaveOneClassOut;
  if (s == "lopo") return FoldScheme::kLeaveOnePatientOut;
  throw UnknownScheme("unknown fold scheme '" + s + "' (expected kfold, loco, or lopo)");
}

std::vector<int> FoldSpec::eval_indices(int fold) const {
  std::vector<int> out;
  for (size_t i = 0; i < assignments.size(); ++i)
    if (assignments[i] == fold) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<int> FoldSpec::train_indices(int fold) const {
  std::vector<int> out;
  for (size_t i = 0; i < assignments.size(); ++i)
    if (assignments[i] != fold) out.push_back(static_cast<int>(i));
  return out;
}

FoldSpec make_folds(const Manifest& manifest, FoldScheme scheme, int k, uint64_t seed) {
  const int n = static_cast<int>(manifest.records.size());
  if (n == 0) throw EmptyInput("make_folds: empty manifest");
  switch (scheme) {
    case FoldScheme::kLeaveOneClassOut:
      return folds_by_key(manifest, scheme, label_of, "class label");
    case FoldScheme::kLeaveOnePatientOut:
      return folds_by_key(manifest, scheme, patient_of, "patient id");
    case FoldScheme::kKFold:
      break;
  }
  if (k < 2) throw ConfigInvalid("make_folds: kfold needs k >= 2, got " + std::to_string(k));
  if (k > n)
    throw ConfigInvalid("make_folds: k=" + std::to_string(k) + " exceeds " +
                        std::to_string(n) + " samples");
  FoldSpec spec;
  spec.scheme = scheme;
  spec.held_out_keys.assign(k, "");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(seed, 0x666f6c64ULL);  // fold-assignment stream
  std::shuffle(order.begin(), order.end(), rng);
  spec.assignments.assign(n, 0);
  for (int pos = 0; pos < n; ++pos) spec.assignments[order[pos]] = pos % k;
  return spec;
}

}  // namespace vtc
