#pragma once

#include <string>
#include <vector>

#include "vtc/data_io.hpp"
#include "vtc/util.hpp"

namespace vtc {

enum class FoldScheme { kKFold, kLeaveOneClassOut, kLeaveOnePatientOut };

FoldScheme fold_scheme_from_string(const std::string& s);  // UnknownScheme

// Partition of a manifest's records into evaluation folds. `assignments[i]`
// is the fold holding record i's evaluation slot; training for fold f is
// every record assigned elsewhere.
struct FoldSpec {
  FoldScheme scheme = FoldScheme::kKFold;
  std::vector<int> assignments;        // record index -> fold id
  std::vector<std::string> held_out_keys;  // per fold: class/patient, "" for kfold

  int fold_count() const { return static_cast<int>(held_out_keys.size()); }
  std::vector<int> eval_indices(int fold) const;
  std::vector<int> train_indices(int fold) const;
};

// kfold: `k` seeded near-equal folds (sizes differ by at most one).
// leave_one_class_out / leave_one_patient_out: one fold per distinct label /
// patient in first-appearance order; `k` and `seed` are ignored.
FoldSpec make_folds(const Manifest& manifest, FoldScheme scheme, int k = 0, uint64_t seed = 0);

}  // namespace vtc
