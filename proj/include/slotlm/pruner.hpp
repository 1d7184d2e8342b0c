// slotlm/pruner.hpp

// Copyright 2026  The slotlm Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef SLOTLM_PRUNER_HPP_
#define SLOTLM_PRUNER_HPP_

#include <map>
#include <string>
#include <vector>

#include "slotlm/ngram_model.hpp"

namespace slotlm {

/// How to shrink a model. In threshold mode an entry {H,w} of order k >= 2
/// is dropped when P(w|H) * |log P(w|H) - (alpha(H) + log P(w|H'))| falls
/// below the threshold for order k (orders without a threshold keep
/// everything). In target-order mode all orders above max_order go.
struct PruneSpec {
  enum class Mode { kThreshold, kTargetOrder };

  Mode mode = Mode::kTargetOrder;
  std::map<int, double> thresholds;
  int max_order = 1;

  static PruneSpec target_order(int k);
  /// Same threshold for every order >= 2.
  static PruneSpec threshold(double theta);
};

/// Builds C with entries(C) a subset of entries(B): all unigrams kept, prefix
/// closure restored, kept logprobs copied bit-for-bit from B and back-off
/// weights recomputed so C normalizes. Throws ModelError for a difference
/// model, a spec that would drop unigrams, or a negative threshold.
NGramModel prune(const NGramModel& b, const PruneSpec& spec);

struct SubsetReport {
  std::vector<std::string> missing_from_b;     // entries of C absent in B
  std::vector<std::string> missing_unigrams;   // vocabulary words C lacks
  std::vector<std::string> prefix_violations;  // entries of C with no history
  bool ok() const {
    return missing_from_b.empty() && missing_unigrams.empty() &&
           prefix_violations.empty();
  }
};

/// Checks the preconditions a difference model needs from (B, C). Entries
/// are compared by word strings. Throws ModelError on vocabulary mismatch.
SubsetReport verify_subset(const NGramModel& b, const NGramModel& c);

}  // namespace slotlm

#endif  // SLOTLM_PRUNER_HPP_
