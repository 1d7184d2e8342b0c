// slotlm/dlm.hpp

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

#ifndef SLOTLM_DLM_HPP_
#define SLOTLM_DLM_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "slotlm/ngram_model.hpp"
#include "slotlm/ngram_trie.hpp"

namespace slotlm {

/*
  A difference model A of (B, C) satisfies, for every history H and word w,

      log P_A(w|H) = log P_B(w|H) - log P_C(w|H)

  when all three are evaluated with the ordinary back-off recursion. It is
  materialized with the entry set of B:

      logprob_A(H,w) = logprob_B(H,w) - log P_C(w|H)   for {H,w} in B
      alpha_A(H)     = alpha_B(H) - alpha_C(H)          (alpha_C = 0 if H not in C)

  which is exact as long as entries(C) is a subset of entries(B) and both
  share a vocabulary. Adding A's score to C's score therefore recovers B.
*/

/// Throws ModelError on vocabulary mismatch, difference-model inputs or when
/// C is not a subset of B.
NGramModel build_dlm(const NGramModel& b, const NGramModel& c);

/// Rescoring correction for `word` after `state`: the ordinary trie advance
/// over a difference model.
inline Advance dlm_query(const NGramTrie& a, StateId64 state, WordId word) {
  return a.advance(state, word);
}

struct DlmOffender {
  std::vector<std::string> history;
  std::string word;
  double error = 0.0;
  /// First history along the back-off chain whose stored value disagrees
  /// with alpha_B - alpha_C or logprob_B - log P_C.
  std::vector<std::string> suspect_history;
  std::string suspect_kind;  // "backoff", "logprob", "entry" (missing from B) or empty
};

struct DlmReport {
  std::size_t samples = 0;
  double max_error = 0.0;
  double tolerance = 1e-9;
  bool pass = true;
  std::string note;
  std::optional<DlmOffender> worst;
};

/// Samples random (H, w) with |H| up to order+1 and compares A against
/// B - C. Passes iff the largest error is within `tolerance`.
DlmReport verify_dlm(const NGramModel& a, const NGramModel& b,
                     const NGramModel& c, std::size_t samples,
                     std::uint64_t seed, double tolerance = 1e-9);

struct DlmProvenance {
  std::string b_id;  // fingerprint of B
  std::string c_id;  // fingerprint of C
  std::uint64_t generation = 0;
};

/// Difference models of the root grammar and every slot.
struct DlmSet {
  NGramModel root;
  DlmProvenance root_provenance;
  std::map<std::string, NGramModel> slots;
  std::map<std::string, DlmProvenance> slot_provenance;
};

/// On-disk index of a DlmSet: file names relative to the manifest.
struct DlmManifest {
  struct Item {
    std::string file;
    DlmProvenance provenance;
  };
  std::uint64_t generation = 0;
  Item root;
  std::map<std::string, Item> slots;
};

void write_dlm_manifest(const DlmManifest& manifest,
                        const std::filesystem::path& path);
DlmManifest read_dlm_manifest(const std::filesystem::path& path);

}  // namespace slotlm

#endif  // SLOTLM_DLM_HPP_
