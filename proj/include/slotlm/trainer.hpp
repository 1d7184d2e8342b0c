// slotlm/trainer.hpp

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

#ifndef SLOTLM_TRAINER_HPP_
#define SLOTLM_TRAINER_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "slotlm/ngram_model.hpp"
#include "slotlm/pruner.hpp"

namespace slotlm {

using Sentence = std::vector<std::string>;

/// N-gram counts of sentences padded as <s> w1 .. wn </s>. Only predicted
/// positions are counted, so <s> never appears as a predicted word.
struct CountTable {
  int order = 0;
  Vocab vocab;
  std::vector<std::map<WordSeq, std::uint64_t>> counts;  // [k-1] -> order k

  std::uint64_t count(std::span<const WordId> ngram) const;
  /// Sum over w of count({history, w}).
  std::uint64_t history_total(std::span<const WordId> history) const;
  std::uint64_t count(const std::vector<std::string>& ngram) const;
};

/// Throws ModelError when order < 1. Counting is sharded over
/// thread_cap() workers and merged.
CountTable count_ngrams(std::span<const Sentence> sentences, int order);

/// Back-off Witten-Bell estimate with a closed vocabulary: the counted words
/// plus `extra_vocab`. Seen n-grams get c/(c(H)+T(H)); the reserved mass
/// T/(c+T) goes to the lower order through the back-off weight. Unigram
/// mass reserved this way is spread uniformly over words never seen; a
/// history followed by every word gets maximum-likelihood estimates.
/// The vocabulary is ordered <s>, </s>, then the remaining words sorted.
NGramModel estimate(const CountTable& counts,
                    std::span<const std::string> extra_vocab = {});

NGramModel train_model(std::span<const Sentence> sentences, int order,
                       std::span<const std::string> extra_vocab = {});

/// One slot of the class grammar, e.g. SONG-SLOT with its entity file.
struct SlotConfig {
  std::string name;
  std::filesystem::path entities;
  int order = 3;
  PruneSpec prune = PruneSpec::target_order(1);
};

/// "SONG-SLOT" + "white" -> "SONG-SLOT_white".
std::string slot_word(std::string_view slot, std::string_view token);
/// Inverse of slot_word; throws ModelError if `word` lacks the prefix.
std::string strip_slot_prefix(std::string_view slot, std::string_view word);

/// Trains a sub-grammar treating every entity phrase as one sentence over
/// slot-prefixed tokens. `extra_vocab` holds already-prefixed words that
/// must stay in the vocabulary even if no entity uses them.
NGramModel train_subgrammar(std::span<const std::string> entities,
                            const SlotConfig& slot,
                            std::span<const std::string> extra_vocab = {});

}  // namespace slotlm

#endif  // SLOTLM_TRAINER_HPP_
