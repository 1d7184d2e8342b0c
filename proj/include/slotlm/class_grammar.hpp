// slotlm/class_grammar.hpp

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

#ifndef SLOTLM_CLASS_GRAMMAR_HPP_
#define SLOTLM_CLASS_GRAMMAR_HPP_

#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "slotlm/ngram_model.hpp"
#include "slotlm/ngram_trie.hpp"
#include "slotlm/trainer.hpp"

namespace slotlm {

inline constexpr std::string_view kClassPrefix = "class_";

/// Renames every ordinary word w of a root model to class_w. Slot tokens,
/// <s>, </s> and <unk> keep their names. Throws ModelError if a word already
/// carries the prefix (double processing) or a slot is not in the vocabulary.
NGramModel prefix_root_vocab(const NGramModel& model,
                             const std::set<std::string>& slot_names);

/// Entity lexicons in config order: (slot name, entity phrases).
using Lexicons = std::vector<std::pair<std::string, std::vector<std::string>>>;

/// Replaces entity phrases by their slot token, scanning left to right and
/// taking the longest phrase that starts at the current position. Equal
/// lengths go to the slot listed first.
std::vector<Sentence> substitute_entities(std::span<const Sentence> corpus,
                                          const Lexicons& lexicons);

enum class PartitionPolicy { kViterbi, kSum };

/// One phrase of a partition: tokens [begin, end) and its class, either a
/// slot name or the (prefixed) root word for a singleton class.
struct Phrase {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string cls;
  bool is_slot = false;
};

using PhrasePartition = std::vector<Phrase>;

struct ClassScore {
  double score = 0.0;  // log10
  PhrasePartition best;
};

/// Root model over class_ words and slot tokens plus one sub-grammar per
/// slot over SLOT_ words.
class ClassGrammar {
 public:
  struct Slot {
    std::string name;
    std::shared_ptr<const NGramModel> model;
    std::shared_ptr<const NGramTrie> trie;
  };

  /// Throws ModelError when a slot token is missing from the root, a
  /// sub-grammar word lacks its slot prefix or a sub-grammar contains a slot
  /// token.
  ClassGrammar(NGramModel root, std::map<std::string, NGramModel> subs);

  const NGramModel& root() const { return *root_; }
  const NGramTrie& root_trie() const { return *root_trie_; }
  const std::vector<Slot>& slots() const { return slots_; }
  /// Index into slots(), or -1.
  int slot_index(std::string_view name) const;

  /// Copy with one sub-grammar replaced; other members are shared.
  ClassGrammar with_slot(const std::string& name, NGramModel sub) const;

 private:
  ClassGrammar() = default;
  void check() const;

  std::shared_ptr<const NGramModel> root_;
  std::shared_ptr<const NGramTrie> root_trie_;
  std::vector<Slot> slots_;
};

/// Scores plain tokens ("play white bird"). A token may be read as the root
/// word class_t or as the word SLOT_t of any sub-grammar containing it. The
/// score of a partition is the root chain over its classes plus, for every
/// slot phrase, the sub-grammar score of <s> phrase </s>. Viterbi takes the
/// best partition, sum the log-sum over all of them; `best` is the argmax
/// either way. Throws ModelError for a token no vocabulary covers.
ClassScore class_sentence_score(const ClassGrammar& g,
                                std::span<const std::string> words,
                                PartitionPolicy policy = PartitionPolicy::kViterbi);

/// Same, for tokens already in graph form (class_play, SONG-SLOT_white):
/// each token has exactly one reading.
ClassScore class_sentence_score_prefixed(
    const ClassGrammar& g, std::span<const std::string> tokens,
    PartitionPolicy policy = PartitionPolicy::kViterbi);

/// Linear interpolation lambda*P_A + (1-lambda)*P_B over the union of both
/// entry sets, each side evaluated with its own back-off recursion. A word
/// unknown to one side gets probability 0 there. Back-off weights are
/// recomputed so the result normalizes. Throws ModelError for lambda outside
/// [0,1] or a difference model.
NGramModel interpolate(const NGramModel& a, const NGramModel& b, double lambda);

}  // namespace slotlm

#endif  // SLOTLM_CLASS_GRAMMAR_HPP_
