// slotlm/ngram_trie.hpp

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

#ifndef SLOTLM_NGRAM_TRIE_HPP_
#define SLOTLM_NGRAM_TRIE_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "slotlm/ngram_model.hpp"

namespace slotlm {

/// Language-model state packed into 64 bits: the top 8 bits hold the
/// n-gram tree depth (history length), the low 56 bits the node index
/// within that depth.
class StateId64 {
 public:
  static constexpr int kDepthBits = 8;
  static constexpr int kIndexBits = 56;
  static constexpr std::uint64_t kMaxIndex = (std::uint64_t{1} << kIndexBits) - 1;

  constexpr StateId64() = default;
  static constexpr StateId64 encode(unsigned depth, std::uint64_t index) {
    return StateId64((std::uint64_t{depth} << kIndexBits) | (index & kMaxIndex));
  }
  static constexpr StateId64 from_bits(std::uint64_t bits) { return StateId64(bits); }
  /// Sentinel that never names a trie node.
  static constexpr StateId64 none() { return StateId64(~std::uint64_t{0}); }

  constexpr unsigned depth() const { return static_cast<unsigned>(bits_ >> kIndexBits); }
  constexpr std::uint64_t index() const { return bits_ & kMaxIndex; }
  constexpr std::uint64_t bits() const { return bits_; }
  constexpr bool is_none() const { return bits_ == ~std::uint64_t{0}; }

  friend constexpr bool operator==(StateId64, StateId64) = default;
  friend constexpr auto operator<=>(StateId64, StateId64) = default;

 private:
  constexpr explicit StateId64(std::uint64_t bits) : bits_(bits) {}
  std::uint64_t bits_ = 0;
};

struct Advance {
  double score = 0.0;  // log10 P(word | state history)
  StateId64 next;
};

/// One step of the back-off recursion, for diagnostics: either a back-off
/// weight applied at `history` or the entry {history, word} that matched.
struct TraceStep {
  WordSeq history;
  bool matched = false;
  double value = 0.0;
};

/// Immutable n-gram tree. Depth d holds the entries of order d sorted by
/// word sequence, so the children of a node form a contiguous range.
class NGramTrie {
 public:
  struct Node {
    WordId word = kNoWord;
    double logprob = 0.0;
    double backoff = 0.0;
    std::uint64_t parent = 0;
    std::uint64_t child_begin = 0;
    std::uint64_t child_end = 0;
  };

  NGramTrie() = default;
  /// Throws ModelError when a depth needs more than 2^56 nodes.
  explicit NGramTrie(const NGramModel& model);

  int order() const { return order_; }
  bool is_difference() const { return is_difference_; }
  const Vocab& vocab() const { return vocab_; }
  WordId bos() const { return bos_; }
  WordId eos() const { return eos_; }

  std::size_t node_count(unsigned depth) const { return levels_.at(depth).size(); }
  const Node& node(StateId64 s) const { return levels_.at(s.depth()).at(s.index()); }

  StateId64 root() const { return StateId64::encode(0, 0); }
  /// State after <s>: the <s> unigram node for order >= 2, else the root.
  StateId64 bos_state() const;

  bool valid(StateId64 s) const;
  /// Word sequence spelled by the path to `s`.
  WordSeq history(StateId64 s) const;
  /// Node for an exact word sequence, or none().
  StateId64 lookup(std::span<const WordId> words) const;
  /// Longest suffix of `history` (at most order-1 words) that is an entry.
  StateId64 state_for(std::span<const WordId> history) const;

  /// Back-off score of `word` after state `s` and the next state. Throws
  /// ModelError for an out-of-vocabulary word or an invalid state.
  Advance advance(StateId64 s, WordId word) const;
  std::vector<TraceStep> trace(StateId64 s, WordId word) const;

  /// Chain-rule log10 probability of <s> words </s>.
  double sentence_logprob(std::span<const WordId> words) const;

  /// Binary dump: magic "NGT1" followed by little-endian records.
  std::string serialize() const;
  static NGramTrie deserialize(std::string_view bytes);

 private:
  std::uint64_t find_child(unsigned depth, std::uint64_t index, WordId w) const;

  int order_ = 0;
  bool is_difference_ = false;
  Vocab vocab_;
  WordId bos_ = kNoWord;
  WordId eos_ = kNoWord;
  // levels_[0] holds the single root node.
  std::vector<std::vector<Node>> levels_;
};

}  // namespace slotlm

#endif  // SLOTLM_NGRAM_TRIE_HPP_
