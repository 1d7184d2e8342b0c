// slotlm/ngram_model.hpp

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

#ifndef SLOTLM_NGRAM_MODEL_HPP_
#define SLOTLM_NGRAM_MODEL_HPP_

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace slotlm {

using WordId = std::uint32_t;
using WordSeq = std::vector<WordId>;

inline constexpr WordId kNoWord = std::numeric_limits<WordId>::max();

inline constexpr std::string_view kBos = "<s>";
inline constexpr std::string_view kEos = "</s>";
inline constexpr std::string_view kUnk = "<unk>";

// Conventional log10 value for "impossible" words such as <s>.
inline constexpr double kLogZero = -99.0;

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bidirectional word-string / word-id table. Ids are dense and assigned in
/// insertion order.
class Vocab {
 public:
  WordId add(std::string_view word);
  std::optional<WordId> find(std::string_view word) const;
  /// Throws ModelError for unknown words.
  WordId id(std::string_view word) const;
  const std::string& word(WordId id) const { return words_.at(id); }
  bool contains(std::string_view word) const { return find(word).has_value(); }
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }
  void rename(WordId id, std::string new_word);

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, WordId> ids_;
};

struct NGramEntry {
  double logprob = 0.0;
  double backoff = 0.0;  // log10 alpha; meaningful only when has_backoff
  bool has_backoff = false;
};

/// ARPA-style back-off model. Entries are keyed by the full n-gram
/// (history followed by the predicted word) and kept per order in
/// lexicographic word-id order.
class NGramModel {
 public:
  using OrderMap = std::map<WordSeq, NGramEntry>;

  explicit NGramModel(int order = 1);

  int order() const { return static_cast<int>(entries_.size()); }
  /// Grows or shrinks the number of orders; shrinking drops entries.
  void set_order(int order);

  Vocab& vocab() { return vocab_; }
  const Vocab& vocab() const { return vocab_; }

  bool is_difference() const { return is_difference_; }
  void set_difference(bool value) { is_difference_ = value; }

  WordId bos() const;
  WordId eos() const;

  const OrderMap& entries(int k) const { return entries_.at(k - 1); }
  OrderMap& mutable_entries(int k) { return entries_.at(k - 1); }
  std::size_t num_entries(int k) const { return entries(k).size(); }
  std::size_t num_entries() const;

  const NGramEntry* find(std::span<const WordId> ngram) const;
  NGramEntry* find(std::span<const WordId> ngram);
  /// Throws ModelError if the n-gram already exists or is too long.
  void insert(WordSeq ngram, const NGramEntry& entry);

  /// Back-off weight of `history`, 0 if it is not an entry or has none.
  double backoff(std::span<const WordId> history) const;
  /// log10 P(word | history) through the back-off recursion. Histories
  /// longer than order-1 are truncated to their last order-1 words.
  double logprob(std::span<const WordId> history, WordId word) const;

  /// True if some entry of order |history|+1 extends `history`.
  bool has_extensions(std::span<const WordId> history) const;
  /// Words w with {history, w} an entry, in word-id order.
  std::vector<WordId> extensions(std::span<const WordId> history) const;

  /// Structural checks: unigram coverage of the vocabulary, prefix
  /// closure, history lengths, and logprob <= 0 for non-difference models.
  /// Throws ModelError naming the first violation.
  void validate() const;

  /// Converts an n-gram to its word strings.
  std::vector<std::string> words_of(std::span<const WordId> ids) const;
  std::string join(std::span<const WordId> ids) const;

 private:
  Vocab vocab_;
  std::vector<OrderMap> entries_;
  bool is_difference_ = false;
};

/// Largest |sum_w P(w|H) - 1| over the empty history and every history with
/// extensions, summing over the whole vocabulary except <s>. Runs in time
/// linear in the number of entries.
double max_normalization_error(const NGramModel& model);

/// Sets the back-off weight of every history with extensions so that each
/// distribution sums to one given the current logprobs. Histories followed
/// by every predictable word get weight 0. Lower orders must already be
/// normalized.
void recompute_backoffs(NGramModel& model);

/// Words of `model` other than <s>, i.e. the support of every conditional
/// distribution.
std::vector<WordId> predictable_words(const NGramModel& model);

/// Maps each word id of `from` to the id of the same string in `to`, or
/// kNoWord when `to` lacks it.
std::vector<WordId> map_vocab(const Vocab& from, const Vocab& to);

bool same_vocabulary(const Vocab& a, const Vocab& b);

/// 64-bit FNV-1a digest, used to fingerprint serialized models.
std::uint64_t fnv1a(std::string_view bytes);

}  // namespace slotlm

#endif  // SLOTLM_NGRAM_MODEL_HPP_
