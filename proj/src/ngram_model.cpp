// ngram_model.cpp

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

#include "slotlm/ngram_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace slotlm {

WordId Vocab::add(std::string_view word) {
  std::string key(word);
  auto it = ids_.find(key);
  if (it != ids_.end()) return it->second;
  const auto id = static_cast<WordId>(words_.size());
  words_.push_back(key);
  ids_.emplace(std::move(key), id);
  return id;
}

std::optional<WordId> Vocab::find(std::string_view word) const {
  auto it = ids_.find(std::string(word));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

WordId Vocab::id(std::string_view word) const {
  auto found = find(word);
  if (!found) throw ModelError("word not in vocabulary: " + std::string(word));
  return *found;
}

void Vocab::rename(WordId id, std::string new_word) {
  if (contains(new_word)) {
    throw ModelError("cannot rename to existing word: " + new_word);
  }
  ids_.erase(words_.at(id));
  ids_.emplace(new_word, id);
  words_[id] = std::move(new_word);
}

NGramModel::NGramModel(int order) {
  if (order < 1) throw ModelError("model order must be >= 1");
  entries_.resize(order);
}

void NGramModel::set_order(int order) {
  if (order < 1) throw ModelError("model order must be >= 1");
  entries_.resize(order);
}

WordId NGramModel::bos() const {
  return vocab_.find(kBos).value_or(kNoWord);
}

WordId NGramModel::eos() const {
  return vocab_.find(kEos).value_or(kNoWord);
}

std::size_t NGramModel::num_entries() const {
  std::size_t n = 0;
  for (const auto& m : entries_) n += m.size();
  return n;
}

const NGramEntry* NGramModel::find(std::span<const WordId> ngram) const {
  if (ngram.empty() || ngram.size() > entries_.size()) return nullptr;
  const auto& m = entries_[ngram.size() - 1];
  auto it = m.find(WordSeq(ngram.begin(), ngram.end()));
  return it == m.end() ? nullptr : &it->second;
}

NGramEntry* NGramModel::find(std::span<const WordId> ngram) {
  return const_cast<NGramEntry*>(std::as_const(*this).find(ngram));
}

void NGramModel::insert(WordSeq ngram, const NGramEntry& entry) {
  if (ngram.empty() || ngram.size() > entries_.size()) {
    throw ModelError("n-gram length out of range for order " +
                     std::to_string(order()));
  }
  auto& m = entries_[ngram.size() - 1];
  auto [it, inserted] = m.emplace(std::move(ngram), entry);
  if (!inserted) throw ModelError("duplicate n-gram: " + join(it->first));
}

double NGramModel::backoff(std::span<const WordId> history) const {
  const NGramEntry* e = find(history);
  return (e && e->has_backoff) ? e->backoff : 0.0;
}

double NGramModel::logprob(std::span<const WordId> history,
                           WordId word) const {
  const auto max_hist = static_cast<std::size_t>(order() - 1);
  if (history.size() > max_hist) {
    history = history.subspan(history.size() - max_hist);
  }
  double acc = 0.0;
  WordSeq ngram;
  ngram.reserve(history.size() + 1);
  for (std::size_t start = 0;; ++start) {
    auto h = history.subspan(start);
    ngram.assign(h.begin(), h.end());
    ngram.push_back(word);
    if (const NGramEntry* e = find(ngram)) return acc + e->logprob;
    if (h.empty()) {
      throw ModelError("word has no unigram entry: " +
                       (word < vocab_.size() ? vocab_.word(word)
                                             : std::to_string(word)));
    }
    acc += backoff(h);
  }
}

bool NGramModel::has_extensions(std::span<const WordId> history) const {
  if (history.size() >= entries_.size()) return false;
  const auto& m = entries_[history.size()];
  WordSeq key(history.begin(), history.end());
  auto it = m.lower_bound(key);
  return it != m.end() &&
         std::equal(key.begin(), key.end(), it->first.begin());
}

std::vector<WordId> NGramModel::extensions(
    std::span<const WordId> history) const {
  std::vector<WordId> out;
  if (history.size() >= entries_.size()) return out;
  const auto& m = entries_[history.size()];
  WordSeq key(history.begin(), history.end());
  for (auto it = m.lower_bound(key);
       it != m.end() && std::equal(key.begin(), key.end(), it->first.begin());
       ++it) {
    out.push_back(it->first.back());
  }
  return out;
}

void NGramModel::validate() const {
  for (WordId w = 0; w < vocab_.size(); ++w) {
    if (!entries_[0].count(WordSeq{w})) {
      throw ModelError("vocabulary word without unigram: " + vocab_.word(w));
    }
  }
  for (int k = 1; k <= order(); ++k) {
    for (const auto& [ngram, entry] : entries(k)) {
      if (static_cast<int>(ngram.size()) != k) {
        throw ModelError("entry stored at wrong order: " + join(ngram));
      }
      for (WordId w : ngram) {
        if (w >= vocab_.size()) {
          throw ModelError("entry references unknown word id " +
                           std::to_string(w));
        }
      }
      if (k > 1) {
        std::span<const WordId> hist(ngram.data(), ngram.size() - 1);
        if (!find(hist)) {
          throw ModelError("prefix closure violated: history of " +
                           join(ngram) + " is not an entry");
        }
      }
      if (!is_difference_ && entry.logprob > 0.0) {
        throw ModelError("positive logprob in non-difference model: " +
                         join(ngram));
      }
      if (!std::isfinite(entry.logprob) ||
          (entry.has_backoff && !std::isfinite(entry.backoff))) {
        throw ModelError("non-finite value at " + join(ngram));
      }
    }
  }
}

std::vector<std::string> NGramModel::words_of(
    std::span<const WordId> ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (WordId w : ids) out.push_back(vocab_.word(w));
  return out;
}

std::string NGramModel::join(std::span<const WordId> ids) const {
  std::string out;
  for (WordId w : ids) {
    if (!out.empty()) out += ' ';
    out += w < vocab_.size() ? vocab_.word(w) : "#" + std::to_string(w);
  }
  return out;
}

namespace {

class NormalizationChecker {
 public:
  explicit NormalizationChecker(const NGramModel& m)
      : m_(m), bos_(m.bos()) {}

  // Total probability mass of P(.|history) over all predictable words.
  double total(const WordSeq& history) {
    auto it = memo_.find(history);
    if (it != memo_.end()) return it->second;
    double sum = 0.0;
    if (history.empty()) {
      for (const auto& [ngram, e] : m_.entries(1)) {
        if (ngram[0] != bos_) sum += std::pow(10.0, e.logprob);
      }
    } else {
      WordSeq lower(history.begin() + 1, history.end());
      const double lower_total = total(lower);
      double seen = 0.0, seen_lower = 0.0;
      for (WordId w : m_.extensions(history)) {
        if (w == bos_) continue;
        WordSeq ngram = history;
        ngram.push_back(w);
        seen += std::pow(10.0, m_.find(ngram)->logprob);
        seen_lower += std::pow(10.0, m_.logprob(lower, w));
      }
      sum = seen + std::pow(10.0, m_.backoff(history)) *
                       (lower_total - seen_lower);
    }
    memo_.emplace(history, sum);
    return sum;
  }

 private:
  const NGramModel& m_;
  WordId bos_;
  std::map<WordSeq, double> memo_;
};

}  // namespace

double max_normalization_error(const NGramModel& model) {
  NormalizationChecker checker(model);
  double worst = std::abs(checker.total({}) - 1.0);
  for (int k = 1; k < model.order(); ++k) {
    for (const auto& [ngram, e] : model.entries(k)) {
      if (!model.has_extensions(ngram)) continue;
      worst = std::max(worst, std::abs(checker.total(ngram) - 1.0));
    }
  }
  return worst;
}

void recompute_backoffs(NGramModel& model) {
  const std::size_t num_predictable =
      model.vocab().size() - (model.bos() == kNoWord ? 0 : 1);
  for (int k = 2; k <= model.order(); ++k) {
    const auto& m = model.entries(k);
    auto it = m.begin();
    while (it != m.end()) {
      const WordSeq history(it->first.begin(), it->first.end() - 1);
      const std::span<const WordId> lower(history.data() + 1, history.size() - 1);
      double kept_mass = 0.0, lower_mass = 0.0;
      std::size_t types = 0;
      for (; it != m.end() &&
             std::equal(history.begin(), history.end(), it->first.begin());
           ++it) {
        kept_mass += std::pow(10.0, it->second.logprob);
        lower_mass += std::pow(10.0, model.logprob(lower, it->first.back()));
        ++types;
      }
      NGramEntry* h = model.find(history);
      if (!h) throw ModelError("history missing for " + model.join(history));
      h->has_backoff = true;
      if (types >= num_predictable) {
        h->backoff = 0.0;
      } else {
        // Rounded inputs can leave a hair of negative mass; keep it finite.
        const double numerator = std::max(1.0 - kept_mass, 1e-300);
        const double denominator = std::max(1.0 - lower_mass, 1e-300);
        h->backoff = std::log10(numerator / denominator);
      }
    }
  }
}

std::vector<WordId> predictable_words(const NGramModel& model) {
  std::vector<WordId> out;
  const WordId bos = model.bos();
  for (WordId w = 0; w < model.vocab().size(); ++w) {
    if (w != bos) out.push_back(w);
  }
  return out;
}

std::vector<WordId> map_vocab(const Vocab& from, const Vocab& to) {
  std::vector<WordId> out(from.size(), kNoWord);
  for (WordId w = 0; w < from.size(); ++w) {
    out[w] = to.find(from.word(w)).value_or(kNoWord);
  }
  return out;
}

bool same_vocabulary(const Vocab& a, const Vocab& b) {
  if (a.size() != b.size()) return false;
  for (const auto& w : a.words()) {
    if (!b.contains(w)) return false;
  }
  return true;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace slotlm
