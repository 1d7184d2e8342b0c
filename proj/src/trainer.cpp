// trainer.cpp

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

#include "slotlm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <thread>

#include "slotlm/io_util.hpp"

namespace slotlm {

std::uint64_t CountTable::count(std::span<const WordId> ngram) const {
  if (ngram.empty() || ngram.size() > counts.size()) return 0;
  const auto& m = counts[ngram.size() - 1];
  auto it = m.find(WordSeq(ngram.begin(), ngram.end()));
  return it == m.end() ? 0 : it->second;
}

std::uint64_t CountTable::count(const std::vector<std::string>& ngram) const {
  WordSeq ids;
  for (const auto& w : ngram) {
    auto id = vocab.find(w);
    if (!id) return 0;
    ids.push_back(*id);
  }
  return count(ids);
}

std::uint64_t CountTable::history_total(std::span<const WordId> history) const {
  if (history.size() >= counts.size()) return 0;
  const auto& m = counts[history.size()];
  WordSeq key(history.begin(), history.end());
  std::uint64_t total = 0;
  for (auto it = m.lower_bound(key);
       it != m.end() && std::equal(key.begin(), key.end(), it->first.begin());
       ++it) {
    total += it->second;
  }
  return total;
}

namespace {

using CountMaps = std::vector<std::map<WordSeq, std::uint64_t>>;

void count_range(std::span<const Sentence> sentences, const Vocab& vocab,
                 int order, CountMaps* out) {
  const WordId bos = vocab.id(kBos), eos = vocab.id(kEos);
  WordSeq padded;
  for (const auto& s : sentences) {
    padded.clear();
    padded.push_back(bos);
    for (const auto& w : s) padded.push_back(vocab.id(w));
    padded.push_back(eos);
    for (std::size_t i = 1; i < padded.size(); ++i) {
      for (int k = 1; k <= order && static_cast<std::size_t>(k) <= i + 1; ++k) {
        WordSeq ngram(padded.begin() + static_cast<std::ptrdiff_t>(i + 1 - k),
                      padded.begin() + static_cast<std::ptrdiff_t>(i + 1));
        ++(*out)[k - 1][std::move(ngram)];
      }
    }
  }
}

}  // namespace

CountTable count_ngrams(std::span<const Sentence> sentences, int order) {
  if (order < 1) throw ModelError("n-gram order must be >= 1");
  CountTable table;
  table.order = order;
  table.vocab.add(kBos);
  table.vocab.add(kEos);
  for (const auto& s : sentences) {
    for (const auto& w : s) {
      if (w == kBos || w == kEos) {
        throw ModelError("sentence contains reserved token " + w);
      }
      table.vocab.add(w);
    }
  }
  table.counts.resize(order);

  const std::size_t shards =
      std::min<std::size_t>(thread_cap(), sentences.size() / 4096 + 1);
  if (shards <= 1) {
    count_range(sentences, table.vocab, order, &table.counts);
    return table;
  }
  std::vector<CountMaps> partial(shards, CountMaps(order));
  std::vector<std::thread> workers;
  const std::size_t chunk = (sentences.size() + shards - 1) / shards;
  for (std::size_t i = 0; i < shards; ++i) {
    const std::size_t begin = std::min(sentences.size(), i * chunk);
    const std::size_t end = std::min(sentences.size(), begin + chunk);
    workers.emplace_back(count_range, sentences.subspan(begin, end - begin),
                         std::cref(table.vocab), order, &partial[i]);
  }
  for (auto& t : workers) t.join();
  for (auto& p : partial) {
    for (int k = 0; k < order; ++k) {
      if (table.counts[k].empty()) {
        table.counts[k] = std::move(p[k]);
        continue;
      }
      for (auto& [ngram, c] : p[k]) table.counts[k][ngram] += c;
    }
  }
  return table;
}

NGramModel estimate(const CountTable& counts,
                    std::span<const std::string> extra_vocab) {
  if (counts.counts.empty() || counts.counts[0].empty()) {
    throw ModelError("cannot estimate from empty counts");
  }
  // Canonical vocabulary: <s>, </s>, then everything else sorted.
  std::set<std::string> rest;
  for (const auto& w : counts.vocab.words()) {
    if (w != kBos && w != kEos) rest.insert(w);
  }
  for (const auto& w : extra_vocab) {
    if (w != kBos && w != kEos) rest.insert(w);
  }
  NGramModel model(counts.order);
  const WordId bos = model.vocab().add(kBos);
  model.vocab().add(kEos);
  for (const auto& w : rest) model.vocab().add(w);
  const std::vector<WordId> remap = map_vocab(counts.vocab, model.vocab());

  std::vector<std::map<WordSeq, std::uint64_t>> by_model_id(counts.order);
  for (int k = 0; k < counts.order; ++k) {
    for (const auto& [ngram, c] : counts.counts[k]) {
      WordSeq ids;
      ids.reserve(ngram.size());
      for (WordId w : ngram) ids.push_back(remap[w]);
      by_model_id[k].emplace(std::move(ids), c);
    }
  }

  const std::size_t num_predictable = model.vocab().size() - 1;

  // Unigrams.
  {
    std::uint64_t total = 0, types = 0;
    for (const auto& [ngram, c] : by_model_id[0]) {
      total += c;
      ++types;
    }
    const std::size_t unseen = num_predictable - types;
    model.insert({bos}, NGramEntry{kLogZero, 0.0, false});
    for (WordId w = 0; w < model.vocab().size(); ++w) {
      if (w == bos) continue;
      auto it = by_model_id[0].find(WordSeq{w});
      double p;
      if (unseen == 0) {
        p = static_cast<double>(it->second) / static_cast<double>(total);
      } else if (it != by_model_id[0].end()) {
        p = static_cast<double>(it->second) /
            static_cast<double>(total + types);
      } else {
        p = static_cast<double>(types) / static_cast<double>(total + types) /
            static_cast<double>(unseen);
      }
      model.insert({w}, NGramEntry{std::log10(p), 0.0, false});
    }
  }

  // Higher orders, grouped by history.
  for (int k = 2; k <= counts.order; ++k) {
    const auto& m = by_model_id[k - 1];
    auto it = m.begin();
    while (it != m.end()) {
      const WordSeq history(it->first.begin(), it->first.end() - 1);
      auto group_end = it;
      std::uint64_t total = 0, types = 0;
      while (group_end != m.end() &&
             std::equal(history.begin(), history.end(),
                        group_end->first.begin())) {
        total += group_end->second;
        ++types;
        ++group_end;
      }
      const bool saturated = types == num_predictable;
      const std::span<const WordId> lower(history.data() + 1,
                                          history.size() - 1);
      double lower_seen = 0.0;
      for (auto g = it; g != group_end; ++g) {
        const WordId w = g->first.back();
        lower_seen += std::pow(10.0, model.logprob(lower, w));
        const double p =
            saturated ? static_cast<double>(g->second) / static_cast<double>(total)
                      : static_cast<double>(g->second) /
                            static_cast<double>(total + types);
        model.insert(g->first, NGramEntry{std::log10(p), 0.0, false});
      }
      NGramEntry* h = model.find(history);
      if (!h) throw ModelError("count table is not prefix closed");
      h->has_backoff = true;
      if (saturated) {
        h->backoff = 0.0;
      } else {
        const double reserved = static_cast<double>(types) /
                                static_cast<double>(total + types);
        h->backoff = std::log10(reserved / (1.0 - lower_seen));
      }
      it = group_end;
    }
  }
  return model;
}

NGramModel train_model(std::span<const Sentence> sentences, int order,
                       std::span<const std::string> extra_vocab) {
  return estimate(count_ngrams(sentences, order), extra_vocab);
}

std::string slot_word(std::string_view slot, std::string_view token) {
  std::string out(slot);
  out += '_';
  out += token;
  return out;
}

std::string strip_slot_prefix(std::string_view slot, std::string_view word) {
  if (word.size() <= slot.size() + 1 || !word.starts_with(slot) ||
      word[slot.size()] != '_') {
    throw ModelError("word '" + std::string(word) + "' lacks prefix " +
                     std::string(slot) + "_");
  }
  return std::string(word.substr(slot.size() + 1));
}

NGramModel train_subgrammar(std::span<const std::string> entities,
                            const SlotConfig& slot,
                            std::span<const std::string> extra_vocab) {
  if (slot.name.empty()) throw ModelError("slot name is empty");
  if (entities.empty()) {
    throw ModelError("slot " + slot.name + " has an empty entity list");
  }
  std::vector<Sentence> sentences;
  sentences.reserve(entities.size());
  for (const auto& phrase : entities) {
    auto tokens = split_whitespace(phrase);
    if (tokens.empty()) {
      throw ModelError("slot " + slot.name + " has an entity with no tokens");
    }
    for (auto& t : tokens) t = slot_word(slot.name, t);
    sentences.push_back(std::move(tokens));
  }
  for (const auto& w : extra_vocab) {
    if (w == kBos || w == kEos) continue;
    if (!w.starts_with(slot.name + "_")) {
      throw ModelError("extra vocabulary word '" + w + "' lacks prefix " +
                       slot.name + "_");
    }
  }
  return train_model(sentences, slot.order, extra_vocab);
}

}  // namespace slotlm
