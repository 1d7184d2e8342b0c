// ngram_trie.cpp

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

#include "slotlm/ngram_trie.hpp"

#include <algorithm>

#include "slotlm/binary_io.hpp"

namespace slotlm {

namespace {

constexpr std::uint64_t kNotFound = ~std::uint64_t{0};
constexpr std::string_view kTrieMagic = "NGT1";

}  // namespace

NGramTrie::NGramTrie(const NGramModel& model)
    : order_(model.order()),
      is_difference_(model.is_difference()),
      vocab_(model.vocab()),
      bos_(model.bos()),
      eos_(model.eos()) {
  levels_.resize(order_ + 1);
  levels_[0].push_back(Node{});
  std::vector<const WordSeq*> prev_keys;
  for (int d = 1; d <= order_; ++d) {
    const auto& entries = model.entries(d);
    if (entries.size() > StateId64::kMaxIndex) {
      throw ModelError("trie capacity exceeded at depth " + std::to_string(d));
    }
    auto& level = levels_[d];
    auto& parents = levels_[d - 1];
    level.reserve(entries.size());
    std::vector<const WordSeq*> keys;
    keys.reserve(entries.size());
    std::uint64_t cursor = 0;
    for (const auto& [ngram, e] : entries) {
      std::uint64_t parent = 0;
      if (d > 1) {
        std::span<const WordId> prefix(ngram.data(), ngram.size() - 1);
        auto less = [&](const WordSeq& key) {
          return std::lexicographical_compare(key.begin(), key.end(),
                                              prefix.begin(), prefix.end());
        };
        while (cursor < prev_keys.size() && less(*prev_keys[cursor])) ++cursor;
        if (cursor == prev_keys.size() ||
            !std::equal(prefix.begin(), prefix.end(), prev_keys[cursor]->begin(),
                        prev_keys[cursor]->end())) {
          throw ModelError("prefix closure violated at " + model.join(ngram));
        }
        parent = cursor;
      }
      const std::uint64_t index = level.size();
      Node& p = parents[parent];
      if (p.child_begin == p.child_end) p.child_begin = index;
      p.child_end = index + 1;
      level.push_back(Node{ngram.back(), e.logprob,
                           e.has_backoff ? e.backoff : 0.0, parent, 0, 0});
      keys.push_back(&ngram);
    }
    prev_keys = std::move(keys);
  }
}

StateId64 NGramTrie::bos_state() const {
  if (order_ < 2 || bos_ == kNoWord) return root();
  const WordId w[1] = {bos_};
  StateId64 s = lookup(w);
  return s.is_none() ? root() : s;
}

bool NGramTrie::valid(StateId64 s) const {
  if (s.is_none()) return false;
  const unsigned d = s.depth();
  if (d >= static_cast<unsigned>(std::max(order_, 1)) || d >= levels_.size()) {
    return false;
  }
  return s.index() < levels_[d].size();
}

WordSeq NGramTrie::history(StateId64 s) const {
  WordSeq out(s.depth());
  unsigned d = s.depth();
  std::uint64_t idx = s.index();
  while (d > 0) {
    const Node& n = levels_[d][idx];
    out[d - 1] = n.word;
    idx = n.parent;
    --d;
  }
  return out;
}

std::uint64_t NGramTrie::find_child(unsigned depth, std::uint64_t index,
                                    WordId w) const {
  if (depth + 1 >= levels_.size()) return kNotFound;
  const Node& n = levels_[depth][index];
  const auto& next = levels_[depth + 1];
  auto first = next.begin() + static_cast<std::ptrdiff_t>(n.child_begin);
  auto last = next.begin() + static_cast<std::ptrdiff_t>(n.child_end);
  auto it = std::lower_bound(first, last, w, [](const Node& node, WordId word) {
    return node.word < word;
  });
  if (it == last || it->word != w) return kNotFound;
  return static_cast<std::uint64_t>(it - next.begin());
}

StateId64 NGramTrie::lookup(std::span<const WordId> words) const {
  unsigned depth = 0;
  std::uint64_t index = 0;
  for (WordId w : words) {
    index = find_child(depth, index, w);
    if (index == kNotFound) return StateId64::none();
    ++depth;
  }
  return StateId64::encode(depth, index);
}

StateId64 NGramTrie::state_for(std::span<const WordId> history) const {
  const auto max_hist = static_cast<std::size_t>(std::max(order_ - 1, 0));
  if (history.size() > max_hist) history = history.subspan(history.size() - max_hist);
  for (std::size_t start = 0; start < history.size(); ++start) {
    StateId64 s = lookup(history.subspan(start));
    if (!s.is_none()) return s;
  }
  return root();
}

Advance NGramTrie::advance(StateId64 s, WordId word) const {
  if (!valid(s)) throw ModelError("invalid trie state");
  if (word >= vocab_.size()) {
    throw ModelError("out-of-vocabulary word id " + std::to_string(word));
  }
  const WordSeq h = history(s);
  double acc = 0.0;
  for (std::size_t start = 0; start <= h.size(); ++start) {
    const std::span<const WordId> suffix(h.data() + start, h.size() - start);
    const StateId64 node = start == 0 ? s : lookup(suffix);
    if (node.is_none()) continue;
    const std::uint64_t child = find_child(node.depth(), node.index(), word);
    if (child == kNotFound) {
      acc += levels_[node.depth()][node.index()].backoff;
      continue;
    }
    Advance out;
    out.score = acc + levels_[node.depth() + 1][child].logprob;
    if (suffix.size() + 1 < static_cast<std::size_t>(order_)) {
      out.next = StateId64::encode(node.depth() + 1, child);
    } else {
      WordSeq seq(suffix.begin(), suffix.end());
      seq.push_back(word);
      out.next = state_for(seq);
    }
    return out;
  }
  throw ModelError("word has no unigram entry: " + vocab_.word(word));
}

std::vector<TraceStep> NGramTrie::trace(StateId64 s, WordId word) const {
  if (!valid(s)) throw ModelError("invalid trie state");
  const WordSeq h = history(s);
  std::vector<TraceStep> steps;
  for (std::size_t start = 0; start <= h.size(); ++start) {
    const std::span<const WordId> suffix(h.data() + start, h.size() - start);
    const StateId64 node = start == 0 ? s : lookup(suffix);
    if (node.is_none()) continue;
    const std::uint64_t child = find_child(node.depth(), node.index(), word);
    WordSeq hist(suffix.begin(), suffix.end());
    if (child == kNotFound) {
      steps.push_back({std::move(hist), false,
                       levels_[node.depth()][node.index()].backoff});
      continue;
    }
    steps.push_back({std::move(hist), true,
                     levels_[node.depth() + 1][child].logprob});
    break;
  }
  return steps;
}

double NGramTrie::sentence_logprob(std::span<const WordId> words) const {
  if (eos_ == kNoWord) throw ModelError("model has no </s>");
  StateId64 s = bos_state();
  double total = 0.0;
  for (WordId w : words) {
    const Advance a = advance(s, w);
    total += a.score;
    s = a.next;
  }
  return total + advance(s, eos_).score;
}

std::string NGramTrie::serialize() const {
  ByteWriter w;
  w.raw(kTrieMagic);
  w.u32(static_cast<std::uint32_t>(order_));
  w.u8(is_difference_ ? 1 : 0);
  w.u64(vocab_.size());
  for (const auto& word : vocab_.words()) w.str(word);
  for (const auto& level : levels_) {
    w.u64(level.size());
    for (const Node& n : level) {
      w.u32(n.word);
      w.f64(n.logprob);
      w.f64(n.backoff);
      w.u64(n.parent);
      w.u64(n.child_begin);
      w.u64(n.child_end);
    }
  }
  return w.take();
}

NGramTrie NGramTrie::deserialize(std::string_view bytes) {
  ByteReader r(bytes);
  if (r.raw(kTrieMagic.size()) != kTrieMagic) {
    throw ModelError("not an NGT1 trie dump");
  }
  NGramTrie t;
  t.order_ = static_cast<int>(r.u32());
  t.is_difference_ = r.u8() != 0;
  const std::uint64_t nv = r.u64();
  for (std::uint64_t i = 0; i < nv; ++i) t.vocab_.add(r.str());
  t.bos_ = t.vocab_.find(kBos).value_or(kNoWord);
  t.eos_ = t.vocab_.find(kEos).value_or(kNoWord);
  t.levels_.resize(t.order_ + 1);
  for (auto& level : t.levels_) {
    level.resize(r.u64());
    for (Node& n : level) {
      n.word = r.u32();
      n.logprob = r.f64();
      n.backoff = r.f64();
      n.parent = r.u64();
      n.child_begin = r.u64();
      n.child_end = r.u64();
    }
  }
  if (!r.done()) throw ModelError("trailing bytes in NGT1 dump");
  return t;
}

}  // namespace slotlm
