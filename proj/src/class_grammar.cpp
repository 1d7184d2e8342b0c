// class_grammar.cpp

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

#include "slotlm/class_grammar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "slotlm/io_util.hpp"

namespace slotlm {

namespace {

bool is_special(std::string_view w) {
  return w == kBos || w == kEos || w == kUnk;
}

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log10_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b), lo = std::min(a, b);
  return hi + std::log10(1.0 + std::pow(10.0, lo - hi));
}

}  // namespace

NGramModel prefix_root_vocab(const NGramModel& model,
                             const std::set<std::string>& slot_names) {
  for (const auto& s : slot_names) {
    if (!model.vocab().contains(s)) {
      throw ModelError("slot " + s + " is not in the root vocabulary");
    }
  }
  NGramModel out = model;
  for (WordId id = 0; id < out.vocab().size(); ++id) {
    const std::string w = out.vocab().word(id);
    if (is_special(w) || slot_names.count(w)) continue;
    if (w.starts_with(kClassPrefix)) {
      throw ModelError("word '" + w + "' is already class-prefixed");
    }
    out.vocab().rename(id, std::string(kClassPrefix) + w);
  }
  return out;
}

std::vector<Sentence> substitute_entities(std::span<const Sentence> corpus,
                                          const Lexicons& lexicons) {
  // phrase tokens -> slot, first slot wins.
  std::map<std::vector<std::string>, std::string> phrases;
  std::size_t longest = 0;
  for (const auto& [slot, entities] : lexicons) {
    for (const auto& e : entities) {
      auto toks = split_whitespace(e);
      if (toks.empty()) continue;
      longest = std::max(longest, toks.size());
      phrases.emplace(std::move(toks), slot);
    }
  }
  std::vector<Sentence> out;
  out.reserve(corpus.size());
  for (const auto& s : corpus) {
    Sentence r;
    std::size_t i = 0;
    while (i < s.size()) {
      std::size_t best_len = 0;
      const std::string* best_slot = nullptr;
      for (std::size_t len = std::min(longest, s.size() - i); len >= 1; --len) {
        auto it = phrases.find(std::vector<std::string>(
            s.begin() + static_cast<std::ptrdiff_t>(i),
            s.begin() + static_cast<std::ptrdiff_t>(i + len)));
        if (it != phrases.end()) {
          best_len = len;
          best_slot = &it->second;
          break;
        }
      }
      if (best_slot) {
        r.push_back(*best_slot);
        i += best_len;
      } else {
        r.push_back(s[i++]);
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

ClassGrammar::ClassGrammar(NGramModel root,
                           std::map<std::string, NGramModel> subs) {
  root_ = std::make_shared<const NGramModel>(std::move(root));
  root_trie_ = std::make_shared<const NGramTrie>(*root_);
  for (auto& [name, model] : subs) {
    auto m = std::make_shared<const NGramModel>(std::move(model));
    auto t = std::make_shared<const NGramTrie>(*m);
    slots_.push_back(Slot{name, std::move(m), std::move(t)});
  }
  check();
}

void ClassGrammar::check() const {
  // After prefixing, any other root word must be a slot token.
  for (const auto& w : root_->vocab().words()) {
    if (w == kBos || w == kEos || w == kUnk || w.starts_with(kClassPrefix)) continue;
    if (slot_index(w) < 0) {
      throw ModelError("root word '" + w + "' is neither class_-prefixed nor a configured slot");
    }
  }
  for (const auto& s : slots_) {
    if (!root_->vocab().contains(s.name)) {
      throw ModelError("slot " + s.name + " is not in the root vocabulary");
    }
    for (const auto& w : s.model->vocab().words()) {
      if (w == kBos || w == kEos) continue;
      if (!w.starts_with(s.name + "_")) {
        throw ModelError("sub-grammar word '" + w + "' lacks prefix " +
                         s.name + "_");
      }
    }
    for (const auto& other : slots_) {
      if (s.model->vocab().contains(other.name)) {
        throw ModelError("sub-grammar " + s.name + " contains slot token " +
                         other.name);
      }
    }
  }
}

int ClassGrammar::slot_index(std::string_view name) const {
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    if (slots_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

ClassGrammar ClassGrammar::with_slot(const std::string& name,
                                     NGramModel sub) const {
  const int i = slot_index(name);
  if (i < 0) throw ModelError("unknown slot " + name);
  ClassGrammar g;
  g.root_ = root_;
  g.root_trie_ = root_trie_;
  g.slots_ = slots_;
  auto m = std::make_shared<const NGramModel>(std::move(sub));
  g.slots_[i].trie = std::make_shared<const NGramTrie>(*m);
  g.slots_[i].model = std::move(m);
  g.check();
  return g;
}

namespace {

// A reading of one token: a root word (slot < 0) or a word of a slot.
struct Reading {
  int slot = -1;
  WordId word = kNoWord;
};

struct Cell {
  double best = kNegInf;
  double sum = kNegInf;
  std::size_t prev_pos = 0;
  StateId64 prev_state;
  int phrase_slot = -1;  // slot of the phrase ending here, -1 for a word
  WordId root_word = kNoWord;
};

ClassScore score_readings(const ClassGrammar& g,
                          std::span<const std::string> tokens,
                          const std::vector<std::vector<Reading>>& readings,
                          PartitionPolicy policy) {
  const std::size_t n = tokens.size();
  const NGramTrie& root = g.root_trie();
  const auto& slots = g.slots();

  // phrase[s][i][len-1]: sub-grammar score of <s> tokens[i, i+len) </s>.
  std::vector<std::vector<std::vector<double>>> phrase(slots.size());
  for (std::size_t s = 0; s < slots.size(); ++s) {
    phrase[s].resize(n);
    const NGramTrie& sub = *slots[s].trie;
    for (std::size_t i = 0; i < n; ++i) {
      StateId64 st = sub.bos_state();
      double acc = 0.0;
      for (std::size_t j = i; j < n; ++j) {
        WordId w = kNoWord;
        for (const auto& r : readings[j]) {
          if (r.slot == static_cast<int>(s)) w = r.word;
        }
        if (w == kNoWord) break;
        const Advance a = sub.advance(st, w);
        acc += a.score;
        st = a.next;
        phrase[s][i].push_back(acc + sub.advance(st, sub.eos()).score);
      }
    }
  }
  std::vector<WordId> slot_token(slots.size());
  for (std::size_t s = 0; s < slots.size(); ++s) {
    slot_token[s] = root.vocab().id(slots[s].name);
  }

  std::vector<std::map<StateId64, Cell>> layer(n + 1);
  layer[0][root.bos_state()] = Cell{0.0, 0.0, 0, StateId64::none(), -1, kNoWord};
  auto relax = [&](std::size_t pos, StateId64 next, double best, double sum,
                   std::size_t from, StateId64 from_state, int slot,
                   WordId word) {
    Cell& c = layer[pos][next];
    if (best > c.best) {
      c.best = best;
      c.prev_pos = from;
      c.prev_state = from_state;
      c.phrase_slot = slot;
      c.root_word = word;
    }
    c.sum = log10_add(c.sum, sum);
  };

  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& [st, cell] : layer[i]) {
      for (const auto& r : readings[i]) {
        if (r.slot >= 0) continue;
        const Advance a = root.advance(st, r.word);
        relax(i + 1, a.next, cell.best + a.score, cell.sum + a.score, i, st, -1,
              r.word);
      }
      for (std::size_t s = 0; s < slots.size(); ++s) {
        if (phrase[s][i].empty()) continue;
        const Advance a = root.advance(st, slot_token[s]);
        for (std::size_t len = 1; len <= phrase[s][i].size(); ++len) {
          const double add = a.score + phrase[s][i][len - 1];
          relax(i + len, a.next, cell.best + add, cell.sum + add, i, st,
                static_cast<int>(s), kNoWord);
        }
      }
    }
  }

  double best = kNegInf, sum = kNegInf;
  StateId64 best_state = StateId64::none();
  for (const auto& [st, cell] : layer[n]) {
    const double e = root.advance(st, root.eos()).score;
    if (cell.best + e > best) {
      best = cell.best + e;
      best_state = st;
    }
    sum = log10_add(sum, cell.sum + e);
  }
  if (best_state.is_none()) throw ModelError("no partition covers the sentence");

  ClassScore out;
  out.score = policy == PartitionPolicy::kViterbi ? best : sum;
  std::size_t pos = n;
  StateId64 st = best_state;
  while (pos > 0) {
    const Cell& c = layer[pos].at(st);
    Phrase p;
    p.begin = c.prev_pos;
    p.end = pos;
    if (c.phrase_slot >= 0) {
      p.cls = slots[c.phrase_slot].name;
      p.is_slot = true;
    } else {
      p.cls = root.vocab().word(c.root_word);
    }
    out.best.push_back(std::move(p));
    pos = c.prev_pos;
    st = c.prev_state;
  }
  std::reverse(out.best.begin(), out.best.end());
  return out;
}

[[noreturn]] void uncovered(const std::string& token) {
  throw ModelError("token '" + token + "' is covered by no vocabulary");
}

}  // namespace

ClassScore class_sentence_score(const ClassGrammar& g,
                                std::span<const std::string> words,
                                PartitionPolicy policy) {
  std::vector<std::vector<Reading>> readings(words.size());
  const std::string prefix(kClassPrefix);
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (auto id = g.root().vocab().find(prefix + words[i])) {
      readings[i].push_back(Reading{-1, *id});
    }
    for (std::size_t s = 0; s < g.slots().size(); ++s) {
      const auto& slot = g.slots()[s];
      if (auto id = slot.model->vocab().find(slot_word(slot.name, words[i]))) {
        readings[i].push_back(Reading{static_cast<int>(s), *id});
      }
    }
    if (readings[i].empty()) uncovered(words[i]);
  }
  return score_readings(g, words, readings, policy);
}

ClassScore class_sentence_score_prefixed(const ClassGrammar& g,
                                         std::span<const std::string> tokens,
                                         PartitionPolicy policy) {
  std::vector<std::vector<Reading>> readings(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::string& t = tokens[i];
    if (is_special(t) && t != kUnk) uncovered(t);
    if (g.slot_index(t) < 0) {
      if (auto id = g.root().vocab().find(t)) {
        readings[i].push_back(Reading{-1, *id});
      }
    }
    for (std::size_t s = 0; s < g.slots().size() && readings[i].empty(); ++s) {
      const auto& slot = g.slots()[s];
      if (!t.starts_with(slot.name + "_")) continue;
      if (auto id = slot.model->vocab().find(t)) {
        readings[i].push_back(Reading{static_cast<int>(s), *id});
      }
    }
    if (readings[i].empty()) uncovered(t);
  }
  return score_readings(g, tokens, readings, policy);
}

NGramModel interpolate(const NGramModel& a, const NGramModel& b,
                       double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ModelError("interpolation weight must lie in [0,1]");
  }
  if (a.is_difference() || b.is_difference()) {
    throw ModelError("cannot interpolate a difference model");
  }
  std::set<std::string> rest;
  for (const auto* m : {&a, &b}) {
    for (const auto& w : m->vocab().words()) {
      if (w != kBos && w != kEos) rest.insert(w);
    }
  }
  NGramModel out(std::max(a.order(), b.order()));
  const WordId bos = out.vocab().add(kBos);
  out.vocab().add(kEos);
  for (const auto& w : rest) out.vocab().add(w);

  const auto to_a = map_vocab(out.vocab(), a.vocab());
  const auto to_b = map_vocab(out.vocab(), b.vocab());
  const auto from_a = map_vocab(a.vocab(), out.vocab());
  const auto from_b = map_vocab(b.vocab(), out.vocab());

  std::vector<std::set<WordSeq>> keys(out.order());
  for (const auto& [m, from] : {std::pair{&a, &from_a}, std::pair{&b, &from_b}}) {
    for (int k = 1; k <= m->order(); ++k) {
      for (const auto& [ngram, e] : m->entries(k)) {
        WordSeq ids;
        for (WordId w : ngram) ids.push_back((*from)[w]);
        keys[k - 1].insert(std::move(ids));
      }
    }
  }

  const NGramTrie ta(a), tb(b);
  // P_X(w|H) with H cut to its longest suffix of words X knows.
  auto side = [](const NGramTrie& t, const std::vector<WordId>& to,
                 const WordSeq& ngram) {
    const WordId w = to[ngram.back()];
    if (w == kNoWord) return 0.0;
    WordSeq hist;
    for (std::size_t i = ngram.size() - 1; i-- > 0;) {
      if (to[ngram[i]] == kNoWord) break;
      hist.insert(hist.begin(), to[ngram[i]]);
    }
    return std::pow(10.0, t.advance(t.state_for(hist), w).score);
  };

  for (int k = 1; k <= out.order(); ++k) {
    for (const auto& ngram : keys[k - 1]) {
      double lp;
      if (ngram.back() == bos) {
        lp = kLogZero;
      } else {
        const double p =
            lambda * side(ta, to_a, ngram) + (1.0 - lambda) * side(tb, to_b, ngram);
        lp = p > 0.0 ? std::max(std::log10(p), kLogZero) : kLogZero;
      }
      out.insert(ngram, NGramEntry{lp, 0.0, false});
    }
  }
  recompute_backoffs(out);
  return out;
}

}  // namespace slotlm
