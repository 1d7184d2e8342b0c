// graph.cpp

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

#include "slotlm/graph.hpp"

#include <algorithm>

namespace slotlm {

namespace {

// History -> state bookkeeping shared by both acceptor builders. Only
// entries with extensions (or a stored non-zero back-off) become states;
// every other entry backs off with weight 0, so mapping it to its longest
// such suffix gives the same scores.
class HistoryStates {
 public:
  HistoryStates(const NGramModel& m, Wfst* g) : m_(m), g_(g) {}

  bool is_state_history(std::span<const WordId> h) const {
    if (h.empty()) return true;
    const NGramEntry* e = m_.find(h);
    if (!e) return false;
    return m_.has_extensions(h) || (e->has_backoff && e->backoff != 0.0);
  }

  StateIdx add(const WordSeq& h) {
    auto [it, fresh] = ids_.emplace(h, 0);
    if (fresh) it->second = g_->add_state();
    return it->second;
  }

  std::optional<StateIdx> find(std::span<const WordId> h) const {
    auto it = ids_.find(WordSeq(h.begin(), h.end()));
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }

  // State reached after `h`: its longest state suffix of at most order-1
  // words.
  StateIdx target(std::span<const WordId> h) const {
    const std::size_t cap =
        std::min<std::size_t>(h.size(), static_cast<std::size_t>(m_.order() - 1));
    for (std::size_t len = cap; len >= 1; --len) {
      auto suffix = h.subspan(h.size() - len);
      if (auto s = find(suffix)) return *s;
    }
    return ids_.at(WordSeq{});
  }

  const std::map<WordSeq, StateIdx>& all() const { return ids_; }

 private:
  const NGramModel& m_;
  Wfst* g_;
  std::map<WordSeq, StateIdx> ids_;
};

// Creates the states of every order below the top, skipping histories that
// can never be reached (ending in </s>, or in <s> when `keep_bos` is false).
void make_states(const NGramModel& m, HistoryStates* states, bool keep_bos) {
  states->add(WordSeq{});
  for (int k = 1; k < m.order(); ++k) {
    for (const auto& [ngram, e] : m.entries(k)) {
      const WordId last = ngram.back();
      if (last == m.eos()) continue;
      if (last == m.bos() && (!keep_bos || k > 1)) continue;
      if (states->is_state_history(ngram)) states->add(ngram);
    }
  }
}

// Word arcs, </s> handling and failure arcs for every history state.
template <typename OnEos>
void make_arcs(const NGramModel& m, const HistoryStates& states,
               const std::vector<Label>& labels, Label backoff_label, Wfst* g,
               OnEos on_eos) {
  for (const auto& [h, s] : states.all()) {
    if (h.empty()) continue;
    const std::span<const WordId> shorter(h.data() + 1, h.size() - 1);
    g->add_arc(Arc{s, states.target(shorter), backoff_label, kEpsilon,
                   -m.backoff(h)});
  }
  for (int k = 1; k <= m.order(); ++k) {
    for (const auto& [ngram, e] : m.entries(k)) {
      const std::span<const WordId> h(ngram.data(), ngram.size() - 1);
      auto src = states.find(h);
      if (!src) continue;
      const WordId w = ngram.back();
      if (w == m.bos()) continue;
      if (w == m.eos()) {
        on_eos(*src, -e.logprob);
        continue;
      }
      g->add_arc(Arc{*src, states.target(ngram), labels[w], labels[w], -e.logprob});
    }
  }
}

}  // namespace

Wfst lm_to_fst(const NGramModel& model, const std::set<std::string>& slot_names) {
  if (model.is_difference()) {
    throw GraphError("cannot build a graph from a difference model");
  }
  if (model.bos() == kNoWord || model.eos() == kNoWord) {
    throw GraphError("model lacks <s> or </s>");
  }
  Wfst g;
  std::vector<Label> labels(model.vocab().size(), kEpsilon);
  for (WordId w = 0; w < model.vocab().size(); ++w) {
    if (w == model.bos() || w == model.eos()) continue;
    const std::string& word = model.vocab().word(w);
    labels[w] = g.symbols().add(
        word, slot_names.count(word) ? SymbolKind::kSlot : SymbolKind::kWord);
  }
  const Label backoff = g.symbols().add(SymbolTable::backoff_name(""),
                                        SymbolKind::kBackoff);

  HistoryStates states(model, &g);
  make_states(model, &states, true);
  make_arcs(model, states, labels, backoff, &g,
            [&g](StateIdx s, double w) { g.set_final(s, w); });
  const WordSeq bos{model.bos()};
  g.set_start(model.order() > 1 && states.find(bos) ? *states.find(bos)
                                                    : *states.find(WordSeq{}));
  g.finalize();
  return g;
}

Wfst subgrammar_to_fst(const NGramModel& model, const std::string& slot) {
  if (model.is_difference()) {
    throw GraphError("cannot build a graph from a difference model");
  }
  if (model.bos() == kNoWord || model.eos() == kNoWord) {
    throw GraphError("sub-grammar lacks <s> or </s>");
  }
  Wfst g;
  g.slot = slot;
  const Label slot_label = g.symbols().add(slot, SymbolKind::kSlot);
  std::vector<Label> labels(model.vocab().size(), kEpsilon);
  for (WordId w = 0; w < model.vocab().size(); ++w) {
    if (w == model.bos() || w == model.eos()) continue;
    const std::string& word = model.vocab().word(w);
    if (!word.starts_with(slot + "_")) {
      throw GraphError("sub-grammar word '" + word + "' lacks prefix " + slot +
                       "_");
    }
    labels[w] = g.symbols().add(word, SymbolKind::kWord, slot_label);
  }
  const Label backoff = g.symbols().add(SymbolTable::backoff_name(slot),
                                        SymbolKind::kBackoff, slot_label);
  const Label exit = g.symbols().add(SymbolTable::exit_name(slot),
                                     SymbolKind::kSlotExit, slot_label);

  const StateIdx start = g.add_state();
  HistoryStates states(model, &g);
  make_states(model, &states, false);
  const StateIdx x = g.add_state();
  g.set_final(x, 0.0);
  make_arcs(model, states, labels, backoff, &g, [&](StateIdx s, double w) {
    g.add_arc(Arc{s, x, exit, exit, w});
  });
  // Start: every word, no back-off and no way out.
  WordSeq first{model.bos(), kNoWord};
  for (WordId w = 0; w < model.vocab().size(); ++w) {
    if (w == model.bos() || w == model.eos()) continue;
    first[1] = w;
    g.add_arc(Arc{start, states.target(first), labels[w], labels[w],
                  -model.logprob(std::span<const WordId>(first.data(), 1), w)});
  }
  g.set_start(start);
  g.exit_state = x;
  g.finalize();
  return g;
}

std::size_t predicted_replaced_arcs(const Wfst& root,
                                    const std::map<std::string, Wfst>& subs) {
  std::size_t n = 0;
  for (const Arc& a : root.arcs()) {
    if (root.symbols().kind(a.ilabel) != SymbolKind::kSlot) {
      ++n;
      continue;
    }
    auto it = subs.find(root.symbols().name(a.ilabel));
    if (it == subs.end()) {
      throw GraphError("no sub-grammar for slot " + root.symbols().name(a.ilabel));
    }
    n += it->second.num_arcs() + 2;
  }
  return n;
}

Wfst replace_slots(const Wfst& root, const std::map<std::string, Wfst>& subs) {
  if (root.slots_replaced || !root.slot.empty()) {
    throw GraphError("replace_slots expects an unreplaced root graph");
  }
  Wfst out;
  const SymbolTable& rs = root.symbols();
  for (Label l = 1; l < rs.size(); ++l) out.symbols().add(rs.name(l), rs.kind(l), rs.owner(l));

  // Per sub machine: its labels in the merged table.
  std::map<std::string, std::vector<Label>> relabel;
  for (const auto& [name, sub] : subs) {
    if (sub.exit_state == kNoState || sub.slot != name) {
      throw GraphError("graph for " + name + " is not a sub-grammar machine");
    }
    const SymbolTable& ss = sub.symbols();
    std::vector<Label> map(ss.size(), kEpsilon);
    for (Label l = 1; l < ss.size(); ++l) {
      const Label owner = ss.owner(l) == kEpsilon ? kEpsilon : map.at(ss.owner(l));
      map[l] = out.symbols().add(ss.name(l), ss.kind(l), owner);
    }
    relabel.emplace(name, std::move(map));
  }

  for (StateIdx s = 0; s < root.num_states(); ++s) {
    out.add_state();
    out.set_final(s, root.final_weight(s));
  }
  out.set_start(root.start());
  for (const Arc& a : root.arcs()) {
    if (rs.kind(a.ilabel) != SymbolKind::kSlot) {
      out.add_arc(a);
      continue;
    }
    const std::string& name = rs.name(a.ilabel);
    auto it = subs.find(name);
    if (it == subs.end()) throw GraphError("no sub-grammar for slot " + name);
    const Wfst& sub = it->second;
    const auto& map = relabel.at(name);
    const StateIdx offset = static_cast<StateIdx>(out.num_states());
    for (StateIdx s = 0; s < sub.num_states(); ++s) out.add_state();
    for (const Arc& b : sub.arcs()) {
      out.add_arc(Arc{b.src + offset, b.dst + offset, map[b.ilabel], map[b.olabel],
                      b.weight});
    }
    out.add_arc(Arc{a.src, sub.start() + offset, kEpsilon, a.olabel, a.weight});
    out.add_arc(Arc{sub.exit_state + offset, a.dst, kEpsilon, kEpsilon, 0.0});
  }
  out.slots_replaced = true;
  out.finalize();
  return out;
}

// Search.

Label initial_slot(const Wfst& g) {
  if (g.slot.empty()) return kEpsilon;
  return *g.symbols().find(g.slot);
}

Label token_label(const Wfst& g, std::string_view token) {
  auto l = g.symbols().find(token);
  if (!l) throw GraphError("unknown token '" + std::string(token) + "'");
  const SymbolKind k = g.symbols().kind(*l);
  const bool slot_as_word =
      k == SymbolKind::kSlot && !g.slots_replaced && g.slot.empty();
  if (k != SymbolKind::kWord && !slot_as_word) {
    throw GraphError("unknown token '" + std::string(token) +
                     "' (not an input word)");
  }
  return *l;
}

namespace {

Label owner_of(const Wfst& g, Label token) {
  return g.symbols().kind(token) == SymbolKind::kSlot ? kEpsilon
                                                       : g.symbols().owner(token);
}

void append(const Wfst& g, Route* r, std::uint32_t arc) {
  const Arc& a = g.arc(arc);
  r->arcs.push_back(arc);
  r->weight += a.weight;
  r->state = a.dst;
}

// Resolves one event, backing off while the state has no arc for it.
bool follow(const Wfst& g, Route* r, Label key) {
  for (;;) {
    if (auto a = g.find(r->state, key)) {
      append(g, r, *a);
      return true;
    }
    auto b = g.backoff_arc(r->state);
    if (!b) return false;
    append(g, r, *b);
  }
}

// Closes the current phrase. Returns to the root through the connector when
// there is one; a bare sub machine stays on its exit state.
bool leave_slot(const Wfst& g, Route* r) {
  auto exit = g.symbols().find(SymbolTable::exit_name(g.symbols().name(r->slot)));
  if (!exit || !follow(g, r, *exit)) return false;
  if (auto c = g.find(r->state, kEpsilon)) {
    append(g, r, *c);
    r->slot = kEpsilon;
  }
  return true;
}

std::optional<Route> from_root(const Wfst& g, Route r, Label owner, Label token) {
  if (owner != kEpsilon) {
    if (!follow(g, &r, owner)) return std::nullopt;
    r.slot = owner;
  }
  if (!follow(g, &r, token)) return std::nullopt;
  return r;
}

}  // namespace

std::vector<Route> consume(const Wfst& g, StateIdx s, Label slot, Label token) {
  std::vector<Route> out;
  const Label owner = owner_of(g, token);
  Route r0{{}, 0.0, s, slot};
  if (slot == kEpsilon) {
    if (auto r = from_root(g, r0, owner, token)) out.push_back(std::move(*r));
    return out;
  }
  if (owner == slot) {
    Route r = r0;
    if (follow(g, &r, token)) out.push_back(std::move(r));
  }
  Route e = r0;
  if (leave_slot(g, &e) && e.slot == kEpsilon) {
    if (auto r = from_root(g, std::move(e), owner, token)) {
      out.push_back(std::move(*r));
    }
  }
  return out;
}

std::optional<Route> finish(const Wfst& g, StateIdx s, Label slot) {
  Route r{{}, 0.0, s, slot};
  if (slot != kEpsilon) {
    if (!leave_slot(g, &r)) return std::nullopt;
    if (r.slot != kEpsilon) {
      if (!g.is_final(r.state)) return std::nullopt;
      r.weight += g.final_weight(r.state);
      return r;
    }
  }
  for (;;) {
    if (g.is_final(r.state)) {
      r.weight += g.final_weight(r.state);
      return r;
    }
    auto b = g.backoff_arc(r.state);
    if (!b) return std::nullopt;
    append(g, &r, *b);
  }
}

GraphScore score_sentence_via_graph(const Wfst& g,
                                    std::span<const std::string> words) {
  std::vector<Label> tokens;
  tokens.reserve(words.size());
  for (const auto& w : words) tokens.push_back(token_label(g, w));

  struct Node {
    std::size_t prev;
    std::vector<std::uint32_t> arcs;
  };
  std::vector<Node> nodes{{0, {}}};
  using Config = std::pair<StateIdx, Label>;
  std::map<Config, std::pair<double, std::size_t>> layer{
      {{g.start(), initial_slot(g)}, {0.0, 0}}};
  for (Label t : tokens) {
    std::map<Config, std::pair<double, std::size_t>> next;
    for (const auto& [cfg, val] : layer) {
      for (Route& r : consume(g, cfg.first, cfg.second, t)) {
        const double w = val.first + r.weight;
        auto it = next.find({r.state, r.slot});
        if (it != next.end() && it->second.first <= w) continue;
        nodes.push_back(Node{val.second, std::move(r.arcs)});
        next[{r.state, r.slot}] = {w, nodes.size() - 1};
      }
    }
    if (next.empty()) throw GraphError("no accepting path");
    layer = std::move(next);
  }
  double best = kInfinity;
  std::size_t best_node = 0;
  std::vector<std::uint32_t> tail;
  for (const auto& [cfg, val] : layer) {
    auto r = finish(g, cfg.first, cfg.second);
    if (r && val.first + r->weight < best) {
      best = val.first + r->weight;
      best_node = val.second;
      tail = std::move(r->arcs);
    }
  }
  if (best == kInfinity) throw GraphError("no accepting path");
  GraphScore out;
  out.weight = best;
  std::vector<const std::vector<std::uint32_t>*> segs;
  for (std::size_t n = best_node; n != 0; n = nodes[n].prev) segs.push_back(&nodes[n].arcs);
  for (auto it = segs.rbegin(); it != segs.rend(); ++it) {
    out.path.insert(out.path.end(), (*it)->begin(), (*it)->end());
  }
  out.path.insert(out.path.end(), tail.begin(), tail.end());
  return out;
}

}  // namespace slotlm
