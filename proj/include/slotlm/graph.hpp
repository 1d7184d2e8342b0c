// slotlm/graph.hpp

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

#ifndef SLOTLM_GRAPH_HPP_
#define SLOTLM_GRAPH_HPP_

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "slotlm/ngram_model.hpp"
#include "slotlm/wfst.hpp"

namespace slotlm {

/// N-gram acceptor for a root grammar. One state per history that can
/// matter for scoring, word arcs weighted -logprob, a failure arc #0:<eps>
/// weighted -alpha(H) towards the shortened history, and </s> as the final
/// weight of the states that have it as an entry. Words listed in
/// `slot_names` get SLOT:SLOT arcs for replace_slots. The start state is
/// the <s> history. Throws GraphError for a difference model.
Wfst lm_to_fst(const NGramModel& model, const std::set<std::string>& slot_names);

/// Acceptor for one slot's sub-grammar. The start state has an arc for
/// every word w weighted -log P(w|<s>) and neither a back-off nor an exit,
/// so only non-empty phrases are accepted. Back-off arcs use #SLOT-wd0 and
/// </s> entries become #SLOT:#SLOT arcs into the exit state, which is final
/// with weight 0. A phrase therefore weighs minus its full sub-grammar
/// sentence score. Throws GraphError when a word lacks the SLOT_ prefix.
Wfst subgrammar_to_fst(const NGramModel& model, const std::string& slot);

/// Splices a fresh copy of the matching sub machine into every SLOT arc of
/// `root`: an entry arc <eps>:SLOT carrying the slot arc's weight into the
/// copy's start, and an <eps>:<eps> arc of weight 0 from the copy's exit
/// back to the slot arc's target. Arc count is root - slot arcs + sum over
/// splices of (sub arcs + 2). Throws GraphError for a missing sub machine
/// or clashing labels.
Wfst replace_slots(const Wfst& root, const std::map<std::string, Wfst>& subs);

/// Arc count replace_slots will produce, from the inputs alone.
std::size_t predicted_replaced_arcs(const Wfst& root,
                                    const std::map<std::string, Wfst>& subs);

/*
  Searching a graph for a token sequence. Tokens are word labels; the search
  inserts the non-word moves itself. Each move resolves one event (a word,
  entering slot S, leaving slot S, or the end) at a state by taking the arc
  whose match key is the event, following failure arcs while none exists.
  Failure arcs are thus taken exactly when the back-off recursion would
  back off, which keeps path weights equal to model scores.

  A search configuration is (state, slot), slot being the label of the slot
  the state lies in (kEpsilon for the root). Inside slot S a word of S can
  either continue the phrase or close it and open a new S phrase, so
  consume() returns up to two routes.
*/
struct Route {
  std::vector<std::uint32_t> arcs;
  double weight = 0.0;  // arcs plus final weight for finish()
  StateIdx state = kNoState;
  Label slot = kEpsilon;
};

/// Slot context a search over `g` starts in.
Label initial_slot(const Wfst& g);
/// Label of a token, throwing GraphError("unknown token 'x'") when the
/// graph cannot accept it as input.
Label token_label(const Wfst& g, std::string_view token);
std::vector<Route> consume(const Wfst& g, StateIdx s, Label slot, Label token);
std::optional<Route> finish(const Wfst& g, StateIdx s, Label slot);

struct GraphScore {
  double weight = 0.0;  // -log10
  std::vector<std::uint32_t> path;
};

/// Lightest accepting path for `words`. Throws GraphError naming an
/// unknown token, or when no path accepts the sequence.
GraphScore score_sentence_via_graph(const Wfst& g,
                                    std::span<const std::string> words);

}  // namespace slotlm

#endif  // SLOTLM_GRAPH_HPP_
