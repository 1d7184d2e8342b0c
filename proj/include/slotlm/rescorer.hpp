// slotlm/rescorer.hpp

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

#ifndef SLOTLM_RESCORER_HPP_
#define SLOTLM_RESCORER_HPP_

#include <compare>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "slotlm/dlm.hpp"
#include "slotlm/ngram_trie.hpp"
#include "slotlm/trainer.hpp"
#include "slotlm/wfst.hpp"

namespace slotlm {

/// Search token: graph state, active DLM (0 = root, i = i-th slot), state in
/// that DLM, and the root DLM state to resume after the slot (none() while
/// in the root).
struct RescoreToken {
  StateIdx graph_state = kNoState;
  int dlm = 0;
  StateId64 dlm_state;
  StateId64 backup = StateId64::none();

  friend auto operator<=>(const RescoreToken&, const RescoreToken&) = default;
};

/// One immutable set of DLM tries. Index 0 is the root, 1.. the slots in
/// name order.
struct DlmGeneration {
  std::uint64_t id = 0;
  std::vector<std::string> names;  // "" for the root
  std::vector<std::shared_ptr<const NGramModel>> models;
  std::vector<std::shared_ptr<const NGramTrie>> tries;
  std::vector<DlmProvenance> provenance;
  // Per DLM: graph label -> DLM word id, kNoWord if foreign.
  std::vector<std::vector<WordId>> words;
};

class UpdateRejected : public ModelError {
 public:
  UpdateRejected(const std::string& what, std::vector<std::string> tokens)
      : ModelError(what), tokens_(std::move(tokens)) {}
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
};

/// Graph plus the current DLM generation. Decodes take a snapshot of the
/// generation and keep it to the end; hot_update publishes a new one.
class RescoreContext {
 public:
  /// `graph_subs` are the sub-grammar models the graph was built from;
  /// hot_update needs them. Throws ModelError when a slot of the graph has
  /// no DLM or no graph model.
  RescoreContext(std::shared_ptr<const Wfst> graph,
                 std::map<std::string, NGramModel> graph_subs, const DlmSet& dlms,
                 std::uint64_t generation = 1);

  const Wfst& graph() const { return *graph_; }
  std::shared_ptr<const DlmGeneration> generation() const;
  void publish(std::shared_ptr<const DlmGeneration> next);

  /// Graph label of the slot owning DLM index `d`, kEpsilon for 0.
  Label slot_label(int d) const { return slot_labels_.at(d); }
  int dlm_index(Label slot) const;
  const NGramModel& graph_sub(const std::string& slot) const;

  /// Serializes writers; readers never take it.
  std::unique_lock<std::mutex> lock_updates() {
    return std::unique_lock<std::mutex>(update_mu_);
  }

  /// Generation with DLM `d` replaced; other entries shared.
  std::shared_ptr<const DlmGeneration> derive(const DlmGeneration& base, int d,
                                              NGramModel dlm,
                                              DlmProvenance prov) const;

 private:
  std::vector<WordId> label_map(const NGramTrie& t, int d) const;

  std::shared_ptr<const Wfst> graph_;
  std::map<std::string, NGramModel> graph_subs_;
  std::vector<Label> slot_labels_;
  mutable std::mutex mu_;
  std::shared_ptr<const DlmGeneration> current_;
  std::mutex update_mu_;
};

RescoreToken init_token(const RescoreContext& ctx, const DlmGeneration& gen);

struct StepResult {
  RescoreToken token;
  double delta = 0.0;  // log10 correction
};

/// Moves `token` along graph arc `arc` and returns the DLM correction:
/// slot entry adds the root DLM score of the slot token and backs up the
/// advanced root state, slot exit adds the slot DLM </s> score and
/// restores it, word arcs add the active DLM score, all else 0. Throws
/// GraphError for an exit outside a slot or an entry inside one.
StepResult step(const RescoreContext& ctx, const DlmGeneration& gen,
                const RescoreToken& token, std::uint32_t arc);

/// Root DLM </s> score, added once the sentence ends.
double final_delta(const DlmGeneration& gen, const RescoreToken& token);

struct DecodeResult {
  double total = 0.0;         // rescored log10 score
  double graph_weight = 0.0;  // -log10 of the first-pass path
  std::vector<std::uint32_t> path;
  std::vector<double> deltas;  // one per path arc
  double final_delta = 0.0;
  std::uint64_t generation = 0;
};

/// Exact dynamic program over tokens for the input sequence: best total of
/// -graph weight + corrections. `beam` (log10) drops hypotheses that far
/// below the best at each position. Throws GraphError for an unknown token
/// or when nothing accepts the input.
DecodeResult decode(const RescoreContext& ctx, std::span<const std::string> words,
                    double beam = kInfinity);

/// One JSON line: input, total_log10, path arc ids, deltas, generation.
std::string decode_report_line(std::span<const std::string> words,
                               const DecodeResult& r);

struct UpdateResult {
  std::uint64_t generation = 0;
  NGramModel sub_model;  // the retrained sub-grammar
  NGramModel dlm;        // its difference model against the graph's
};

/// Retrains `slot` from `entities`, rebuilds its DLM against the graph's
/// sub-grammar and publishes a new generation. The graph is untouched.
/// Throws UpdateRejected listing entity tokens the graph cannot accept,
/// and ModelError when the graph's sub-grammar is not a subset of the new
/// model.
UpdateResult hot_update(RescoreContext& ctx, const std::string& slot,
                        std::span<const std::string> entities,
                        const SlotConfig& config);

}  // namespace slotlm

#endif  // SLOTLM_RESCORER_HPP_
