// slotlm/wfst.hpp

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

#ifndef SLOTLM_WFST_HPP_
#define SLOTLM_WFST_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace slotlm {

using Label = std::uint32_t;
using StateIdx = std::uint32_t;

inline constexpr Label kEpsilon = 0;
inline constexpr StateIdx kNoState = std::numeric_limits<StateIdx>::max();
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SymbolKind : std::uint8_t {
  kEpsilon = 0,
  kWord = 1,
  kBackoff = 2,   // #0, #SLOT-wd0
  kSlot = 3,      // SONG-SLOT
  kSlotExit = 4,  // #SONG-SLOT
};

/// Label table shared by input and output sides. Label 0 is <eps>. Every
/// word, back-off and exit symbol records the slot it belongs to (0 for the
/// root grammar), which is how a search knows when a token leaves a slot.
class SymbolTable {
 public:
  SymbolTable();

  /// Returns the existing label when `name` is already present with the
  /// same kind and owner; throws GraphError on any other clash.
  Label add(std::string_view name, SymbolKind kind, Label owner = kEpsilon);
  std::optional<Label> find(std::string_view name) const;

  const std::string& name(Label l) const { return at(l).name; }
  SymbolKind kind(Label l) const { return at(l).kind; }
  Label owner(Label l) const { return at(l).owner; }
  std::size_t size() const { return symbols_.size(); }

  static std::string backoff_name(std::string_view slot);  // "" -> "#0"
  static std::string exit_name(std::string_view slot);     // "#SLOT"

 private:
  struct Symbol {
    std::string name;
    SymbolKind kind;
    Label owner;
  };
  const Symbol& at(Label l) const;

  std::vector<Symbol> symbols_;
  std::unordered_map<std::string, Label> ids_;
};

/// Weights are -log10 probabilities; a path weighs the sum of its arcs.
struct Arc {
  StateIdx src = 0;
  StateIdx dst = 0;
  Label ilabel = kEpsilon;
  Label olabel = kEpsilon;
  double weight = 0.0;
};

/*
  Arcs are stored in one array sorted by source state and match key, so the
  arc id of the sorted position is stable once finalize() has run. The
  match key of an arc is its input label, or its output label when the
  input is epsilon (slot entry arcs eps:SLOT and the eps:eps exit
  connectors). Back-off arcs are failure transitions: a search takes one
  only when the state has no arc for the event at hand.
*/
class Wfst {
 public:
  SymbolTable& symbols() { return symbols_; }
  const SymbolTable& symbols() const { return symbols_; }

  StateIdx add_state();
  std::size_t num_states() const { return finals_.size(); }
  StateIdx start() const { return start_; }
  void set_start(StateIdx s) { start_ = s; }
  double final_weight(StateIdx s) const { return finals_.at(s); }
  bool is_final(StateIdx s) const { return finals_.at(s) != kInfinity; }
  void set_final(StateIdx s, double w) { finals_.at(s) = w; }

  void add_arc(const Arc& arc);
  /// Sorts arcs and builds the per-state index. Must run before lookups.
  void finalize();

  std::size_t num_arcs() const { return arcs_.size(); }
  const Arc& arc(std::uint32_t id) const { return arcs_.at(id); }
  std::span<const Arc> arcs() const { return arcs_; }
  /// Arc ids [first, second) leaving `s`.
  std::pair<std::uint32_t, std::uint32_t> arc_range(StateIdx s) const;

  static Label match_key(const Arc& a) {
    return a.ilabel != kEpsilon ? a.ilabel : a.olabel;
  }
  std::optional<std::uint32_t> find(StateIdx s, Label key) const;
  std::optional<std::uint32_t> backoff_arc(StateIdx s) const;

  // Sub-grammar machines name their slot and their single exit state.
  std::string slot;
  StateIdx exit_state = kNoState;
  bool slots_replaced = false;

 private:
  SymbolTable symbols_;
  std::vector<double> finals_;
  std::vector<Arc> arcs_;
  std::vector<std::uint32_t> offsets_;       // size num_states+1
  std::vector<std::uint32_t> backoff_;       // per state, or max
  StateIdx start_ = kNoState;
  bool finalized_ = false;
};

/// Binary form: magic "SLOTG1", then little-endian fields (see README).
std::string serialize_wfst(const Wfst& g);
Wfst deserialize_wfst(std::string_view bytes);

/// Text form: a header comment "# start S exit X slot NAME replaced R",
/// one "src dst ilabel olabel weight" line per arc and one "state weight"
/// line per final state. Symbols go to a separate file, one
/// "name label kind owner" line each.
void write_wfst_text(const Wfst& g, std::ostream& arcs, std::ostream& syms);
Wfst read_wfst_text(std::istream& arcs, std::istream& syms);

/// Writes `path` (binary), `path`.txt and `path`.syms atomically.
void save_wfst(const Wfst& g, const std::filesystem::path& path);
Wfst load_wfst(const std::filesystem::path& path);

}  // namespace slotlm

#endif  // SLOTLM_WFST_HPP_
