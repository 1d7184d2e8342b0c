// wfst.cpp

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

#include "slotlm/wfst.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

#include "slotlm/binary_io.hpp"
#include "slotlm/io_util.hpp"

namespace slotlm {

namespace {

constexpr std::string_view kGraphMagic = "SLOTG1";
constexpr std::uint32_t kNoArc = std::numeric_limits<std::uint32_t>::max();

std::string format_weight(double w) {
  if (w == kInfinity) return "inf";
  if (w == 0.0) return "0";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), w);
  return std::string(buf, res.ptr);
}

double parse_weight(const std::string& s) {
  if (s == "inf" || s == "Infinity") return kInfinity;
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw GraphError("bad weight '" + s + "'");
  }
  return v;
}

}  // namespace

SymbolTable::SymbolTable() {
  symbols_.push_back(Symbol{"<eps>", SymbolKind::kEpsilon, kEpsilon});
  ids_.emplace("<eps>", kEpsilon);
}

Label SymbolTable::add(std::string_view name, SymbolKind kind, Label owner) {
  auto it = ids_.find(std::string(name));
  if (it != ids_.end()) {
    const Symbol& s = symbols_[it->second];
    if (s.kind != kind || s.owner != owner) {
      throw GraphError("label collision on symbol '" + std::string(name) + "'");
    }
    return it->second;
  }
  const Label l = static_cast<Label>(symbols_.size());
  symbols_.push_back(Symbol{std::string(name), kind, owner});
  ids_.emplace(std::string(name), l);
  return l;
}

std::optional<Label> SymbolTable::find(std::string_view name) const {
  auto it = ids_.find(std::string(name));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

const SymbolTable::Symbol& SymbolTable::at(Label l) const {
  if (l >= symbols_.size()) {
    throw GraphError("label " + std::to_string(l) + " out of range");
  }
  return symbols_[l];
}

std::string SymbolTable::backoff_name(std::string_view slot) {
  if (slot.empty()) return "#0";
  return "#" + std::string(slot) + "-wd0";
}

std::string SymbolTable::exit_name(std::string_view slot) {
  return "#" + std::string(slot);
}

StateIdx Wfst::add_state() {
  finals_.push_back(kInfinity);
  finalized_ = false;
  return static_cast<StateIdx>(finals_.size() - 1);
}

void Wfst::add_arc(const Arc& arc) {
  if (arc.src >= num_states() || arc.dst >= num_states()) {
    throw GraphError("arc references a missing state");
  }
  arcs_.push_back(arc);
  finalized_ = false;
}

void Wfst::finalize() {
  std::stable_sort(arcs_.begin(), arcs_.end(), [](const Arc& a, const Arc& b) {
    if (a.src != b.src) return a.src < b.src;
    return match_key(a) < match_key(b);
  });
  offsets_.assign(num_states() + 1, 0);
  for (const Arc& a : arcs_) ++offsets_[a.src + 1];
  for (std::size_t s = 0; s < num_states(); ++s) offsets_[s + 1] += offsets_[s];
  backoff_.assign(num_states(), kNoArc);
  for (std::uint32_t i = 0; i < arcs_.size(); ++i) {
    const Arc& a = arcs_[i];
    if (symbols_.kind(a.ilabel) == SymbolKind::kBackoff) {
      if (backoff_[a.src] != kNoArc) {
        throw GraphError("state " + std::to_string(a.src) +
                         " has two back-off arcs");
      }
      backoff_[a.src] = i;
    }
    if (i > 0 && arcs_[i - 1].src == a.src &&
        match_key(arcs_[i - 1]) == match_key(a) && match_key(a) != kEpsilon) {
      throw GraphError("state " + std::to_string(a.src) +
                       " is not deterministic on '" +
                       symbols_.name(match_key(a)) + "'");
    }
  }
  finalized_ = true;
}

std::pair<std::uint32_t, std::uint32_t> Wfst::arc_range(StateIdx s) const {
  if (!finalized_) throw GraphError("graph not finalized");
  return {offsets_.at(s), offsets_.at(s + 1)};
}

std::optional<std::uint32_t> Wfst::find(StateIdx s, Label key) const {
  auto [lo, hi] = arc_range(s);
  auto first = arcs_.begin() + lo, last = arcs_.begin() + hi;
  auto it = std::lower_bound(first, last, key, [](const Arc& a, Label k) {
    return match_key(a) < k;
  });
  if (it == last || match_key(*it) != key) return std::nullopt;
  return static_cast<std::uint32_t>(it - arcs_.begin());
}

std::optional<std::uint32_t> Wfst::backoff_arc(StateIdx s) const {
  if (!finalized_) throw GraphError("graph not finalized");
  const std::uint32_t b = backoff_.at(s);
  if (b == kNoArc) return std::nullopt;
  return b;
}

std::string serialize_wfst(const Wfst& g) {
  ByteWriter w;
  w.raw(kGraphMagic);
  const SymbolTable& syms = g.symbols();
  w.u32(static_cast<std::uint32_t>(syms.size()));
  for (Label l = 0; l < syms.size(); ++l) {
    w.u8(static_cast<std::uint8_t>(syms.kind(l)));
    w.u32(syms.owner(l));
    w.str(syms.name(l));
  }
  w.str(g.slot);
  w.u32(g.exit_state);
  w.u8(g.slots_replaced ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(g.num_states()));
  w.u32(g.start());
  for (StateIdx s = 0; s < g.num_states(); ++s) w.f64(g.final_weight(s));
  w.u64(g.num_arcs());
  for (const Arc& a : g.arcs()) {
    w.u32(a.src);
    w.u32(a.dst);
    w.u32(a.ilabel);
    w.u32(a.olabel);
    w.f64(a.weight);
  }
  return w.take();
}

Wfst deserialize_wfst(std::string_view bytes) {
  ByteReader r(bytes);
  if (r.raw(kGraphMagic.size()) != kGraphMagic) {
    throw GraphError("not a SLOTG1 graph");
  }
  Wfst g;
  const std::uint32_t nsyms = r.u32();
  for (std::uint32_t l = 0; l < nsyms; ++l) {
    const auto kind = static_cast<SymbolKind>(r.u8());
    const Label owner = r.u32();
    const std::string name = r.str();
    if (l == 0) continue;
    if (g.symbols().add(name, kind, owner) != l) {
      throw GraphError("symbol table out of order at " + name);
    }
  }
  g.slot = r.str();
  g.exit_state = r.u32();
  g.slots_replaced = r.u8() != 0;
  const std::uint32_t nstates = r.u32();
  for (std::uint32_t s = 0; s < nstates; ++s) g.add_state();
  g.set_start(r.u32());
  for (StateIdx s = 0; s < nstates; ++s) g.set_final(s, r.f64());
  const std::uint64_t narcs = r.u64();
  for (std::uint64_t i = 0; i < narcs; ++i) {
    Arc a;
    a.src = r.u32();
    a.dst = r.u32();
    a.ilabel = r.u32();
    a.olabel = r.u32();
    a.weight = r.f64();
    g.add_arc(a);
  }
  if (!r.done()) throw GraphError("trailing bytes in SLOTG1 graph");
  g.finalize();
  return g;
}

void write_wfst_text(const Wfst& g, std::ostream& arcs, std::ostream& syms) {
  arcs << "# start " << g.start() << " exit "
       << (g.exit_state == kNoState ? std::string("-")
                                    : std::to_string(g.exit_state))
       << " slot " << (g.slot.empty() ? "-" : g.slot) << " replaced "
       << (g.slots_replaced ? 1 : 0) << " states " << g.num_states() << "\n";
  for (const Arc& a : g.arcs()) {
    arcs << a.src << ' ' << a.dst << ' ' << a.ilabel << ' ' << a.olabel << ' '
         << format_weight(a.weight) << '\n';
  }
  for (StateIdx s = 0; s < g.num_states(); ++s) {
    if (g.is_final(s)) arcs << s << ' ' << format_weight(g.final_weight(s)) << '\n';
  }
  const SymbolTable& st = g.symbols();
  for (Label l = 0; l < st.size(); ++l) {
    syms << st.name(l) << ' ' << l << ' ' << static_cast<int>(st.kind(l)) << ' '
         << st.owner(l) << '\n';
  }
}

Wfst read_wfst_text(std::istream& arcs, std::istream& syms) {
  Wfst g;
  std::string line;
  while (std::getline(syms, line)) {
    auto f = split_whitespace(line);
    if (f.empty()) continue;
    if (f.size() != 4) throw GraphError("bad symbol line: " + line);
    const Label l = static_cast<Label>(std::stoul(f[1]));
    if (l == 0) continue;
    const Label got = g.symbols().add(
        f[0], static_cast<SymbolKind>(std::stoi(f[2])),
        static_cast<Label>(std::stoul(f[3])));
    if (got != l) throw GraphError("symbol table out of order at " + f[0]);
  }
  if (!std::getline(arcs, line)) throw GraphError("empty graph text");
  {
    auto f = split_whitespace(line);
    if (f.size() != 11 || f[0] != "#") throw GraphError("bad graph header");
    const auto nstates = std::stoul(f[10]);
    for (std::size_t s = 0; s < nstates; ++s) g.add_state();
    g.set_start(static_cast<StateIdx>(std::stoul(f[2])));
    g.exit_state = f[4] == "-" ? kNoState : static_cast<StateIdx>(std::stoul(f[4]));
    g.slot = f[6] == "-" ? "" : f[6];
    g.slots_replaced = f[8] == "1";
  }
  while (std::getline(arcs, line)) {
    auto f = split_whitespace(line);
    if (f.empty()) continue;
    if (f.size() == 2) {
      g.set_final(static_cast<StateIdx>(std::stoul(f[0])), parse_weight(f[1]));
    } else if (f.size() == 5) {
      g.add_arc(Arc{static_cast<StateIdx>(std::stoul(f[0])),
                    static_cast<StateIdx>(std::stoul(f[1])),
                    static_cast<Label>(std::stoul(f[2])),
                    static_cast<Label>(std::stoul(f[3])), parse_weight(f[4])});
    } else {
      throw GraphError("bad arc line: " + line);
    }
  }
  g.finalize();
  return g;
}

void save_wfst(const Wfst& g, const std::filesystem::path& path) {
  std::ostringstream arcs, syms;
  write_wfst_text(g, arcs, syms);
  write_file_atomic(path, serialize_wfst(g));
  write_file_atomic(path.string() + ".txt", arcs.str());
  write_file_atomic(path.string() + ".syms", syms.str());
}

Wfst load_wfst(const std::filesystem::path& path) {
  return deserialize_wfst(read_file(path));
}

}  // namespace slotlm
