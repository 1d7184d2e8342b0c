// rescorer.cpp

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

#include "slotlm/rescorer.hpp"

#include <set>

#include "json.hpp"
#include "slotlm/arpa.hpp"
#include "slotlm/graph.hpp"
#include "slotlm/io_util.hpp"
#include "slotlm/pruner.hpp"

namespace slotlm {

RescoreContext::RescoreContext(std::shared_ptr<const Wfst> graph,
                               std::map<std::string, NGramModel> graph_subs,
                               const DlmSet& dlms, std::uint64_t generation)
    : graph_(std::move(graph)), graph_subs_(std::move(graph_subs)) {
  const SymbolTable& syms = graph_->symbols();
  std::set<std::string> graph_slots;
  for (Label l = 1; l < syms.size(); ++l) {
    if (syms.kind(l) == SymbolKind::kSlot) graph_slots.insert(syms.name(l));
  }
  for (const auto& s : graph_slots) {
    if (!dlms.slots.count(s)) throw ModelError("no DLM for slot " + s);
    if (!graph_subs_.count(s)) throw ModelError("no graph sub-grammar for slot " + s);
  }
  for (const auto& [name, m] : dlms.slots) {
    if (!graph_slots.count(name)) {
      throw ModelError("DLM for slot " + name + " but the graph has no such slot");
    }
  }

  auto gen = std::make_shared<DlmGeneration>();
  gen->id = generation;
  slot_labels_.push_back(kEpsilon);
  gen->names.push_back("");
  gen->models.push_back(std::make_shared<const NGramModel>(dlms.root));
  gen->provenance.push_back(dlms.root_provenance);
  for (const auto& [name, m] : dlms.slots) {
    slot_labels_.push_back(*syms.find(name));
    gen->names.push_back(name);
    gen->models.push_back(std::make_shared<const NGramModel>(m));
    auto p = dlms.slot_provenance.find(name);
    gen->provenance.push_back(p == dlms.slot_provenance.end() ? DlmProvenance{}
                                                              : p->second);
  }
  for (std::size_t d = 0; d < gen->models.size(); ++d) {
    gen->tries.push_back(std::make_shared<const NGramTrie>(*gen->models[d]));
    gen->words.push_back(label_map(*gen->tries[d], static_cast<int>(d)));
  }
  current_ = std::move(gen);
}

std::shared_ptr<const DlmGeneration> RescoreContext::generation() const {
  std::lock_guard<std::mutex> lock(mu_);
  return current_;
}

void RescoreContext::publish(std::shared_ptr<const DlmGeneration> next) {
  std::lock_guard<std::mutex> lock(mu_);
  current_ = std::move(next);
}

int RescoreContext::dlm_index(Label slot) const {
  for (std::size_t d = 0; d < slot_labels_.size(); ++d) {
    if (slot_labels_[d] == slot) return static_cast<int>(d);
  }
  throw GraphError("label " + std::to_string(slot) + " names no DLM");
}

const NGramModel& RescoreContext::graph_sub(const std::string& slot) const {
  auto it = graph_subs_.find(slot);
  if (it == graph_subs_.end()) throw ModelError("unknown slot " + slot);
  return it->second;
}

std::vector<WordId> RescoreContext::label_map(const NGramTrie& t, int d) const {
  const SymbolTable& syms = graph_->symbols();
  std::vector<WordId> out(syms.size(), kNoWord);
  for (Label l = 1; l < syms.size(); ++l) {
    const SymbolKind k = syms.kind(l);
    const bool mine = d == 0 ? (k == SymbolKind::kSlot ||
                                (k == SymbolKind::kWord && syms.owner(l) == kEpsilon))
                             : (k == SymbolKind::kWord && syms.owner(l) == slot_labels_[d]);
    if (!mine) continue;
    if (auto w = t.vocab().find(syms.name(l))) out[l] = *w;
  }
  return out;
}

std::shared_ptr<const DlmGeneration> RescoreContext::derive(
    const DlmGeneration& base, int d, NGramModel dlm, DlmProvenance prov) const {
  auto gen = std::make_shared<DlmGeneration>(base);
  gen->id = base.id + 1;
  prov.generation = gen->id;
  gen->models.at(d) = std::make_shared<const NGramModel>(std::move(dlm));
  gen->tries.at(d) = std::make_shared<const NGramTrie>(*gen->models[d]);
  gen->words.at(d) = label_map(*gen->tries[d], d);
  gen->provenance.at(d) = std::move(prov);
  return gen;
}

RescoreToken init_token(const RescoreContext& ctx, const DlmGeneration& gen) {
  return RescoreToken{ctx.graph().start(), 0, gen.tries.at(0)->bos_state(),
                      StateId64::none()};
}

StepResult step(const RescoreContext& ctx, const DlmGeneration& gen,
                const RescoreToken& token, std::uint32_t arc_id) {
  const Wfst& g = ctx.graph();
  const Arc& arc = g.arc(arc_id);
  if (arc.src != token.graph_state) {
    throw GraphError("arc " + std::to_string(arc_id) + " does not leave the token's state");
  }
  const SymbolTable& syms = g.symbols();
  const SymbolKind in = syms.kind(arc.ilabel);
  const SymbolKind out = syms.kind(arc.olabel);
  StepResult r{token, 0.0};
  r.token.graph_state = arc.dst;

  if (arc.ilabel == kEpsilon && out == SymbolKind::kSlot) {
    if (token.dlm != 0) throw GraphError("slot entry inside a slot");
    const NGramTrie& root = *gen.tries[0];
    const Advance a = root.advance(token.dlm_state, gen.words[0][arc.olabel]);
    const int d = ctx.dlm_index(arc.olabel);
    r.delta = a.score;
    r.token.dlm = d;
    r.token.dlm_state = gen.tries.at(d)->bos_state();
    r.token.backup = a.next;
  } else if (in == SymbolKind::kSlotExit) {
    if (token.dlm == 0) throw GraphError("slot exit while the root DLM is active");
    const NGramTrie& t = *gen.tries[token.dlm];
    r.delta = t.advance(token.dlm_state, t.eos()).score;
    r.token.dlm = 0;
    r.token.dlm_state = token.backup;
    r.token.backup = StateId64::none();
  } else if (in == SymbolKind::kWord || in == SymbolKind::kSlot) {
    const WordId w = gen.words[token.dlm][arc.ilabel];
    if (w == kNoWord) {
      throw GraphError("word '" + syms.name(arc.ilabel) + "' unknown to DLM " +
                       std::to_string(token.dlm));
    }
    const Advance a = gen.tries[token.dlm]->advance(token.dlm_state, w);
    r.delta = a.score;
    r.token.dlm_state = a.next;
  }
  return r;
}

double final_delta(const DlmGeneration& gen, const RescoreToken& token) {
  if (token.dlm != 0) throw GraphError("sentence ends inside a slot");
  const NGramTrie& root = *gen.tries[0];
  return root.advance(token.dlm_state, root.eos()).score;
}

DecodeResult decode(const RescoreContext& ctx, std::span<const std::string> words,
                    double beam) {
  const Wfst& g = ctx.graph();
  const auto gen = ctx.generation();
  std::vector<Label> tokens;
  tokens.reserve(words.size());
  for (const auto& w : words) tokens.push_back(token_label(g, w));

  struct Node {
    std::size_t prev;
    std::vector<std::uint32_t> arcs;
    std::vector<double> deltas;
  };
  std::vector<Node> nodes{{0, {}, {}}};
  // Walks a route, returning the token, summed score change and deltas.
  auto walk = [&](RescoreToken tok, const Route& route, double* score,
                  std::vector<double>* deltas) {
    *score -= route.weight;
    for (std::uint32_t a : route.arcs) {
      const StepResult s = step(ctx, *gen, tok, a);
      tok = s.token;
      *score += s.delta;
      deltas->push_back(s.delta);
    }
    if (ctx.slot_label(tok.dlm) != route.slot) {
      throw GraphError("DLM and graph disagree on the active slot");
    }
    return tok;
  };

  std::map<RescoreToken, std::pair<double, std::size_t>> layer{
      {init_token(ctx, *gen), {0.0, 0}}};
  for (Label t : tokens) {
    std::map<RescoreToken, std::pair<double, std::size_t>> next;
    for (const auto& [tok, val] : layer) {
      for (const Route& route :
           consume(g, tok.graph_state, ctx.slot_label(tok.dlm), t)) {
        double score = val.first;
        std::vector<double> deltas;
        const RescoreToken nt = walk(tok, route, &score, &deltas);
        auto it = next.find(nt);
        if (it != next.end() && it->second.first >= score) continue;
        nodes.push_back(Node{val.second, route.arcs, std::move(deltas)});
        next[nt] = {score, nodes.size() - 1};
      }
    }
    if (next.empty()) throw GraphError("no accepting path");
    if (beam != kInfinity) {
      double best = -kInfinity;
      for (const auto& [tok, val] : next) best = std::max(best, val.first);
      std::erase_if(next, [&](const auto& kv) { return kv.second.first < best - beam; });
    }
    layer = std::move(next);
  }

  DecodeResult out;
  out.generation = gen->id;
  double best = -kInfinity;
  std::size_t best_node = 0;
  Node tail{0, {}, {}};
  double tail_final = 0.0;
  for (const auto& [tok, val] : layer) {
    auto route = finish(g, tok.graph_state, ctx.slot_label(tok.dlm));
    if (!route) continue;
    double score = val.first;
    std::vector<double> deltas;
    const RescoreToken end = walk(tok, *route, &score, &deltas);
    const double fd = final_delta(*gen, end);
    score += fd;
    if (score > best) {
      best = score;
      best_node = val.second;
      tail = Node{0, route->arcs, std::move(deltas)};
      tail_final = fd;
    }
  }
  if (best == -kInfinity) throw GraphError("no accepting path");

  out.total = best;
  out.final_delta = tail_final;
  std::vector<const Node*> segs{&tail};
  for (std::size_t n = best_node; n != 0; n = nodes[n].prev) segs.push_back(&nodes[n]);
  for (auto it = segs.rbegin(); it != segs.rend(); ++it) {
    out.path.insert(out.path.end(), (*it)->arcs.begin(), (*it)->arcs.end());
    out.deltas.insert(out.deltas.end(), (*it)->deltas.begin(), (*it)->deltas.end());
  }
  double delta_sum = tail_final;
  for (double d : out.deltas) delta_sum += d;
  out.graph_weight = delta_sum - best;
  return out;
}

std::string decode_report_line(std::span<const std::string> words,
                               const DecodeResult& r) {
  std::string input;
  for (const auto& w : words) {
    if (!input.empty()) input += ' ';
    input += w;
  }
  nlohmann::ordered_json j;
  j["input"] = input;
  j["total_log10"] = r.total;
  j["graph_weight"] = r.graph_weight;
  j["path"] = r.path;
  j["deltas"] = r.deltas;
  j["final_delta"] = r.final_delta;
  j["generation"] = r.generation;
  return j.dump();
}

UpdateResult hot_update(RescoreContext& ctx, const std::string& slot,
                        std::span<const std::string> entities,
                        const SlotConfig& config) {
  auto lock = ctx.lock_updates();
  const NGramModel& c = ctx.graph_sub(slot);
  const auto label = ctx.graph().symbols().find(slot);
  if (!label) throw ModelError("unknown slot " + slot);
  const int d = ctx.dlm_index(*label);

  std::vector<std::string> offending;
  std::set<std::string> seen;
  for (const auto& e : entities) {
    for (const auto& t : split_whitespace(e)) {
      if (!c.vocab().contains(slot_word(slot, t)) && seen.insert(t).second) {
        offending.push_back(t);
      }
    }
  }
  if (!offending.empty()) {
    std::string what = "update rejected: tokens outside the graph vocabulary of " + slot + ":";
    for (const auto& t : offending) what += " " + t;
    throw UpdateRejected(what, std::move(offending));
  }

  SlotConfig cfg = config;
  cfg.name = slot;
  // Round-trip through ARPA text so the DLM matches the model as persisted.
  UpdateResult out{0,
                   parse_arpa_string(write_arpa_string(
                       train_subgrammar(entities, cfg, c.vocab().words()))),
                   NGramModel()};
  const SubsetReport rep = verify_subset(out.sub_model, c);
  if (!rep.ok()) {
    throw ModelError("graph sub-grammar of " + slot +
                     " is not a subset of the retrained model; rebuild the graph");
  }
  out.dlm = build_dlm(out.sub_model, c);
  const auto base = ctx.generation();
  auto next = ctx.derive(*base, d, out.dlm,
                         DlmProvenance{model_fingerprint(out.sub_model),
                                       model_fingerprint(c), 0});
  out.generation = next->id;
  ctx.publish(std::move(next));
  return out;
}

}  // namespace slotlm
