// acceptance.cpp

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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if
// any criterion fails. Tolerances and time limits are pinned below.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>

#include "slotlm/class_grammar.hpp"
#include "slotlm/io_util.hpp"
#include "slotlm/trainer.hpp"
#include "toy_pipeline.hpp"

using namespace slotlm;
using namespace slotlm::test;

namespace {

constexpr double kDlmTol = 1e-9;
constexpr double kRescoreTol = 1e-6;
constexpr double kClassTol = 1e-9;
constexpr double kNormTol = 1e-9;
constexpr double kGraphTol = 1e-9;
constexpr double kTieTol = 1e-9;

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

Strings prefixed(const std::string& slot, const std::string& entity) {
  Strings out;
  for (const auto& t : split_whitespace(entity)) out.push_back(slot + "_" + t);
  return out;
}

std::size_t independent_arc_prediction(const Wfst& root, const std::map<std::string, Wfst>& subs) {
  std::size_t n = root.num_arcs();
  for (const Arc& a : root.arcs()) {
    if (root.symbols().kind(a.ilabel) == SymbolKind::kSlot) {
      n += subs.at(root.symbols().name(a.ilabel)).num_arcs() + 2 - 1;
    }
  }
  return n;
}

// 1. Difference models are exact for random B and pruned C.
Outcome dlm_exactness() {
  Timer timer;
  std::mt19937_64 rng(20261);
  double worst = 0.0;
  std::size_t queries = 0;
  for (int seed = 0; seed < 50; ++seed) {
    const int order = 1 + seed % 3;
    const int words = 3 + (seed * 7) % 16;  // at most 20 with <s> and </s>
    const NGramModel b = round_trip(random_model(rng, order, plain_words(words)));
    PruneSpec spec;
    switch (seed % 4) {
      case 0: spec = PruneSpec::target_order(1); break;
      case 1: spec = PruneSpec::target_order(std::max(1, order - 1)); break;
      case 2: spec = PruneSpec::threshold(0.002); break;
      default: spec = PruneSpec::threshold(0.02); break;
    }
    const NGramModel c = round_trip(prune(b, spec));
    const NGramModel a = build_dlm(b, c);
    const NaiveLm nb = NaiveLm::of(b), nc = NaiveLm::of(c);
    const NGramTrie ta(a);
    std::uniform_int_distribution<WordId> any(0, static_cast<WordId>(a.vocab().size() - 1));
    std::uniform_int_distribution<int> len(0, order + 1);
    const auto targets = predictable_words(a);
    std::uniform_int_distribution<std::size_t> target(0, targets.size() - 1);
    for (int q = 0; q < 1000; ++q, ++queries) {
      WordSeq h(static_cast<std::size_t>(len(rng)));
      for (auto& w : h) w = any(rng);
      const WordId w = targets[target(rng)];
      const Strings hs = a.words_of(h);
      const std::string ws = a.vocab().word(w);
      const double want = nb.logprob(hs, ws) - nc.logprob(hs, ws);
      worst = std::max(worst, std::abs(ta.advance(ta.state_for(h), w).score - want));
    }
  }
  const double t = timer.seconds();
  return {worst <= kDlmTol && t < 10.0,
          fmt("%.0f queries, max error %.3g (tol 1e-9), %.2fs (limit 10s)",
              static_cast<double>(queries), worst, t)};
}

// 2. C = B gives an all-zero difference model and zero corrections.
Outcome identity_dlm() {
  std::mt19937_64 rng(20262);
  std::size_t nonzero = 0, entries = 0;
  for (int i = 0; i < 20; ++i) {
    const NGramModel b = random_model(rng, 1 + i % 3, plain_words(3 + i % 15));
    const NGramModel a = build_dlm(b, b);
    for (int k = 1; k <= a.order(); ++k) {
      for (const auto& [ng, e] : a.entries(k)) {
        ++entries;
        if (e.logprob != 0.0 || (e.has_backoff && e.backoff != 0.0)) ++nonzero;
      }
    }
  }
  const Pipeline p = toy_pipeline(std::nullopt);
  for (const auto& m : p.ctx->generation()->models) {
    for (int k = 1; k <= m->order(); ++k) {
      for (const auto& [ng, e] : m->entries(k)) {
        ++entries;
        if (e.logprob != 0.0 || (e.has_backoff && e.backoff != 0.0)) ++nonzero;
      }
    }
  }
  std::size_t sentences = 0, deltas = 0, bad_deltas = 0;
  for (const auto& s : all_sentences(toy_graph_vocab(), 5)) {
    const DecodeResult r = decode(*p.ctx, s);
    ++sentences;
    for (double d : r.deltas) {
      ++deltas;
      if (d != 0.0) ++bad_deltas;
    }
    if (r.final_delta != 0.0) ++bad_deltas;
  }
  return {nonzero == 0 && bad_deltas == 0,
          fmt("%.0f of %.0f entries nonzero; ", static_cast<double>(nonzero),
              static_cast<double>(entries)) +
              fmt("toy: %.0f sentences, %.0f of %.0f deltas nonzero",
                  static_cast<double>(sentences), static_cast<double>(bad_deltas),
                  static_cast<double>(deltas))};
}

// Index of the best score; near-ties go to the first.
std::size_t argmax(const std::vector<double>& v, const std::vector<std::size_t>& idx) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < idx.size(); ++i) {
    if (v[idx[i]] > v[idx[best]] + kTieTol) best = i;
  }
  return best;
}

// 3. Rescoring the pruned graph recovers the unpruned class model.
Outcome rescoring_recovery() {
  Timer timer;
  const Pipeline p = toy_pipeline(PruneSpec::target_order(1));
  const NaiveClassModel full = naive_class(p.root_b, p.subs_b);

  std::map<std::string, Wfst> full_subs;
  for (const auto& [name, b] : p.subs_b) full_subs.emplace(name, subgrammar_to_fst(b, name));
  const Wfst full_graph =
      replace_slots(lm_to_fst(p.root_b, {"SONG-SLOT", "SINGER-SLOT"}), full_subs);

  const auto sentences = all_sentences(toy_graph_vocab(), 5);
  std::vector<double> rescored(sentences.size()), reference(sentences.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    rescored[i] = decode(*p.ctx, sentences[i]).total;
    reference[i] = -score_sentence_via_graph(full_graph, sentences[i]).weight;
    worst = std::max(worst, std::abs(rescored[i] - full.score(sentences[i], true).viterbi));
  }

  std::mt19937_64 rng(20263);
  std::uniform_int_distribution<std::size_t> pick(0, sentences.size() - 1), size(2, 30);
  std::size_t sets = 0, mismatches = 0;
  auto compare = [&](const std::vector<std::size_t>& idx) {
    ++sets;
    if (argmax(rescored, idx) != argmax(reference, idx)) ++mismatches;
  };
  for (int s = 0; s < 2000; ++s) {
    std::vector<std::size_t> idx(size(rng));
    for (auto& i : idx) i = pick(rng);
    compare(idx);
  }
  // per-length candidate sets: every sentence of that length
  for (std::size_t len = 1; len <= 5; ++len) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      if (sentences[i].size() == len) idx.push_back(i);
    }
    compare(idx);
  }
  const double t = timer.seconds();
  return {worst <= kRescoreTol && mismatches == 0 && t < 60.0,
          fmt("%.0f sentences, max error %.3g (tol 1e-6); argmax mismatches %.0f",
              static_cast<double>(sentences.size()), worst, static_cast<double>(mismatches)) +
              fmt(" of %.0f sets; %.2fs (limit 60s)", static_cast<double>(sets), t)};
}

// 4. Sum-policy class scores equal the generative joint probability.
Outcome class_consistency() {
  std::mt19937_64 rng(20264);
  double worst = 0.0;
  std::size_t checked = 0;
  for (int round = 0; round < 6; ++round) {
    const NGramModel root = round_trip(
        random_model(rng, 2 + round % 2, {"class_a", "class_b", "S1", "S2"}));
    std::map<std::string, NGramModel> subs;
    subs.emplace("S1", round_trip(random_model(rng, 2 + round % 2, {"S1_a", "S1_c"}, true)));
    subs.emplace("S2", round_trip(random_model(rng, 2, {"S2_b", "S2_c"}, true)));
    const NaiveClassModel joint = naive_class(root, subs);
    const ClassGrammar g(root, subs);
    for (const auto& s : all_sentences({"a", "b", "c"}, 4)) {
      const double want = joint.score(s, false).sum;
      const double got = class_sentence_score(g, s, PartitionPolicy::kSum).score;
      worst = std::max(worst, std::abs(got - want));
      ++checked;
    }
  }
  return {worst <= kClassTol,
          fmt("%.0f sentences over 6 generators, max error %.3g (tol 1e-9)",
              static_cast<double>(checked), worst)};
}

SlotConfig song_config(int order) {
  SlotConfig c;
  c.name = "SONG-SLOT";
  c.order = order;
  c.prune = PruneSpec::target_order(1);
  return c;
}

// 5. Unigram-pruned sub-grammars shrink the replaced graph.
Outcome size_reduction() {
  Timer timer;
  EntityGenerator gen(5000, 20265);
  const auto entities = gen.entities(100000);
  const NGramModel b = train_subgrammar(entities, song_config(3));
  const NGramModel c = prune(b, PruneSpec::target_order(1));
  const NGramModel singer = read_arpa_file(fixture_dir() / "sub_singer.arpa");
  const Wfst root = lm_to_fst(read_arpa_file(fixture_dir() / "root.arpa"),
                              {"SONG-SLOT", "SINGER-SLOT"});

  std::map<std::string, Wfst> full_subs, pruned_subs;
  full_subs.emplace("SONG-SLOT", subgrammar_to_fst(b, "SONG-SLOT"));
  pruned_subs.emplace("SONG-SLOT", subgrammar_to_fst(c, "SONG-SLOT"));
  full_subs.emplace("SINGER-SLOT", subgrammar_to_fst(singer, "SINGER-SLOT"));
  pruned_subs.emplace("SINGER-SLOT", subgrammar_to_fst(singer, "SINGER-SLOT"));
  const Wfst full = replace_slots(root, full_subs);
  const Wfst pruned = replace_slots(root, pruned_subs);
  const double ratio = static_cast<double>(full.num_arcs()) / pruned.num_arcs();
  const bool predicted = independent_arc_prediction(root, full_subs) == full.num_arcs() &&
                         independent_arc_prediction(root, pruned_subs) == pruned.num_arcs() &&
                         predicted_replaced_arcs(root, full_subs) == full.num_arcs() &&
                         predicted_replaced_arcs(root, pruned_subs) == pruned.num_arcs();
  const double t = timer.seconds();
  return {ratio >= 10.0 && predicted && t < 300.0,
          fmt("arcs %.0f -> %.0f, ratio %.1fx (need 10x)", static_cast<double>(full.num_arcs()),
              static_cast<double>(pruned.num_arcs()), ratio) +
              (predicted ? "; arc accounting exact" : "; arc accounting WRONG") +
              fmt("; %.1fs (limit 300s)", t)};
}

// 6. Hot update at 100k entities.
Outcome hot_update_scale() {
  EntityGenerator old_gen(5000, 20266);
  const auto old_entities = old_gen.entities(100000);
  std::set<std::string> known;
  for (const auto& e : old_entities) {
    for (const auto& t : split_whitespace(e)) known.insert(t);
  }
  EntityGenerator new_gen(5000, 20267);
  std::vector<std::string> new_entities;
  while (new_entities.size() < 100000) {
    const std::string e = new_gen.entity();
    bool ok = true;
    for (const auto& t : split_whitespace(e)) ok = ok && known.count(t);
    if (ok) new_entities.push_back(e);
  }

  const SlotConfig cfg = song_config(3);
  std::map<std::string, NGramModel> subs;
  subs.emplace("SONG-SLOT", round_trip(train_subgrammar(old_entities, cfg)));
  subs.emplace("SINGER-SLOT", read_arpa_file(fixture_dir() / "sub_singer.arpa"));
  const NGramModel root = read_arpa_file(fixture_dir() / "root.arpa");
  Pipeline p = build_pipeline(root, subs, PruneSpec::target_order(1), PruneSpec::target_order(1));
  const std::string graph_bytes = serialize_wfst(*p.graph);

  Timer timer;
  hot_update(*p.ctx, "SONG-SLOT", new_entities, cfg);
  const double t = timer.seconds();
  const bool unchanged = serialize_wfst(*p.graph) == graph_bytes;

  subs.at("SONG-SLOT") = round_trip(
      train_subgrammar(new_entities, cfg, p.subs_c.at("SONG-SLOT").vocab().words()));
  const Pipeline rebuilt =
      build_pipeline(root, subs, PruneSpec::target_order(1), PruneSpec::target_order(1));

  std::mt19937_64 rng(20268);
  std::uniform_int_distribution<std::size_t> pick(0, new_entities.size() - 1);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    Strings s{"class_play"};
    for (auto& w : prefixed("SONG-SLOT", new_entities[pick(rng)])) s.push_back(w);
    worst = std::max(worst, std::abs(decode(*p.ctx, s).total - decode(*rebuilt.ctx, s).total));
  }
  return {t < 60.0 && unchanged && worst <= kRescoreTol,
          fmt("update %.2fs (limit 60s); ", t) +
              (unchanged ? "graph bytes unchanged; " : "graph bytes CHANGED; ") +
              fmt("100 new entities, max error vs rebuild %.3g (tol 1e-6)", worst)};
}

// 7. parse -> write -> parse is a fixpoint.
Outcome arpa_round_trip() {
  std::size_t models = 0, failures = 0;
  auto check = [&](const std::string& text, bool canonical) {
    ++models;
    const NGramModel m1 = parse_arpa_string(text);
    const std::string t1 = write_arpa_string(m1);
    const NGramModel m2 = parse_arpa_string(t1);
    const std::string t2 = write_arpa_string(m2);
    bool ok = t1 == t2 && (!canonical || t1 == text);
    ok = ok && NaiveLm(t1).entries().size() == m1.num_entries();
    for (int k = 1; ok && k <= m1.order(); ++k) {
      for (const auto& [ng, e] : m1.entries(k)) {
        const NGramEntry* f = m2.find(ids(m2, m1.words_of(ng)));
        ok = ok && f && f->logprob == e.logprob && f->backoff == e.backoff &&
             f->has_backoff == e.has_backoff;
      }
    }
    if (!ok) ++failures;
  };
  for (const auto& e : fs::directory_iterator(fixture_dir())) {
    if (e.path().extension() == ".arpa") check(slurp(e.path()), true);
  }
  std::mt19937_64 rng(20267);
  for (int i = 0; i < 20; ++i) {
    const NGramModel m = random_model(rng, 1 + i % 4, plain_words(2 + i));
    check(write_arpa_string(m), false);
    if (i % 4 == 0) {
      check(write_arpa_string(build_dlm(m, prune(m, PruneSpec::target_order(1)))), false);
    }
  }
  return {failures == 0 && models >= 23,
          fmt("%.0f models (fixtures, 20 random, 5 difference), %.0f failures",
              static_cast<double>(models), static_cast<double>(failures))};
}

double worst_normalization(const NGramModel& m) {
  const NGramTrie t(m);
  std::vector<WordSeq> hs{{}};
  for (int k = 1; k < m.order(); ++k) {
    for (const auto& [ng, e] : m.entries(k)) {
      if (m.has_extensions(ng)) hs.push_back(ng);
    }
  }
  double worst = 0.0;
  for (const auto& h : hs) {
    const StateId64 s = t.state_for(h);
    double sum = 0.0;
    for (WordId w = 0; w < m.vocab().size(); ++w) {
      if (w != m.bos()) sum += std::pow(10.0, t.advance(s, w).score);
    }
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  return worst;
}

// 8. Trained models normalize for every seen history.
Outcome trainer_normalization() {
  std::vector<NGramModel> models;
  std::vector<Sentence> corpus;
  for (const auto& l : read_lines(fixture_dir() / "root_corpus.txt")) {
    corpus.push_back(split_whitespace(l));
  }
  for (int order = 1; order <= 4; ++order) models.push_back(train_model(corpus, order));
  for (int order = 1; order <= 3; ++order) {
    const std::vector<std::string> songs{"white bird", "bad romance"};
    models.push_back(train_subgrammar(songs, song_config(order)));
  }
  std::mt19937_64 rng(20268);
  for (int round = 0; round < 30; ++round) {
    std::uniform_int_distribution<int> len(0, 7), word(0, 2 + round);
    std::vector<Sentence> c(static_cast<std::size_t>(3 + round * 2));
    for (auto& s : c) {
      s.resize(static_cast<std::size_t>(len(rng)));
      for (auto& w : s) w = "v" + std::to_string(word(rng));
    }
    const std::vector<std::string> extra{"x1", "x2"};
    models.push_back(round % 3 == 0 ? train_model(c, 1 + round % 4, extra)
                                    : train_model(c, 1 + round % 4));
  }
  EntityGenerator gen(300, 20269);
  models.push_back(train_subgrammar(gen.entities(3000), song_config(3)));
  double worst = 0.0;
  for (const auto& m : models) worst = std::max(worst, worst_normalization(m));
  return {worst <= kNormTol, fmt("%.0f models, max |sum - 1| %.3g (tol 1e-9)",
                                 static_cast<double>(models.size()), worst)};
}

// 9. Single-model graph paths equal trie scores.
Outcome graph_score_agreement() {
  std::mt19937_64 rng(20270);
  double worst = 0.0;
  int sentences = 0;
  for (int i = 0; i < 10; ++i) {
    const NGramModel m = random_model(rng, 1 + i % 3, plain_words(3 + i));
    const Wfst g = lm_to_fst(m, {});
    const NGramTrie t(m);
    const Strings words = plain_words(3 + i);
    std::uniform_int_distribution<int> len(0, 6);
    std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
    for (int j = 0; j < 20; ++j, ++sentences) {
      Strings s(static_cast<std::size_t>(len(rng)));
      for (auto& w : s) w = words[pick(rng)];
      const double w = score_sentence_via_graph(g, s).weight;
      worst = std::max(worst, std::abs(w + t.sentence_logprob(ids(m, s))));
    }
  }
  return {worst <= kGraphTol,
          fmt("%.0f sentences, max error %.3g (tol 1e-9)", sentences, worst)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"dlm-exactness", dlm_exactness},
      {"identity-dlm", identity_dlm},
      {"rescoring-recovery", rescoring_recovery},
      {"class-consistency", class_consistency},
      {"size-reduction", size_reduction},
      {"hot-update", hot_update_scale},
      {"arpa-round-trip", arpa_round_trip},
      {"trainer-normalization", trainer_normalization},
      {"graph-score-agreement", graph_score_agreement},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("criterion %zu %-22s %s  %s\n", i + 1, criteria[i].first.c_str(),
                o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
