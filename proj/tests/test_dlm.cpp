// test_dlm.cpp

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

#include <random>

#include "doctest.h"
#include "slotlm/arpa.hpp"
#include "slotlm/dlm.hpp"
#include "slotlm/pruner.hpp"
#include "slotlm/trainer.hpp"
#include "support.hpp"

using namespace slotlm;
using namespace slotlm::test;

namespace {

struct Triple {
  NGramModel b, c, a;
};

// B and C go through ARPA text first so the text oracle sees the same
// numbers the library does.
Triple make_triple(std::mt19937_64& rng, int order, int words, const PruneSpec& spec) {
  Triple t;
  t.b = round_trip(random_model(rng, order, plain_words(words)));
  t.c = round_trip(prune(t.b, spec));
  t.a = build_dlm(t.b, t.c);
  return t;
}

}  // namespace

TEST_CASE("identity difference model is all zeros") {
  std::mt19937_64 rng(1);
  for (int round = 0; round < 10; ++round) {
    const NGramModel b = random_model(rng, 1 + round % 3, plain_words(5 + round));
    const NGramModel a = build_dlm(b, b);
    CHECK(a.is_difference());
    CHECK(a.num_entries() == b.num_entries());
    for (int k = 1; k <= a.order(); ++k) {
      for (const auto& [ng, e] : a.entries(k)) {
        CHECK(e.logprob == 0.0);
        CHECK(e.backoff == 0.0);
      }
    }
    const NGramTrie ta(a);
    for (WordId w = 0; w < a.vocab().size(); ++w) {
      if (w != a.bos()) CHECK(dlm_query(ta, ta.bos_state(), w).score == 0.0);
    }
  }
}

TEST_CASE("fixture song bigram against its unigram prune, by file arithmetic") {
  const NGramModel b = read_arpa_file(fixture_dir() / "sub_song.arpa");
  const NGramModel c = round_trip(prune(b, PruneSpec::target_order(1)));
  const NGramModel a = build_dlm(b, c);
  const NaiveLm nb(slurp(fixture_dir() / "sub_song.arpa"));
  const NaiveLm nc(write_arpa_string(c));
  const std::string white = "SONG-SLOT_white";
  const double alpha_c = nc.entries().count({"<s>"}) ? nc.entries().at({"<s>"}).backoff : 0.0;
  const double want = nb.entries().at({"<s>", white}).logprob -
                      (alpha_c + nc.entries().at({white}).logprob);
  CHECK(a.find(ids(a, {"<s>", white}))->logprob == doctest::Approx(want).epsilon(1e-15));
  // unigrams shared verbatim cancel
  for (const auto& [ng, e] : a.entries(1)) CHECK(e.logprob == 0.0);
}

TEST_CASE("queries equal P_B - P_C for arbitrary histories") {
  std::mt19937_64 rng(2);
  const Triple t = make_triple(rng, 3, 12, PruneSpec::threshold(0.005));
  const NaiveLm nb = NaiveLm::of(t.b), nc = NaiveLm::of(t.c);
  const NGramTrie ta(t.a);
  std::uniform_int_distribution<WordId> word(0, static_cast<WordId>(t.a.vocab().size() - 1));
  std::uniform_int_distribution<int> len(0, 5);
  double worst = 0.0;
  for (int q = 0; q < 1000; ++q) {
    WordSeq h(static_cast<std::size_t>(len(rng)));
    for (auto& w : h) w = word(rng);
    WordId w = word(rng);
    if (w == t.a.bos()) w = t.a.eos();
    const auto hs = t.a.words_of(h);
    const std::string ws = t.a.vocab().word(w);
    const double got = dlm_query(ta, ta.state_for(h), w).score;
    worst = std::max(worst, std::abs(got - (nb.logprob(hs, ws) - nc.logprob(hs, ws))));
    // a longer history is answered from its truncated state
    WordSeq longer{word(rng), word(rng)};
    longer.insert(longer.end(), h.begin(), h.end());
    if (h.size() >= 2) {
      CHECK(dlm_query(ta, ta.state_for(longer), w).score == got);
    }
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("verify_dlm passes on built models and says so for zero samples") {
  std::mt19937_64 rng(3);
  const Triple t = make_triple(rng, 3, 8, PruneSpec::target_order(1));
  const DlmReport r = verify_dlm(t.a, t.b, t.c, 2000, 7);
  CHECK(r.pass);
  CHECK(r.samples == 2000);
  CHECK(r.max_error <= 1e-9);
  const DlmReport z = verify_dlm(t.a, t.b, t.c, 0, 7);
  CHECK(z.pass);
  CHECK(z.note.find("0 samples") != std::string::npos);
}

TEST_CASE("a perturbed backoff is caught and blamed") {
  std::mt19937_64 rng(4);
  const Triple t = make_triple(rng, 2, 5, PruneSpec::target_order(1));
  NGramModel bad = t.a;
  WordSeq target;
  const std::size_t predictable = bad.vocab().size() - 1;
  for (auto& [ng, e] : bad.mutable_entries(1)) {
    if (e.has_backoff && bad.extensions(ng).size() < predictable) {
      e.backoff += 0.1;
      target = ng;
      break;
    }
  }
  REQUIRE_FALSE(target.empty());
  const DlmReport r = verify_dlm(bad, t.b, t.c, 5000, 11);
  CHECK_FALSE(r.pass);
  CHECK(r.max_error == doctest::Approx(0.1).epsilon(1e-6));
  REQUIRE(r.worst.has_value());
  CHECK(r.worst->suspect_history == bad.words_of(target));
  CHECK(r.worst->suspect_kind == "backoff");
}

TEST_CASE("sentence scores add up exhaustively") {
  std::mt19937_64 rng(5);
  const Triple t = make_triple(rng, 3, 6, PruneSpec::threshold(0.01));
  const NGramTrie ta(t.a), tb(t.b), tc(t.c);
  const Strings words = plain_words(6);
  double worst = 0.0;
  for (const auto& s : all_sentences(words, 6)) {
    const WordSeq w = ids(t.b, s);
    const double lhs = tc.sentence_logprob(w) + ta.sentence_logprob(w);
    worst = std::max(worst, std::abs(lhs - tb.sentence_logprob(w)) / (s.size() + 1.0));
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("rebuilding after a new B restores exactness") {
  SlotConfig cfg;
  cfg.name = "S";
  cfg.order = 3;
  const std::vector<std::string> old_e{"a b c", "b c", "c a"};
  const std::vector<std::string> new_e{"a a", "c b a", "b"};
  const NGramModel b = round_trip(train_subgrammar(old_e, cfg));
  const NGramModel c = round_trip(prune(b, PruneSpec::target_order(1)));
  const NGramModel b2 = round_trip(train_subgrammar(new_e, cfg, c.vocab().words()));
  const NGramModel a2 = build_dlm(b2, c);
  CHECK(verify_dlm(a2, b2, c, 3000, 1).pass);
  CHECK_FALSE(verify_dlm(build_dlm(b, c), b2, c, 3000, 1).pass);
}

TEST_CASE("build_dlm input errors") {
  std::mt19937_64 rng(6);
  const NGramModel b = random_model(rng, 2, plain_words(4));
  const NGramModel other = random_model(rng, 2, plain_words(5));
  CHECK_THROWS_AS(build_dlm(b, other), ModelError);  // vocabulary
  CHECK_THROWS_AS(build_dlm(prune(b, PruneSpec::target_order(1)), b), ModelError);  // subset
  NGramModel diff = build_dlm(b, b);
  CHECK_THROWS_AS(build_dlm(diff, b), ModelError);
}

TEST_CASE("manifest round-trip") {
  TempDir dir("dlm_manifest");
  DlmManifest m;
  m.generation = 3;
  m.root = {"root_dlm.arpa", {"aa", "bb", 1}};
  m.slots["SONG-SLOT"] = {"sub_SONG-SLOT_dlm.arpa", {"cc", "dd", 3}};
  write_dlm_manifest(m, dir.path() / "m.json");
  const DlmManifest back = read_dlm_manifest(dir.path() / "m.json");
  CHECK(back.generation == 3);
  CHECK(back.root.file == "root_dlm.arpa");
  CHECK(back.root.provenance.c_id == "bb");
  CHECK(back.slots.at("SONG-SLOT").provenance.generation == 3);
  CHECK(back.slots.at("SONG-SLOT").provenance.b_id == "cc");
}
