// test_trie.cpp

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
#include "slotlm/ngram_trie.hpp"
#include "support.hpp"

using namespace slotlm;
using namespace slotlm::test;

TEST_CASE("state ids pack depth and index") {
  for (unsigned d : {0u, 1u, 7u, 255u}) {
    for (std::uint64_t i : {std::uint64_t{0}, std::uint64_t{12345}, StateId64::kMaxIndex}) {
      const StateId64 s = StateId64::encode(d, i);
      CHECK(s.depth() == d);
      CHECK(s.index() == i);
    }
  }
  CHECK(StateId64::none().is_none());
  CHECK_FALSE(StateId64::encode(0, 0).is_none());
}

TEST_CASE("single unigram gives one node at depth 1") {
  NGramModel m(1);
  m.insert({m.vocab().add("a")}, NGramEntry{0.0, 0.0, false});
  const NGramTrie t(m);
  CHECK(t.node_count(1) == 1);
}

TEST_CASE("uniform unigram model") {
  NGramModel m(1);
  for (const char* w : {"a", "b", "c", "d"}) {
    m.insert({m.vocab().add(w)}, NGramEntry{std::log10(0.25), 0.0, false});
  }
  const NGramTrie t(m);
  for (WordId w = 0; w < 4; ++w) {
    CHECK(t.advance(t.root(), w).score == doctest::Approx(-0.6020600).epsilon(1e-7));
  }
}

TEST_CASE("fixture root.arpa node counts and lookups") {
  const std::string text = slurp(fixture_dir() / "root.arpa");
  const NGramModel m = parse_arpa_string(text);
  const NGramTrie t(m);
  CHECK(t.node_count(1) == m.num_entries(1));
  CHECK(t.node_count(2) == m.num_entries(2));
  CHECK(t.node_count(1) == 6);
  CHECK(t.node_count(2) == 7);

  const NaiveLm naive(text);
  const WordId play = m.vocab().id("class_play");
  const Advance a = t.advance(t.bos_state(), play);
  CHECK(a.score == naive.entries().at({"<s>", "class_play"}).logprob);

  // brute-force chain for "class_play SONG-SLOT"
  const double want = naive.logprob({"<s>"}, "class_play") +
                      naive.logprob({"<s>", "class_play"}, "SONG-SLOT") +
                      naive.logprob({"<s>", "class_play", "SONG-SLOT"}, "</s>");
  CHECK(t.sentence_logprob(ids(m, {"class_play", "SONG-SLOT"})) ==
        doctest::Approx(want).epsilon(1e-12));
  // empty sentence
  CHECK(t.sentence_logprob(WordSeq{}) == naive.logprob({"<s>"}, "</s>"));
}

TEST_CASE("advance matches the naive oracle on random models") {
  std::mt19937_64 rng(3);
  for (int round = 0; round < 20; ++round) {
    const NGramModel m = round_trip(random_model(rng, 1 + round % 3, plain_words(4 + round % 17)));
    const NaiveLm naive = NaiveLm::of(m);
    const NGramTrie t(m);
    std::uniform_int_distribution<WordId> word(0, static_cast<WordId>(m.vocab().size() - 1));
    std::uniform_int_distribution<int> len(0, m.order() + 1);
    for (int q = 0; q < 50; ++q) {
      WordSeq h(static_cast<std::size_t>(len(rng)));
      for (auto& w : h) w = word(rng);
      WordId w = word(rng);
      if (w == m.bos()) w = m.eos();
      const Advance a = t.advance(t.state_for(h), w);
      CHECK(a.score == doctest::Approx(naive.logprob(m.words_of(h), m.vocab().word(w))).epsilon(1e-12));
      // next state is the longest suffix of h+w that is an entry
      WordSeq hw = h;
      hw.push_back(w);
      const std::size_t keep = std::min<std::size_t>(hw.size(), m.order() - 1);
      WordSeq want(hw.end() - static_cast<std::ptrdiff_t>(keep), hw.end());
      while (!want.empty() && !m.find(want)) want.erase(want.begin());
      CHECK(t.history(a.next) == want);
      // determinism
      CHECK(t.advance(t.state_for(h), w).next == a.next);
    }
  }
}

TEST_CASE("every reachable state normalizes") {
  std::mt19937_64 rng(5);
  for (int round = 0; round < 10; ++round) {
    const NGramModel m = random_model(rng, 2 + round % 2, plain_words(6));
    const NGramTrie t(m);
    for (int k = 0; k < m.order(); ++k) {
      std::vector<WordSeq> states;
      if (k == 0) {
        states.push_back({});
      } else {
        for (const auto& [ng, e] : m.entries(k)) {
          if (ng.back() != m.eos()) states.push_back(ng);
        }
      }
      for (const auto& h : states) {
        double sum = 0.0;
        for (WordId w = 0; w < m.vocab().size(); ++w) {
          if (w != m.bos()) sum += std::pow(10.0, t.advance(t.state_for(h), w).score);
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("length-one sentences carry at most unit mass") {
  std::mt19937_64 rng(8);
  const NGramModel m = random_model(rng, 3, plain_words(5));
  const NGramTrie t(m);
  double sum = 0.0;
  for (WordId w = 0; w < m.vocab().size(); ++w) {
    if (w == m.bos() || w == m.eos()) continue;
    sum += std::pow(10.0, t.sentence_logprob(WordSeq{w}));
  }
  CHECK(sum <= 1.0);
}

TEST_CASE("binary dump round-trips") {
  std::mt19937_64 rng(9);
  const NGramModel m = random_model(rng, 3, plain_words(8));
  const NGramTrie t(m);
  const std::string bytes = t.serialize();
  CHECK(bytes.substr(0, 4) == "NGT1");
  const NGramTrie back = NGramTrie::deserialize(bytes);
  CHECK(back.serialize() == bytes);
  CHECK_THROWS(NGramTrie::deserialize("XXXX"));
}

TEST_CASE("unknown word ids are rejected") {
  const NGramTrie t(read_arpa_file(fixture_dir() / "root.arpa"));
  CHECK_THROWS(t.advance(t.root(), 999));
}
