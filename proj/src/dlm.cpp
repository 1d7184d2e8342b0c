// dlm.cpp

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

#include "slotlm/dlm.hpp"

#include <cmath>
#include <random>

#include "json.hpp"
#include "slotlm/io_util.hpp"
#include "slotlm/pruner.hpp"

namespace slotlm {

namespace {

WordSeq translate(std::span<const WordId> ids, const std::vector<WordId>& map) {
  WordSeq out;
  out.reserve(ids.size());
  for (WordId w : ids) out.push_back(map[w]);
  return out;
}

}  // namespace

NGramModel build_dlm(const NGramModel& b, const NGramModel& c) {
  if (b.is_difference() || c.is_difference()) {
    throw ModelError("difference models cannot be DLM inputs");
  }
  if (!same_vocabulary(b.vocab(), c.vocab())) {
    throw ModelError("vocabulary mismatch between B and C");
  }
  const SubsetReport subset = verify_subset(b, c);
  if (!subset.ok()) {
    std::string what = "C is not a valid subset of B";
    if (!subset.missing_from_b.empty()) {
      what += "; first entry missing from B: " + subset.missing_from_b.front();
    }
    if (!subset.prefix_violations.empty()) {
      what += "; prefix closure broken at " + subset.prefix_violations.front();
    }
    throw ModelError(what);
  }

  const NGramTrie c_trie(c);
  const std::vector<WordId> to_c = map_vocab(b.vocab(), c.vocab());

  NGramModel a = b;
  a.set_difference(true);
  for (int k = 1; k <= a.order(); ++k) {
    for (auto& [ngram, entry] : a.mutable_entries(k)) {
      const WordSeq in_c = translate(ngram, to_c);
      const std::span<const WordId> history(in_c.data(), in_c.size() - 1);
      const double log_pc =
          c_trie.advance(c_trie.state_for(history), in_c.back()).score;
      entry.logprob -= log_pc;
      const NGramEntry* ce = c.find(in_c);
      const bool c_backoff = ce && ce->has_backoff;
      if (entry.has_backoff || c_backoff) {
        entry.has_backoff = true;
        entry.backoff -= c_backoff ? ce->backoff : 0.0;
      }
    }
  }
  return a;
}

DlmReport verify_dlm(const NGramModel& a, const NGramModel& b,
                     const NGramModel& c, std::size_t samples,
                     std::uint64_t seed, double tolerance) {
  DlmReport report;
  report.samples = samples;
  report.tolerance = tolerance;
  if (samples == 0) {
    report.note = "0 samples: vacuous pass";
    return report;
  }
  if (!same_vocabulary(a.vocab(), b.vocab()) ||
      !same_vocabulary(a.vocab(), c.vocab())) {
    report.pass = false;
    report.note = "vocabulary mismatch";
    return report;
  }
  const NGramTrie ta(a), tb(b), tc(c);
  const auto to_b = map_vocab(a.vocab(), b.vocab());
  const auto to_c = map_vocab(a.vocab(), c.vocab());
  const std::vector<WordId> all_words = [&] {
    std::vector<WordId> v(a.vocab().size());
    for (WordId w = 0; w < v.size(); ++w) v[w] = w;
    return v;
  }();
  const std::vector<WordId> targets = predictable_words(a);

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> len_dist(0, a.order() + 1);
  std::uniform_int_distribution<std::size_t> word_dist(0, all_words.size() - 1);
  std::uniform_int_distribution<std::size_t> target_dist(0, targets.size() - 1);

  WordSeq worst_h;
  WordId worst_w = kNoWord;
  for (std::size_t i = 0; i < samples; ++i) {
    WordSeq h(static_cast<std::size_t>(len_dist(rng)));
    for (auto& w : h) w = all_words[word_dist(rng)];
    const WordId w = targets[target_dist(rng)];
    const double pa = ta.advance(ta.state_for(h), w).score;
    const WordSeq hb = translate(h, to_b), hc = translate(h, to_c);
    const double pb = tb.advance(tb.state_for(hb), to_b[w]).score;
    const double pc = tc.advance(tc.state_for(hc), to_c[w]).score;
    const double err = std::abs(pa - (pb - pc));
    if (err > report.max_error || worst_w == kNoWord) {
      report.max_error = std::max(report.max_error, err);
      worst_h = h;
      worst_w = w;
    }
  }
  report.pass = report.max_error <= tolerance;

  DlmOffender off;
  off.history = a.words_of(worst_h);
  off.word = a.vocab().word(worst_w);
  off.error = report.max_error;
  for (const TraceStep& step : ta.trace(ta.state_for(worst_h), worst_w)) {
    const WordSeq hb = translate(step.history, to_b);
    const WordSeq hc = translate(step.history, to_c);
    double expected;
    if (step.matched) {
      WordSeq ngram = hb;
      ngram.push_back(to_b[worst_w]);
      const NGramEntry* be = b.find(ngram);
      if (!be) {
        // A was not built from this B.
        off.suspect_history = a.words_of(step.history);
        off.suspect_kind = "entry";
        break;
      }
      expected = be->logprob - tc.advance(tc.state_for(hc), to_c[worst_w]).score;
    } else {
      expected = b.backoff(hb) - c.backoff(hc);
    }
    if (std::abs(step.value - expected) > tolerance) {
      off.suspect_history = a.words_of(step.history);
      off.suspect_kind = step.matched ? "logprob" : "backoff";
      break;
    }
  }
  report.worst = std::move(off);
  return report;
}

void write_dlm_manifest(const DlmManifest& manifest,
                        const std::filesystem::path& path) {
  auto item = [](const DlmManifest::Item& it) {
    return nlohmann::ordered_json{{"file", it.file},
                                  {"b_id", it.provenance.b_id},
                                  {"c_id", it.provenance.c_id},
                                  {"generation", it.provenance.generation}};
  };
  nlohmann::ordered_json j;
  j["generation"] = manifest.generation;
  j["root"] = item(manifest.root);
  j["slots"] = nlohmann::ordered_json::object();
  for (const auto& [name, it] : manifest.slots) j["slots"][name] = item(it);
  write_file_atomic(path, j.dump(2) + "\n");
}

DlmManifest read_dlm_manifest(const std::filesystem::path& path) {
  const auto j = nlohmann::json::parse(read_file(path));
  auto item = [](const nlohmann::json& v) {
    DlmManifest::Item it;
    it.file = v.at("file").get<std::string>();
    it.provenance.b_id = v.value("b_id", "");
    it.provenance.c_id = v.value("c_id", "");
    it.provenance.generation = v.value("generation", std::uint64_t{0});
    return it;
  };
  DlmManifest m;
  m.generation = j.value("generation", std::uint64_t{0});
  m.root = item(j.at("root"));
  for (const auto& [name, v] : j.at("slots").items()) m.slots[name] = item(v);
  return m;
}

}  // namespace slotlm
