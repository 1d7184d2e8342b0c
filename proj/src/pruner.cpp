// pruner.cpp

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

#include "slotlm/pruner.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace slotlm {

PruneSpec PruneSpec::target_order(int k) {
  PruneSpec s;
  s.mode = Mode::kTargetOrder;
  s.max_order = k;
  return s;
}

PruneSpec PruneSpec::threshold(double theta) {
  PruneSpec s;
  s.mode = Mode::kThreshold;
  for (int k = 2; k <= 255; ++k) s.thresholds[k] = theta;
  return s;
}

namespace {

void check_spec(const PruneSpec& spec) {
  if (spec.mode == PruneSpec::Mode::kTargetOrder) {
    if (spec.max_order < 1) {
      throw ModelError("prune spec would remove unigrams (max order < 1)");
    }
    return;
  }
  for (const auto& [k, theta] : spec.thresholds) {
    if (k < 2) throw ModelError("prune spec would remove unigrams");
    if (theta < 0.0 || std::isnan(theta)) {
      throw ModelError("prune threshold must be >= 0");
    }
  }
}

// Weighted gap between an entry and what back-off would give it in B.
double prune_score(const NGramModel& b, const WordSeq& ngram, double logprob) {
  const std::span<const WordId> history(ngram.data(), ngram.size() - 1);
  const std::span<const WordId> lower(ngram.data() + 1, ngram.size() - 2);
  const double backed_off = b.backoff(history) + b.logprob(lower, ngram.back());
  return std::pow(10.0, logprob) * std::abs(logprob - backed_off);
}

}  // namespace

NGramModel prune(const NGramModel& b, const PruneSpec& spec) {
  if (b.is_difference()) throw ModelError("cannot prune a difference model");
  check_spec(spec);

  // Decide membership from the top order down so that every history of a
  // kept entry is kept too.
  std::vector<std::set<WordSeq>> keep(b.order() + 1);
  std::set<WordSeq> required;
  for (int k = b.order(); k >= 2; --k) {
    std::set<WordSeq> next_required;
    for (const auto& [ngram, e] : b.entries(k)) {
      bool kept = required.count(ngram) > 0;
      if (!kept) {
        if (spec.mode == PruneSpec::Mode::kTargetOrder) {
          kept = k <= spec.max_order;
        } else {
          auto it = spec.thresholds.find(k);
          kept = it == spec.thresholds.end() ||
                 prune_score(b, ngram, e.logprob) >= it->second;
        }
      }
      if (kept) {
        keep[k].insert(ngram);
        next_required.emplace(ngram.begin(), ngram.end() - 1);
      }
    }
    required = std::move(next_required);
  }

  int top = 1;
  for (int k = b.order(); k >= 2; --k) {
    if (!keep[k].empty()) {
      top = k;
      break;
    }
  }

  NGramModel c(top);
  c.vocab() = b.vocab();
  for (const auto& [ngram, e] : b.entries(1)) {
    c.insert(ngram, NGramEntry{e.logprob, 0.0, false});
  }
  for (int k = 2; k <= top; ++k) {
    for (const auto& ngram : keep[k]) {
      c.insert(ngram, NGramEntry{b.find(ngram)->logprob, 0.0, false});
    }
  }

  recompute_backoffs(c);
  return c;
}

SubsetReport verify_subset(const NGramModel& b, const NGramModel& c) {
  if (!same_vocabulary(b.vocab(), c.vocab())) {
    throw ModelError("vocabulary mismatch between B and C");
  }
  SubsetReport report;
  const std::vector<WordId> to_b = map_vocab(c.vocab(), b.vocab());
  for (int k = 1; k <= c.order(); ++k) {
    for (const auto& [ngram, e] : c.entries(k)) {
      WordSeq in_b;
      in_b.reserve(ngram.size());
      for (WordId w : ngram) in_b.push_back(to_b[w]);
      if (!b.find(in_b)) report.missing_from_b.push_back(c.join(ngram));
      if (k > 1 && !c.find(std::span<const WordId>(ngram.data(), k - 1))) {
        report.prefix_violations.push_back(c.join(ngram));
      }
    }
  }
  for (WordId w = 0; w < c.vocab().size(); ++w) {
    if (!c.find(WordSeq{w})) report.missing_unigrams.push_back(c.vocab().word(w));
  }
  return report;
}

}  // namespace slotlm
