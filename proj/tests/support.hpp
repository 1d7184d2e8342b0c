// support.hpp

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

// Test-only oracles. Nothing here calls into the library's scoring code:
// NaiveLm reads ARPA text on its own and evaluates back-off with string
// keys, and NaiveClassModel enumerates partitions by brute force.

#ifndef SLOTLM_TESTS_SUPPORT_HPP_
#define SLOTLM_TESTS_SUPPORT_HPP_

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unistd.h>
#include <vector>

#include "slotlm/arpa.hpp"
#include "slotlm/ngram_model.hpp"

namespace slotlm::test {

namespace fs = std::filesystem;
using Strings = std::vector<std::string>;

inline const double kNegInf = -std::numeric_limits<double>::infinity();

inline fs::path fixture_dir() { return fs::path(SLOTLM_FIXTURE_DIR) / "toy"; }

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class NaiveLm {
 public:
  struct Value {
    double logprob = 0.0;
    double backoff = 0.0;
  };

  NaiveLm() = default;
  explicit NaiveLm(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int section = 0;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (line == "\\end\\") break;
      if (line[0] == '\\') {
        const auto pos = line.find("-grams:");
        if (pos != std::string::npos) {
          section = std::stoi(line.substr(1, pos - 1));
          order_ = std::max(order_, section);
        }
        continue;
      }
      if (section == 0) continue;
      std::istringstream f(line);
      Value v;
      Strings key(static_cast<std::size_t>(section));
      f >> v.logprob;
      for (auto& w : key) f >> w;
      if (!(f >> v.backoff)) v.backoff = 0.0;
      entries_[key] = v;
    }
  }
  static NaiveLm of(const NGramModel& m) { return NaiveLm(write_arpa_string(m)); }

  int order() const { return order_; }
  const std::map<Strings, Value>& entries() const { return entries_; }
  bool has_word(const std::string& w) const { return entries_.count(Strings{w}) > 0; }
  Strings words() const {
    Strings out;
    for (const auto& [k, v] : entries_) {
      if (k.size() == 1) out.push_back(k[0]);
    }
    return out;
  }

  double logprob(Strings h, const std::string& w) const {
    const std::size_t keep = static_cast<std::size_t>(order_ - 1);
    if (h.size() > keep) h.erase(h.begin(), h.end() - static_cast<std::ptrdiff_t>(keep));
    double acc = 0.0;
    for (;;) {
      Strings key = h;
      key.push_back(w);
      if (auto it = entries_.find(key); it != entries_.end()) return acc + it->second.logprob;
      if (h.empty()) throw std::runtime_error("naive lm: unknown word " + w);
      if (auto it = entries_.find(h); it != entries_.end()) acc += it->second.backoff;
      h.erase(h.begin());
    }
  }

  // <s> w1 .. wn </s>
  double sentence(const Strings& words) const {
    Strings h{"<s>"};
    double s = 0.0;
    for (const auto& w : words) {
      s += logprob(h, w);
      h.push_back(w);
    }
    return s + logprob(h, "</s>");
  }

 private:
  int order_ = 0;
  std::map<Strings, Value> entries_;
};

// Random normalized back-off model over <s>, </s> and `words`. Histories
// are drawn from existing entries, each gets a random subset of explicit
// continuations, backoffs are then solved for. With `no_empty` the <s> row
// lists every word and gives </s> the -99 sentinel, so empty sentences
// have no mass.
inline NGramModel random_model(std::mt19937_64& rng, int order, const Strings& words,
                               bool no_empty = false) {
  NGramModel m(order);
  const WordId bos = m.vocab().add("<s>");
  const WordId eos = m.vocab().add("</s>");
  for (const auto& w : words) m.vocab().add(w);
  std::vector<WordId> pred;
  for (WordId w = 0; w < m.vocab().size(); ++w) {
    if (w != bos) pred.push_back(w);
  }
  std::uniform_real_distribution<double> weight(0.05, 1.0), mass(0.2, 0.9), coin(0.0, 1.0);

  auto spread = [&](const std::vector<WordId>& ws, double total) {
    std::vector<double> p(ws.size());
    double sum = 0.0;
    for (auto& x : p) sum += (x = weight(rng));
    for (auto& x : p) x = total * x / sum;
    return p;
  };

  m.insert({bos}, NGramEntry{kLogZero, 0.0, false});
  const auto uni = spread(pred, 1.0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    m.insert({pred[i]}, NGramEntry{std::log10(uni[i]), 0.0, false});
  }
  for (int k = 2; k <= order; ++k) {
    std::vector<WordSeq> histories;
    for (const auto& [ng, e] : m.entries(k - 1)) {
      if (ng.back() == eos) continue;
      const bool forced = k == 2 && ng[0] == bos;
      if (forced || coin(rng) < 0.6) histories.push_back(ng);
    }
    for (const auto& h : histories) {
      const bool full_row = no_empty && k == 2 && h[0] == bos;
      std::vector<WordId> cand;
      for (WordId w : pred) {
        WordSeq suffix(h.begin() + 1, h.end());
        suffix.push_back(w);
        if (k == 2 || m.find(suffix)) cand.push_back(w);
      }
      if (cand.empty()) continue;
      std::vector<WordId> chosen;
      for (WordId w : cand) {
        if (full_row || coin(rng) < 0.5) chosen.push_back(w);
      }
      if (chosen.empty()) {
        chosen.push_back(cand[std::uniform_int_distribution<std::size_t>(0, cand.size() - 1)(rng)]);
      }
      if (full_row) {
        chosen.erase(std::remove(chosen.begin(), chosen.end(), eos), chosen.end());
        const auto p = spread(chosen, 1.0);
        for (std::size_t i = 0; i < chosen.size(); ++i) {
          WordSeq key = h;
          key.push_back(chosen[i]);
          m.insert(key, NGramEntry{std::log10(p[i]), 0.0, false});
        }
        WordSeq key = h;
        key.push_back(eos);
        m.insert(key, NGramEntry{kLogZero, 0.0, false});
        continue;
      }
      const double total = chosen.size() == pred.size() ? 1.0 : mass(rng);
      const auto p = spread(chosen, total);
      for (std::size_t i = 0; i < chosen.size(); ++i) {
        WordSeq key = h;
        key.push_back(chosen[i]);
        m.insert(key, NGramEntry{std::log10(p[i]), 0.0, false});
      }
    }
  }
  recompute_backoffs(m);
  m.validate();
  return m;
}

inline Strings plain_words(int n, const std::string& stem = "w") {
  Strings out;
  for (int i = 0; i < n; ++i) out.push_back(stem + std::to_string(i));
  return out;
}

// All sequences over `words` of length 0..max_len.
inline std::vector<Strings> all_sentences(const Strings& words, int max_len) {
  std::vector<Strings> out{{}};
  std::size_t begin = 0;
  for (int len = 1; len <= max_len; ++len) {
    const std::size_t end = out.size();
    for (std::size_t i = begin; i < end; ++i) {
      for (const auto& w : words) {
        Strings s = out[i];
        s.push_back(w);
        out.push_back(std::move(s));
      }
    }
    begin = end;
  }
  return out;
}

inline WordSeq ids(const NGramModel& m, const Strings& words) {
  WordSeq out;
  for (const auto& w : words) out.push_back(m.vocab().id(w));
  return out;
}

inline NGramModel round_trip(const NGramModel& m) {
  return parse_arpa_string(write_arpa_string(m));
}

inline double log10_sum(const std::vector<double>& xs) {
  if (xs.empty()) return kNegInf;
  const double mx = *std::max_element(xs.begin(), xs.end());
  if (mx == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : xs) s += std::pow(10.0, x - mx);
  return mx + std::log10(s);
}

// Brute-force class model: every reading of the sentence as a sequence of
// classes, each slot class covering a non-empty phrase scored as a whole
// sub-grammar sentence.
class NaiveClassModel {
 public:
  NaiveClassModel(NaiveLm root, std::map<std::string, NaiveLm> subs)
      : root_(std::move(root)), subs_(std::move(subs)) {}

  struct Scores {
    double viterbi = kNegInf;
    double sum = kNegInf;
  };

  // `prefixed`: tokens are graph tokens (class_x, SLOT_x), else plain words.
  Scores score(const Strings& words, bool prefixed) const {
    std::vector<double> totals;
    Strings hist{"<s>"};
    rec(words, prefixed, 0, hist, 0.0, totals);
    Scores s;
    if (!totals.empty()) {
      s.viterbi = *std::max_element(totals.begin(), totals.end());
      s.sum = log10_sum(totals);
    }
    return s;
  }

 private:
  std::string root_word(const std::string& t, bool prefixed) const {
    const std::string w = prefixed ? t : "class_" + t;
    if (prefixed && w.rfind("class_", 0) != 0) return "";
    return root_.has_word(w) ? w : "";
  }
  std::string slot_word(const std::string& slot, const std::string& t, bool prefixed) const {
    const std::string w = prefixed ? t : slot + "_" + t;
    if (prefixed && w.rfind(slot + "_", 0) != 0) return "";
    return subs_.at(slot).has_word(w) ? w : "";
  }

  void rec(const Strings& words, bool prefixed, std::size_t pos, Strings& hist,
           double acc, std::vector<double>& totals) const {
    if (pos == words.size()) {
      totals.push_back(acc + root_.logprob(hist, "</s>"));
      return;
    }
    if (auto w = root_word(words[pos], prefixed); !w.empty()) {
      const double s = root_.logprob(hist, w);
      hist.push_back(w);
      rec(words, prefixed, pos + 1, hist, acc + s, totals);
      hist.pop_back();
    }
    for (const auto& [slot, sub] : subs_) {
      Strings phrase;
      for (std::size_t end = pos; end < words.size(); ++end) {
        const std::string w = slot_word(slot, words[end], prefixed);
        if (w.empty()) break;
        phrase.push_back(w);
        const double s = root_.logprob(hist, slot) + sub.sentence(phrase);
        hist.push_back(slot);
        rec(words, prefixed, end + 1, hist, acc + s, totals);
        hist.pop_back();
      }
    }
  }

  NaiveLm root_;
  std::map<std::string, NaiveLm> subs_;
};

// Fresh directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name)
      : path_(fs::temp_directory_path() /
              ("slotlm_" + name + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

// Synthetic entity lists: 1-4 tokens drawn from a Zipf law over `types`.
class EntityGenerator {
 public:
  EntityGenerator(std::size_t types, std::uint64_t seed) : rng_(seed) {
    std::vector<double> w(types);
    for (std::size_t i = 0; i < types; ++i) w[i] = 1.0 / static_cast<double>(i + 1);
    zipf_ = std::discrete_distribution<std::size_t>(w.begin(), w.end());
  }
  std::string token() { return "t" + std::to_string(zipf_(rng_)); }
  std::string entity() {
    const int len = std::uniform_int_distribution<int>(1, 4)(rng_);
    std::string e;
    for (int i = 0; i < len; ++i) e += (i ? " " : "") + token();
    return e;
  }
  std::vector<std::string> entities(std::size_t n) {
    std::vector<std::string> out(n);
    for (auto& e : out) e = entity();
    return out;
  }
  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
  std::discrete_distribution<std::size_t> zipf_;
};

}  // namespace slotlm::test

#endif  // SLOTLM_TESTS_SUPPORT_HPP_
