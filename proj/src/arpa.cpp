// arpa.cpp

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

#include "slotlm/arpa.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "slotlm/io_util.hpp"

namespace slotlm {

namespace {

constexpr std::string_view kDifferenceMarker = "\\difference\\";

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' ||
                        s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

bool parse_double(std::string_view s, double* out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), *out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_size(std::string_view s, std::size_t* out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), *out);
  return ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
}

class ArpaParser {
 public:
  explicit ArpaParser(std::istream& in) : in_(in) {}

  NGramModel parse() {
    std::string_view line;
    bool difference = false;
    // Preamble.
    while (true) {
      if (!next(&line)) throw ArpaError(line_no_, "missing \\data\\ header");
      if (line == "\\data\\") break;
      if (line.starts_with(kDifferenceMarker)) {
        auto rest = trim(line.substr(kDifferenceMarker.size()));
        difference = rest.empty() || rest == "1";
      }
    }
    // Counts.
    std::vector<std::size_t> counts;
    while (true) {
      if (!next(&line)) throw ArpaError(line_no_, "unexpected end of file");
      if (line.empty()) continue;
      if (line.front() == '\\') break;
      if (!line.starts_with("ngram ")) {
        throw ArpaError(line_no_, "malformed header line");
      }
      auto body = trim(line.substr(6));
      auto eq = body.find('=');
      std::size_t k = 0, n = 0;
      if (eq == std::string_view::npos ||
          !parse_size(trim(body.substr(0, eq)), &k) ||
          !parse_size(trim(body.substr(eq + 1)), &n)) {
        throw ArpaError(line_no_, "malformed header line");
      }
      if (k != counts.size() + 1) {
        throw ArpaError(line_no_, "header orders must be consecutive from 1");
      }
      counts.push_back(n);
    }
    if (counts.empty()) throw ArpaError(line_no_, "header declares no orders");

    NGramModel model(static_cast<int>(counts.size()));
    model.set_difference(difference);

    for (std::size_t k = 1; k <= counts.size(); ++k) {
      const std::string expected = "\\" + std::to_string(k) + "-grams:";
      if (line != expected) {
        throw ArpaError(line_no_, "expected section " + expected);
      }
      std::size_t parsed = 0;
      while (true) {
        if (!next(&line)) throw ArpaError(line_no_, "unexpected end of file");
        if (line.empty()) continue;
        if (line.front() == '\\') break;
        parse_ngram(line, k, &model);
        ++parsed;
      }
      if (parsed != counts[k - 1]) {
        throw ArpaError(line_no_,
                        "count mismatch at order " + std::to_string(k));
      }
    }
    if (line != "\\end\\") throw ArpaError(line_no_, "expected \\end\\");
    return model;
  }

 private:
  bool next(std::string_view* line) {
    if (!std::getline(in_, buffer_)) return false;
    ++line_no_;
    *line = trim(buffer_);
    return true;
  }

  void parse_ngram(std::string_view line, std::size_t k, NGramModel* model) {
    auto fields = split_whitespace(line);
    if (fields.size() != k + 1 && fields.size() != k + 2) {
      throw ArpaError(line_no_, "wrong number of fields for a " +
                                    std::to_string(k) + "-gram");
    }
    NGramEntry entry;
    if (!parse_double(fields[0], &entry.logprob)) {
      throw ArpaError(line_no_, "bad logprob '" + fields[0] + "'");
    }
    if (fields.size() == k + 2) {
      if (!parse_double(fields[k + 1], &entry.backoff)) {
        throw ArpaError(line_no_, "bad back-off weight '" + fields[k + 1] + "'");
      }
      entry.has_backoff = true;
    }
    if (!model->is_difference() && entry.logprob > 0.0) {
      throw ArpaError(line_no_, "positive logprob in non-difference model");
    }
    WordSeq ngram;
    ngram.reserve(k);
    auto& vocab = model->vocab();
    for (std::size_t i = 1; i <= k; ++i) {
      if (k == 1) {
        if (vocab.contains(fields[i])) {
          throw ArpaError(line_no_, "duplicate n-gram: " + fields[i]);
        }
        ngram.push_back(vocab.add(fields[i]));
      } else {
        auto id = vocab.find(fields[i]);
        if (!id) {
          throw ArpaError(line_no_, "word '" + fields[i] +
                                        "' not introduced in 1-grams");
        }
        ngram.push_back(*id);
      }
    }
    if (k > 1 &&
        !model->find(std::span<const WordId>(ngram.data(), k - 1))) {
      throw ArpaError(line_no_, "history '" +
                                    model->join(std::span<const WordId>(
                                        ngram.data(), k - 1)) +
                                    "' is not an entry of order " +
                                    std::to_string(k - 1));
    }
    if (model->find(ngram)) {
      throw ArpaError(line_no_, "duplicate n-gram: " + model->join(ngram));
    }
    model->insert(std::move(ngram), entry);
  }

  std::istream& in_;
  std::string buffer_;
  std::size_t line_no_ = 0;
};

void append_value(std::string* out, double v, bool full_precision) {
  if (v == 0.0) v = 0.0;  // drop the sign of negative zero
  char buf[64];
  if (full_precision) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out->append(buf, ptr);
  } else {
    const int n = std::snprintf(buf, sizeof(buf), "%.7g", v);
    out->append(buf, static_cast<std::size_t>(n));
  }
}

}  // namespace

NGramModel parse_arpa(std::istream& in) { return ArpaParser(in).parse(); }

NGramModel parse_arpa_string(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_arpa(in);
}

NGramModel read_arpa_file(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  try {
    return parse_arpa(in);
  } catch (const ArpaError& e) {
    throw ArpaError(e.line(), path.string() + ": " + e.what());
  }
}

std::string write_arpa_string(const NGramModel& model) {
  const bool full = model.is_difference();
  std::string out;
  if (model.is_difference()) out += "\\difference\\ 1\n\n";
  out += "\\data\\\n";
  for (int k = 1; k <= model.order(); ++k) {
    out += "ngram " + std::to_string(k) + "=" +
           std::to_string(model.num_entries(k)) + "\n";
  }
  for (int k = 1; k <= model.order(); ++k) {
    out += "\n\\" + std::to_string(k) + "-grams:\n";
    for (const auto& [ngram, e] : model.entries(k)) {
      append_value(&out, e.logprob, full);
      out += '\t';
      for (std::size_t i = 0; i < ngram.size(); ++i) {
        if (i) out += ' ';
        out += model.vocab().word(ngram[i]);
      }
      if (e.has_backoff) {
        out += '\t';
        append_value(&out, e.backoff, full);
      }
      out += '\n';
    }
  }
  out += "\n\\end\\\n";
  return out;
}

void write_arpa(const NGramModel& model, std::ostream& out) {
  out << write_arpa_string(model);
}

void write_arpa_file(const NGramModel& model,
                     const std::filesystem::path& path) {
  write_file_atomic(path, write_arpa_string(model));
}

std::string model_fingerprint(const NGramModel& model) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(
                    fnv1a(write_arpa_string(model))));
  return buf;
}

}  // namespace slotlm
