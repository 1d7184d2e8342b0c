// slotlm/arpa.hpp

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

#ifndef SLOTLM_ARPA_HPP_
#define SLOTLM_ARPA_HPP_

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "slotlm/ngram_model.hpp"

namespace slotlm {

/** Parse error carrying the 1-based line number of the offending line. */
class ArpaError : public ModelError {
 public:
  ArpaError(std::size_t line, const std::string& what)
      : ModelError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/** Reads an ARPA model.
 *
 * Text before "\data\" is ignored except the marker line "\difference\ 1",
 * which flags the model as a difference model. The following are errors:
 * - malformed "\data\" header or section markers
 * - declared count differing from the parsed count ("count mismatch at
 *   order k")
 * - an n-gram whose history is not an entry of the lower order, or whose
 *   words were not introduced as unigrams
 * - duplicate n-grams
 * - positive logprobs unless the model is a difference model
 *
 * Word ids are assigned in unigram-section order.
 */
NGramModel parse_arpa(std::istream& in);
NGramModel parse_arpa_string(std::string_view text);
NGramModel read_arpa_file(const std::filesystem::path& path);

/** Canonical ARPA text: orders ascending, entries in word-id order, values
 * with 7 significant digits. Difference models get the marker line and
 * are written with shortest round-trip precision so that rescoring from the
 * file matches the in-memory model exactly. */
void write_arpa(const NGramModel& model, std::ostream& out);
std::string write_arpa_string(const NGramModel& model);
/** Writes to a temporary sibling and renames it into place. */
void write_arpa_file(const NGramModel& model,
                     const std::filesystem::path& path);

/** Hex fingerprint of the canonical serialization. */
std::string model_fingerprint(const NGramModel& model);

}  // namespace slotlm

#endif  // SLOTLM_ARPA_HPP_
