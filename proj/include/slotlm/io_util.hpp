// slotlm/io_util.hpp

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

#ifndef SLOTLM_IO_UTIL_HPP_
#define SLOTLM_IO_UTIL_HPP_

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace slotlm {

std::string read_file(const std::filesystem::path& path);

// Writes `bytes` to a temporary file next to `path` and renames it over
// `path`, so readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view bytes);

// One entry per non-empty line, surrounding whitespace trimmed.
std::vector<std::string> read_lines(const std::filesystem::path& path);

std::vector<std::string> split_whitespace(std::string_view text);

// Number of worker threads: SLOTLM_THREADS if set and positive, else the
// hardware concurrency (at least 1).
unsigned thread_cap();

}  // namespace slotlm

#endif  // SLOTLM_IO_UTIL_HPP_
