// slotlm/pipeline.hpp

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

#ifndef SLOTLM_PIPELINE_HPP_
#define SLOTLM_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "slotlm/pruner.hpp"
#include "slotlm/trainer.hpp"

namespace slotlm {

/// Parsed pipeline manifest. Relative paths are resolved against the
/// manifest's directory.
struct PipelineManifest {
  std::filesystem::path root_corpus;
  int root_order = 3;
  PruneSpec root_prune = PruneSpec::target_order(1);
  std::optional<std::filesystem::path> common_lm;
  double lambda = 0.5;
  std::vector<SlotConfig> slots;
  std::filesystem::path output_dir;
  std::uint64_t seed = 0;
  std::size_t verify_samples = 1000;
  int verify_max_len = 4;
};

/// Throws ModelError on a malformed manifest or duplicate slot names.
PipelineManifest load_manifest(const std::filesystem::path& path);

/// Exit codes of run().
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;

/// The slotlm command line: train, prune, dlm, interpolate, build-graph,
/// score, decode, update, verify. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace slotlm

#endif  // SLOTLM_PIPELINE_HPP_
