// Copyright 2026 The PRISM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "prism/evaluate.hpp"
#include "prism/gateway.hpp"
#include "prism/grad.hpp"
#include "prism/knowledge.hpp"
#include "prism/partition.hpp"

namespace prism::config {

struct PipelineConfig {
  std::filesystem::path manifest_path;
  std::filesystem::path allowlist_path;
  std::filesystem::path embedding_dir;  // base for relative embedding paths
  std::filesystem::path cache_dir;
  std::filesystem::path run_dir;
  std::filesystem::path prompts_dir;  // empty: shipped templates
  std::uint64_t seed = 0;

  int min_count = 100;
  int phash_threshold = 10;
  std::vector<std::string> styles;  // empty: every allowlisted style
  bool parallel_styles = false;

  grad::GradParams grad;
  unsigned threads = 1;

  int k_min = 2;
  int k_max = 5;
  partition::KMedoidsOptions kmedoids;

  int exemplar_i = 25;
  int exemplar_j = 10;
  knowledge::ExtractionConfig extraction;

  int refine_T = 3;
  double classify_temperature = 0.0;
  bool classify_both_orders = true;
  double feedback_temperature = 0.3;

  double plan_temperature = 0.3;
  double baseline_temperature = 0.7;
  double caption_temperature = 0.3;
  bool generate_images = false;
  bool multinomial = false;

  evaluate::EvalConfig eval;
  gateway::GatewayConfig gateway;

  /// Throws Config on out-of-range values.
  void validate() const;
};

/// Sets one dotted key from its text value. Relative paths are resolved
/// against `base_dir`. Throws Config on unknown keys or bad values.
void set_value(PipelineConfig& cfg, const std::string& key, const std::string& value,
               const std::filesystem::path& base_dir);

/// Flat "section.key = value" lines; '#' starts a comment.
PipelineConfig parse(std::istream& in, const std::filesystem::path& base_dir, const std::string& source);
PipelineConfig load(const std::filesystem::path& path);

/// Applies "key=value" overrides relative to the working directory.
void apply_overrides(PipelineConfig& cfg, const std::vector<std::string>& assignments);

/// Every key with its current value, sorted by key. Path keys are left out
/// unless `include_paths` is set.
std::string snapshot(const PipelineConfig& cfg, bool include_paths = true);
std::vector<std::string> known_keys();

}  // namespace prism::config
