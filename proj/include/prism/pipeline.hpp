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

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "prism/config.hpp"
#include "prism/evaluate.hpp"
#include "prism/gateway.hpp"
#include "prism/grad.hpp"
#include "prism/knowledge.hpp"
#include "prism/partition.hpp"
#include "prism/retrieval.hpp"

namespace prism::pipeline {

// Run directory layout.
inline constexpr const char* kKnowledgeBaseFile = "kb.json";
inline constexpr const char* kRunManifestFile = "manifest.json";

/// Gateway configured from `cfg.gateway` plus the PRISM_GATEWAY_* variables.
std::unique_ptr<gateway::Gateway> make_gateway(const config::PipelineConfig& cfg,
                                               std::shared_ptr<gateway::Transport> transport = nullptr);

struct BuildResult {
  retrieval::KnowledgeBase kb;
  std::map<std::string, partition::Partition> partitions;
  grad::PairwiseStats distance_stats;
  std::size_t knowledge_cache_hits = 0;
};

/// ingest, distances, partition, extraction and summary for every style.
/// Distances and knowledge are cached under cache_dir, so a rerun over
/// unchanged inputs makes no solver or gateway calls.
BuildResult cmd_build(const config::PipelineConfig& cfg, gateway::Gateway& gw);

struct RefineResult {
  retrieval::KnowledgeBase kb;
  std::map<int, knowledge::RefinementTrace> traces;  // by cluster index
};

/// Refines every cluster of `style` in cluster order; later clusters
/// classify against the already refined knowledge of earlier ones.
RefineResult cmd_refine(const config::PipelineConfig& cfg, gateway::Gateway& gw, const std::string& style,
                        std::optional<int> T = {});

struct ImproveRequest {
  std::filesystem::path design_path;
  std::string instruction;
  int m = 1;
  std::optional<std::string> style;  // resolved from the instruction when unset
  bool baseline = false;             // plans without knowledge
  std::filesystem::path out_dir;     // default: <run_dir>/improve
};

struct ImproveResult {
  std::string style;
  std::string caption;
  std::vector<retrieval::DesignPlan> plans;
  std::vector<std::filesystem::path> images;
};

ImproveResult cmd_improve(const config::PipelineConfig& cfg, gateway::Gateway& gw, const ImproveRequest& req);

struct EvalRequest {
  std::string style;
  std::filesystem::path generated_dir;  // *.peb bundles, ids from file stems
  std::string method;                   // default: generated_dir name
};

/// Writes <run_dir>/eval/<style>--<method>.json and refreshes the rank
/// tables over every report in that directory.
evaluate::MetricReport cmd_eval(const config::PipelineConfig& cfg, const EvalRequest& req);

/// Mean pairwise distance and best silhouette of each cluster's curated
/// positives against a seeded random draw of equal size from the style.
nlohmann::json cmd_diagnose(const config::PipelineConfig& cfg, const std::string& style);

/// Rewrites <run_dir>/manifest.json with the SHA-256 of every other file.
void write_run_manifest(const std::filesystem::path& run_dir);

}  // namespace prism::pipeline
