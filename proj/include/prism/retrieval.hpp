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

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "prism/gateway.hpp"
#include "prism/knowledge.hpp"
#include "prism/prompts.hpp"

namespace prism::retrieval {

struct KnowledgeEntry {
  int cluster_index = 0;
  int cluster_size = 0;
  std::string medoid_id;
  knowledge::DesignKnowledge knowledge;
};

struct KnowledgeBase {
  int version = 1;
  std::map<std::string, std::vector<KnowledgeEntry>> styles;

  /// Entries of `style` ordered by cluster index. Throws UnknownStyle.
  const std::vector<KnowledgeEntry>& entries(const std::string& style) const;
  std::vector<std::string> style_names() const;
  std::size_t size() const;

  nlohmann::json to_json() const;
  static KnowledgeBase from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static KnowledgeBase load(const std::filesystem::path& path);
};

struct IndexEntry {
  std::string style;
  int cluster_index = 0;
  std::string summary_hash;
  Eigen::VectorXd vector;
};

struct KnowledgeIndex {
  std::vector<IndexEntry> entries;

  /// Vectors as a PEB1 matrix next to a JSON list of {style, cluster_index, summary_hash}.
  void save(const std::filesystem::path& vectors_path, const std::filesystem::path& ids_path) const;
  static KnowledgeIndex load(const std::filesystem::path& vectors_path, const std::filesystem::path& ids_path);
  /// True when every KB entry is present with an unchanged summary.
  bool matches(const KnowledgeBase& kb) const;
};

/// One embed call over all summaries, in style then cluster order.
KnowledgeIndex index_kb(const KnowledgeBase& kb, gateway::Gateway& gw);

/// Case-insensitive substring match first (longest style wins, then the
/// earlier one); otherwise one gateway call choosing from `known_styles`.
std::string resolve_style(const std::string& instruction, const std::vector<std::string>& known_styles,
                          gateway::Gateway& gw, const PromptLibrary& prompts = PromptLibrary::standard());

struct RetrievalQuery {
  std::string instruction;
  std::string design_caption;
  std::string style;
  int m = 1;
  std::uint64_t seed = 0;

  std::string text() const { return instruction + " " + design_caption; }
};

/// Entry of the query's style whose summary vector has the highest cosine
/// similarity with the query text; ties to the lower cluster index.
const KnowledgeEntry& retrieve_single(const RetrievalQuery& query, const KnowledgeIndex& index,
                                      const KnowledgeBase& kb, gateway::Gateway& gw);

/// Same selection given an already embedded query vector.
const KnowledgeEntry& nearest_entry(const Eigen::VectorXd& query, const std::string& style,
                                    const KnowledgeIndex& index, const KnowledgeBase& kb);

/// m entry references, cluster-index ordered, with multiplicities set by
/// largest-remainder apportionment over cluster sizes. With `multinomial`
/// the multiplicities are instead drawn from a seeded multinomial.
std::vector<const KnowledgeEntry*> retrieve_proportional(const std::string& style, int m, const KnowledgeBase& kb,
                                                         std::uint64_t seed, bool multinomial = false);

struct DesignPlan {
  std::string text;
  std::string style;
  int cluster_index = -1;  // -1 without knowledge
  int knowledge_version = -1;
  double temperature = 0.0;

  nlohmann::json to_json() const;
};

/// Knowledge-guided plan when `entry` is set, knowledge-free baseline otherwise.
DesignPlan plan_improvement(const std::string& design_caption, const std::string& instruction,
                            const std::string& style, const KnowledgeEntry* entry, gateway::Gateway& gw,
                            double temperature, const std::string& image_b64 = {},
                            const PromptLibrary& prompts = PromptLibrary::standard());

/// One-sentence caption of a design image.
std::string caption_design(const std::string& image_b64, gateway::Gateway& gw, double temperature = 0.3,
                           const PromptLibrary& prompts = PromptLibrary::standard());

}  // namespace prism::retrieval
