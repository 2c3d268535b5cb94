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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "prism/gateway.hpp"
#include "prism/partition.hpp"
#include "prism/prompts.hpp"

namespace prism::knowledge {

struct DesignKnowledge {
  std::string style;
  int cluster_index = 0;
  std::vector<std::string> must_have;
  std::vector<std::string> optional_attrs;
  std::vector<std::string> must_not;
  std::string summary;
  int version = 0;

  /// {must_have, optional, must_not, summary, version}
  nlohmann::json to_json() const;
  static DesignKnowledge from_json(const nlohmann::json& j, const std::string& style, int cluster_index);
  /// Bulleted text used inside prompts.
  std::string render() const;

  friend bool operator==(const DesignKnowledge&, const DesignKnowledge&) = default;
};

enum class Polarity { FalseNegative, FalsePositive };

std::string polarity_name(Polarity p);

struct FeedbackItem {
  std::string design_id;
  Polarity polarity = Polarity::FalseNegative;
  std::string analysis;
  std::string advice;
};

struct TraceEntry {
  int version = 0;
  std::vector<std::string> false_negative_ids;
  std::vector<std::string> false_positive_ids;
  int feedback_count = 0;
  DesignKnowledge knowledge_snapshot;
};

struct RefinementTrace {
  std::vector<TraceEntry> iterations;

  nlohmann::json to_json() const;
};

struct ExtractionConfig {
  int individual_count = 5;
  double temperature = 0.3;
  int max_parse_retries = 3;
  int collage_columns = 5;
  int cell_px = 128;       // collage cell edge
  int individual_px = 256; // standalone image edge

  void validate() const;
};

/// Image file for a design id; throws when the id is unknown.
using ImageLookup = std::function<std::filesystem::path(const std::string& design_id)>;

struct RenderedGroup {
  std::vector<std::string> individual_ids;
  std::vector<std::string> individual_png;
  std::vector<std::string> collage_ids;
  std::optional<std::string> collage_png;
  int collage_columns = 0;
  int collage_rows = 0;
};

struct ExemplarInputs {
  RenderedGroup positives;
  RenderedGroup negatives;
};

/// The first individual_count designs of each list become standalone images,
/// the rest one labelled row-major collage.
RenderedGroup render_group(std::span<const std::string> ids, const ExtractionConfig& cfg, const ImageLookup& images);
ExemplarInputs render_exemplar_inputs(const partition::ExemplarSet& exemplars, const ExtractionConfig& cfg,
                                      const ImageLookup& images);

/// Base64 PNG of a single design image, scaled to fit `edge` pixels.
std::string design_image_b64(const std::string& design_id, const ImageLookup& images, int edge = 256);

/// Parses and validates a knowledge reply. Throws UnparseableKnowledge.
DesignKnowledge parse_knowledge_reply(const std::string& text, bool require_summary);

DesignKnowledge extract_knowledge(const partition::ExemplarSet& exemplars, const ExemplarInputs& inputs,
                                  const ExtractionConfig& cfg, gateway::Gateway& gw,
                                  const PromptLibrary& prompts = PromptLibrary::standard());

/// Skips the call when a summary exists unless `force` is set.
DesignKnowledge summarize_knowledge(const DesignKnowledge& k, gateway::Gateway& gw, bool force = false,
                                    double temperature = 0.3,
                                    const PromptLibrary& prompts = PromptLibrary::standard());

struct ClassifyOptions {
  bool both_orders = true;
  double temperature = 0.0;
};

struct Classification {
  int cluster_index = 0;
  std::vector<double> points;  // parallel to the candidate list
};

/// Pairwise tournament over the candidates. Each query awards one point to
/// the preferred candidate; ties are broken by an RNG seeded from `seed` and
/// the design id.
Classification classify_design(const std::string& design_id, const std::string& image_b64,
                               std::span<const DesignKnowledge> candidates, gateway::Gateway& gw, std::uint64_t seed,
                               const ClassifyOptions& opts = {},
                               const PromptLibrary& prompts = PromptLibrary::standard());

FeedbackItem generate_feedback(const DesignKnowledge& k, const std::string& design_id, const std::string& image_b64,
                               Polarity polarity, gateway::Gateway& gw, double temperature = 0.3,
                               const PromptLibrary& prompts = PromptLibrary::standard());

/// One gateway call; the reply carries the new summary.
DesignKnowledge refine_knowledge(const DesignKnowledge& k, std::span<const FeedbackItem> feedback,
                                 gateway::Gateway& gw, const ExtractionConfig& cfg = {},
                                 const PromptLibrary& prompts = PromptLibrary::standard());

struct RefinementOptions {
  ClassifyOptions classify;
  double feedback_temperature = 0.3;
  ExtractionConfig extraction;
  ImageLookup images;  // unset: requests carry no images
};

struct RefinementResult {
  DesignKnowledge knowledge;
  RefinementTrace trace;
};

/// Classify, collect feedback, refine, for at most T iterations. Stops early
/// once an iteration has no misclassified exemplar. `siblings` holds the
/// other clusters' knowledge of the same style.
RefinementResult refinement_loop(const DesignKnowledge& k0, std::span<const std::string> positives,
                                 std::span<const std::string> negatives, std::span<const DesignKnowledge> siblings,
                                 int T, gateway::Gateway& gw, std::uint64_t seed, const RefinementOptions& opts = {},
                                 const PromptLibrary& prompts = PromptLibrary::standard());

}  // namespace prism::knowledge
