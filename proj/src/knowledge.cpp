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

#include "prism/knowledge.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

#include <spdlog/spdlog.h>

#include "prism/digest.hpp"
#include "prism/error.hpp"
#include "prism/image.hpp"
#include "prism/random.hpp"

namespace prism::knowledge {
namespace {

using gateway::ChatRequest;
using gateway::Gateway;
using gateway::Part;
using nlohmann::json;

std::string to_b64(const std::string& bytes) {
  return base64_encode({reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()});
}

std::string bullet_list(const std::vector<std::string>& items) {
  if (items.empty()) return "- (none)\n";
  std::string out;
  for (const auto& s : items) out += "- " + s + "\n";
  return out;
}

std::vector<std::string> string_list(const json& j, const char* key, bool required_non_empty) {
  const auto it = j.find(key);
  if (it == j.end()) fail(Errc::UnparseableKnowledge, std::string("missing \"") + key + "\"");
  if (!it->is_array()) fail(Errc::UnparseableKnowledge, std::string("\"") + key + "\" must be an array of strings");
  std::vector<std::string> out;
  for (const auto& v : *it) {
    if (!v.is_string() || v.get<std::string>().empty()) {
      fail(Errc::UnparseableKnowledge, std::string("\"") + key + "\" must contain non-empty strings");
    }
    out.push_back(v.get<std::string>());
  }
  if (required_non_empty && out.empty()) fail(Errc::UnparseableKnowledge, std::string("\"") + key + "\" is empty");
  return out;
}

std::string one_line(const std::string& text) {
  std::string out;
  bool space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = !out.empty();
    } else {
      if (space) out.push_back(' ');
      space = false;
      out.push_back(c);
    }
  }
  return out;
}

std::string describe_group(const RenderedGroup& g) {
  if (g.individual_ids.empty()) return "None are provided.";
  std::string out = "Designs 1-" + std::to_string(g.individual_ids.size()) + " are attached as individual images.";
  if (g.collage_png) {
    const std::size_t first = g.individual_ids.size() + 1;
    out += " Designs " + std::to_string(first) + "-" + std::to_string(first + g.collage_ids.size() - 1) +
           " are shown together in one collage of " + std::to_string(g.collage_columns) + "x" +
           std::to_string(g.collage_rows) + " numbered cells.";
  }
  return out;
}

void attach_group(std::vector<Part>& parts, const std::string& label, const RenderedGroup& g) {
  if (g.individual_ids.empty()) return;
  parts.push_back(Part::text(label));
  for (const auto& png : g.individual_png) parts.push_back(Part::image(png));
  if (g.collage_png) parts.push_back(Part::image(*g.collage_png));
}

// Sends `req`, re-prompting with the validator message until the reply
// parses or the retry budget is spent.
DesignKnowledge chat_for_knowledge(ChatRequest req, bool require_summary, int max_retries, Gateway& gw,
                                   const PromptLibrary& prompts) {
  for (int attempt = 0;; ++attempt) {
    const std::string reply = gw.chat(req).text;
    try {
      return parse_knowledge_reply(reply, require_summary);
    } catch (const Error& e) {
      if (e.code() != Errc::UnparseableKnowledge || attempt >= max_retries) {
        throw Error(Errc::UnparseableKnowledge,
                    std::string(e.what()) + " (after " + std::to_string(attempt + 1) + " attempts)");
      }
      spdlog::warn("{} reply rejected: {}", req.task, e.what());
      req.messages.push_back({"assistant", {Part::text(reply)}});
      req.messages.push_back({"user", {Part::text(prompts.render("repair", {{"error", e.what()}}))}});
    }
  }
}

std::optional<char> parse_verdict(const std::string& text) {
  static const std::regex verdict(R"(^[^A-Za-z]*(?:description\s+|option\s+)?([AaBb])(?:[^A-Za-z].*)?$)",
                                  std::regex::icase);
  std::smatch m;
  const std::string line = one_line(text);
  if (!std::regex_match(line, m, verdict)) return std::nullopt;
  return static_cast<char>(std::toupper(static_cast<unsigned char>(m[1].str()[0])));
}

}  // namespace

json DesignKnowledge::to_json() const {
  return {{"must_have", must_have}, {"optional", optional_attrs}, {"must_not", must_not},
          {"summary", summary}, {"version", version}};
}

DesignKnowledge DesignKnowledge::from_json(const json& j, const std::string& style, int cluster_index) {
  DesignKnowledge k;
  k.style = style;
  k.cluster_index = cluster_index;
  k.must_have = j.at("must_have").get<std::vector<std::string>>();
  k.optional_attrs = j.at("optional").get<std::vector<std::string>>();
  k.must_not = j.at("must_not").get<std::vector<std::string>>();
  k.summary = j.at("summary").get<std::string>();
  k.version = j.at("version").get<int>();
  return k;
}

std::string DesignKnowledge::render() const {
  return "Must have:\n" + bullet_list(must_have) + "Optional:\n" + bullet_list(optional_attrs) + "Must not:\n" +
         bullet_list(must_not);
}

std::string polarity_name(Polarity p) { return p == Polarity::FalseNegative ? "false_negative" : "false_positive"; }

json RefinementTrace::to_json() const {
  json out = json::array();
  for (const auto& it : iterations) {
    out.push_back({{"version", it.version},
                   {"false_negative_ids", it.false_negative_ids},
                   {"false_positive_ids", it.false_positive_ids},
                   {"feedback_count", it.feedback_count},
                   {"knowledge_snapshot", it.knowledge_snapshot.to_json()}});
  }
  return {{"iterations", out}};
}

void ExtractionConfig::validate() const {
  if (individual_count < 0) fail(Errc::Config, "individual_count must be >= 0");
  if (collage_columns < 1) fail(Errc::Config, "collage_columns must be >= 1");
  if (max_parse_retries < 0) fail(Errc::Config, "max_parse_retries must be >= 0");
  if (temperature < 0.0 || temperature > 2.0) fail(Errc::Config, "temperature must be in [0, 2]");
  if (cell_px < 8 || individual_px < 8) fail(Errc::Config, "image sizes must be >= 8 px");
}

std::string design_image_b64(const std::string& design_id, const ImageLookup& images, int edge) {
  const image::RgbImage img = image::load(images(design_id).string());
  return to_b64(image::encode_png(image::fit(img, edge, edge, {255, 255, 255})));
}

RenderedGroup render_group(std::span<const std::string> ids, const ExtractionConfig& cfg, const ImageLookup& images) {
  cfg.validate();
  RenderedGroup g;
  const std::size_t standalone = std::min(ids.size(), static_cast<std::size_t>(cfg.individual_count));
  for (std::size_t i = 0; i < standalone; ++i) {
    g.individual_ids.push_back(ids[i]);
    g.individual_png.push_back(design_image_b64(ids[i], images, cfg.individual_px));
  }
  const std::size_t rest = ids.size() - standalone;
  if (rest == 0) return g;
  g.collage_columns = static_cast<int>(std::min(rest, static_cast<std::size_t>(cfg.collage_columns)));
  g.collage_rows = static_cast<int>((rest + g.collage_columns - 1) / g.collage_columns);
  image::RgbImage canvas = image::solid(g.collage_columns * cfg.cell_px, g.collage_rows * cfg.cell_px, {255, 255, 255});
  for (std::size_t r = 0; r < rest; ++r) {
    const std::string& id = ids[standalone + r];
    g.collage_ids.push_back(id);
    const int x = static_cast<int>(r % g.collage_columns) * cfg.cell_px;
    const int y = static_cast<int>(r / g.collage_columns) * cfg.cell_px;
    const image::RgbImage cell =
        image::fit(image::load(images(id).string()), cfg.cell_px, cfg.cell_px, {255, 255, 255});
    image::blit(canvas, cell, x, y);
    image::draw_number(canvas, x + 2, y + 2, static_cast<int>(standalone + r + 1), 2);
  }
  g.collage_png = to_b64(image::encode_png(canvas));
  return g;
}

ExemplarInputs render_exemplar_inputs(const partition::ExemplarSet& exemplars, const ExtractionConfig& cfg,
                                      const ImageLookup& images) {
  return {render_group(exemplars.positives, cfg, images), render_group(exemplars.negatives, cfg, images)};
}

DesignKnowledge parse_knowledge_reply(const std::string& text, bool require_summary) {
  const auto open = text.find('{');
  const auto close = text.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open) {
    fail(Errc::UnparseableKnowledge, "reply contains no JSON object");
  }
  json j;
  try {
    j = json::parse(text.substr(open, close - open + 1));
  } catch (const json::exception& e) {
    fail(Errc::UnparseableKnowledge, std::string("reply is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) fail(Errc::UnparseableKnowledge, "reply is not a JSON object");
  DesignKnowledge k;
  k.must_have = string_list(j, "must_have", true);
  k.optional_attrs = string_list(j, "optional", false);
  k.must_not = string_list(j, "must_not", false);
  if (require_summary) {
    const auto it = j.find("summary");
    if (it == j.end() || !it->is_string() || one_line(it->get<std::string>()).empty()) {
      fail(Errc::UnparseableKnowledge, "missing non-empty \"summary\"");
    }
    k.summary = one_line(it->get<std::string>());
  }
  return k;
}

DesignKnowledge extract_knowledge(const partition::ExemplarSet& exemplars, const ExemplarInputs& inputs,
                                  const ExtractionConfig& cfg, Gateway& gw, const PromptLibrary& prompts) {
  cfg.validate();
  if (exemplars.positives.empty()) fail(Errc::InvalidArgument, "extraction needs at least one positive design");
  ChatRequest req;
  req.task = "extract";
  req.temperature = cfg.temperature;
  req.meta = {{"style", exemplars.style}, {"cluster_index", std::to_string(exemplars.cluster_index)}};
  std::vector<Part> parts{Part::text(prompts.render(
      "extract", {{"style", exemplars.style},
                  {"positives", describe_group(inputs.positives)},
                  {"negatives", describe_group(inputs.negatives)},
                  {"positive_count", std::to_string(exemplars.positives.size())},
                  {"negative_count", std::to_string(exemplars.negatives.size())}}))};
  attach_group(parts, "Positive designs:", inputs.positives);
  attach_group(parts, "Negative designs:", inputs.negatives);
  req.messages.push_back({"user", std::move(parts)});

  DesignKnowledge k = chat_for_knowledge(std::move(req), false, cfg.max_parse_retries, gw, prompts);
  k.style = exemplars.style;
  k.cluster_index = exemplars.cluster_index;
  k.version = 0;
  return k;
}

DesignKnowledge summarize_knowledge(const DesignKnowledge& k, Gateway& gw, bool force, double temperature,
                                    const PromptLibrary& prompts) {
  if (k.must_have.empty()) fail(Errc::InvalidArgument, "cannot summarize knowledge without must-have features");
  if (!k.summary.empty() && !force) return k;
  ChatRequest req;
  req.task = "summarize";
  req.temperature = temperature;
  req.meta = {{"style", k.style}, {"cluster_index", std::to_string(k.cluster_index)}};
  req.messages.push_back(
      {"user", {Part::text(prompts.render("summarize", {{"style", k.style}, {"knowledge", k.render()}}))}});
  DesignKnowledge out = k;
  out.summary = one_line(gw.chat(req).text);
  if (out.summary.empty()) fail(Errc::EmptySummary, "summary reply was empty");
  return out;
}

Classification classify_design(const std::string& design_id, const std::string& image_b64,
                               std::span<const DesignKnowledge> candidates, Gateway& gw, std::uint64_t seed,
                               const ClassifyOptions& opts, const PromptLibrary& prompts) {
  if (candidates.size() < 2) fail(Errc::InvalidArgument, "classification needs at least two candidates");
  Classification out;
  out.points.assign(candidates.size(), 0.0);
  auto ask = [&](std::size_t a, std::size_t b) {
    ChatRequest req;
    req.task = "classify";
    req.temperature = opts.temperature;
    req.max_tokens = 4;
    req.meta = {{"design_id", design_id},
                {"option_a", std::to_string(candidates[a].cluster_index)},
                {"option_b", std::to_string(candidates[b].cluster_index)}};
    std::vector<Part> parts{Part::text(prompts.render("classify", {{"style", candidates[a].style},
                                                                   {"knowledge_a", candidates[a].render()},
                                                                   {"knowledge_b", candidates[b].render()}}))};
    if (!image_b64.empty()) parts.push_back(Part::image(image_b64));
    req.messages.push_back({"user", std::move(parts)});
    const std::string reply = gw.chat(req).text;
    const auto verdict = parse_verdict(reply);
    if (!verdict) fail(Errc::MalformedVerdict, "classifier reply \"" + one_line(reply) + "\" is neither A nor B");
    out.points[*verdict == 'A' ? a : b] += 1.0;
  };
  for (std::size_t a = 0; a < candidates.size(); ++a) {
    for (std::size_t b = a + 1; b < candidates.size(); ++b) {
      ask(a, b);
      if (opts.both_orders) ask(b, a);
    }
  }
  const double best = *std::max_element(out.points.begin(), out.points.end());
  std::vector<std::size_t> leaders;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    if (out.points[c] == best) leaders.push_back(c);
  }
  std::size_t winner = leaders.front();
  if (leaders.size() > 1) {
    Rng rng(derive_seed(seed, design_id));
    winner = leaders[rng.below(leaders.size())];
  }
  out.cluster_index = candidates[winner].cluster_index;
  return out;
}

FeedbackItem generate_feedback(const DesignKnowledge& k, const std::string& design_id, const std::string& image_b64,
                               Polarity polarity, Gateway& gw, double temperature, const PromptLibrary& prompts) {
  const std::string polarity_text =
      polarity == Polarity::FalseNegative
          ? "belongs to this group, but a classifier using the knowledge assigned it to a different group."
          : "belongs to a different group, but a classifier using the knowledge assigned it to this group.";
  ChatRequest req;
  req.task = "feedback";
  req.temperature = temperature;
  req.meta = {{"design_id", design_id},
              {"polarity", polarity_name(polarity)},
              {"cluster_index", std::to_string(k.cluster_index)}};
  std::vector<Part> parts{Part::text(prompts.render(
      "feedback", {{"style", k.style}, {"knowledge", k.render()}, {"polarity_text", polarity_text}}))};
  if (!image_b64.empty()) parts.push_back(Part::image(image_b64));
  req.messages.push_back({"user", std::move(parts)});
  const std::string reply = gw.chat(req).text;

  FeedbackItem item{design_id, polarity, {}, {}};
  const auto open = reply.find('{');
  const auto close = reply.rfind('}');
  json j;
  if (open != std::string::npos && close != std::string::npos && close > open) {
    j = json::parse(reply.substr(open, close - open + 1), nullptr, false);
  }
  if (j.is_object()) {
    item.analysis = one_line(j.value("analysis", ""));
    item.advice = one_line(j.value("advice", ""));
  }
  if (item.advice.empty()) fail(Errc::EmptyFeedback, "feedback for \"" + design_id + "\" has no advice");
  if (item.analysis.empty()) fail(Errc::EmptyFeedback, "feedback for \"" + design_id + "\" has no analysis");
  return item;
}

DesignKnowledge refine_knowledge(const DesignKnowledge& k, std::span<const FeedbackItem> feedback, Gateway& gw,
                                 const ExtractionConfig& cfg, const PromptLibrary& prompts) {
  if (feedback.empty()) fail(Errc::InvalidArgument, "refinement needs at least one feedback item");
  std::string listing;
  for (std::size_t i = 0; i < feedback.size(); ++i) {
    const auto& f = feedback[i];
    listing += std::to_string(i + 1) + ". " + polarity_name(f.polarity) + " on design " + f.design_id +
               "\n   Analysis: " + f.analysis + "\n   Advice: " + f.advice + "\n";
  }
  ChatRequest req;
  req.task = "refine";
  req.temperature = cfg.temperature;
  req.meta = {{"cluster_index", std::to_string(k.cluster_index)}, {"knowledge", k.to_json().dump()}};
  req.messages.push_back(
      {"user",
       {Part::text(prompts.render("refine", {{"style", k.style}, {"knowledge", k.render()}, {"feedback", listing}}))}});
  DesignKnowledge out = chat_for_knowledge(std::move(req), true, cfg.max_parse_retries, gw, prompts);
  out.style = k.style;
  out.cluster_index = k.cluster_index;
  out.version = k.version + 1;
  return out;
}

RefinementResult refinement_loop(const DesignKnowledge& k0, std::span<const std::string> positives,
                                 std::span<const std::string> negatives, std::span<const DesignKnowledge> siblings,
                                 int T, Gateway& gw, std::uint64_t seed, const RefinementOptions& opts,
                                 const PromptLibrary& prompts) {
  if (T < 0) fail(Errc::InvalidArgument, "refinement iterations must be >= 0");
  for (const auto& s : siblings) {
    if (s.cluster_index == k0.cluster_index)
        fail(Errc::InvalidArgument, "sibling knowledge repeats the target cluster");
  }
  RefinementResult result{k0, {}};
  if (T == 0) return result;
  if (siblings.empty()) fail(Errc::NoOtherCluster, "refinement needs knowledge of at least one other cluster");

  std::map<std::string, std::string> image_cache;
  auto image_of = [&](const std::string& id) -> const std::string& {
    auto it = image_cache.find(id);
    if (it == image_cache.end()) {
      it = image_cache.emplace(id, opts.images ? design_image_b64(id, opts.images) : std::string()).first;
    }
    return it->second;
  };

  DesignKnowledge& k = result.knowledge;
  for (int t = 0; t < T; ++t) {
    try {
      std::vector<DesignKnowledge> candidates(siblings.begin(), siblings.end());
      candidates.push_back(k);
      std::sort(candidates.begin(), candidates.end(),
                [](const DesignKnowledge& a, const DesignKnowledge& b) { return a.cluster_index < b.cluster_index; });
      const std::uint64_t round_seed = derive_seed(seed, {static_cast<std::uint64_t>(t)});

      TraceEntry entry;
      entry.version = k.version;
      entry.knowledge_snapshot = k;
      for (const auto& id : positives) {
        if (classify_design(id, image_of(id), candidates, gw, round_seed, opts.classify, prompts).cluster_index !=
            k.cluster_index) {
          entry.false_negative_ids.push_back(id);
        }
      }
      for (const auto& id : negatives) {
        if (classify_design(id, image_of(id), candidates, gw, round_seed, opts.classify, prompts).cluster_index ==
            k.cluster_index) {
          entry.false_positive_ids.push_back(id);
        }
      }
      std::sort(entry.false_negative_ids.begin(), entry.false_negative_ids.end());
      std::sort(entry.false_positive_ids.begin(), entry.false_positive_ids.end());

      std::vector<FeedbackItem> feedback;
      for (const auto& id : entry.false_negative_ids) {
        feedback.push_back(
            generate_feedback(k, id, image_of(id), Polarity::FalseNegative, gw, opts.feedback_temperature, prompts));
      }
      for (const auto& id : entry.false_positive_ids) {
        feedback.push_back(
            generate_feedback(k, id, image_of(id), Polarity::FalsePositive, gw, opts.feedback_temperature, prompts));
      }
      entry.feedback_count = static_cast<int>(feedback.size());
      result.trace.iterations.push_back(entry);
      spdlog::info("refine {} cluster {} iteration {}: {} false negatives, {} false positives", k.style,
                   k.cluster_index, t, entry.false_negative_ids.size(), entry.false_positive_ids.size());
      if (feedback.empty()) break;
      k = refine_knowledge(k, feedback, gw, opts.extraction, prompts);
    } catch (const Error& e) {
      throw e.with_context("refinement iteration " + std::to_string(t));
    }
  }
  return result;
}

}  // namespace prism::knowledge
