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

#include "prism/retrieval.hpp"

#include <algorithm>
#include <cctype>

#include "prism/binary_io.hpp"
#include "prism/digest.hpp"
#include "prism/error.hpp"
#include "prism/partition.hpp"
#include "prism/random.hpp"

namespace prism::retrieval {
namespace {

using gateway::ChatRequest;
using gateway::Part;
using nlohmann::json;

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n\"'.`");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n\"'.`");
  return s.substr(b, e - b + 1);
}

}  // namespace

const std::vector<KnowledgeEntry>& KnowledgeBase::entries(const std::string& style) const {
  const auto it = styles.find(style);
  if (it == styles.end()) fail(Errc::UnknownStyle, "knowledge base has no style \"" + style + "\"");
  return it->second;
}

std::vector<std::string> KnowledgeBase::style_names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : styles) out.push_back(name);
  return out;
}

std::size_t KnowledgeBase::size() const {
  std::size_t n = 0;
  for (const auto& [_, list] : styles) n += list.size();
  return n;
}

json KnowledgeBase::to_json() const {
  json styles_json = json::object();
  for (const auto& [name, list] : styles) {
    json arr = json::array();
    for (const auto& e : list) {
      arr.push_back({{"cluster_index", e.cluster_index},
                     {"cluster_size", e.cluster_size},
                     {"medoid_id", e.medoid_id},
                     {"knowledge", e.knowledge.to_json()}});
    }
    styles_json[name] = arr;
  }
  return {{"version", version}, {"styles", styles_json}};
}

KnowledgeBase KnowledgeBase::from_json(const json& j) {
  KnowledgeBase kb;
  try {
    kb.version = j.at("version").get<int>();
    for (const auto& [name, arr] : j.at("styles").items()) {
      auto& list = kb.styles[name];
      for (const auto& e : arr) {
        KnowledgeEntry entry;
        entry.cluster_index = e.at("cluster_index").get<int>();
        entry.cluster_size = e.at("cluster_size").get<int>();
        entry.medoid_id = e.at("medoid_id").get<std::string>();
        entry.knowledge = knowledge::DesignKnowledge::from_json(e.at("knowledge"), name, entry.cluster_index);
        list.push_back(std::move(entry));
      }
      std::sort(list.begin(), list.end(),
                [](const KnowledgeEntry& a, const KnowledgeEntry& b) { return a.cluster_index < b.cluster_index; });
    }
  } catch (const json::exception& e) {
    fail(Errc::Config, std::string("malformed knowledge base: ") + e.what());
  }
  return kb;
}

void KnowledgeBase::save(const std::filesystem::path& path) const {
  write_file_bytes(path.string(), to_json().dump(2) + "\n");
}

KnowledgeBase KnowledgeBase::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(Errc::Config, "knowledge base " + path.string() + " not found");
  json j;
  try {
    j = json::parse(read_file_bytes(path.string()));
  } catch (const json::exception& e) {
    fail(Errc::Config, "knowledge base " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

void KnowledgeIndex::save(const std::filesystem::path& vectors_path, const std::filesystem::path& ids_path) const {
  io::RawMatrix raw;
  raw.rows = static_cast<std::uint32_t>(entries.size());
  raw.cols = entries.empty() ? 0 : static_cast<std::uint32_t>(entries.front().vector.size());
  json ids = json::array();
  for (const auto& e : entries) {
    for (Eigen::Index d = 0; d < e.vector.size(); ++d) raw.values.push_back(static_cast<float>(e.vector(d)));
    ids.push_back({{"style", e.style}, {"cluster_index", e.cluster_index}, {"summary_hash", e.summary_hash}});
  }
  if (!entries.empty()) write_file_bytes(vectors_path.string(), io::encode_peb1(raw));
  write_file_bytes(ids_path.string(), ids.dump(2) + "\n");
}

KnowledgeIndex KnowledgeIndex::load(const std::filesystem::path& vectors_path, const std::filesystem::path& ids_path) {
  const json ids = json::parse(read_file_bytes(ids_path.string()));
  KnowledgeIndex index;
  if (ids.empty()) return index;
  const io::RawMatrix raw = io::decode_peb1(read_file_bytes(vectors_path.string()), vectors_path.string());
  if (raw.rows != ids.size()) fail(Errc::DimensionMismatch, "index vectors and id map differ in length");
  for (std::uint32_t r = 0; r < raw.rows; ++r) {
    IndexEntry e;
    e.style = ids[r].at("style").get<std::string>();
    e.cluster_index = ids[r].at("cluster_index").get<int>();
    e.summary_hash = ids[r].at("summary_hash").get<std::string>();
    e.vector.resize(raw.cols);
    for (std::uint32_t d = 0; d < raw.cols; ++d) e.vector(d) = raw.values[static_cast<std::size_t>(r) * raw.cols + d];
    e.vector.normalize();
    index.entries.push_back(std::move(e));
  }
  return index;
}

bool KnowledgeIndex::matches(const KnowledgeBase& kb) const {
  std::size_t i = 0;
  for (const auto& [style, list] : kb.styles) {
    for (const auto& entry : list) {
      if (i >= entries.size()) return false;
      const auto& e = entries[i++];
      if (e.style != style || e.cluster_index != entry.cluster_index ||
          e.summary_hash != sha256_hex(entry.knowledge.summary)) {
        return false;
      }
    }
  }
  return i == entries.size();
}

KnowledgeIndex index_kb(const KnowledgeBase& kb, gateway::Gateway& gw) {
  KnowledgeIndex index;
  std::vector<std::string> summaries;
  for (const auto& [style, list] : kb.styles) {
    for (const auto& entry : list) {
      if (entry.knowledge.summary.empty()) {
        fail(Errc::InvalidArgument, "style \"" + style + "\" cluster " + std::to_string(entry.cluster_index) +
                                        " has no summary");
      }
      index.entries.push_back({style, entry.cluster_index, sha256_hex(entry.knowledge.summary), {}});
      summaries.push_back(entry.knowledge.summary);
    }
  }
  if (summaries.empty()) return index;
  const auto vectors = gw.embed(summaries);
  if (vectors.size() != summaries.size()) fail(Errc::DimensionMismatch, "embedding count differs from summary count");
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != vectors.front().size())
        fail(Errc::DimensionMismatch, "summary embeddings differ in dimension");
    index.entries[i].vector = vectors[i].normalized();
  }
  return index;
}

std::string resolve_style(const std::string& instruction, const std::vector<std::string>& known_styles,
                          gateway::Gateway& gw, const PromptLibrary& prompts) {
  if (known_styles.empty()) fail(Errc::InvalidArgument, "no known styles to resolve against");
  const std::string text = lower(instruction);
  const std::string* best = nullptr;
  for (const auto& style : known_styles) {
    if (text.find(lower(style)) != std::string::npos && (!best || style.size() > best->size())) best = &style;
  }
  if (best) return *best;

  std::string listing;
  for (const auto& s : known_styles) listing += (listing.empty() ? "" : ", ") + s;
  ChatRequest req;
  req.task = "resolve_style";
  req.temperature = 0.0;
  req.meta = {{"styles", listing}};
  req.messages.push_back(
      {"user", {Part::text(prompts.render("resolve_style", {{"instruction", instruction}, {"styles", listing}}))}});
  const std::string reply = lower(trim(gw.chat(req).text));
  for (const auto& style : known_styles) {
    if (lower(style) == reply) return style;
  }
  fail(Errc::NoStyleResolved, "no known style matches \"" + instruction + "\"");
}

const KnowledgeEntry& nearest_entry(const Eigen::VectorXd& query, const std::string& style,
                                    const KnowledgeIndex& index, const KnowledgeBase& kb) {
  const auto& list = kb.entries(style);
  const KnowledgeEntry* best = nullptr;
  double best_sim = -std::numeric_limits<double>::infinity();
  const double qn = query.norm();
  for (const auto& e : index.entries) {
    if (e.style != style) continue;
    if (e.vector.size() != query.size()) fail(Errc::DimensionMismatch, "query and index dimensions differ");
    const double sim = qn > 0.0 ? e.vector.dot(query) / qn : 0.0;
    const auto entry = std::find_if(list.begin(), list.end(),
                                    [&](const KnowledgeEntry& k) { return k.cluster_index == e.cluster_index; });
    if (entry == list.end()) fail(Errc::InvalidArgument, "index refers to a missing knowledge entry");
    if (!best || sim > best_sim || (sim == best_sim && entry->cluster_index < best->cluster_index)) {
      best = &*entry;
      best_sim = sim;
    }
  }
  if (!best) fail(Errc::EmptyStyleIndex, "index has no entries for style \"" + style + "\"");
  return *best;
}

const KnowledgeEntry& retrieve_single(const RetrievalQuery& query, const KnowledgeIndex& index,
                                      const KnowledgeBase& kb, gateway::Gateway& gw) {
  if (query.instruction.empty()) fail(Errc::InvalidArgument, "query instruction is empty");
  const bool indexed = std::any_of(index.entries.begin(), index.entries.end(),
                                   [&](const IndexEntry& e) { return e.style == query.style; });
  if (!indexed) fail(Errc::EmptyStyleIndex, "index has no entries for style \"" + query.style + "\"");
  return nearest_entry(gw.embed({query.text()}).front(), query.style, index, kb);
}

std::vector<const KnowledgeEntry*> retrieve_proportional(const std::string& style, int m, const KnowledgeBase& kb,
                                                         std::uint64_t seed, bool multinomial) {
  if (m < 1) fail(Errc::InvalidArgument, "variation count must be >= 1");
  const auto& list = kb.entries(style);
  if (list.empty()) fail(Errc::EmptyStyleIndex, "style \"" + style + "\" has no knowledge entries");
  std::vector<int> sizes;
  for (const auto& e : list) sizes.push_back(e.cluster_size);
  std::vector<int> counts;
  if (multinomial) {
    counts.assign(sizes.size(), 0);
    const double total = std::accumulate(sizes.begin(), sizes.end(), 0.0);
    Rng rng(derive_seed(seed, style));
    for (int draw = 0; draw < m; ++draw) {
      double u = rng.uniform() * total;
      std::size_t c = 0;
      while (c + 1 < sizes.size() && u >= sizes[c]) u -= sizes[c++];
      ++counts[c];
    }
  } else {
    counts = partition::apportion(m, sizes);
  }
  std::vector<const KnowledgeEntry*> out;
  for (std::size_t c = 0; c < list.size(); ++c) {
    for (int r = 0; r < counts[c]; ++r) out.push_back(&list[c]);
  }
  return out;
}

json DesignPlan::to_json() const {
  return {{"text", text}, {"style", style}, {"cluster_index", cluster_index},
          {"knowledge_version", knowledge_version}, {"temperature", temperature}};
}

DesignPlan plan_improvement(const std::string& design_caption, const std::string& instruction,
                            const std::string& style, const KnowledgeEntry* entry, gateway::Gateway& gw,
                            double temperature, const std::string& image_b64, const PromptLibrary& prompts) {
  ChatRequest req;
  req.task = "plan";
  req.temperature = temperature;
  std::string prompt;
  if (entry) {
    if (entry->knowledge.must_have.empty()) fail(Errc::InvalidArgument, "knowledge entry has no must-have features");
    prompt = prompts.render("plan", {{"instruction", instruction},
                                     {"caption", design_caption},
                                     {"style", style},
                                     {"knowledge", entry->knowledge.render()}});
    req.meta = {{"style", style}, {"cluster_index", std::to_string(entry->cluster_index)}};
  } else {
    prompt = prompts.render("plan_baseline",
        {{"instruction", instruction}, {"caption", design_caption}, {"style", style}});
    req.meta = {{"style", style}};
  }
  std::vector<Part> parts{Part::text(prompt)};
  if (!image_b64.empty()) parts.push_back(Part::image(image_b64));
  req.messages.push_back({"user", std::move(parts)});

  DesignPlan plan;
  plan.text = gw.chat(req).text;
  if (plan.text.find_first_not_of(" \t\r\n") == std::string::npos)
      fail(Errc::EmptyPlan, "planner returned an empty plan");
  plan.style = style;
  plan.temperature = temperature;
  if (entry) {
    plan.cluster_index = entry->cluster_index;
    plan.knowledge_version = entry->knowledge.version;
  }
  return plan;
}

std::string caption_design(const std::string& image_b64, gateway::Gateway& gw, double temperature,
                           const PromptLibrary& prompts) {
  ChatRequest req;
  req.task = "caption";
  req.temperature = temperature;
  std::vector<Part> parts{Part::text(prompts.render("caption", {}))};
  if (!image_b64.empty()) parts.push_back(Part::image(image_b64));
  req.messages.push_back({"user", std::move(parts)});
  std::string caption = gw.chat(req).text;
  std::replace(caption.begin(), caption.end(), '\n', ' ');
  const auto b = caption.find_first_not_of(" \t\r");
  caption = b == std::string::npos ? std::string() : caption.substr(b, caption.find_last_not_of(" \t\r") - b + 1);
  if (caption.empty()) fail(Errc::EmptySummary, "caption reply was empty");
  return caption;
}

}  // namespace prism::retrieval
