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

#include "prism/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include <spdlog/spdlog.h>

#include "prism/digest.hpp"
#include "prism/error.hpp"
#include "prism/image.hpp"
#include "prism/ingest.hpp"
#include "prism/parallel.hpp"
#include "prism/prompts.hpp"
#include "prism/random.hpp"

namespace prism::pipeline {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using config::PipelineConfig;

void write_text(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file_bytes(path.string(), text);
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  try {
    return json::parse(read_file_bytes(path.string()));
  } catch (const json::exception& e) {
    fail(Errc::MalformedManifest, path.string() + ": " + e.what());
  }
}

void require_path(const fs::path& p, const std::string& key) {
  if (p.empty()) fail(Errc::Config, key + " is not set");
  if (!fs::exists(p)) fail(Errc::Config, key + " does not exist: " + p.string());
}

struct Prompts {
  explicit Prompts(const PipelineConfig& cfg) {
    if (!cfg.prompts_dir.empty()) owned = std::make_unique<PromptLibrary>(cfg.prompts_dir);
  }
  const PromptLibrary& get() const { return owned ? *owned : PromptLibrary::standard(); }
  std::unique_ptr<PromptLibrary> owned;
};

// Records resolved against the manifest and embedding directories.
struct Catalog {
  ingest::DesignCatalog designs;
  std::vector<std::string> allowlist;
  std::map<std::string, fs::path> images;
  std::map<std::string, fs::path> embeddings;

  knowledge::ImageLookup lookup() const {
    return [this](const std::string& id) {
      const auto it = images.find(id);
      if (it == images.end()) fail(Errc::MissingImage, "no image for design \"" + id + "\"");
      return it->second;
    };
  }
};

Catalog load_catalog(const PipelineConfig& cfg) {
  require_path(cfg.manifest_path, "paths.manifest");
  require_path(cfg.allowlist_path, "paths.allowlist");
  Catalog c;
  ingest::DesignCatalog raw = ingest::load_manifest(cfg.manifest_path);
  const fs::path manifest_dir = fs::absolute(cfg.manifest_path).parent_path();
  const fs::path embedding_dir = cfg.embedding_dir.empty() ? manifest_dir : cfg.embedding_dir;
  for (auto& r : raw.records) {
    const fs::path img = fs::path(r.image_path).is_absolute() ? fs::path(r.image_path) : manifest_dir / r.image_path;
    c.images[r.id] = img;
    c.embeddings[r.id] =
        fs::path(r.embedding_path).is_absolute() ? fs::path(r.embedding_path) : embedding_dir / r.embedding_path;
    if (!r.phash) {
      try {
        r.phash = ingest::compute_phash(image::load(img.string()));
      } catch (const Error& e) {
        throw e.with_context("design \"" + r.id + "\"");
      }
    }
  }
  c.designs = ingest::dedup_catalog(raw, cfg.phash_threshold);
  c.allowlist = ingest::load_allowlist(cfg.allowlist_path);
  spdlog::info("catalog: {} designs, {} after dedup", raw.records.size(), c.designs.records.size());
  return c;
}

std::vector<std::string> target_styles(const PipelineConfig& cfg, const Catalog& c) {
  return cfg.styles.empty() ? c.allowlist : cfg.styles;
}

std::vector<grad::PatchGraph> load_graphs(const std::vector<std::string>& ids,
                                          const std::map<std::string, fs::path>& paths) {
  std::vector<grad::PatchGraph> graphs;
  graphs.reserve(ids.size());
  for (const auto& id : ids) {
    graphs.push_back(grad::build_patch_graph(ingest::read_embedding_bundle(paths.at(id), id)));
  }
  return graphs;
}

fs::path distance_cache_path(const PipelineConfig& cfg, const std::string& style) {
  return cfg.cache_dir / "distances" / (style + "-" + cfg.grad.hash() + ".gdm1");
}

struct StyleDistances {
  std::vector<std::string> ids;
  grad::DistanceMatrix d;
  grad::PairwiseStats stats;
};

StyleDistances style_distances(const PipelineConfig& cfg, const Catalog& c, const std::string& style) {
  StyleDistances out;
  const ingest::StyleCollection members = ingest::collect_style(c.designs, style, cfg.min_count, c.allowlist);
  for (const auto& r : members.members) out.ids.push_back(r.id);
  const auto graphs = load_graphs(out.ids, c.embeddings);
  const fs::path cache_path = distance_cache_path(cfg, style);
  fs::create_directories(cache_path.parent_path());
  grad::DistanceCache cache(cache_path, grad::DistanceCache::Kind::Square);
  out.d = grad::pairwise_distances(graphs, cfg.grad, {&cache, cfg.threads}, &out.stats);
  if (out.stats.solver_calls > 0) cache.save(out.d);
  if (out.stats.iteration_limit_pairs > 0) {
    spdlog::warn("{}: {} pairs hit the GRAD iteration limit", style, out.stats.iteration_limit_pairs);
  }
  spdlog::info("{}: {} designs, {} solver calls, {} cached pairs", style, out.ids.size(), out.stats.solver_calls,
               out.stats.cache_hits);
  return out;
}

std::string knowledge_cache_key(const PipelineConfig& cfg, const partition::ExemplarSet& e, const PromptLibrary& p,
                                const knowledge::ImageLookup& images) {
  const auto& x = cfg.extraction;
  json image_hashes = json::array();
  for (const auto* list : {&e.positives, &e.negatives}) {
    for (const auto& id : *list) image_hashes.push_back(sha256_hex(read_file_bytes(images(id).string())));
  }
  const json key = {{"exemplars", partition::to_json(e)},
                    {"images", image_hashes},
                    {"extraction",
                     {x.individual_count, x.temperature, x.max_parse_retries, x.collage_columns, x.cell_px,
                      x.individual_px}},
                    {"prompts", p.fingerprint()},
                    {"gateway", {gateway::mode_name(cfg.gateway.mode), cfg.gateway.model}}};
  return sha256_hex(key.dump()).substr(0, 16);
}

struct StyleBuild {
  std::vector<retrieval::KnowledgeEntry> entries;
  partition::Partition partition;
  std::vector<partition::ExemplarSet> exemplars;
  grad::PairwiseStats stats;
  std::size_t cache_hits = 0;
};

StyleBuild build_style(const PipelineConfig& cfg, const Catalog& c, const std::string& style, gateway::Gateway& gw,
                       const PromptLibrary& prompts) {
  StyleBuild out;
  StyleDistances dist = style_distances(cfg, c, style);
  out.stats = dist.stats;
  out.partition =
      partition::select_partition(dist.d, cfg.k_min, cfg.k_max, derive_seed(cfg.seed, "partition/" + style),
                                  cfg.kmedoids);
  spdlog::info("{}: K={} silhouette={:.4f}", style, out.partition.k, out.partition.silhouette);

  const auto images = c.lookup();
  for (int k = 0; k < out.partition.k; ++k) {
    partition::ExemplarSet e = partition::select_exemplars(dist.d, out.partition, k, cfg.exemplar_i, cfg.exemplar_j);
    e.style = style;
    const fs::path cached =
        cfg.cache_dir / "knowledge" / (style + "-c" + std::to_string(k) + "-" +
            knowledge_cache_key(cfg, e, prompts, images) + ".json");
    knowledge::DesignKnowledge dk;
    if (fs::exists(cached)) {
      dk = knowledge::DesignKnowledge::from_json(read_json(cached), style, k);
      ++out.cache_hits;
    } else {
      const auto inputs = knowledge::render_exemplar_inputs(e, cfg.extraction, images);
      dk = knowledge::extract_knowledge(e, inputs, cfg.extraction, gw, prompts);
      dk = knowledge::summarize_knowledge(dk, gw, false, cfg.extraction.temperature, prompts);
      write_json(cached, dk.to_json());
    }
    out.entries.push_back({k, out.partition.cluster_sizes[k], out.partition.medoids[k], std::move(dk)});
    out.exemplars.push_back(std::move(e));
  }
  return out;
}

fs::path exemplars_path(const PipelineConfig& cfg, const std::string& style) {
  return cfg.run_dir / "exemplars" / (style + ".json");
}

std::vector<partition::ExemplarSet> load_exemplars(const PipelineConfig& cfg, const std::string& style) {
  const fs::path path = exemplars_path(cfg, style);
  if (!fs::exists(path)) fail(Errc::Config, "no exemplars for style \"" + style + "\"; run build first");
  std::vector<partition::ExemplarSet> out;
  for (const auto& j : read_json(path)) out.push_back(partition::exemplars_from_json(j));
  return out;
}

retrieval::KnowledgeBase load_kb(const PipelineConfig& cfg) {
  const fs::path path = cfg.run_dir / kKnowledgeBaseFile;
  if (!fs::exists(path)) fail(Errc::Config, "no knowledge base at " + path.string() + "; run build first");
  return retrieval::KnowledgeBase::load(path);
}

std::string slug(const std::string& s) {
  std::string out;
  for (unsigned char ch : s) out += std::isalnum(ch) || ch == '-' || ch == '_' ? static_cast<char>(ch) : '_';
  return out;
}

void write_rank_tables(const fs::path& eval_dir) {
  evaluate::ScoreTable fidelity, diversity;
  std::vector<fs::path> reports;
  for (const auto& entry : fs::directory_iterator(eval_dir)) {
    if (entry.path().extension() == ".json") reports.push_back(entry.path());
  }
  std::sort(reports.begin(), reports.end());
  for (const auto& path : reports) {
    const json r = read_json(path);
    const auto method = r.at("method").get<std::string>();
    const auto style = r.at("style").get<std::string>();
    fidelity[method][style] = r.at("fidelity").get<double>();
    diversity[method][style] = r.at("diversity").get<double>();
  }
  try {
    const auto f = evaluate::expected_rank(fidelity, true);
    const auto d = evaluate::expected_rank(diversity, true);
    write_text(eval_dir / "ranks_fidelity.csv", evaluate::rank_csv(f));
    write_text(eval_dir / "ranks_diversity.csv", evaluate::rank_csv(d));
  } catch (const Error& e) {
    if (e.code() != Errc::MissingScore) throw;
    spdlog::info("rank tables skipped: {}", e.what());
  }
}

}  // namespace

std::unique_ptr<gateway::Gateway> make_gateway(const PipelineConfig& cfg,
                                               std::shared_ptr<gateway::Transport> transport) {
  gateway::GatewayConfig gc = cfg.gateway;
  gc.apply_env();
  try {
    gc.validate();
  } catch (const Error& e) {
    fail(Errc::Config, e.what());
  }
  return std::make_unique<gateway::Gateway>(std::move(gc), std::move(transport));
}

BuildResult cmd_build(const PipelineConfig& cfg, gateway::Gateway& gw) {
  cfg.validate();
  if (cfg.cache_dir.empty() || cfg.run_dir.empty()) fail(Errc::Config, "paths.cache_dir and paths.run_dir must be set");
  const Prompts prompts(cfg);
  const Catalog catalog = load_catalog(cfg);
  const auto styles = target_styles(cfg, catalog);
  if (styles.empty()) fail(Errc::Config, "no styles to build");

  std::vector<StyleBuild> built(styles.size());
  parallel_for(styles.size(), cfg.parallel_styles ? static_cast<unsigned>(styles.size()) : 1u, [&](std::size_t s) {
    try {
      built[s] = build_style(cfg, catalog, styles[s], gw, prompts.get());
    } catch (const Error& e) {
      throw e.with_context("style \"" + styles[s] + "\"");
    }
  });

  BuildResult result;
  for (std::size_t s = 0; s < styles.size(); ++s) {
    const std::string& style = styles[s];
    StyleBuild& b = built[s];
    result.kb.styles[style] = std::move(b.entries);
    result.distance_stats.solver_calls += b.stats.solver_calls;
    result.distance_stats.cache_hits += b.stats.cache_hits;
    result.distance_stats.iteration_limit_pairs += b.stats.iteration_limit_pairs;
    result.knowledge_cache_hits += b.cache_hits;
    write_json(cfg.run_dir / "partitions" / (style + ".json"), partition::to_json(b.partition, style));
    json ex = json::array();
    for (const auto& e : b.exemplars) ex.push_back(partition::to_json(e));
    write_json(exemplars_path(cfg, style), ex);
    result.partitions[style] = std::move(b.partition);
  }
  fs::create_directories(cfg.run_dir);
  result.kb.save(cfg.run_dir / kKnowledgeBaseFile);
  write_run_manifest(cfg.run_dir);
  return result;
}

RefineResult cmd_refine(const PipelineConfig& cfg, gateway::Gateway& gw, const std::string& style,
                        std::optional<int> T) {
  cfg.validate();
  const int iterations = T.value_or(cfg.refine_T);
  if (iterations < 0) fail(Errc::Config, "T must be >= 0");
  const Prompts prompts(cfg);
  RefineResult result;
  result.kb = load_kb(cfg);
  auto& entries = result.kb.styles[style];
  if (entries.empty()) fail(Errc::UnknownStyle, "knowledge base has no style \"" + style + "\"");
  const auto exemplars = load_exemplars(cfg, style);
  if (exemplars.size() != entries.size()) fail(Errc::InconsistentPartition, "exemplar and knowledge counts differ");
  const Catalog catalog = load_catalog(cfg);

  knowledge::RefinementOptions opts;
  opts.classify.temperature = cfg.classify_temperature;
  opts.classify.both_orders = cfg.classify_both_orders;
  opts.feedback_temperature = cfg.feedback_temperature;
  opts.extraction = cfg.extraction;
  opts.images = catalog.lookup();

  for (auto& entry : entries) {
    const int c = entry.cluster_index;
    std::vector<knowledge::DesignKnowledge> siblings;
    for (const auto& other : entries) {
      if (other.cluster_index != c) siblings.push_back(other.knowledge);
    }
    const auto& e = exemplars[static_cast<std::size_t>(c)];
    knowledge::RefinementResult r;
    try {
      r = knowledge::refinement_loop(entry.knowledge, e.positives, e.negatives, siblings, iterations, gw,
                                     derive_seed(cfg.seed, "refine/" + style + "/" + std::to_string(c)), opts,
                                     prompts.get());
    } catch (const Error& err) {
      throw err.with_context("style \"" + style + "\" cluster " + std::to_string(c));
    }
    entry.knowledge = r.knowledge;
    write_json(cfg.run_dir / "traces" / (style + "-c" + std::to_string(c) + ".json"), r.trace.to_json());
    result.traces[c] = std::move(r.trace);
  }
  result.kb.save(cfg.run_dir / kKnowledgeBaseFile);
  write_run_manifest(cfg.run_dir);
  return result;
}

ImproveResult cmd_improve(const PipelineConfig& cfg, gateway::Gateway& gw, const ImproveRequest& req) {
  cfg.validate();
  if (req.m < 1) fail(Errc::Config, "m must be >= 1");
  if (req.instruction.empty()) fail(Errc::Config, "instruction is empty");
  if (!fs::exists(req.design_path)) fail(Errc::MissingImage, "design image not found: " + req.design_path.string());
  const Prompts prompts(cfg);
  const retrieval::KnowledgeBase kb = load_kb(cfg);

  ImproveResult result;
  result.style = req.style ? *req.style :
      retrieval::resolve_style(req.instruction, kb.style_names(), gw, prompts.get());
  kb.entries(result.style);

  const std::string bytes = read_file_bytes(req.design_path.string());
  const std::string design_key = sha256_hex(bytes).substr(0, 16);
  const knowledge::ImageLookup lookup = [&](const std::string&) { return req.design_path; };
  const std::string image_b64 = knowledge::design_image_b64(design_key, lookup);

  const std::string caption_key =
      sha256_hex(design_key + "\n" + prompts.get().fingerprint() + "\n" + gateway::mode_name(cfg.gateway.mode) + "\n" +
                 cfg.gateway.model + "\n" + std::to_string(cfg.caption_temperature));
  const fs::path caption_path = cfg.cache_dir / "captions" / (caption_key.substr(0, 16) + ".txt");
  if (fs::exists(caption_path)) {
    result.caption = read_file_bytes(caption_path.string());
  } else {
    result.caption = retrieval::caption_design(image_b64, gw, cfg.caption_temperature, prompts.get());
    write_text(caption_path, result.caption);
  }

  std::vector<const retrieval::KnowledgeEntry*> picks;
  if (req.baseline) {
    picks.assign(static_cast<std::size_t>(req.m), nullptr);
  } else if (req.m == 1) {
    const fs::path vectors = cfg.cache_dir / "index" / "summaries.peb";
    const fs::path ids = cfg.cache_dir / "index" / "summaries.json";
    retrieval::KnowledgeIndex index;
    if (fs::exists(vectors) && fs::exists(ids)) index = retrieval::KnowledgeIndex::load(vectors, ids);
    if (!index.matches(kb)) {
      index = retrieval::index_kb(kb, gw);
      fs::create_directories(vectors.parent_path());
      index.save(vectors, ids);
    }
    retrieval::RetrievalQuery q;
    q.instruction = req.instruction;
    q.design_caption = result.caption;
    q.style = result.style;
    picks.push_back(&retrieval::retrieve_single(q, index, kb, gw));
  } else {
    picks = retrieval::retrieve_proportional(result.style, req.m, kb, derive_seed(cfg.seed, "improve/" + design_key),
                                             cfg.multinomial);
  }

  const fs::path out_dir = req.out_dir.empty() ? cfg.run_dir / "improve" : req.out_dir;
  const auto png = base64_decode(image_b64);
  const std::string base_png(png.begin(), png.end());
  json plans = json::array();
  for (std::size_t n = 0; n < picks.size(); ++n) {
    const double temperature = picks[n] ? cfg.plan_temperature : cfg.baseline_temperature;
    retrieval::DesignPlan plan = retrieval::plan_improvement(result.caption, req.instruction, result.style, picks[n],
                                                             gw, temperature, image_b64, prompts.get());
    json pj = plan.to_json();
    pj["index"] = n;
    if (cfg.generate_images) {
      const fs::path image = out_dir / ("plan-" + std::to_string(n) + ".png");
      write_text(image, gw.generate_image(plan.text, base_png));
      pj["image"] = image.filename().string();
      result.images.push_back(image);
    }
    plans.push_back(std::move(pj));
    result.plans.push_back(std::move(plan));
  }
  write_json(out_dir / "plans.json", {{"style", result.style},
                                      {"instruction", req.instruction},
                                      {"caption", result.caption},
                                      {"design_sha256", sha256_hex(bytes)},
                                      {"m", req.m},
                                      {"baseline", req.baseline},
                                      {"plans", plans}});
  write_run_manifest(cfg.run_dir);
  return result;
}

evaluate::MetricReport cmd_eval(const PipelineConfig& cfg, const EvalRequest& req) {
  cfg.validate();
  if (!fs::is_directory(req.generated_dir)) {
    fail(Errc::Config, "generated directory not found: " + req.generated_dir.string());
  }
  const Catalog catalog = load_catalog(cfg);
  StyleDistances real;
  try {
    real = style_distances(cfg, catalog, req.style);
  } catch (const Error& e) {
    throw e.with_context("style \"" + req.style + "\"");
  }

  std::vector<fs::path> bundles;
  for (const auto& entry : fs::directory_iterator(req.generated_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".peb") bundles.push_back(entry.path());
  }
  std::sort(bundles.begin(), bundles.end());
  if (bundles.empty()) fail(Errc::MissingEmbedding, "no .peb bundles in " + req.generated_dir.string());
  std::vector<std::string> gen_ids;
  std::map<std::string, fs::path> gen_paths;
  std::string digest_input;
  for (const auto& b : bundles) {
    const std::string id = b.stem().string();
    gen_ids.push_back(id);
    gen_paths[id] = b;
    digest_input += id + "\n" + sha256_hex(read_file_bytes(b.string())) + "\n";
  }
  const auto real_graphs = load_graphs(real.ids, catalog.embeddings);
  const auto gen_graphs = load_graphs(gen_ids, gen_paths);

  const fs::path cross_path = cfg.cache_dir / "cross" /
                              (req.style + "-" + cfg.grad.hash() + "-" +
                                  sha256_hex(digest_input).substr(0, 16) + ".gdc1");
  fs::create_directories(cross_path.parent_path());
  grad::DistanceCache cache(cross_path, grad::DistanceCache::Kind::Cross);
  grad::PairwiseStats stats;
  const grad::CrossMatrix cross = grad::cross_distances(real_graphs, gen_graphs, cfg.grad,
                                                        {&cache, cfg.threads}, &stats);
  if (stats.solver_calls > 0) cache.save(cross);

  const std::string method = req.method.empty() ? req.generated_dir.filename().string() : req.method;
  evaluate::EvalConfig ec = cfg.eval;
  ec.seed = derive_seed(cfg.seed, "eval/" + req.style + "/" + method);
  ec.threads = cfg.threads;
  evaluate::MetricReport report = evaluate::bootstrap_metrics(real.d.values, cross.values, ec);
  report.style = req.style;
  report.method = method;

  const fs::path eval_dir = cfg.run_dir / "eval";
  write_json(eval_dir / (slug(req.style) + "--" + slug(method) + ".json"), report.to_json());
  write_rank_tables(eval_dir);
  write_run_manifest(cfg.run_dir);
  return report;
}

json cmd_diagnose(const PipelineConfig& cfg, const std::string& style) {
  cfg.validate();
  const Catalog catalog = load_catalog(cfg);
  const StyleDistances dist = style_distances(cfg, catalog, style);
  const auto exemplars = load_exemplars(cfg, style);

  json clusters = json::array();
  std::vector<std::vector<std::string>> curated;
  for (const auto& e : exemplars) {
    json c = {{"cluster_index", e.cluster_index}, {"size", e.positives.size()}};
    if (e.positives.size() >= 3) {
      const std::uint64_t seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(e.cluster_index)});
      c["diagnostics"] = evaluate::input_diagnostics(dist.d, e.positives, seed, cfg.k_max, cfg.kmedoids).to_json();
    }
    if (e.positives.size() >= 2) curated.push_back(e.positives);
    clusters.push_back(std::move(c));
  }
  const auto comparison =
      evaluate::compare_curation(dist.d, curated, derive_seed(cfg.seed, "diagnose/" + style), cfg.k_max, cfg.kmedoids);
  const json out = {{"style", style}, {"clusters", clusters}, {"comparison", comparison.to_json()}};
  write_json(cfg.run_dir / "diagnostics" / (style + ".json"), out);
  write_run_manifest(cfg.run_dir);
  return out;
}

void write_run_manifest(const fs::path& run_dir) {
  json artifacts = json::object();
  if (fs::exists(run_dir)) {
    for (const auto& entry : fs::recursive_directory_iterator(run_dir)) {
      if (!entry.is_regular_file()) continue;
      const std::string rel = fs::relative(entry.path(), run_dir).generic_string();
      if (rel == kRunManifestFile) continue;
      artifacts[rel] = sha256_hex(read_file_bytes(entry.path().string()));
    }
  }
  write_json(run_dir / kRunManifestFile, {{"artifacts", artifacts}});
}

}  // namespace prism::pipeline
