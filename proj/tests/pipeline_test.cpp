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

#include <gtest/gtest.h>

#include <filesystem>
#include <memory>

#include <nlohmann/json.hpp>

#include "prism/config.hpp"
#include "prism/digest.hpp"
#include "prism/error.hpp"
#include "prism/partition.hpp"
#include "prism/pipeline.hpp"
#include "testkit.hpp"

namespace prism::pipeline {
namespace {

namespace fs = std::filesystem;
using testing::Corpus;
using testing::TempDir;

class PipelineTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = std::make_unique<TempDir>("prism-pipeline");
    testing::CorpusSpec spec;
    spec.cluster_sizes = {12, 9};
    corpus_ = std::make_unique<Corpus>(testing::write_corpus(dir_->path() / "corpus", spec));
  }
  static void TearDownTestSuite() {
    corpus_.reset();
    dir_.reset();
  }

  // Fresh cache and run directories per test.
  config::PipelineConfig make_config(const std::string& name, const std::vector<std::string>& extra = {}) {
    const fs::path root = dir_->path() / name;
    fs::create_directories(root);
    std::vector<std::string> lines{"ingest.min_count = 10", "eval.B = 50", "seed = 3"};
    lines.insert(lines.end(), extra.begin(), extra.end());
    return config::load(testing::write_config(root / "prism.conf", *corpus_, root / "cache", root / "run", lines));
  }

  static std::unique_ptr<TempDir> dir_;
  static std::unique_ptr<Corpus> corpus_;
};

std::unique_ptr<TempDir> PipelineTest::dir_;
std::unique_ptr<Corpus> PipelineTest::corpus_;

std::vector<int> labels_of(const partition::Partition& p, const std::vector<std::string>& ids) {
  std::vector<int> out;
  for (const auto& id : ids) out.push_back(p.assignments.at(id));
  return out;
}

TEST_F(PipelineTest, BuildRecoversPlantedClustersAndResumes) {
  const auto cfg = make_config("build");
  auto gw = make_gateway(cfg);
  const BuildResult first = cmd_build(cfg, *gw);
  EXPECT_GT(first.distance_stats.solver_calls, 0u);
  EXPECT_GT(gw->call_count(), 0u);
  for (const auto& style : {"retro", "minimal"}) {
    EXPECT_GE(first.kb.entries(style).size(), 2u);
    const auto& p = first.partitions.at(style);
    EXPECT_EQ(p.k, 2);
    EXPECT_DOUBLE_EQ(partition::adjusted_rand_index(labels_of(p, corpus_->ids.at(style)), corpus_->labels.at(style)),
                     1.0);
  }
  EXPECT_TRUE(fs::exists(cfg.run_dir / "kb.json"));
  EXPECT_TRUE(fs::exists(cfg.run_dir / "partitions" / "retro.json"));
  const std::string kb_bytes = read_file_bytes((cfg.run_dir / "kb.json").string());

  auto warm_gw = make_gateway(cfg);
  const BuildResult second = cmd_build(cfg, *warm_gw);
  EXPECT_EQ(second.distance_stats.solver_calls, 0u);
  EXPECT_EQ(warm_gw->call_count(), 0u);
  EXPECT_EQ(second.knowledge_cache_hits, 4u);
  EXPECT_EQ(read_file_bytes((cfg.run_dir / "kb.json").string()), kb_bytes);

  const auto manifest = nlohmann::json::parse(read_file_bytes((cfg.run_dir / "manifest.json").string()));
  EXPECT_EQ(manifest.at("artifacts").at("kb.json").get<std::string>(), sha256_hex(kb_bytes));
}

TEST_F(PipelineTest, MissingEmbeddingNamesDesign) {
  auto cfg = make_config("missing", {"build.styles = retro"});
  const fs::path moved = corpus_->embedding_dir / "retro-1-4.peb.bak";
  fs::rename(corpus_->embedding_dir / "retro-1-4.peb", moved);
  auto gw = make_gateway(cfg);
  try {
    cmd_build(cfg, *gw);
    ADD_FAILURE() << "expected MissingEmbedding";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MissingEmbedding);
    EXPECT_NE(std::string(e.what()).find("retro-1-4"), std::string::npos);
    EXPECT_EQ(e.category(), ErrorCategory::Data);
  }
  fs::rename(moved, corpus_->embedding_dir / "retro-1-4.peb");
}

TEST_F(PipelineTest, RefineScenarios) {
  const auto cfg = make_config("refine", {"build.styles = retro"});
  auto gw = make_gateway(cfg);
  const BuildResult built = cmd_build(cfg, *gw);
  const auto& assignments = built.partitions.at("retro").assignments;

  gw->clear_log();
  const RefineResult noop = cmd_refine(cfg, *gw, "retro", 0);
  EXPECT_EQ(gw->call_count(), 0u);
  for (const auto& e : noop.kb.entries("retro")) EXPECT_EQ(e.knowledge.version, 0);

  // Every exemplar lands on its own cluster.
  auto truthful = [&](const gateway::ChatRequest& r) {
    const int own = assignments.at(r.meta.at("design_id"));
    return std::to_string(own) == r.meta.at("option_b") ? std::string("B") : std::string("A");
  };
  gw->mock().set_handler("classify", truthful);
  const RefineResult clean = cmd_refine(cfg, *gw, "retro", 3);
  for (const auto& e : clean.kb.entries("retro")) EXPECT_EQ(e.knowledge.version, 0);
  for (const auto& [c, trace] : clean.traces) EXPECT_EQ(trace.iterations.size(), 1u);
  EXPECT_EQ(gw->call_count_for_task("refine"), 0u);
  EXPECT_TRUE(fs::exists(cfg.run_dir / "traces" / "retro-c0.json"));

  // One negative of cluster 0 is claimed by cluster 0 until the first refinement.
  const auto exemplars = nlohmann::json::parse(read_file_bytes((cfg.run_dir / "exemplars" / "retro.json").string()));
  const std::string intruder = exemplars.at(0).at("negatives").at(0).get<std::string>();
  gw->mock().set_handler("classify", [&](const gateway::ChatRequest& r) {
    if (r.meta.at("design_id") == intruder && gw->call_count_for_task("refine") == 0) {
      return r.meta.at("option_a") == "0" ? std::string("A") : std::string("B");
    }
    return truthful(r);
  });
  const RefineResult once = cmd_refine(cfg, *gw, "retro", 3);
  EXPECT_EQ(once.kb.entries("retro")[0].knowledge.version, 1);
  EXPECT_EQ(once.kb.entries("retro")[1].knowledge.version, 0);
  ASSERT_EQ(once.traces.at(0).iterations.size(), 2u);
  EXPECT_EQ(once.traces.at(0).iterations[0].false_positive_ids, std::vector<std::string>{intruder});
  EXPECT_EQ(gw->call_count_for_task("refine"), 1u);
}

TEST_F(PipelineTest, ImprovePaths) {
  const auto cfg = make_config("improve");
  auto gw = make_gateway(cfg);
  cmd_build(cfg, *gw);
  const fs::path design = corpus_->root / "images" / "minimal-0-0.png";

  gw->clear_log();
  ImproveRequest single{design, "make it more minimal", 1, {}, false, {}};
  const ImproveResult one = cmd_improve(cfg, *gw, single);
  EXPECT_EQ(one.style, "minimal");
  ASSERT_EQ(one.plans.size(), 1u);
  EXPECT_GE(one.plans[0].cluster_index, 0);
  EXPECT_DOUBLE_EQ(one.plans[0].temperature, 0.3);
  EXPECT_EQ(gw->call_count("/v1/generate"), 0u);
  EXPECT_TRUE(fs::exists(cfg.run_dir / "improve" / "plans.json"));

  ImproveRequest many{design, "retro please", 7, {}, false, {}};
  many.out_dir = cfg.run_dir / "improve-many";
  const ImproveResult seven = cmd_improve(cfg, *gw, many);
  EXPECT_EQ(seven.style, "retro");
  std::vector<int> counts(2, 0);
  for (const auto& p : seven.plans) ++counts.at(static_cast<std::size_t>(p.cluster_index));
  const auto kb = retrieval::KnowledgeBase::load(cfg.run_dir / "kb.json");
  const auto& entries = kb.entries("retro");
  const std::vector<int> sizes{entries[0].cluster_size, entries[1].cluster_size};
  EXPECT_EQ(counts, partition::apportion(7, sizes));

  ImproveRequest baseline{design, "retro please", 2, {}, false, {}};
  baseline.baseline = true;
  baseline.out_dir = cfg.run_dir / "improve-baseline";
  auto gen_cfg = cfg;
  gen_cfg.generate_images = true;
  const ImproveResult base = cmd_improve(gen_cfg, *gw, baseline);
  for (const auto& p : base.plans) {
    EXPECT_EQ(p.cluster_index, -1);
    EXPECT_DOUBLE_EQ(p.temperature, 0.7);
  }
  EXPECT_EQ(base.images.size(), 2u);
  EXPECT_EQ(gw->call_count("/v1/generate"), 2u);
}

TEST_F(PipelineTest, EvalProperties) {
  auto cfg = make_config("eval", {"build.styles = retro"});
  const fs::path copies = dir_->path() / "eval" / "copies";
  fs::create_directories(copies);
  for (const auto& id : corpus_->ids.at("retro")) {
    fs::copy_file(corpus_->embedding_dir / (id + ".peb"), copies / (id + "-copy.peb"));
  }
  const evaluate::MetricReport same = cmd_eval(cfg, {"retro", copies, "copy"});
  EXPECT_EQ(same.k, 1);
  EXPECT_DOUBLE_EQ(same.diversity_full, 1.0);
  EXPECT_DOUBLE_EQ(same.fidelity_full, 1.0 + 1.0 / same.k);
  EXPECT_EQ(same.B, 50);

  cfg.eval.k_override = 3;
  const evaluate::MetricReport k3 = cmd_eval(cfg, {"retro", copies, "copy"});
  EXPECT_EQ(k3.k, 3);
  EXPECT_DOUBLE_EQ(k3.fidelity_full, 1.0 + 1.0 / 3.0);

  cfg.eval.k_override.reset();
  testing::CorpusSpec far_spec;
  far_spec.styles = {"far"};
  far_spec.cluster_sizes = {4};
  far_spec.seed = 99;
  const Corpus far = testing::write_corpus(dir_->path() / "eval" / "far-corpus", far_spec);
  const evaluate::MetricReport distant = cmd_eval(cfg, {"retro", far.embedding_dir, "far"});
  EXPECT_EQ(distant.fidelity, 0.0);
  EXPECT_EQ(distant.diversity, 0.0);
  EXPECT_TRUE(fs::exists(cfg.run_dir / "eval" / "retro--copy.json"));
  EXPECT_TRUE(fs::exists(cfg.run_dir / "eval" / "ranks_fidelity.csv"));
}

TEST_F(PipelineTest, DiagnoseWritesReport) {
  const auto cfg = make_config("diagnose", {"build.styles = retro"});
  auto gw = make_gateway(cfg);
  cmd_build(cfg, *gw);
  const nlohmann::json out = cmd_diagnose(cfg, "retro");
  EXPECT_EQ(out.at("style"), "retro");
  EXPECT_EQ(out.at("clusters").size(), 2u);
  const auto& cmp = out.at("comparison");
  EXPECT_GE(cmp.at("curated_silhouette").get<double>(), cmp.at("random_silhouette").get<double>());
  EXPECT_TRUE(fs::exists(cfg.run_dir / "diagnostics" / "retro.json"));
  EXPECT_EQ(cmd_diagnose(cfg, "retro"), out);
  EXPECT_THROW(cmd_diagnose(cfg, "nope"), Error);
}

}  // namespace
}  // namespace prism::pipeline
