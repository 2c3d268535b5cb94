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

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "prism/config.hpp"
#include "prism/error.hpp"
#include "prism/pipeline.hpp"

namespace {

using prism::config::PipelineConfig;

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  bool verbose = false;
};

PipelineConfig load_config(const Options& o) {
  PipelineConfig cfg = prism::config::load(o.config_path);
  prism::config::apply_overrides(cfg, o.overrides);
  if (o.seed) cfg.seed = *o.seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prism: design knowledge extraction, retrieval and evaluation"};
  app.require_subcommand(1);
  Options opts;
  app.add_option("--config", opts.config_path, "Config file")->required();
  app.add_option("--seed", opts.seed, "Override the config seed");
  app.add_option("--set", opts.overrides, "Override a config key (key=value), repeatable");
  app.add_flag("--verbose", opts.verbose, "Debug logging");

  auto* build = app.add_subcommand("build", "Distances, partitions and knowledge for every style");

  std::string refine_style;
  std::optional<int> refine_T;
  auto* refine = app.add_subcommand("refine", "Iteratively refine the knowledge of one style");
  refine->add_option("--style", refine_style)->required();
  refine->add_option("-T,--iterations", refine_T, "Refinement iterations (default refine.T)");

  prism::pipeline::ImproveRequest improve_req;
  std::string improve_style, improve_out;
  bool generate = false;
  auto* improve = app.add_subcommand("improve", "Plan improvements of a design");
  improve->add_option("--design", improve_req.design_path, "Design image")->required();
  improve->add_option("--instruction", improve_req.instruction)->required();
  improve->add_option("-m,--variations", improve_req.m, "Number of plans")->capture_default_str();
  improve->add_option("--style", improve_style, "Skip style resolution");
  improve->add_flag("--baseline", improve_req.baseline, "Plan without knowledge");
  improve->add_flag("--generate", generate, "Also generate images");
  improve->add_option("--out", improve_out, "Output directory (default <run_dir>/improve)");

  prism::pipeline::EvalRequest eval_req;
  auto* eval = app.add_subcommand("eval", "Fidelity and diversity of generated designs against a style");
  eval->add_option("--style", eval_req.style)->required();
  eval->add_option("--generated", eval_req.generated_dir, "Directory of .peb bundles")->required();
  eval->add_option("--method", eval_req.method, "Method label (default: directory name)");

  std::string diagnose_style;
  auto* diagnose = app.add_subcommand("diagnose", "Exemplar set diagnostics for one style");
  diagnose->add_option("--style", diagnose_style)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(prism::ErrorCategory::Config);
  }

  spdlog::set_default_logger(spdlog::stderr_color_mt("prism"));
  spdlog::set_level(opts.verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    PipelineConfig cfg = load_config(opts);
    if (generate) cfg.generate_images = true;
    if (*build) {
      auto gw = prism::pipeline::make_gateway(cfg);
      const auto r = prism::pipeline::cmd_build(cfg, *gw);
      std::cout << "knowledge base: " << r.kb.size() << " entries over " << r.kb.styles.size() << " styles ("
                << r.distance_stats.solver_calls << " solver calls, " << gw->call_count() << " gateway calls)\n";
    } else if (*refine) {
      auto gw = prism::pipeline::make_gateway(cfg);
      const auto r = prism::pipeline::cmd_refine(cfg, *gw, refine_style, refine_T);
      for (const auto& e : r.kb.entries(refine_style)) {
        std::cout << refine_style << " cluster " << e.cluster_index << ": version " << e.knowledge.version << "\n";
      }
    } else if (*improve) {
      if (!improve_style.empty()) improve_req.style = improve_style;
      improve_req.out_dir = improve_out;
      auto gw = prism::pipeline::make_gateway(cfg);
      const auto r = prism::pipeline::cmd_improve(cfg, *gw, improve_req);
      std::cout << "style: " << r.style << "\ncaption: " << r.caption << "\n";
      for (std::size_t n = 0; n < r.plans.size(); ++n) {
        std::cout << "--- plan " << n << " (cluster " << r.plans[n].cluster_index << ")\n" << r.plans[n].text << "\n";
      }
    } else if (*eval) {
      const auto r = prism::pipeline::cmd_eval(cfg, eval_req);
      std::cout << r.to_json().dump(2) << "\n";
    } else if (*diagnose) {
      std::cout << prism::pipeline::cmd_diagnose(cfg, diagnose_style).dump(2) << "\n";
    }
  } catch (const prism::Error& e) {
    spdlog::error("{}", e.what());
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return static_cast<int>(prism::ErrorCategory::Data);
  }
  return 0;
}
