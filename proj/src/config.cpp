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

#include "prism/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "prism/error.hpp"

namespace prism::config {
namespace {

namespace fs = std::filesystem;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size()) {
    fail(Errc::Config, key + ": cannot parse \"" + text + "\" as a number");
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true") return true;
  if (text == "false") return false;
  fail(Errc::Config, key + ": expected true or false, got \"" + text + "\"");
}

std::string format_double(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join_list(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ",") + s;
  return out;
}

struct Field {
  std::string key;
  bool is_path = false;
  std::function<void(PipelineConfig&, const std::string&, const fs::path&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

Field path_field(std::string key, fs::path PipelineConfig::*member) {
  return {key, true,
          [member](PipelineConfig& c, const std::string& v, const fs::path& base) {
            c.*member = v.empty() ? fs::path() : (base / fs::path(v)).lexically_normal();
          },
          [member](const PipelineConfig& c) { return (c.*member).string(); }};
}

template <typename T, typename Getter>
Field int_field(std::string key, Getter access) {
  return {key, false,
          [key, access](PipelineConfig& c, const std::string& v, const fs::path&) {
            access(c) = parse_number<T>(key, v);
          },
          [access](const PipelineConfig& c) { return std::to_string(access(c)); }};
}

template <typename Getter>
Field real_field(std::string key, Getter access) {
  return {key, false,
          [key, access](PipelineConfig& c, const std::string& v, const fs::path&) {
            access(c) = parse_number<double>(key, v);
          },
          [access](const PipelineConfig& c) { return format_double(access(c)); }};
}

template <typename Getter>
Field bool_field(std::string key, Getter access) {
  return {key, false,
          [key, access](PipelineConfig& c, const std::string& v, const fs::path&) { access(c) = parse_bool(key, v); },
          [access](const PipelineConfig& c) { return access(c) ? "true" : "false"; }};
}

template <typename Getter>
Field string_field(std::string key, Getter access) {
  return {key, false, [access](PipelineConfig& c, const std::string& v, const fs::path&) { access(c) = v; },
          [access](const PipelineConfig& c) { return access(c); }};
}

#define ACCESS(expr) [](auto& c) -> auto& { return c.expr; }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(path_field("paths.manifest", &PipelineConfig::manifest_path));
    f.push_back(path_field("paths.allowlist", &PipelineConfig::allowlist_path));
    f.push_back(path_field("paths.embedding_dir", &PipelineConfig::embedding_dir));
    f.push_back(path_field("paths.cache_dir", &PipelineConfig::cache_dir));
    f.push_back(path_field("paths.run_dir", &PipelineConfig::run_dir));
    f.push_back(path_field("paths.prompts_dir", &PipelineConfig::prompts_dir));
    f.push_back(int_field<std::uint64_t>("seed", ACCESS(seed)));

    f.push_back(int_field<int>("ingest.min_count", ACCESS(min_count)));
    f.push_back(int_field<int>("ingest.phash_threshold", ACCESS(phash_threshold)));
    f.push_back({"build.styles", false,
                 [](PipelineConfig& c, const std::string& v, const fs::path&) { c.styles = split_list(v); },
                 [](const PipelineConfig& c) { return join_list(c.styles); }});
    f.push_back(bool_field("build.parallel_styles", ACCESS(parallel_styles)));
    f.push_back(int_field<unsigned>("build.threads", ACCESS(threads)));

    f.push_back(real_field("grad.lambda", ACCESS(grad.lambda)));
    f.push_back(real_field("grad.epsilon", ACCESS(grad.epsilon)));
    f.push_back(int_field<int>("grad.max_outer_iters", ACCESS(grad.max_outer_iters)));
    f.push_back(int_field<int>("grad.max_sinkhorn_iters", ACCESS(grad.max_sinkhorn_iters)));
    f.push_back(real_field("grad.tol", ACCESS(grad.tol)));
    f.push_back(int_field<int>("grad.polish_iters", ACCESS(grad.polish_iters)));

    f.push_back(int_field<int>("partition.k_min", ACCESS(k_min)));
    f.push_back(int_field<int>("partition.k_max", ACCESS(k_max)));
    f.push_back(int_field<int>("partition.restarts", ACCESS(kmedoids.restarts)));
    f.push_back(int_field<int>("partition.max_swap_passes", ACCESS(kmedoids.max_swap_passes)));

    f.push_back(int_field<int>("exemplars.i", ACCESS(exemplar_i)));
    f.push_back(int_field<int>("exemplars.j", ACCESS(exemplar_j)));
    f.push_back(int_field<int>("extraction.individual_count", ACCESS(extraction.individual_count)));
    f.push_back(real_field("extraction.temperature", ACCESS(extraction.temperature)));
    f.push_back(int_field<int>("extraction.max_parse_retries", ACCESS(extraction.max_parse_retries)));
    f.push_back(int_field<int>("extraction.collage_columns", ACCESS(extraction.collage_columns)));

    f.push_back(int_field<int>("refine.T", ACCESS(refine_T)));
    f.push_back(real_field("refine.classify_temperature", ACCESS(classify_temperature)));
    f.push_back(bool_field("refine.both_orders", ACCESS(classify_both_orders)));
    f.push_back(real_field("refine.feedback_temperature", ACCESS(feedback_temperature)));

    f.push_back(real_field("improve.plan_temperature", ACCESS(plan_temperature)));
    f.push_back(real_field("improve.baseline_temperature", ACCESS(baseline_temperature)));
    f.push_back(real_field("improve.caption_temperature", ACCESS(caption_temperature)));
    f.push_back(bool_field("improve.generate", ACCESS(generate_images)));
    f.push_back(bool_field("improve.multinomial", ACCESS(multinomial)));

    f.push_back(real_field("eval.alpha", ACCESS(eval.alpha)));
    f.push_back(int_field<int>("eval.B", ACCESS(eval.bootstrap_B)));
    f.push_back({"eval.k", false,
                 [](PipelineConfig& c, const std::string& v, const fs::path&) {
                   if (v.empty() || v == "auto") {
                     c.eval.k_override.reset();
                   } else {
                     c.eval.k_override = parse_number<int>("eval.k", v);
                   }
                 },
                 [](const PipelineConfig& c) {
                   return c.eval.k_override ? std::to_string(*c.eval.k_override) : std::string("auto");
                 }});

    f.push_back(string_field("gateway.base_url", ACCESS(gateway.base_url)));
    f.push_back(string_field("gateway.model", ACCESS(gateway.model)));
    f.push_back({"gateway.mode", false,
                 [](PipelineConfig& c, const std::string& v, const fs::path&) {
                   try {
                     c.gateway.mode = gateway::parse_mode(v);
                   } catch (const Error& e) {
                     fail(Errc::Config, std::string("gateway.mode: ") + e.what());
                   }
                 },
                 [](const PipelineConfig& c) { return gateway::mode_name(c.gateway.mode); }});
    f.push_back(real_field("gateway.timeout_s", ACCESS(gateway.timeout_s)));
    f.push_back(int_field<int>("gateway.max_retries", ACCESS(gateway.max_retries)));
    f.push_back(real_field("gateway.backoff_s", ACCESS(gateway.backoff_initial_s)));
    f.push_back(int_field<int>("gateway.max_in_flight", ACCESS(gateway.max_in_flight)));
    f.push_back(int_field<int>("gateway.embed_dim", ACCESS(gateway.mock_embed_dim)));
    f.push_back({"gateway.cassette", true,
                 [](PipelineConfig& c, const std::string& v, const fs::path& base) {
                   c.gateway.cassette_path = v.empty() ? fs::path() : (base / fs::path(v)).lexically_normal();
                 },
                 [](const PipelineConfig& c) { return c.gateway.cassette_path.string(); }});

    std::sort(f.begin(), f.end(), [](const Field& a, const Field& b) { return a.key < b.key; });
    return f;
  }();
  return table;
}

#undef ACCESS

const Field& field(const std::string& key) {
  const auto& f = fields();
  const auto it = std::lower_bound(f.begin(), f.end(), key,
      [](const Field& a, const std::string& k) { return a.key < k; });
  if (it == f.end() || it->key != key) fail(Errc::Config, "unknown config key \"" + key + "\"");
  return *it;
}

}  // namespace

void PipelineConfig::validate() const {
  try {
    grad.validate();
    extraction.validate();
    eval.validate();
    gateway.validate();
  } catch (const Error& e) {
    fail(Errc::Config, e.what());
  }
  if (min_count < 1) fail(Errc::Config, "ingest.min_count must be >= 1");
  if (phash_threshold < 0) fail(Errc::Config, "ingest.phash_threshold must be >= 0");
  if (k_min < 2 || k_max < k_min) fail(Errc::Config, "partition needs 2 <= k_min <= k_max");
  if (kmedoids.restarts < 1) fail(Errc::Config, "partition.restarts must be >= 1");
  if (kmedoids.max_swap_passes < 0) fail(Errc::Config, "partition.max_swap_passes must be >= 0");
  if (exemplar_i < 1 || exemplar_j < 0) fail(Errc::Config, "exemplars need i >= 1 and j >= 0");
  if (refine_T < 0) fail(Errc::Config, "refine.T must be >= 0");
  for (double t : {classify_temperature, feedback_temperature, plan_temperature, baseline_temperature,
                   caption_temperature}) {
    if (t < 0.0 || t > 2.0) fail(Errc::Config, "temperatures must be in [0, 2]");
  }
}

void set_value(PipelineConfig& cfg, const std::string& key, const std::string& value, const fs::path& base_dir) {
  field(key).set(cfg, value, base_dir);
}

PipelineConfig parse(std::istream& in, const fs::path& base_dir, const std::string& source) {
  PipelineConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(line_no);
    if (eq == std::string::npos) fail(Errc::Config, where + ": expected key = value");
    try {
      set_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), base_dir);
    } catch (const Error& e) {
      throw e.with_context(where);
    }
  }
  return cfg;
}

PipelineConfig load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::Config, "cannot open config " + path.string());
  return parse(in, fs::absolute(path).parent_path(), path.string());
}

void apply_overrides(PipelineConfig& cfg, const std::vector<std::string>& assignments) {
  for (const auto& a : assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos) fail(Errc::Config, "override \"" + a + "\" is not key=value");
    set_value(cfg, trim(a.substr(0, eq)), trim(a.substr(eq + 1)), fs::current_path());
  }
}

std::string snapshot(const PipelineConfig& cfg, bool include_paths) {
  std::string out;
  for (const auto& f : fields()) {
    if (f.is_path && !include_paths) continue;
    out += f.key + " = " + f.get(cfg) + "\n";
  }
  return out;
}

std::vector<std::string> known_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.push_back(f.key);
  return keys;
}

}  // namespace prism::config
