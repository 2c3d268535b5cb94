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

#include "prism/gateway.hpp"

#include <cstdlib>
#include <thread>

#include <spdlog/spdlog.h>

#include "prism/digest.hpp"
#include "prism/error.hpp"
#include "prism/image.hpp"
#include "prism/random.hpp"

namespace prism::gateway {
namespace {

using nlohmann::json;

std::string hex_token(std::string_view seed, std::size_t chars) { return sha256_hex(seed).substr(0, chars); }

const char* const kPalettes[] = {"warm ochre", "cool teal", "muted pastel", "high-contrast mono", "saturated primary"};
const char* const kShapes[] = {"rounded blobs", "hard-edged grids", "thin line art", "layered paper cutouts",
                               "geometric tiles"};
const char* const kType[] = {"heavy sans-serif", "delicate serif", "hand lettering", "condensed caps",
                             "monospace labels"};

template <std::size_t N>
const char* pick(const char* const (&options)[N], std::uint64_t h, int salt) {
  return options[derive_seed(h, {static_cast<std::uint64_t>(salt)}) % N];
}

std::string knowledge_reply(std::uint64_t h, bool with_summary) {
  json j = {{"must_have", {std::string("Use a ") + pick(kPalettes, h, 0) + " palette",
                           std::string("Build the layout from ") + pick(kShapes, h, 1)}},
            {"optional", {std::string("Set headlines in ") + pick(kType, h, 2)}},
            {"must_not", {std::string("Avoid ") + pick(kShapes, h, 3) + " as the main motif"}}};
  if (with_summary) j["summary"] = std::string("Designs built from ") + pick(kShapes, h, 1) + " in a " +
                                   pick(kPalettes, h, 0) + " palette.";
  return j.dump();
}

// Built-in responders so that every pipeline stage runs against the mock
// without registered fixtures.
std::map<std::string, ChatHandler> default_handlers() {
  std::map<std::string, ChatHandler> d;
  d["extract"] = [](const ChatRequest& r) { return knowledge_reply(sha256_u64(r.text_content()), false); };
  d["summarize"] = [](const ChatRequest& r) {
    const std::uint64_t h = sha256_u64(r.text_content());
    return std::string("Designs built from ") + pick(kShapes, h, 1) + " in a " + pick(kPalettes, h, 0) + " palette.";
  };
  d["classify"] = [](const ChatRequest& r) {
    const auto id = r.meta.find("design_id");
    return (sha256_u64(r.text_content() + (id == r.meta.end() ? "" : id->second)) & 1) ? "B" : "A";
  };
  d["feedback"] = [](const ChatRequest& r) {
    const std::uint64_t h = sha256_u64(r.text_content());
    return json{{"analysis", std::string("The design leans on ") + pick(kShapes, h, 0) + "."},
                {"advice", std::string("State whether ") + pick(kShapes, h, 0) + " are characteristic."}}
        .dump();
  };
  d["refine"] = [](const ChatRequest& r) {
    const std::uint64_t h = sha256_u64(r.text_content());
    json k = json::parse(knowledge_reply(h, true));
    if (const auto it = r.meta.find("knowledge"); it != r.meta.end()) {
      const json current = json::parse(it->second);
      k["must_have"] = current.at("must_have");
      k["optional"] = current.at("optional");
      k["must_not"] = current.at("must_not");
      k["must_not"].push_back("Avoid designs dominated by " + std::string(pick(kShapes, h, 4)) + " (rev " +
                              hex_token(r.text_content(), 6) + ")");
    }
    return k.dump();
  };
  d["caption"] = [](const ChatRequest& r) {
    const std::uint64_t h = sha256_u64(r.wire("").dump());
    return std::string("A layout of ") + pick(kShapes, h, 0) + " with " + pick(kType, h, 1) + " text.";
  };
  d["resolve_style"] = [](const ChatRequest&) { return std::string("none"); };
  d["plan"] = [](const ChatRequest& r) {
    const std::uint64_t h = sha256_u64(r.text_content());
    return std::string("Background: ") + pick(kPalettes, h, 0) + " gradient\nPalette: " + pick(kPalettes, h, 1) +
           "\nShapes: " + pick(kShapes, h, 2) + "\nText: " + pick(kType, h, 3);
  };
  return d;
}

bool retryable(int status) { return status >= 500; }

}  // namespace

Mode parse_mode(const std::string& s) {
  if (s == "live") return Mode::Live;
  if (s == "mock") return Mode::Mock;
  if (s == "record") return Mode::Record;
  if (s == "replay") return Mode::Replay;
  fail(Errc::Config, "unknown gateway mode \"" + s + "\"");
}

std::string mode_name(Mode m) {
  switch (m) {
    case Mode::Live:
      return "live";
    case Mode::Mock:
      return "mock";
    case Mode::Record:
      return "record";
    case Mode::Replay:
      return "replay";
  }
  return "?";
}

void GatewayConfig::apply_env() {
  if (const char* v = std::getenv("PRISM_GATEWAY_URL"); v && *v) base_url = v;
  if (const char* v = std::getenv("PRISM_GATEWAY_KEY"); v && *v) api_key = v;
  if (const char* v = std::getenv("PRISM_GATEWAY_MODE"); v && *v) mode = parse_mode(v);
}

void GatewayConfig::validate() const {
  if (!(timeout_s > 0.0)) fail(Errc::Config, "gateway timeout_s must be > 0");
  if (max_retries < 0) fail(Errc::Config, "gateway max_retries must be >= 0");
  if (max_in_flight < 1 || max_in_flight > 1024) fail(Errc::Config, "gateway max_in_flight must be in [1, 1024]");
  if (backoff_initial_s < 0.0) fail(Errc::Config, "gateway backoff must be >= 0");
  if ((mode == Mode::Record || mode == Mode::Replay) && cassette_path.empty()) {
    fail(Errc::Config, "gateway mode " + mode_name(mode) + " needs a cassette path");
  }
  if ((mode == Mode::Live || mode == Mode::Record) && base_url.empty()) {
    fail(Errc::Config, "gateway mode " + mode_name(mode) + " needs a base URL");
  }
  if (mock_embed_dim < 1) fail(Errc::Config, "mock embedding dimension must be >= 1");
}

json ChatRequest::wire(const std::string& model) const {
  json messages_json = json::array();
  for (const auto& m : messages) {
    json parts = json::array();
    for (const auto& p : m.parts) {
      parts.push_back({{"kind", p.kind == Part::Kind::Text ? "text" : "image"}, {"payload", p.payload}});
    }
    messages_json.push_back({{"role", m.role}, {"parts", parts}});
  }
  json j = {{"messages", messages_json}, {"temperature", temperature}, {"max_tokens", max_tokens}};
  if (!model.empty()) j["model"] = model;
  return j;
}

std::string ChatRequest::text_content() const {
  std::string out;
  for (const auto& m : messages) {
    for (const auto& p : m.parts) {
      if (p.kind == Part::Kind::Text) {
        out += p.payload;
        out.push_back('\0');
      }
    }
  }
  return out;
}

std::string text_hash(const ChatRequest& req) { return sha256_hex(req.text_content()); }

MockBackend::MockBackend() : defaults_(default_handlers()) {}

void MockBackend::register_template(const std::string& hash, std::string response) {
  templates_[hash] = std::move(response);
}

void MockBackend::set_handler(const std::string& task, ChatHandler handler) { handlers_[task] = std::move(handler); }

void MockBackend::clear_handler(const std::string& task) { handlers_.erase(task); }

std::string MockBackend::chat(const ChatRequest& req) const {
  if (const auto it = templates_.find(text_hash(req)); it != templates_.end()) return it->second;
  if (const auto it = handlers_.find(req.task); it != handlers_.end()) return it->second(req);
  if (const auto it = defaults_.find(req.task); it != defaults_.end()) return it->second(req);
  return "mock response " + text_hash(req).substr(0, 12);
}

Eigen::VectorXd MockBackend::embed(const std::string& text, int dim) const {
  Rng rng(sha256_u64(text));
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v(i) = rng.normal();
  return v.normalized();
}

std::string MockBackend::generate(const std::string& prompt) const {
  const std::string digest = sha256_hex(prompt);
  const auto channel = [&](int i) {
      return static_cast<std::uint8_t>(std::stoi(digest.substr(2 * i, 2), nullptr, 16)); };
  return image::encode_png(image::solid(64, 64, {channel(0), channel(1), channel(2)}));
}

Gateway::Gateway(GatewayConfig config, std::shared_ptr<Transport> transport)
    : config_(std::move(config)), transport_(std::move(transport)), in_flight_(config_.max_in_flight) {
  config_.validate();
  if (config_.mode == Mode::Replay) {
    if (!std::filesystem::exists(config_.cassette_path)) {
      fail(Errc::Config, "cassette " + config_.cassette_path.string() + " does not exist");
    }
    try {
      cassette_ = json::parse(read_file_bytes(config_.cassette_path.string()));
    } catch (const json::exception& e) {
      fail(Errc::Config, "cassette " + config_.cassette_path.string() + " is not valid JSON: " + e.what());
    }
  } else if (config_.mode == Mode::Record) {
    cassette_ = {{"interactions", json::object()}};
  }
  if ((config_.mode == Mode::Live || config_.mode == Mode::Record) && !transport_) {
    transport_ = make_http_transport(config_.base_url);
  }
}

Gateway::~Gateway() = default;

void Gateway::log_call(const std::string& endpoint, const std::string& task, const std::string& hash, int attempts,
                       int status) {
  std::lock_guard lock(mutex_);
  CallRecord rec{log_.size(), endpoint, task, hash, attempts, status};
  spdlog::debug("gateway call #{} {} task={} attempts={} status={}", rec.index, endpoint, task, attempts, status);
  log_.push_back(std::move(rec));
}

HttpResponse Gateway::send_with_retry(const std::string& endpoint, const std::string& body, int& attempts) {
  std::map<std::string, std::string> headers;
  if (!config_.api_key.empty()) headers["Authorization"] = "Bearer " + config_.api_key;
  double delay = config_.backoff_initial_s;
  for (attempts = 1;; ++attempts) {
    const bool last = attempts > config_.max_retries;
    try {
      HttpResponse res = transport_->post(endpoint, body, headers, config_.timeout_s);
      if (res.status >= 200 && res.status < 300) return res;
      if (!retryable(res.status) || last) {
        fail(Errc::GatewayStatus, endpoint + " returned HTTP " + std::to_string(res.status));
      }
      spdlog::warn("{} returned HTTP {}, retrying", endpoint, res.status);
    } catch (const Error& e) {
      if (e.code() == Errc::GatewayStatus || last) throw;
      spdlog::warn("{} failed ({}), retrying", endpoint, e.what());
    }
    if (delay > 0.0) std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    delay *= 2.0;
  }
}

json Gateway::post_json(const std::string& endpoint, const json& body, const std::string& task) {
  const std::string payload = body.dump();
  const std::string key = sha256_hex(endpoint + "\n" + payload);
  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{in_flight_};

  if (config_.mode == Mode::Replay) {
    const auto& interactions = cassette_.at("interactions");
    const auto it = interactions.find(key);
    if (it == interactions.end()) fail(Errc::CassetteMiss, "no recorded response for " + endpoint + " request " + key);
    log_call(endpoint, task, key, 0, it->at("status").get<int>());
    return json::parse(it->at("body").get<std::string>());
  }

  int attempts = 0;
  HttpResponse res;
  try {
    res = send_with_retry(endpoint, payload, attempts);
  } catch (const Error&) {
    log_call(endpoint, task, key, attempts, 0);
    throw;
  }
  log_call(endpoint, task, key, attempts, res.status);
  json parsed;
  try {
    parsed = json::parse(res.body);
  } catch (const json::exception& e) {
    fail(Errc::GatewayTransport, endpoint + " returned a body that is not JSON: " + e.what());
  }
  if (config_.mode == Mode::Record) {
    {
      std::lock_guard lock(mutex_);
      cassette_["interactions"][key] = {{"endpoint", endpoint}, {"status", res.status}, {"body", res.body}};
    }
    save_cassette();
  }
  return parsed;
}

ChatResponse Gateway::chat(const ChatRequest& req) {
  bool has_part = false;
  for (const auto& m : req.messages) has_part = has_part || !m.parts.empty();
  if (!has_part) fail(Errc::InvalidArgument, "chat request has no parts");
  if (req.temperature < 0.0 || req.temperature > 2.0) fail(Errc::InvalidArgument, "temperature must be in [0, 2]");

  if (config_.mode == Mode::Mock) {
    ChatResponse out{mock_.chat(req), {}};
    out.usage.prompt_tokens = static_cast<int>(req.text_content().size() / 4);
    out.usage.completion_tokens = static_cast<int>(out.text.size() / 4);
    log_call("/v1/chat", req.task, text_hash(req), 1, 200);
    return out;
  }
  const json res = post_json("/v1/chat", req.wire(config_.model), req.task);
  ChatResponse out;
  try {
    out.text = res.at("text").get<std::string>();
    if (const auto u = res.find("usage"); u != res.end() && u->is_object()) {
      out.usage.prompt_tokens = u->value("prompt_tokens", 0);
      out.usage.completion_tokens = u->value("completion_tokens", 0);
    }
  } catch (const json::exception& e) {
    fail(Errc::GatewayTransport, std::string("malformed chat response: ") + e.what());
  }
  return out;
}

std::vector<Eigen::VectorXd> Gateway::embed(const std::vector<std::string>& texts) {
  if (texts.empty()) fail(Errc::InvalidArgument, "embed needs at least one text");
  std::vector<Eigen::VectorXd> out;
  if (config_.mode == Mode::Mock) {
    std::string joined;
    for (const auto& t : texts) {
      out.push_back(mock_.embed(t, config_.mock_embed_dim));
      joined += t;
      joined.push_back('\0');
    }
    log_call("/v1/embed", "embed", sha256_hex(joined), 1, 200);
    return out;
  }
  const json res = post_json("/v1/embed", {{"texts", texts}}, "embed");
  const auto& vectors = res.at("vectors");
  if (vectors.size() != texts.size()) fail(Errc::DimensionMismatch, "embed returned a different number of vectors");
  for (const auto& v : vectors) {
    const auto values = v.get<std::vector<double>>();
    if (!out.empty() && static_cast<Eigen::Index>(values.size()) != out.front().size()) {
      fail(Errc::DimensionMismatch, "embed returned vectors of mixed dimension");
    }
    Eigen::VectorXd vec = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
    const double norm = vec.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) fail(Errc::ZeroNormRow, "embed returned a zero or non-finite vector");
    out.push_back(vec / norm);
  }
  return out;
}

std::string Gateway::generate_image(const std::string& prompt, const std::optional<std::string>& base_image_png) {
  if (prompt.empty()) fail(Errc::InvalidArgument, "image generation needs a non-empty plan");
  if (config_.mode == Mode::Mock) {
    log_call("/v1/generate", "generate", sha256_hex(prompt), 1, 200);
    return mock_.generate(prompt);
  }
  json body = {{"prompt", prompt}};
  if (base_image_png) {
    const auto* data = reinterpret_cast<const std::uint8_t*>(base_image_png->data());
    body["image_b64"] = base64_encode({data, base_image_png->size()});
  }
  const json res = post_json("/v1/generate", body, "generate");
  const auto bytes = base64_decode(res.at("image_b64").get<std::string>());
  return {bytes.begin(), bytes.end()};
}

std::vector<CallRecord> Gateway::call_log() const {
  std::lock_guard lock(mutex_);
  return log_;
}

std::size_t Gateway::call_count(const std::string& endpoint) const {
  std::lock_guard lock(mutex_);
  if (endpoint.empty()) return log_.size();
  return static_cast<std::size_t>(
      std::count_if(log_.begin(), log_.end(), [&](const CallRecord& r) { return r.endpoint == endpoint; }));
}

std::size_t Gateway::call_count_for_task(const std::string& task) const {
  std::lock_guard lock(mutex_);
  return static_cast<std::size_t>(
      std::count_if(log_.begin(), log_.end(), [&](const CallRecord& r) { return r.task == task; }));
}

void Gateway::clear_log() {
  std::lock_guard lock(mutex_);
  log_.clear();
}

void Gateway::save_cassette() const {
  if (config_.mode != Mode::Record) return;
  std::lock_guard lock(mutex_);
  write_file_bytes(config_.cassette_path.string(), cassette_.dump(2) + "\n");
}

}  // namespace prism::gateway
