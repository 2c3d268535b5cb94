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

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace prism::gateway {

enum class Mode { Live, Mock, Record, Replay };

Mode parse_mode(const std::string& s);
std::string mode_name(Mode m);

struct GatewayConfig {
  std::string base_url;
  std::string api_key;  // never logged or serialized
  std::string model;    // forwarded as-is when set
  double timeout_s = 120.0;
  int max_retries = 2;
  double backoff_initial_s = 0.5;
  int max_in_flight = 4;
  Mode mode = Mode::Mock;
  std::filesystem::path cassette_path;
  int mock_embed_dim = 64;

  /// Overrides base_url, api_key and mode from PRISM_GATEWAY_URL,
  /// PRISM_GATEWAY_KEY and PRISM_GATEWAY_MODE when they are set.
  void apply_env();
  void validate() const;
};

struct Part {
  enum class Kind { Text, Image };
  Kind kind = Kind::Text;
  std::string payload;  // text, or base64 PNG

  static Part text(std::string s) { return {Kind::Text, std::move(s)}; }
  static Part image(std::string b64) { return {Kind::Image, std::move(b64)}; }
};

struct Message {
  std::string role;
  std::vector<Part> parts;
};

struct ChatRequest {
  std::vector<Message> messages;
  double temperature = 0.3;
  int max_tokens = 2048;
  // Local routing label and metadata; not sent over the wire.
  std::string task;
  std::map<std::string, std::string> meta;

  nlohmann::json wire(const std::string& model) const;
  /// Concatenated text parts, each NUL-terminated.
  std::string text_content() const;
};

struct Usage {
  int prompt_tokens = 0;
  int completion_tokens = 0;
};

struct ChatResponse {
  std::string text;
  Usage usage;
};

/// Stable key of a request's text parts; mock templates are registered by it.
std::string text_hash(const ChatRequest& req);

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// One HTTP POST. Implementations throw Error(GatewayTransport) or
/// Error(GatewayTimeout) when no response arrives.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const std::string& path, const std::string& body,
                            const std::map<std::string, std::string>& headers, double timeout_s) = 0;
};

std::unique_ptr<Transport> make_http_transport(const std::string& base_url);

using ChatHandler = std::function<std::string(const ChatRequest&)>;

/// Deterministic stand-in for the remote models.
class MockBackend {
 public:
  MockBackend();

  void register_template(const std::string& text_hash, std::string response);
  void set_handler(const std::string& task, ChatHandler handler);
  void clear_handler(const std::string& task);

  std::string chat(const ChatRequest& req) const;
  Eigen::VectorXd embed(const std::string& text, int dim) const;
  std::string generate(const std::string& prompt) const;

 private:
  std::map<std::string, std::string> templates_;
  std::map<std::string, ChatHandler> handlers_;
  std::map<std::string, ChatHandler> defaults_;
};

struct CallRecord {
  std::uint64_t index = 0;
  std::string endpoint;
  std::string task;
  std::string request_hash;
  int attempts = 0;
  int status = 0;
};

class Gateway {
 public:
  explicit Gateway(GatewayConfig config, std::shared_ptr<Transport> transport = nullptr);
  ~Gateway();

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  ChatResponse chat(const ChatRequest& req);
  /// One unit vector per text, normalized client-side.
  std::vector<Eigen::VectorXd> embed(const std::vector<std::string>& texts);
  /// PNG bytes.
  std::string generate_image(const std::string& prompt, const std::optional<std::string>& base_image_png = {});

  MockBackend& mock() { return mock_; }
  const GatewayConfig& config() const { return config_; }

  std::vector<CallRecord> call_log() const;
  std::size_t call_count(const std::string& endpoint = {}) const;
  std::size_t call_count_for_task(const std::string& task) const;
  void clear_log();

  /// Writes recorded interactions; also done after each recorded call.
  void save_cassette() const;

 private:
  nlohmann::json post_json(const std::string& endpoint, const nlohmann::json& body, const std::string& task);
  HttpResponse send_with_retry(const std::string& endpoint, const std::string& body, int& attempts);
  void log_call(const std::string& endpoint, const std::string& task, const std::string& hash, int attempts,
                int status);

  GatewayConfig config_;
  std::shared_ptr<Transport> transport_;
  MockBackend mock_;
  std::counting_semaphore<1024> in_flight_;
  mutable std::mutex mutex_;
  std::vector<CallRecord> log_;
  nlohmann::json cassette_;
};

}  // namespace prism::gateway
