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

#include <deque>
#include <filesystem>

#include "prism/digest.hpp"
#include "prism/error.hpp"
#include "prism/gateway.hpp"
#include "prism/image.hpp"

namespace prism::gateway {
namespace {

class ScriptedTransport final : public Transport {
 public:
  std::deque<HttpResponse> replies;
  std::vector<std::string> paths;
  std::vector<std::string> bodies;
  std::vector<std::map<std::string, std::string>> headers;

  HttpResponse post(const std::string& path, const std::string& body,
                    const std::map<std::string, std::string>& h, double) override {
    paths.push_back(path);
    bodies.push_back(body);
    headers.push_back(h);
    if (replies.empty()) fail(Errc::GatewayTransport, "connection refused");
    HttpResponse r = replies.front();
    replies.pop_front();
    return r;
  }
};

GatewayConfig live_config() {
  GatewayConfig c;
  c.mode = Mode::Live;
  c.base_url = "http://gateway.invalid";
  c.api_key = "sk-secret-value";
  c.backoff_initial_s = 0.0;
  return c;
}

ChatRequest hello() {
  ChatRequest r;
  r.messages.push_back({"user", {Part::text("hello")}});
  r.task = "test";
  return r;
}

TEST(MockGateway, RegisteredTemplate) {
  Gateway gw(GatewayConfig{});
  gw.mock().register_template(text_hash(hello()), "hi there");
  EXPECT_EQ(gw.chat(hello()).text, "hi there");
  EXPECT_EQ(gw.call_count("/v1/chat"), 1u);
}

TEST(MockGateway, TaskHandlerAndCallIndices) {
  Gateway gw(GatewayConfig{});
  gw.mock().set_handler("test", [](const ChatRequest&) { return std::string("handled"); });
  EXPECT_EQ(gw.chat(hello()).text, "handled");
  EXPECT_EQ(gw.chat(hello()).text, "handled");
  const auto log = gw.call_log();
  ASSERT_EQ(log.size(), 2u);
  EXPECT_EQ(log[0].index, 0u);
  EXPECT_EQ(log[1].index, 1u);
  EXPECT_EQ(gw.call_count_for_task("test"), 2u);
}

TEST(MockGateway, EmbedIsDeterministicAndSeparates) {
  Gateway gw(GatewayConfig{});
  const auto a1 = gw.embed({"a"});
  const auto a2 = gw.embed({"a"});
  EXPECT_EQ(a1[0], a2[0]);
  EXPECT_NEAR(a1[0].norm(), 1.0, 1e-12);
  const auto ab = gw.embed({"a", "b"});
  EXPECT_LT(ab[0].dot(ab[1]), 1.0 - 1e-9);
  EXPECT_THROW(gw.embed({}), Error);
}

TEST(MockGateway, GenerateIsStablePlaceholder) {
  Gateway gw(GatewayConfig{});
  const std::string a = gw.generate_image("P");
  EXPECT_EQ(a, gw.generate_image("P"));
  const image::RgbImage img = image::decode(a, "mem");
  EXPECT_EQ(img.width, 64);
  EXPECT_EQ(img.height, 64);
  EXPECT_NE(a, gw.generate_image("Q"));
  EXPECT_THROW(gw.generate_image(""), Error);
}

TEST(LiveGateway, RetriesServerErrors) {
  auto transport = std::make_shared<ScriptedTransport>();
  transport->replies = {{500, "oops"}, {503, "busy"}, {200, R"({"text":"ok","usage":{"prompt_tokens":3}})"}};
  Gateway gw(live_config(), transport);
  const ChatResponse r = gw.chat(hello());
  EXPECT_EQ(r.text, "ok");
  EXPECT_EQ(r.usage.prompt_tokens, 3);
  EXPECT_EQ(transport->paths.size(), 3u);
  ASSERT_EQ(gw.call_log().size(), 1u);
  EXPECT_EQ(gw.call_log()[0].attempts, 3);
  EXPECT_EQ(transport->headers[0].at("Authorization"), "Bearer sk-secret-value");
  EXPECT_EQ(transport->bodies[0].find("sk-secret"), std::string::npos);
}

TEST(LiveGateway, ClientErrorIsNotRetried) {
  auto transport = std::make_shared<ScriptedTransport>();
  transport->replies = {{401, "denied"}, {200, R"({"text":"never"})"}};
  Gateway gw(live_config(), transport);
  try {
    gw.chat(hello());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::GatewayStatus);
    EXPECT_EQ(e.category(), ErrorCategory::Gateway);
  }
  EXPECT_EQ(transport->paths.size(), 1u);
}

TEST(LiveGateway, RetriesExhausted) {
  auto transport = std::make_shared<ScriptedTransport>();
  Gateway gw(live_config(), transport);
  EXPECT_THROW(gw.chat(hello()), Error);
  EXPECT_EQ(transport->paths.size(), 3u);
}

TEST(LiveGateway, EmbedRejectsMixedDimensions) {
  auto transport = std::make_shared<ScriptedTransport>();
  transport->replies = {{200, R"({"vectors":[[1,0],[0,1,0]]})"}};
  Gateway gw(live_config(), transport);
  try {
    gw.embed({"a", "b"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DimensionMismatch);
  }
}

TEST(Cassette, RecordThenReplay) {
  const auto path = std::filesystem::temp_directory_path() / "prism_cassette_test.json";
  std::filesystem::remove(path);
  const std::string png = image::encode_png(image::solid(2, 2, {1, 2, 3}));
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(png.data());
  {
    auto transport = std::make_shared<ScriptedTransport>();
    transport->replies = {{200, nlohmann::json{{"image_b64", base64_encode({bytes, png.size()})}}.dump()},
                          {200, R"({"text":"recorded"})"}};
    GatewayConfig c = live_config();
    c.mode = Mode::Record;
    c.cassette_path = path;
    Gateway gw(c, transport);
    EXPECT_EQ(gw.generate_image("plan"), png);
    EXPECT_EQ(gw.chat(hello()).text, "recorded");
  }
  const std::string cassette = read_file_bytes(path.string());
  EXPECT_EQ(cassette.find("sk-secret"), std::string::npos);

  auto untouched = std::make_shared<ScriptedTransport>();
  GatewayConfig c = live_config();
  c.mode = Mode::Replay;
  c.cassette_path = path;
  Gateway gw(c, untouched);
  EXPECT_EQ(gw.generate_image("plan"), png);
  EXPECT_EQ(gw.chat(hello()).text, "recorded");
  EXPECT_TRUE(untouched->paths.empty());
  ChatRequest other = hello();
  other.messages[0].parts[0].payload = "unseen";
  try {
    gw.chat(other);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::CassetteMiss);
  }
  std::filesystem::remove(path);
}

TEST(GatewayConfig, Validation) {
  GatewayConfig c;
  c.mode = Mode::Replay;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.timeout_s = 0;
  EXPECT_THROW(c.validate(), Error);
  EXPECT_THROW(parse_mode("offline"), Error);
  EXPECT_EQ(parse_mode("record"), Mode::Record);
}

TEST(ChatRequest, WireFormatOmitsLocalFields) {
  ChatRequest r = hello();
  r.meta["design_id"] = "d1";
  r.messages[0].parts.push_back(Part::image("AAAA"));
  const nlohmann::json w = r.wire("");
  EXPECT_FALSE(w.contains("task"));
  EXPECT_FALSE(w.contains("meta"));
  EXPECT_FALSE(w.contains("model"));
  EXPECT_EQ(w["messages"][0]["parts"][1]["kind"], "image");
  EXPECT_EQ(w["temperature"], 0.3);
}

}  // namespace
}  // namespace prism::gateway
