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

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "prism/error.hpp"

namespace prism::gateway {
namespace {

class HttpLibTransport final : public Transport {
 public:
  explicit HttpLibTransport(const std::string& base_url) : client_(base_url) {}

  HttpResponse post(const std::string& path, const std::string& body,
                    const std::map<std::string, std::string>& headers, double timeout_s) override {
    const auto whole = static_cast<time_t>(timeout_s);
    const auto micros = static_cast<time_t>((timeout_s - static_cast<double>(whole)) * 1e6);
    client_.set_connection_timeout(whole, micros);
    client_.set_read_timeout(whole, micros);
    client_.set_write_timeout(whole, micros);
    httplib::Headers h(headers.begin(), headers.end());
    auto res = client_.Post(path, h, body, "application/json");
    if (!res) {
      const auto err = res.error();
      if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
        fail(Errc::GatewayTimeout, "POST " + path + " timed out: " + httplib::to_string(err));
      }
      fail(Errc::GatewayTransport, "POST " + path + " failed: " + httplib::to_string(err));
    }
    return {res->status, res->body};
  }

 private:
  httplib::Client client_;
};

}  // namespace

std::unique_ptr<Transport> make_http_transport(const std::string& base_url) {
  return std::make_unique<HttpLibTransport>(base_url);
}

}  // namespace prism::gateway
