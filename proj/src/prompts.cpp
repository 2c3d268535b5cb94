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

#include "prism/prompts.hpp"

#include <regex>

#include "prism/digest.hpp"
#include "prism/error.hpp"

namespace prism {

PromptLibrary::PromptLibrary(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) fail(Errc::Config, "prompt directory " + dir.string() + " not found");
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() == ".txt") {
      templates_[entry.path().stem().string()] = read_file_bytes(entry.path().string());
    }
  }
  std::string all;
  for (const auto& [name, text] : templates_) all += name + '\0' + text + '\0';
  fingerprint_ = sha256_hex(all);
}

const PromptLibrary& PromptLibrary::standard() {
  static const PromptLibrary library(PRISM_PROMPTS_DIR);
  return library;
}

const std::string& PromptLibrary::raw(const std::string& name) const {
  const auto it = templates_.find(name);
  if (it == templates_.end()) fail(Errc::Config, "no prompt template named \"" + name + "\"");
  return it->second;
}

std::string PromptLibrary::render(const std::string& name, const std::map<std::string, std::string>& values) const {
  static const std::regex placeholder(R"(\{([a-z_]+)\})");
  const std::string& text = raw(name);
  std::string out;
  auto last = text.cbegin();
  for (std::sregex_iterator it(text.begin(), text.end(), placeholder), end; it != end; ++it) {
    const auto value = values.find((*it)[1].str());
    if (value == values.end()) {
      fail(Errc::Config, "prompt \"" + name + "\" needs a value for {" + (*it)[1].str() + "}");
    }
    out.append(last, (*it)[0].first);
    out += value->second;
    last = (*it)[0].second;
  }
  out.append(last, text.cend());
  return out;
}

}  // namespace prism
