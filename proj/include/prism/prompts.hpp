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

#include <filesystem>
#include <map>
#include <string>

namespace prism {

/// Named prompt templates read from a directory of <name>.txt files.
/// Placeholders are {lowercase_name}; other braces are left alone.
class PromptLibrary {
 public:
  explicit PromptLibrary(const std::filesystem::path& dir);

  /// Templates shipped with the source tree.
  static const PromptLibrary& standard();

  /// Throws Config if the template is unknown or a placeholder has no value.
  std::string render(const std::string& name, const std::map<std::string, std::string>& values) const;
  const std::string& raw(const std::string& name) const;

  /// Digest over all template names and texts.
  const std::string& fingerprint() const { return fingerprint_; }

 private:
  std::map<std::string, std::string> templates_;
  std::string fingerprint_;
};

}  // namespace prism
