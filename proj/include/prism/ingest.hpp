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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "prism/image.hpp"

namespace prism::ingest {

struct DesignRecord {
  std::string id;
  std::string title;
  std::vector<std::string> style_tags;  // lowercase
  std::string image_path;
  std::string embedding_path;
  std::int64_t width_px = 0;
  std::int64_t height_px = 0;
  std::optional<std::uint64_t> phash;

  std::int64_t area() const { return width_px * height_px; }
  bool has_style(const std::string& style) const;
};

struct DesignCatalog {
  std::vector<DesignRecord> records;
  std::string source;

  const DesignRecord* find(const std::string& id) const;
};

struct StyleCollection {
  std::string style;
  std::vector<DesignRecord> members;
  int min_count = 0;
};

/// P x D patch matrix with unit-norm rows.
struct PatchEmbeddings {
  std::string design_id;
  Eigen::MatrixXd matrix;

  Eigen::Index patch_count() const { return matrix.rows(); }
  Eigen::Index dim() const { return matrix.cols(); }
};

/// JSON-lines manifest, one design per line. Blank lines are skipped.
DesignCatalog load_manifest(const std::filesystem::path& path);
DesignCatalog parse_manifest(std::istream& in, const std::string& source);

/// Keeps the largest design per exact title, then the largest per group of
/// near-identical perceptual hashes (Hamming distance < phash_threshold,
/// grouped by transitive closure). Area ties go to the smallest id.
/// Survivors keep their input order.
DesignCatalog dedup_catalog(const DesignCatalog& catalog, int phash_threshold = 10);

/// 64-bit average hash: 8x8 area-averaged grayscale, one bit per cell that is
/// strictly brighter than the mean of all cells, row-major, MSB first.
std::uint64_t compute_phash(const image::GrayImage& img);
std::uint64_t compute_phash(const image::RgbImage& img);

int hamming_distance(std::uint64_t a, std::uint64_t b);

/// One lowercase style per line; blank lines and '#' comments ignored.
std::vector<std::string> load_allowlist(const std::filesystem::path& path);

StyleCollection collect_style(const DesignCatalog& catalog, const std::string& style, int min_count,
                              const std::vector<std::string>& allowlist);

/// Reads a PEB1 bundle and re-normalizes each row to unit length.
PatchEmbeddings read_embedding_bundle(const std::filesystem::path& path, const std::string& design_id = {});
PatchEmbeddings decode_embedding_bundle(std::string_view bytes, const std::string& source,
                                        const std::string& design_id);
void write_embedding_bundle(const std::filesystem::path& path, const Eigen::MatrixXd& matrix);

}  // namespace prism::ingest
