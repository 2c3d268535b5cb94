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

#include "prism/ingest.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "prism/binary_io.hpp"
#include "prism/digest.hpp"
#include "prism/error.hpp"

namespace prism::ingest {
namespace {

using nlohmann::json;

std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

DesignRecord parse_record(const json& j) {
  DesignRecord r;
  r.id = j.at("id").get<std::string>();
  r.title = j.at("title").get<std::string>();
  for (const auto& tag : j.at("style_tags")) r.style_tags.push_back(to_lower(tag.get<std::string>()));
  r.image_path = j.at("image_path").get<std::string>();
  r.embedding_path = j.at("embedding_path").get<std::string>();
  r.width_px = j.at("width_px").get<std::int64_t>();
  r.height_px = j.at("height_px").get<std::int64_t>();
  if (r.id.empty()) throw std::invalid_argument("empty id");
  if (r.width_px <= 0 || r.height_px <= 0) throw std::invalid_argument("width_px and height_px must be > 0");
  if (auto it = j.find("phash"); it != j.end() && it->is_string()) {
    r.phash = std::stoull(it->get<std::string>(), nullptr, 16);
  }
  return r;
}

// The record that survives within a duplicate group.
bool better(const DesignRecord& a, const DesignRecord& b) {
  if (a.area() != b.area()) return a.area() > b.area();
  return a.id < b.id;
}

struct DisjointSets {
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  std::vector<std::size_t> parent;
};

}  // namespace

bool DesignRecord::has_style(const std::string& style) const {
  return std::find(style_tags.begin(), style_tags.end(), style) != style_tags.end();
}

const DesignRecord* DesignCatalog::find(const std::string& id) const {
  for (const auto& r : records) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

DesignCatalog parse_manifest(std::istream& in, const std::string& source) {
  DesignCatalog catalog;
  catalog.source = source;
  std::unordered_set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    DesignRecord record;
    try {
      record = parse_record(json::parse(line));
    } catch (const std::exception& e) {
      fail(Errc::MalformedManifest, source + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!seen.insert(record.id).second) {
      fail(Errc::DuplicateId, source + ":" + std::to_string(line_no) + ": duplicate id \"" + record.id + "\"");
    }
    catalog.records.push_back(std::move(record));
  }
  return catalog;
}

DesignCatalog load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::Io, "cannot open manifest " + path.string());
  return parse_manifest(in, path.string());
}

DesignCatalog dedup_catalog(const DesignCatalog& catalog, int phash_threshold) {
  if (phash_threshold < 0) fail(Errc::InvalidArgument, "phash_threshold must be >= 0");
  const auto& recs = catalog.records;
  for (const auto& r : recs) {
    if (!r.phash) fail(Errc::MissingPhash, "record \"" + r.id + "\" has no perceptual hash");
  }

  // Stage 1: best record per exact title.
  std::map<std::string, std::size_t> best_by_title;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    auto [it, inserted] = best_by_title.emplace(recs[i].title, i);
    if (!inserted && better(recs[i], recs[it->second])) it->second = i;
  }
  std::vector<std::size_t> stage1;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    if (best_by_title.at(recs[i].title) == i) stage1.push_back(i);
  }

  // Stage 2: connected components of the "hash distance < threshold" relation.
  DisjointSets sets(stage1.size());
  for (std::size_t a = 0; a < stage1.size(); ++a) {
    for (std::size_t b = a + 1; b < stage1.size(); ++b) {
      if (hamming_distance(*recs[stage1[a]].phash, *recs[stage1[b]].phash) < phash_threshold) sets.unite(a, b);
    }
  }
  std::map<std::size_t, std::size_t> best_by_group;
  for (std::size_t a = 0; a < stage1.size(); ++a) {
    auto [it, inserted] = best_by_group.emplace(sets.find(a), a);
    if (!inserted && better(recs[stage1[a]], recs[stage1[it->second]])) it->second = a;
  }

  DesignCatalog out;
  out.source = catalog.source;
  for (std::size_t a = 0; a < stage1.size(); ++a) {
    if (best_by_group.at(sets.find(a)) == a) out.records.push_back(recs[stage1[a]]);
  }
  return out;
}

std::uint64_t compute_phash(const image::GrayImage& img) {
  if (img.empty()) fail(Errc::EmptyImage, "cannot hash an empty image");
  const image::GrayImage cells = image::box_resample(img, 8, 8);
  const double mean = std::accumulate(cells.pixels.begin(), cells.pixels.end(), 0.0) / 64.0;
  std::uint64_t hash = 0;
  for (double v : cells.pixels) hash = (hash << 1) | (v > mean ? 1u : 0u);
  return hash;
}

std::uint64_t compute_phash(const image::RgbImage& img) {
  if (img.empty()) fail(Errc::EmptyImage, "cannot hash an empty image");
  return compute_phash(image::to_gray(img));
}

int hamming_distance(std::uint64_t a, std::uint64_t b) { return std::popcount(a ^ b); }

std::vector<std::string> load_allowlist(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::Io, "cannot open style allowlist " + path.string());
  std::vector<std::string> styles;
  std::set<std::string> seen;
  std::string line;
  while (std::getline(in, line)) {
    line = to_lower(trim(line));
    if (line.empty() || line[0] == '#') continue;
    if (seen.insert(line).second) styles.push_back(line);
  }
  return styles;
}

StyleCollection collect_style(const DesignCatalog& catalog, const std::string& style, int min_count,
                              const std::vector<std::string>& allowlist) {
  if (std::find(allowlist.begin(), allowlist.end(), style) == allowlist.end()) {
    fail(Errc::UnknownStyle, "style \"" + style + "\" is not in the allowlist");
  }
  StyleCollection out;
  out.style = style;
  out.min_count = min_count;
  for (const auto& r : catalog.records) {
    if (r.has_style(style)) out.members.push_back(r);
  }
  if (static_cast<int>(out.members.size()) < min_count) {
    fail(Errc::InsufficientData, "style \"" + style + "\" has " + std::to_string(out.members.size()) +
                                     " designs, at least " + std::to_string(min_count) + " required");
  }
  return out;
}

PatchEmbeddings decode_embedding_bundle(std::string_view bytes, const std::string& source,
                                        const std::string& design_id) {
  const io::RawMatrix raw = io::decode_peb1(bytes, source);
  PatchEmbeddings emb;
  emb.design_id = design_id;
  emb.matrix.resize(raw.rows, raw.cols);
  for (std::uint32_t p = 0; p < raw.rows; ++p) {
    for (std::uint32_t d = 0; d < raw.cols; ++d) {
      const float v = raw.values[static_cast<std::size_t>(p) * raw.cols + d];
      if (!std::isfinite(v)) {
        fail(Errc::NonFiniteValue, source + ": non-finite value at row " + std::to_string(p) + ", column " +
                                       std::to_string(d));
      }
      emb.matrix(p, d) = v;
    }
    const double norm = emb.matrix.row(p).norm();
    if (!(norm > 0.0)) fail(Errc::ZeroNormRow, source + ": row " + std::to_string(p) + " has zero norm");
    emb.matrix.row(p) /= norm;
  }
  return emb;
}

PatchEmbeddings read_embedding_bundle(const std::filesystem::path& path, const std::string& design_id) {
  std::string bytes;
  try {
    bytes = read_file_bytes(path.string());
  } catch (const Error&) {
    fail(Errc::MissingEmbedding,
         (design_id.empty() ? std::string() : "design \"" + design_id + "\": ") + "cannot read " + path.string());
  }
  return decode_embedding_bundle(bytes, path.string(), design_id);
}

void write_embedding_bundle(const std::filesystem::path& path, const Eigen::MatrixXd& matrix) {
  io::RawMatrix raw;
  raw.rows = static_cast<std::uint32_t>(matrix.rows());
  raw.cols = static_cast<std::uint32_t>(matrix.cols());
  raw.values.reserve(static_cast<std::size_t>(matrix.size()));
  for (Eigen::Index p = 0; p < matrix.rows(); ++p) {
    for (Eigen::Index d = 0; d < matrix.cols(); ++d) raw.values.push_back(static_cast<float>(matrix(p, d)));
  }
  write_file_bytes(path.string(), io::encode_peb1(raw));
}

}  // namespace prism::ingest
