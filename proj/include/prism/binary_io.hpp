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

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace prism::io {

/// Appends little-endian primitives to a byte string.
class ByteWriter {
 public:
  void magic(std::string_view four_cc);
  void u32(std::uint32_t v);
  void f32(float v);
  void cstr(std::string_view s);  // bytes followed by a NUL terminator

  const std::string& bytes() const& { return buf_; }
  std::string bytes() && { return std::move(buf_); }

 private:
  std::string buf_;
};

/// Bounds-checked little-endian reader; throws TruncatedFile on overrun.
class ByteReader {
 public:
  ByteReader(std::string_view bytes, std::string source)
      : bytes_(bytes), source_(std::move(source)) {}

  void expect_magic(std::string_view four_cc);
  std::uint32_t u32();
  float f32();
  std::string cstr();
  /// Throws TruncatedFile unless `n` more bytes are available.
  void need(std::size_t n) const;
  std::size_t remaining() const { return bytes_.size() - pos_; }
  /// Throws TrailingData if unread bytes remain.
  void expect_end() const;

 private:
  std::string_view bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

/// Row-major float32 matrix as stored in PEB1 files.
struct RawMatrix {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<float> values;
};

// PEB1: "PEB1", u32 rows, u32 cols, rows*cols f32, all little-endian.
std::string encode_peb1(const RawMatrix& m);
RawMatrix decode_peb1(std::string_view bytes, const std::string& source);

}  // namespace prism::io
