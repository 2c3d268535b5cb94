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

#include "prism/binary_io.hpp"

#include <bit>

#include "prism/error.hpp"

namespace prism::io {

void ByteWriter::magic(std::string_view four_cc) { buf_.append(four_cc.substr(0, 4)); }

void ByteWriter::u32(std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) buf_.push_back(static_cast<char>((v >> shift) & 0xFF));
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void ByteWriter::cstr(std::string_view s) {
  buf_.append(s);
  buf_.push_back('\0');
}

void ByteReader::need(std::size_t n) const {
  if (remaining() < n) {
    fail(Errc::TruncatedFile, source_ + ": needs " + std::to_string(n) + " more bytes at offset " +
                                  std::to_string(pos_) + ", " + std::to_string(remaining()) +
                                  " available");
  }
}

void ByteReader::expect_magic(std::string_view four_cc) {
  if (remaining() < 4 || bytes_.substr(pos_, 4) != four_cc) {
    fail(Errc::BadMagic, source_ + ": expected magic \"" + std::string(four_cc) + "\"");
  }
  pos_ += 4;
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
  }
  pos_ += 4;
  return v;
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }

std::string ByteReader::cstr() {
  const auto end = bytes_.find('\0', pos_);
  if (end == std::string_view::npos) {
    fail(Errc::TruncatedFile, source_ + ": unterminated string at offset " + std::to_string(pos_));
  }
  std::string out(bytes_.substr(pos_, end - pos_));
  pos_ = end + 1;
  return out;
}

void ByteReader::expect_end() const {
  if (remaining() != 0) {
    fail(Errc::TrailingData, source_ + ": " + std::to_string(remaining()) + " unexpected trailing bytes");
  }
}

std::string encode_peb1(const RawMatrix& m) {
  if (m.values.size() != static_cast<std::size_t>(m.rows) * m.cols) {
    fail(Errc::InvalidArgument, "matrix payload does not match its shape");
  }
  ByteWriter w;
  w.magic("PEB1");
  w.u32(m.rows);
  w.u32(m.cols);
  for (float v : m.values) w.f32(v);
  return std::move(w).bytes();
}

RawMatrix decode_peb1(std::string_view bytes, const std::string& source) {
  ByteReader r(bytes, source);
  r.expect_magic("PEB1");
  RawMatrix m;
  m.rows = r.u32();
  m.cols = r.u32();
  if (m.rows == 0 || m.cols == 0) {
    fail(Errc::BadHeader, source + ": zero dimension in header (" + std::to_string(m.rows) + "x" +
                              std::to_string(m.cols) + ")");
  }
  const std::size_t count = static_cast<std::size_t>(m.rows) * m.cols;
  r.need(count * 4);
  m.values.resize(count);
  for (auto& v : m.values) v = r.f32();
  r.expect_end();
  return m;
}

}  // namespace prism::io
