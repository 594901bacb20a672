// Copyright 2026 The CDI Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Canonical byte encoding shared by every signed structure.
//
// A structure is the concatenation of its fields in declaration order. Each
// field is a 4-byte big-endian length followed by the value bytes; a nested
// structure is a field whose value is the nested encoding. A list is a 4-byte
// big-endian element count followed by each element encoded as a field.
// Integers are 8-byte big-endian values, optionals are lists of zero or one
// element, and string maps are lists of (key, value) pair structures in
// ascending key order.

#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <string_view>

#include "cdi/bytes.hpp"
#include "cdi/error.hpp"

namespace cdi {

class Encoder {
 public:
  Encoder& Field(ByteView value) {
    PutU32(CheckedLength(value.size()));
    out_.insert(out_.end(), value.begin(), value.end());
    return *this;
  }

  Encoder& Field(std::string_view value) {
    return Field(ByteView(reinterpret_cast<const std::uint8_t*>(value.data()),
                          value.size()));
  }

  Encoder& U64(std::uint64_t value) {
    std::uint8_t buf[8];
    for (int i = 7; i >= 0; --i) {
      buf[i] = static_cast<std::uint8_t>(value & 0xff);
      value >>= 8;
    }
    return Field(ByteView(buf, 8));
  }

  // Appends a list: element count, then each element as a field.
  template <typename Range, typename EncodeFn>
  Encoder& List(const Range& items, EncodeFn&& encode_item) {
    PutU32(CheckedLength(static_cast<std::size_t>(std::size(items))));
    for (const auto& item : items) Field(encode_item(item));
    return *this;
  }

  Encoder& StringList(const auto& items) {
    PutU32(CheckedLength(static_cast<std::size_t>(std::size(items))));
    for (const auto& item : items) Field(std::string_view(item));
    return *this;
  }

  Encoder& StringMap(const std::map<std::string, std::string>& items) {
    return List(items, [](const auto& kv) {
      return Encoder().Field(kv.first).Field(kv.second).Take();
    });
  }

  Bytes Take() { return std::move(out_); }

 private:
  static std::uint32_t CheckedLength(std::size_t n) {
    if (n > std::numeric_limits<std::uint32_t>::max()) {
      throw Error(ErrorCode::kInvalidArgument, "field exceeds 4 GiB");
    }
    return static_cast<std::uint32_t>(n);
  }

  void PutU32(std::uint32_t v) {
    out_.push_back(static_cast<std::uint8_t>(v >> 24));
    out_.push_back(static_cast<std::uint8_t>(v >> 16));
    out_.push_back(static_cast<std::uint8_t>(v >> 8));
    out_.push_back(static_cast<std::uint8_t>(v));
  }

  Bytes out_;
};

// Reads the layout written by Encoder. Every method throws
// Error(kMalformed) on truncated or trailing input.
class Decoder {
 public:
  explicit Decoder(ByteView data) : data_(data) {}

  ByteView Field() {
    std::uint32_t len = GetU32();
    if (len > data_.size() - pos_) Fail("field length past end of input");
    ByteView out = data_.subspan(pos_, len);
    pos_ += len;
    return out;
  }

  Bytes FieldBytes() {
    ByteView f = Field();
    return Bytes(f.begin(), f.end());
  }

  std::string String() { return ToString(Field()); }

  std::uint64_t U64() {
    ByteView f = Field();
    if (f.size() != 8) Fail("integer field is not 8 bytes");
    std::uint64_t v = 0;
    for (std::uint8_t b : f) v = (v << 8) | b;
    return v;
  }

  std::uint32_t Count() {
    std::uint32_t n = GetU32();
    // Each element needs at least its 4-byte length prefix.
    if (n > (data_.size() - pos_) / 4) Fail("list count past end of input");
    return n;
  }

  std::vector<std::string> StringList() {
    std::uint32_t n = Count();
    std::vector<std::string> out;
    out.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) out.push_back(String());
    return out;
  }

  std::map<std::string, std::string> StringMap() {
    std::uint32_t n = Count();
    std::map<std::string, std::string> out;
    const std::string* prev = nullptr;
    for (std::uint32_t i = 0; i < n; ++i) {
      Decoder pair(Field());
      std::string key = pair.String();
      std::string value = pair.String();
      pair.ExpectEnd();
      if (prev != nullptr && !(*prev < key)) Fail("map keys not ascending");
      auto [it, inserted] = out.emplace(std::move(key), std::move(value));
      prev = &it->first;
    }
    return out;
  }

  bool AtEnd() const { return pos_ == data_.size(); }

  void ExpectEnd() const {
    if (!AtEnd()) Fail("trailing bytes after structure");
  }

 private:
  [[noreturn]] static void Fail(const char* what) {
    throw Error(ErrorCode::kMalformed, what);
  }

  std::uint32_t GetU32() {
    if (data_.size() - pos_ < 4) Fail("truncated length prefix");
    std::uint32_t v = (std::uint32_t{data_[pos_]} << 24) |
                      (std::uint32_t{data_[pos_ + 1]} << 16) |
                      (std::uint32_t{data_[pos_ + 2]} << 8) |
                      std::uint32_t{data_[pos_ + 3]};
    pos_ += 4;
    return v;
  }

  ByteView data_;
  std::size_t pos_ = 0;
};

// Per-type decoders specialize this. Each specialization consumes the whole
// input and rejects trailing bytes.
template <typename T>
T CanonicalDecode(ByteView data);

}  // namespace cdi
