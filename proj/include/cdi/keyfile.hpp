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

// Key files: line 1 is the algorithm identifier, line 2 the base64 key
// material (32-byte scalar for signing keys, 65-byte SEC1 point for
// verifying keys).

#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "cdi/bytes.hpp"
#include "cdi/crypto.hpp"
#include "cdi/error.hpp"

namespace cdi {

inline std::string ReadTextFile(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) {
    throw Error(ErrorCode::kFileNotFound, path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kFileUnreadable, path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::kFileUnreadable, path.string());
  return ss.str();
}

inline void WriteTextFile(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.close();
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
}

namespace detail {

inline std::pair<std::string, Bytes> ParseKeyText(std::string_view text,
                                                  const std::string& origin) {
  auto nl = text.find('\n');
  if (nl == std::string_view::npos) {
    throw Error(ErrorCode::kMalformed, origin + ": expected two lines");
  }
  std::string_view alg = text.substr(0, nl);
  std::string_view rest = text.substr(nl + 1);
  if (rest.ends_with('\n')) rest.remove_suffix(1);
  if (std::count(rest.begin(), rest.end(), '\n') != 0) {
    throw Error(ErrorCode::kMalformed, origin + ": expected two lines");
  }
  auto material = Base64Decode(rest);
  if (!material) throw Error(ErrorCode::kMalformed, origin + ": bad base64");
  return {std::string(alg), std::move(*material)};
}

}  // namespace detail

inline std::string FormatKeyFile(std::string_view algorithm, ByteView material) {
  return std::string(algorithm) + "\n" + Base64Encode(material) + "\n";
}

inline void WriteSigningKeyFile(const std::filesystem::path& path, const SigningKey& key) {
  WriteTextFile(path, FormatKeyFile(key.algorithm(), key.material()));
  std::filesystem::permissions(path, std::filesystem::perms::owner_read |
                                         std::filesystem::perms::owner_write);
}

inline void WriteVerifyingKeyFile(const std::filesystem::path& path,
                                  const VerifyingKey& key) {
  WriteTextFile(path, FormatKeyFile(key.algorithm(), key.material()));
}

inline SigningKey ReadSigningKeyFile(const std::filesystem::path& path) {
  auto [alg, material] = detail::ParseKeyText(ReadTextFile(path), path.string());
  return SigningKey::FromMaterial(alg, std::move(material));
}

inline VerifyingKey ReadVerifyingKeyFile(const std::filesystem::path& path) {
  auto [alg, material] = detail::ParseKeyText(ReadTextFile(path), path.string());
  return VerifyingKey::FromMaterial(alg, std::move(material));
}

}  // namespace cdi
