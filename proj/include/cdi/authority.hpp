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

// Vetting-authority hierarchy: root-first signature chains and tool
// certifications issued by the authority at the tail of a chain.

#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cdi/crypto.hpp"
#include "cdi/encoding.hpp"
#include "cdi/error.hpp"

namespace cdi {

inline constexpr std::size_t kMaxChainDepth = 16;

struct ToolDescriptor {
  std::string name;
  std::string version;
  // Tool owner's release signing key. Signed but not used for verification.
  Digest release_key_id;
  VerifyingKey report_verifying_key;

  friend bool operator==(const ToolDescriptor&, const ToolDescriptor&) = default;
};

inline Bytes CanonicalEncode(const ToolDescriptor& t) {
  if (t.name.empty() || t.version.empty()) {
    throw Error(ErrorCode::kIncomplete, "tool name and version are required");
  }
  return Encoder()
      .Field(t.name)
      .Field(t.version)
      .Field(CanonicalEncode(t.release_key_id))
      .Field(CanonicalEncode(t.report_verifying_key))
      .Take();
}

template <>
inline ToolDescriptor CanonicalDecode<ToolDescriptor>(ByteView data) {
  Decoder dec(data);
  std::string name = dec.String();
  std::string version = dec.String();
  Digest release = CanonicalDecode<Digest>(dec.Field());
  VerifyingKey key = CanonicalDecode<VerifyingKey>(dec.Field());
  dec.ExpectEnd();
  if (name.empty() || version.empty()) {
    throw Error(ErrorCode::kMalformed, "empty tool name or version");
  }
  return ToolDescriptor{std::move(name), std::move(version), release,
                        std::move(key)};
}

// Sorted, de-duplicated, non-empty set of property names such as
// WASM_SANDBOXING.
class PropertySet {
 public:
  static bool IsValidName(std::string_view p) {
    if (p.empty() || !(p[0] >= 'A' && p[0] <= 'Z')) return false;
    return std::all_of(p.begin(), p.end(), [](char c) {
      return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
    });
  }

  static PropertySet Make(std::vector<std::string> properties) {
    if (properties.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "property set is empty");
    }
    for (const auto& p : properties) {
      if (!IsValidName(p)) {
        throw Error(ErrorCode::kInvalidArgument, "invalid property name '" + p + "'");
      }
    }
    std::sort(properties.begin(), properties.end());
    if (std::adjacent_find(properties.begin(), properties.end()) != properties.end()) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate property");
    }
    return PropertySet(std::move(properties));
  }

  const std::vector<std::string>& values() const { return properties_; }

  bool Contains(std::string_view p) const {
    return std::binary_search(properties_.begin(), properties_.end(), p);
  }

  friend bool operator==(const PropertySet&, const PropertySet&) = default;

 private:
  explicit PropertySet(std::vector<std::string> p) : properties_(std::move(p)) {}
  std::vector<std::string> properties_;
};

inline Bytes CanonicalEncode(const PropertySet& p) {
  return Encoder().StringList(p.values()).Take();
}

template <>
inline PropertySet CanonicalDecode<PropertySet>(ByteView data) {
  Decoder dec(data);
  std::vector<std::string> values = dec.StringList();
  dec.ExpectEnd();
  if (!std::is_sorted(values.begin(), values.end())) {
    throw Error(ErrorCode::kMalformed, "property set not sorted");
  }
  try {
    return PropertySet::Make(std::move(values));
  } catch (const Error& e) {
    throw Error(ErrorCode::kMalformed, e.what());
  }
}

struct ChainLink {
  VerifyingKey key;
  // Link 0: the root's self-signature. Link i > 0: signature by link i-1's
  // key over LinkPayload(key, link i-1).
  Signature signature;

  friend bool operator==(const ChainLink&, const ChainLink&) = default;
};

inline Bytes CanonicalEncode(const ChainLink& l) {
  return Encoder()
      .Field(CanonicalEncode(l.key))
      .Field(CanonicalEncode(l.signature))
      .Take();
}

template <>
inline ChainLink CanonicalDecode<ChainLink>(ByteView data) {
  Decoder dec(data);
  VerifyingKey key = CanonicalDecode<VerifyingKey>(dec.Field());
  Signature sig = CanonicalDecode<Signature>(dec.Field());
  dec.ExpectEnd();
  return ChainLink{std::move(key), std::move(sig)};
}

// Bytes signed for a link: the child key followed by the previous link
// (absent for the root).
inline Bytes LinkPayload(const VerifyingKey& child, const ChainLink* previous) {
  Encoder enc;
  enc.Field(CanonicalEncode(child));
  std::vector<Bytes> prev;
  if (previous != nullptr) prev.push_back(CanonicalEncode(*previous));
  enc.List(prev, [](const Bytes& b) { return b; });
  return enc.Take();
}

struct AuthorityChain {
  std::vector<ChainLink> links;  // root first

  const VerifyingKey& root_key() const { return links.front().key; }
  const VerifyingKey& tail_key() const { return links.back().key; }

  friend bool operator==(const AuthorityChain&, const AuthorityChain&) = default;
};

inline Bytes CanonicalEncode(const AuthorityChain& c) {
  if (c.links.empty()) throw Error(ErrorCode::kIncomplete, "empty authority chain");
  return Encoder()
      .List(c.links, [](const ChainLink& l) { return CanonicalEncode(l); })
      .Take();
}

template <>
inline AuthorityChain CanonicalDecode<AuthorityChain>(ByteView data) {
  Decoder dec(data);
  std::uint32_t n = dec.Count();
  if (n == 0) throw Error(ErrorCode::kMalformed, "empty authority chain");
  AuthorityChain chain;
  for (std::uint32_t i = 0; i < n; ++i) {
    chain.links.push_back(CanonicalDecode<ChainLink>(dec.Field()));
  }
  dec.ExpectEnd();
  return chain;
}

struct ToolCertification {
  ToolDescriptor tool;
  PropertySet properties;
  AuthorityChain authority_chain;
  Signature authority_signature;

  friend bool operator==(const ToolCertification&, const ToolCertification&) = default;
};

inline Bytes CertificationPayload(const ToolDescriptor& tool,
                                  const PropertySet& properties) {
  return Encoder()
      .Field(CanonicalEncode(tool))
      .Field(CanonicalEncode(properties))
      .Take();
}

inline Bytes CanonicalEncode(const ToolCertification& c) {
  return Encoder()
      .Field(CanonicalEncode(c.tool))
      .Field(CanonicalEncode(c.properties))
      .Field(CanonicalEncode(c.authority_chain))
      .Field(CanonicalEncode(c.authority_signature))
      .Take();
}

template <>
inline ToolCertification CanonicalDecode<ToolCertification>(ByteView data) {
  Decoder dec(data);
  ToolDescriptor tool = CanonicalDecode<ToolDescriptor>(dec.Field());
  PropertySet props = CanonicalDecode<PropertySet>(dec.Field());
  AuthorityChain chain = CanonicalDecode<AuthorityChain>(dec.Field());
  Signature sig = CanonicalDecode<Signature>(dec.Field());
  dec.ExpectEnd();
  return ToolCertification{std::move(tool), std::move(props), std::move(chain),
                           std::move(sig)};
}

// Root verifying keys a principal chooses to trust, by key_id.
class TrustAnchorSet {
 public:
  TrustAnchorSet() = default;
  TrustAnchorSet(std::initializer_list<Digest> ids) : ids_(ids) {}

  void Add(const Digest& key_id) { ids_.insert(key_id); }
  void Add(const VerifyingKey& key) { ids_.insert(key.key_id()); }
  bool Contains(const Digest& key_id) const { return ids_.count(key_id) > 0; }
  bool empty() const { return ids_.empty(); }
  std::size_t size() const { return ids_.size(); }
  const std::set<Digest>& ids() const { return ids_; }

 private:
  std::set<Digest> ids_;
};

enum class ChainFailure {
  kNone,
  kEmptyChain,
  kChainTooDeep,
  kUntrustedRoot,
  kBadChainSignature,
  kBadCertificationSignature,
};

inline std::string_view ChainFailureName(ChainFailure f) {
  switch (f) {
    case ChainFailure::kNone: return "none";
    case ChainFailure::kEmptyChain: return "empty-chain";
    case ChainFailure::kChainTooDeep: return "chain-too-deep";
    case ChainFailure::kUntrustedRoot: return "untrusted-root";
    case ChainFailure::kBadChainSignature: return "bad-chain-signature";
    case ChainFailure::kBadCertificationSignature: return "bad-certification-signature";
  }
  return "unknown";
}

struct ChainVerification {
  ChainFailure failure = ChainFailure::kNone;
  std::optional<Digest> root_key_id;  // set on success
  std::size_t failing_link = 0;       // meaningful on failure

  bool ok() const { return failure == ChainFailure::kNone; }

  static ChainVerification Fail(ChainFailure f, std::size_t link) {
    return ChainVerification{f, std::nullopt, link};
  }
};

inline AuthorityChain CreateRootAuthority(const SigningKey& root_key) {
  const VerifyingKey& pub = root_key.verifying_key();
  ChainLink link{pub, SignPayload(root_key, LinkPayload(pub, nullptr))};
  return AuthorityChain{{std::move(link)}};
}

inline AuthorityChain CreateRootAuthority(const KeyPair& keypair) {
  return CreateRootAuthority(keypair.signing);
}

inline AuthorityChain CertifyAuthority(const SigningKey& parent_key,
                                       const AuthorityChain& parent_chain,
                                       const VerifyingKey& child_key) {
  if (parent_chain.links.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "parent chain is empty");
  }
  if (parent_key.key_id() != parent_chain.tail_key().key_id()) {
    throw Error(ErrorCode::kKeyMismatch,
                "signing key does not match the parent chain tail");
  }
  if (parent_chain.links.size() >= kMaxChainDepth) {
    throw Error(ErrorCode::kInvalidArgument, "chain would exceed maximum depth");
  }
  AuthorityChain out = parent_chain;
  out.links.push_back(ChainLink{
      child_key,
      SignPayload(parent_key, LinkPayload(child_key, &parent_chain.links.back()))});
  return out;
}

inline ToolCertification CertifyTool(const SigningKey& authority_key,
                                     const AuthorityChain& authority_chain,
                                     ToolDescriptor tool, PropertySet properties) {
  if (authority_chain.links.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "authority chain is empty");
  }
  if (authority_key.key_id() != authority_chain.tail_key().key_id()) {
    throw Error(ErrorCode::kKeyMismatch,
                "signing key does not match the authority chain tail");
  }
  Signature sig = SignPayload(authority_key, CertificationPayload(tool, properties));
  return ToolCertification{std::move(tool), std::move(properties), authority_chain,
                           std::move(sig)};
}

// Checks links root first and reports the first violated link.
inline ChainVerification VerifyAuthorityChain(const AuthorityChain& chain,
                                              const TrustAnchorSet& anchors) {
  if (chain.links.empty()) return ChainVerification::Fail(ChainFailure::kEmptyChain, 0);
  if (chain.links.size() > kMaxChainDepth) {
    return ChainVerification::Fail(ChainFailure::kChainTooDeep, kMaxChainDepth);
  }
  const ChainLink& root = chain.links.front();
  if (!anchors.Contains(root.key.key_id())) {
    return ChainVerification::Fail(ChainFailure::kUntrustedRoot, 0);
  }
  if (!VerifySignature(root.signature, LinkPayload(root.key, nullptr), root.key)) {
    return ChainVerification::Fail(ChainFailure::kBadChainSignature, 0);
  }
  for (std::size_t i = 1; i < chain.links.size(); ++i) {
    const ChainLink& prev = chain.links[i - 1];
    const ChainLink& link = chain.links[i];
    if (!VerifySignature(link.signature, LinkPayload(link.key, &prev), prev.key)) {
      return ChainVerification::Fail(ChainFailure::kBadChainSignature, i);
    }
  }
  return ChainVerification{ChainFailure::kNone, root.key.key_id(), 0};
}

inline ChainVerification VerifyToolCertification(const ToolCertification& cert,
                                                 const TrustAnchorSet& anchors) {
  ChainVerification chain = VerifyAuthorityChain(cert.authority_chain, anchors);
  if (!chain.ok()) return chain;
  if (!VerifySignature(cert.authority_signature,
                       CertificationPayload(cert.tool, cert.properties),
                       cert.authority_chain.tail_key())) {
    return ChainVerification::Fail(ChainFailure::kBadCertificationSignature,
                                   cert.authority_chain.links.size() - 1);
  }
  return chain;
}

}  // namespace cdi
