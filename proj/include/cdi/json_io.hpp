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

// JSON interchange for chains, certifications, reports and bundles.
//
// Objects are emitted with sorted keys and no whitespace. Binary values are
// standard padded base64, digests are 64 lowercase hex characters. Parsing is
// strict: every object must carry exactly its documented keys and every
// encoded value must be in canonical form. Signatures are never computed over
// these bytes.

#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>
#include <utility>

#include "cdi/authority.hpp"
#include "cdi/keyfile.hpp"
#include "cdi/provenance.hpp"

namespace cdi {

using Json = nlohmann::json;

namespace json_detail {

[[noreturn]] inline void Fail(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::kMalformed, where + ": " + what);
}

inline void ExpectObject(const Json& j, std::initializer_list<std::string_view> keys,
                         const std::string& where) {
  if (!j.is_object()) Fail(where, "expected object");
  for (auto k : keys) {
    if (!j.contains(std::string(k))) Fail(where, "missing field '" + std::string(k) + "'");
  }
  if (j.size() != keys.size()) {
    for (const auto& [k, _] : j.items()) {
      bool known = false;
      for (auto e : keys) known = known || k == e;
      if (!known) Fail(where, "unknown field '" + k + "'");
    }
  }
}

inline const std::string& GetString(const Json& j, const std::string& where) {
  if (!j.is_string()) Fail(where, "expected string");
  return j.get_ref<const std::string&>();
}

inline Digest GetDigest(const Json& j, const std::string& where) {
  auto d = Digest::FromHex(GetString(j, where));
  if (!d) Fail(where, "expected 64 lowercase hex characters");
  return *d;
}

inline Bytes GetBase64(const Json& j, const std::string& where) {
  auto b = Base64Decode(GetString(j, where));
  if (!b) Fail(where, "expected canonical base64");
  return std::move(*b);
}

inline const Json& GetArray(const Json& j, const std::string& where) {
  if (!j.is_array()) Fail(where, "expected array");
  return j;
}

template <typename Fn>
auto Wrap(const std::string& where, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kMalformed) throw;
    Fail(where, e.what());
  }
}

}  // namespace json_detail

inline Json ToJson(const Digest& d) { return d.Hex(); }

inline Json ToJson(const VerifyingKey& k) {
  return {{"algorithm", k.algorithm()},
          {"key_id", k.key_id().Hex()},
          {"material", Base64Encode(k.material())}};
}

inline VerifyingKey VerifyingKeyFromJson(const Json& j, const std::string& where) {
  using namespace json_detail;
  ExpectObject(j, {"algorithm", "key_id", "material"}, where);
  std::string alg = GetString(j["algorithm"], where + ".algorithm");
  Bytes material = GetBase64(j["material"], where + ".material");
  Digest id = GetDigest(j["key_id"], where + ".key_id");
  VerifyingKey key = Wrap(where, [&] { return VerifyingKey::FromMaterial(alg, material); });
  if (key.key_id() != id) Fail(where + ".key_id", "does not match key material");
  return key;
}

inline Json ToJson(const Signature& s) {
  return {{"algorithm", s.algorithm},
          {"bytes", Base64Encode(s.bytes)},
          {"signer_key_id", s.signer_key_id.Hex()}};
}

inline Signature SignatureFromJson(const Json& j, const std::string& where) {
  using namespace json_detail;
  ExpectObject(j, {"algorithm", "bytes", "signer_key_id"}, where);
  Signature s;
  s.algorithm = GetString(j["algorithm"], where + ".algorithm");
  if (s.algorithm != kEcdsaP256) Fail(where + ".algorithm", "unsupported");
  s.bytes = GetBase64(j["bytes"], where + ".bytes");
  s.signer_key_id = GetDigest(j["signer_key_id"], where + ".signer_key_id");
  return s;
}

inline Json ToJson(const ToolDescriptor& t) {
  return {{"name", t.name},
          {"version", t.version},
          {"release_key_id", t.release_key_id.Hex()},
          {"report_verifying_key", ToJson(t.report_verifying_key)}};
}

inline ToolDescriptor ToolDescriptorFromJson(const Json& j, const std::string& where) {
  using namespace json_detail;
  ExpectObject(j, {"name", "version", "release_key_id", "report_verifying_key"}, where);
  std::string name = GetString(j["name"], where + ".name");
  std::string version = GetString(j["version"], where + ".version");
  if (name.empty() || version.empty()) Fail(where, "empty name or version");
  return ToolDescriptor{std::move(name), std::move(version),
                        GetDigest(j["release_key_id"], where + ".release_key_id"),
                        VerifyingKeyFromJson(j["report_verifying_key"],
                                             where + ".report_verifying_key")};
}

inline Json ToJson(const PropertySet& p) { return p.values(); }

inline PropertySet PropertySetFromJson(const Json& j, const std::string& where) {
  using namespace json_detail;
  std::vector<std::string> values;
  for (const auto& v : GetArray(j, where)) values.push_back(GetString(v, where + "[]"));
  if (!std::is_sorted(values.begin(), values.end())) Fail(where, "not sorted");
  return Wrap(where, [&] { return PropertySet::Make(values); });
}

inline Json ToJson(const AuthorityChain& c) {
  Json links = Json::array();
  for (const auto& l : c.links) {
    links.push_back({{"key", ToJson(l.key)}, {"signature", ToJson(l.signature)}});
  }
  return {{"links", links}};
}

inline AuthorityChain AuthorityChainFromJson(const Json& j, const std::string& where) {
  using namespace json_detail;
  ExpectObject(j, {"links"}, where);
  AuthorityChain chain;
  const Json& links = GetArray(j["links"], where + ".links");
  if (links.empty()) Fail(where + ".links", "empty chain");
  for (std::size_t i = 0; i < links.size(); ++i) {
    std::string at = where + ".links[" + std::to_string(i) + "]";
    ExpectObject(links[i], {"key", "signature"}, at);
    chain.links.push_back(ChainLink{VerifyingKeyFromJson(links[i]["key"], at + ".key"),
                                    SignatureFromJson(links[i]["signature"], at + ".signature")});
  }
  return chain;
}

inline Json ToJson(const ToolCertification& c) {
  return {{"tool", ToJson(c.tool)},
          {"properties", ToJson(c.properties)},
          {"authority_chain", ToJson(c.authority_chain)},
          {"authority_signature", ToJson(c.authority_signature)}};
}

inline ToolCertification CertificationFromJson(const Json& j, const std::string& where) {
  using namespace json_detail;
  ExpectObject(j, {"tool", "properties", "authority_chain", "authority_signature"}, where);
  return ToolCertification{
      ToolDescriptorFromJson(j["tool"], where + ".tool"),
      PropertySetFromJson(j["properties"], where + ".properties"),
      AuthorityChainFromJson(j["authority_chain"], where + ".authority_chain"),
      SignatureFromJson(j["authority_signature"], where + ".authority_signature")};
}

inline Json ToJson(const OperationMetadata& m) {
  Json inputs = Json::object();
  for (const auto& [name, d] : m.input_artifact_digests) inputs[name] = d.Hex();
  Json extra = Json::object();
  for (const auto& [k, v] : m.extra) extra[k] = v;
  return {{"operation_kind", m.operation_kind},
          {"tool_invocation", m.tool_invocation},
          {"input_artifact_digests", inputs},
          {"timestamp", m.timestamp},
          {"extra", extra},
          {"attestation_evidence", m.attestation_evidence
                                       ? Json(Base64Encode(*m.attestation_evidence))
                                       : Json(nullptr)}};
}

inline OperationMetadata MetadataFromJson(const Json& j, const std::string& where) {
  using namespace json_detail;
  ExpectObject(j,
               {"operation_kind", "tool_invocation", "input_artifact_digests", "timestamp",
                "extra", "attestation_evidence"},
               where);
  OperationMetadata m;
  m.operation_kind = GetString(j["operation_kind"], where + ".operation_kind");
  if (m.operation_kind.empty()) Fail(where + ".operation_kind", "empty");
  for (const auto& a : GetArray(j["tool_invocation"], where + ".tool_invocation")) {
    m.tool_invocation.push_back(GetString(a, where + ".tool_invocation[]"));
  }
  const Json& inputs = j["input_artifact_digests"];
  if (!inputs.is_object()) Fail(where + ".input_artifact_digests", "expected object");
  for (const auto& [k, v] : inputs.items()) {
    m.input_artifact_digests[k] = GetDigest(v, where + ".input_artifact_digests." + k);
  }
  const Json& ts = j["timestamp"];
  if (!ts.is_number_unsigned() && !(ts.is_number_integer() && ts.get<std::int64_t>() >= 0)) {
    Fail(where + ".timestamp", "expected unsigned integer");
  }
  m.timestamp = j["timestamp"].get<std::uint64_t>();
  const Json& extra = j["extra"];
  if (!extra.is_object()) Fail(where + ".extra", "expected object");
  for (const auto& [k, v] : extra.items()) m.extra[k] = GetString(v, where + ".extra." + k);
  if (!j["attestation_evidence"].is_null()) {
    m.attestation_evidence = GetBase64(j["attestation_evidence"], where + ".attestation_evidence");
  }
  return m;
}

inline Json ReportBodyToJson(const CdiReport& r, const Digest& report_id) {
  Json certs = Json::array();
  for (const auto& c : r.certifications) certs.push_back(ToJson(c));
  Json inputs = Json::array();
  for (const auto& d : r.input_report_digests) inputs.push_back(d.Hex());
  return {{"report_id", report_id.Hex()},
          {"certifications", certs},
          {"metadata", ToJson(r.metadata)},
          {"output_digest", r.output_digest.Hex()},
          {"input_report_digests", inputs},
          {"report_signature", ToJson(r.report_signature)}};
}

inline Json ToJson(const CdiReport& r) { return ReportBodyToJson(r, ReportId(r)); }

// Returns the declared report_id together with the report. The declared id is
// not checked here; see LoadReportFile and VerifyProvenance.
inline std::pair<Digest, CdiReport> ReportFromJson(const Json& j, const std::string& where) {
  using namespace json_detail;
  ExpectObject(j,
               {"report_id", "certifications", "metadata", "output_digest",
                "input_report_digests", "report_signature"},
               where);
  CdiReport r;
  const Json& certs = GetArray(j["certifications"], where + ".certifications");
  if (certs.empty()) Fail(where + ".certifications", "empty");
  for (std::size_t i = 0; i < certs.size(); ++i) {
    r.certifications.push_back(
        CertificationFromJson(certs[i], where + ".certifications[" + std::to_string(i) + "]"));
  }
  r.metadata = MetadataFromJson(j["metadata"], where + ".metadata");
  r.output_digest = GetDigest(j["output_digest"], where + ".output_digest");
  for (const auto& d : GetArray(j["input_report_digests"], where + ".input_report_digests")) {
    r.input_report_digests.push_back(GetDigest(d, where + ".input_report_digests[]"));
  }
  r.report_signature = SignatureFromJson(j["report_signature"], where + ".report_signature");
  return {GetDigest(j["report_id"], where + ".report_id"), std::move(r)};
}

inline Json ToJson(const Bundle& b) {
  Json reports = Json::array();
  for (const auto& [id, r] : b.reports) reports.push_back(ReportBodyToJson(r, id));
  return {{"artifact_digest", b.artifact_digest.Hex()},
          {"final_report_id", b.final_report_id.Hex()},
          {"reports", reports}};
}

inline Bundle BundleFromJson(const Json& j, const std::string& where = "bundle") {
  using namespace json_detail;
  ExpectObject(j, {"artifact_digest", "final_report_id", "reports"}, where);
  Bundle b;
  b.artifact_digest = GetDigest(j["artifact_digest"], where + ".artifact_digest");
  b.final_report_id = GetDigest(j["final_report_id"], where + ".final_report_id");
  const Json& reports = GetArray(j["reports"], where + ".reports");
  for (std::size_t i = 0; i < reports.size(); ++i) {
    std::string at = where + ".reports[" + std::to_string(i) + "]";
    auto [id, report] = ReportFromJson(reports[i], at);
    auto [it, inserted] = b.reports.emplace(id, report);
    if (!inserted && !(it->second == report)) {
      throw Error(ErrorCode::kDuplicateReport, at + ": report_id " + id.Hex() +
                                                   " appears with differing content");
    }
  }
  return b;
}

inline Json ToJson(const AuditEntry& e) {
  Json roots = Json::array();
  for (const auto& r : e.root_key_ids) roots.push_back(r.Hex());
  return {{"report_id", e.report_id.Hex()},
          {"operation_kind", e.operation_kind},
          {"tool", e.tool_name + "@" + e.tool_version},
          {"properties", e.properties},
          {"root_key_ids", roots}};
}

inline Json ParseJsonText(std::string_view text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::kMalformed, origin + ": " + e.what());
  }
}

// JSON text must be UTF-8; other byte strings are rejected rather than escaped.
inline std::string DumpJson(const Json& j) {
  try {
    return j.dump();
  } catch (const Json::type_error& e) {
    throw Error(ErrorCode::kMalformed, std::string("cannot serialize: ") + e.what());
  }
}

inline Json LoadJsonFile(const std::filesystem::path& path) {
  return ParseJsonText(ReadTextFile(path), path.string());
}

inline void SaveJsonFile(const std::filesystem::path& path, const Json& j) {
  WriteTextFile(path, DumpJson(j) + "\n");
}

inline CdiReport LoadReportFile(const std::filesystem::path& path) {
  auto [declared, report] = ReportFromJson(LoadJsonFile(path), path.string());
  if (ReportId(report) != declared) {
    throw Error(ErrorCode::kMalformed, path.string() + ": report_id does not match content");
  }
  return report;
}

}  // namespace cdi
